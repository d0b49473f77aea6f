"""Kernel backend selection.

The compiled extension (``_speedups``) is preferred when importable; the
pure-Python module (``_pure``) is the fallback.  Both expose the same
functions with identical numeric behavior.  Set ``V2XSIM_BACKEND=pure`` or
``V2XSIM_BACKEND=c`` to force a backend (forcing ``c`` raises if the
extension is missing).
"""

import os

_forced = os.environ.get("V2XSIM_BACKEND", "").strip().lower()

if _forced == "pure":
    from . import _pure as impl
elif _forced in ("c", "ext", "speedups"):
    from . import _speedups as impl  # type: ignore[no-redef]
else:
    try:
        from . import _speedups as impl  # type: ignore[no-redef]
    except ImportError:
        from . import _pure as impl

BACKEND = impl.BACKEND
