import math
import os

import pytest

from v2xsim.geo import GeoPoint

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")

ORIGIN = GeoPoint(17.59, 78.12)


def scenario_path(name: str) -> str:
    return os.path.join(SCENARIO_DIR, name + ".scenario.json")


def nan_eq(a, b) -> bool:
    """Structural equality where NaN == NaN."""
    if isinstance(a, tuple) and isinstance(b, tuple):
        return len(a) == len(b) and all(nan_eq(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and isinstance(b, float):
        return a == b or (math.isnan(a) and math.isnan(b))
    return a == b


@pytest.fixture
def origin():
    return ORIGIN
