import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
    // the live-stack tests spawn real processes; keep them off shared workers
    fileParallelism: false,
  },
});
