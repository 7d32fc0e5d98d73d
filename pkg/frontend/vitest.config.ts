import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    testTimeout: 120_000,
    hookTimeout: 300_000,
    // test files share cached dataset fixtures and the training run is
    // CPU-bound, so run files sequentially
    fileParallelism: false,
  },
});
