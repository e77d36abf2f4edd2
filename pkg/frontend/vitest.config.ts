import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the parity suite shells out to the Python CLI per case
    testTimeout: 300_000,
    hookTimeout: 300_000,
  },
});
