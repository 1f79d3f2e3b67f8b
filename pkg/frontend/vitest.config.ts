import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globalSetup: "./test/liveServer.ts",
    testTimeout: 30000,
    hookTimeout: 120000,
  },
});
