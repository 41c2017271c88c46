import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    environment: "node",
    // the integration suite boots the real rating service
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
