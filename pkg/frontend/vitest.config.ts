import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // The contract suite boots the Python service and waits for traces.
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
