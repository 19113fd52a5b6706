import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      // the acceptance run talks to a real service on 127.0.0.1
      happyDOM: { settings: { fetch: { disableSameOriginPolicy: true } } },
    },
    include: ["tests/**/*.test.ts"],
    testTimeout: 30000,
    hookTimeout: 30000,
  },
});
