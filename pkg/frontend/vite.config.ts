import { defineConfig } from "vitest/config";

export default defineConfig({
  // Relative asset URLs so the bundle works from any static mount point.
  base: "./",
  build: {
    outDir: "dist",
    emptyOutDir: true,
  },
  server: {
    // Local development against a running `mmforecast serve` instance.
    proxy: {
      "/api": "http://127.0.0.1:8707",
      "/healthz": "http://127.0.0.1:8707",
    },
  },
  test: {
    environment: "node",
    include: ["tests/**/*.test.ts"],
  },
});
