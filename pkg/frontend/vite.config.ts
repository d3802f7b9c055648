import { defineConfig } from "vitest/config";

// The dev server proxies /api to the Python service so the UI only ever
// talks to same-origin paths; a production build is served by the service
// itself via its --static flag.
export default defineConfig({
  server: {
    proxy: {
      "/api": {
        target: process.env.TECHINFER_API ?? "http://127.0.0.1:8000",
        changeOrigin: true,
      },
    },
  },
  test: {
    environment: "jsdom",
  },
});
