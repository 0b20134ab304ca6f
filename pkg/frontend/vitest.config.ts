import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environmentOptions: {
      happyDOM: {
        settings: {
          // assertions cover the sandbox contract; no real loads in tests
          disableIframePageLoading: true,
          disableJavaScriptFileLoading: true,
          disableCSSFileLoading: true,
        },
      },
    },
  },
});
