import { defineConfig } from 'vitest/config'

export default defineConfig({
  test: {
    include: ['test/**/*.test.ts'],
    // the e2e file owns a child process; keep files sequential
    fileParallelism: false,
  },
})
