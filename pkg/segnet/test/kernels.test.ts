/** Compute kernels against naive reference implementations. */

import { describe, expect, it } from "vitest";
import {
  col2im3x3,
  columnSums,
  im2col3x3,
  matmul,
  matmulATB,
  transpose,
} from "../src/kernels.js";
import { Rng } from "../src/rng.js";
import { dot } from "./helpers.js";

function randArray(n: number, rng: Rng): Float32Array {
  const a = new Float32Array(n);
  for (let i = 0; i < n; i++) a[i] = rng.normal();
  return a;
}

function naiveMatmul(a: Float32Array, b: Float32Array, m: number, k: number, n: number): Float32Array {
  const c = new Float32Array(m * n);
  for (let i = 0; i < m; i++) {
    for (let j = 0; j < n; j++) {
      let s = 0;
      for (let p = 0; p < k; p++) {
        s += a[i * k + p] * b[p * n + j];
      }
      c[i * n + j] = s;
    }
  }
  return c;
}

function expectClose(actual: Float32Array, expected: Float32Array, tol = 1e-4): void {
  expect(actual.length).toBe(expected.length);
  for (let i = 0; i < actual.length; i++) {
    const denom = Math.max(Math.abs(expected[i]), 1);
    if (Math.abs(actual[i] - expected[i]) / denom > tol) {
      expect.fail(`index ${i}: ${actual[i]} vs ${expected[i]}`);
    }
  }
}

describe("matmul", () => {
  it("matches the naive product across row-tail shapes", () => {
    const rng = new Rng(11);
    for (const [m, k, n] of [
      [1, 1, 1],
      [4, 8, 4],
      [5, 3, 7],
      [6, 16, 2],
      [9, 5, 11],
      [16, 9, 16],
    ] as const) {
      const a = randArray(m * k, rng);
      const b = randArray(k * n, rng);
      const c = new Float32Array(m * n);
      matmul(a, b, c, m, k, n);
      expectClose(c, naiveMatmul(a, b, m, k, n));
    }
  });

  it("overwrites any stale output contents", () => {
    const rng = new Rng(12);
    const a = randArray(3 * 4, rng);
    const b = randArray(4 * 5, rng);
    const c = new Float32Array(15).fill(123);
    matmul(a, b, c, 3, 4, 5);
    expectClose(c, naiveMatmul(a, b, 3, 4, 5));
  });
});

describe("matmulATB", () => {
  it("equals transpose-then-multiply", () => {
    const rng = new Rng(13);
    for (const [m, k, n] of [
      [4, 3, 5],
      [7, 6, 2],
      [13, 4, 9],
    ] as const) {
      const a = randArray(m * k, rng);
      const b = randArray(m * n, rng);
      const c = new Float32Array(k * n);
      matmulATB(a, b, c, m, k, n);
      const at = new Float32Array(k * m);
      transpose(a, at, m, k);
      expectClose(c, naiveMatmul(at, b, k, m, n));
    }
  });
});

describe("transpose and column sums", () => {
  it("transpose round-trips", () => {
    const rng = new Rng(14);
    const a = randArray(6 * 9, rng);
    const at = new Float32Array(9 * 6);
    const back = new Float32Array(6 * 9);
    transpose(a, at, 6, 9);
    transpose(at, back, 9, 6);
    expect(Array.from(back)).toEqual(Array.from(a));
  });

  it("column sums match a loop", () => {
    const rng = new Rng(15);
    const a = randArray(7 * 4, rng);
    const out = new Float32Array(4);
    columnSums(a, out, 7, 4);
    for (let j = 0; j < 4; j++) {
      let s = 0;
      for (let i = 0; i < 7; i++) s += a[i * 4 + j];
      expect(out[j]).toBeCloseTo(s, 4);
    }
  });
});

describe("im2col3x3", () => {
  it("extracts the zero-padded 3x3 neighborhood of every pixel", () => {
    const rng = new Rng(16);
    const n = 2;
    const h = 5;
    const w = 4;
    const c = 3;
    const x = randArray(n * h * w * c, rng);
    const cols = im2col3x3(x, n, h, w, c);
    const at = (b: number, y: number, xx: number, ch: number): number => {
      if (y < 0 || y >= h || xx < 0 || xx >= w) return 0;
      return x[((b * h + y) * w + xx) * c + ch];
    };
    for (let b = 0; b < n; b++) {
      for (let y = 0; y < h; y++) {
        for (let xx = 0; xx < w; xx++) {
          const row = ((b * h + y) * w + xx) * 9 * c;
          for (let ky = 0; ky < 3; ky++) {
            for (let kx = 0; kx < 3; kx++) {
              for (let ch = 0; ch < c; ch++) {
                const got = cols[row + (ky * 3 + kx) * c + ch];
                const want = at(b, y + ky - 1, xx + kx - 1, ch);
                expect(got).toBe(want);
              }
            }
          }
        }
      }
    }
  });

  it("col2im is the adjoint of im2col", () => {
    const rng = new Rng(17);
    const n = 1;
    const h = 6;
    const w = 5;
    const c = 2;
    const x = randArray(n * h * w * c, rng);
    const g = randArray(n * h * w * 9 * c, rng);
    const lhs = dot(im2col3x3(x, n, h, w, c), g);
    const rhs = dot(x, col2im3x3(g, n, h, w, c));
    expect(Math.abs(lhs - rhs)).toBeLessThan(1e-3 * Math.max(1, Math.abs(lhs)));
  });
});
