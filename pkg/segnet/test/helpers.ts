/** Shared test utilities: random tensors and finite-difference checks. */

import { Rng } from "../src/rng.js";
import { Tensor, zeros } from "../src/tensor.js";

export function randnTensor(n: number, h: number, w: number, c: number, rng: Rng, scale = 1): Tensor {
  const t = zeros(n, h, w, c);
  for (let i = 0; i < t.data.length; i++) {
    t.data[i] = scale * rng.normal();
  }
  return t;
}

export function dot(a: Float32Array, b: Float32Array): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += a[i] * b[i];
  return s;
}

export function randomDirection(length: number, rng: Rng): Float32Array {
  const d = new Float32Array(length);
  let norm = 0;
  for (let i = 0; i < length; i++) {
    d[i] = rng.normal();
    norm += d[i] * d[i];
  }
  norm = Math.sqrt(norm) || 1;
  for (let i = 0; i < length; i++) d[i] /= norm;
  return d;
}

/**
 * Central finite difference of `lossOf` along `dir` within `values`,
 * restoring the original contents afterwards.
 */
export function centralDiff(
  lossOf: () => number,
  values: Float32Array,
  dir: Float32Array,
  h: number,
): number {
  for (let i = 0; i < values.length; i++) values[i] += h * dir[i];
  const plus = lossOf();
  for (let i = 0; i < values.length; i++) values[i] -= 2 * h * dir[i];
  const minus = lossOf();
  for (let i = 0; i < values.length; i++) values[i] += h * dir[i];
  return (plus - minus) / (2 * h);
}

/** Relative agreement between an analytic and a finite-difference slope. */
export function relativeError(analytic: number, numeric: number): number {
  const denom = Math.max(Math.abs(analytic), Math.abs(numeric), 1e-8);
  return Math.abs(analytic - numeric) / denom;
}
