/**
 * Trainable layers with hand-written forward and backward passes.
 *
 * Conventions shared by every layer:
 *  - tensors are NHWC ({@link Tensor});
 *  - `forward(x, training)` caches whatever the backward pass needs only
 *    when `training` is true;
 *  - `backward(dy)` returns the gradient with respect to the layer input
 *    and overwrites the gradients of its own parameters, so it must be
 *    called exactly once per optimizer step.
 */

import {
  col2im3x3,
  columnSums,
  im2col3x3,
  matmul,
  matmulATB,
  transpose,
} from "./kernels.js";
import { Param, ShapeError, Tensor, makeParam, shapeOf, zeros } from "./tensor.js";
import { Rng } from "./rng.js";

export interface Layer {
  forward(x: Tensor, training: boolean): Tensor;
  backward(dy: Tensor): Tensor;
  params(): Param[];
}

function heFill(values: Float32Array, fanIn: number, rng: Rng): void {
  const std = Math.sqrt(2 / fanIn);
  for (let i = 0; i < values.length; i++) {
    values[i] = std * rng.normal();
  }
}

/** 3x3 convolution, stride 1, zero-padded to preserve height and width. */
export class Conv3x3 implements Layer {
  readonly weight: Param;
  readonly bias: Param;
  private cols: Float32Array | null = null;
  private inShape: Tensor | null = null;

  constructor(
    readonly cin: number,
    readonly cout: number,
    name: string,
    rng: Rng,
  ) {
    this.weight = makeParam(`${name}.weight`, 9 * cin * cout);
    this.bias = makeParam(`${name}.bias`, cout);
    heFill(this.weight.value, 9 * cin, rng);
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }

  forward(x: Tensor, training: boolean): Tensor {
    if (x.c !== this.cin) {
      throw new ShapeError(`conv3x3 expected ${this.cin} channels, got ${shapeOf(x)}`);
    }
    const m = x.n * x.h * x.w;
    const cols = im2col3x3(x.data, x.n, x.h, x.w, x.c);
    const y = zeros(x.n, x.h, x.w, this.cout);
    matmul(cols, this.weight.value, y.data, m, 9 * this.cin, this.cout);
    const b = this.bias.value;
    for (let i = 0; i < m; i++) {
      const row = i * this.cout;
      for (let j = 0; j < this.cout; j++) {
        y.data[row + j] += b[j];
      }
    }
    if (training) {
      this.cols = cols;
      this.inShape = x;
    }
    return y;
  }

  backward(dy: Tensor): Tensor {
    const cols = this.cols;
    const x = this.inShape;
    if (cols === null || x === null) {
      throw new Error("conv3x3 backward called before a training forward");
    }
    const m = x.n * x.h * x.w;
    const kk = 9 * this.cin;
    matmulATB(cols, dy.data, this.weight.grad, m, kk, this.cout);
    columnSums(dy.data, this.bias.grad, m, this.cout);
    const wt = new Float32Array(kk * this.cout);
    transpose(this.weight.value, wt, kk, this.cout);
    const dcols = new Float32Array(m * kk);
    matmul(dy.data, wt, dcols, m, this.cout, kk);
    const dx = col2im3x3(dcols, x.n, x.h, x.w, x.c);
    this.cols = null;
    return { data: dx, n: x.n, h: x.h, w: x.w, c: x.c };
  }
}

/** 1x1 convolution: a per-pixel linear map across channels. */
export class Conv1x1 implements Layer {
  readonly weight: Param;
  readonly bias: Param;
  private input: Tensor | null = null;

  constructor(
    readonly cin: number,
    readonly cout: number,
    name: string,
    rng: Rng,
  ) {
    this.weight = makeParam(`${name}.weight`, cin * cout);
    this.bias = makeParam(`${name}.bias`, cout);
    heFill(this.weight.value, cin, rng);
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }

  forward(x: Tensor, training: boolean): Tensor {
    if (x.c !== this.cin) {
      throw new ShapeError(`conv1x1 expected ${this.cin} channels, got ${shapeOf(x)}`);
    }
    const m = x.n * x.h * x.w;
    const y = zeros(x.n, x.h, x.w, this.cout);
    matmul(x.data, this.weight.value, y.data, m, this.cin, this.cout);
    const b = this.bias.value;
    for (let i = 0; i < m; i++) {
      const row = i * this.cout;
      for (let j = 0; j < this.cout; j++) {
        y.data[row + j] += b[j];
      }
    }
    if (training) this.input = x;
    return y;
  }

  backward(dy: Tensor): Tensor {
    const x = this.input;
    if (x === null) throw new Error("conv1x1 backward called before a training forward");
    const m = x.n * x.h * x.w;
    matmulATB(x.data, dy.data, this.weight.grad, m, this.cin, this.cout);
    columnSums(dy.data, this.bias.grad, m, this.cout);
    const wt = new Float32Array(this.cin * this.cout);
    transpose(this.weight.value, wt, this.cin, this.cout);
    const dx = zeros(x.n, x.h, x.w, x.c);
    matmul(dy.data, wt, dx.data, m, this.cout, this.cin);
    this.input = null;
    return dx;
  }
}

/**
 * Per-channel batch normalization. Training uses batch statistics over
 * n*h*w and maintains running estimates; inference uses the running values.
 */
export class BatchNorm implements Layer {
  readonly gamma: Param;
  readonly beta: Param;
  readonly runningMean: Float32Array;
  readonly runningVar: Float32Array;
  private readonly eps = 1e-5;
  private readonly momentum = 0.1;
  private xhat: Float32Array | null = null;
  private invStd: Float32Array | null = null;
  private inShape: Tensor | null = null;

  constructor(readonly c: number, readonly name: string) {
    this.gamma = makeParam(`${name}.gamma`, c);
    this.beta = makeParam(`${name}.beta`, c);
    this.gamma.value.fill(1);
    this.runningMean = new Float32Array(c);
    this.runningVar = new Float32Array(c);
    this.runningVar.fill(1);
  }

  params(): Param[] {
    return [this.gamma, this.beta];
  }

  forward(x: Tensor, training: boolean): Tensor {
    if (x.c !== this.c) {
      throw new ShapeError(`batchnorm expected ${this.c} channels, got ${shapeOf(x)}`);
    }
    const c = this.c;
    const m = x.n * x.h * x.w;
    const y = zeros(x.n, x.h, x.w, c);
    if (!training) {
      for (let ch = 0; ch < c; ch++) {
        const scale = this.gamma.value[ch] / Math.sqrt(this.runningVar[ch] + this.eps);
        const shift = this.beta.value[ch] - scale * this.runningMean[ch];
        for (let i = ch; i < m * c; i += c) {
          y.data[i] = scale * x.data[i] + shift;
        }
      }
      return y;
    }
    const mean = new Float32Array(c);
    const variance = new Float32Array(c);
    for (let i = 0; i < m; i++) {
      const row = i * c;
      for (let ch = 0; ch < c; ch++) {
        mean[ch] += x.data[row + ch];
      }
    }
    for (let ch = 0; ch < c; ch++) mean[ch] /= m;
    for (let i = 0; i < m; i++) {
      const row = i * c;
      for (let ch = 0; ch < c; ch++) {
        const d = x.data[row + ch] - mean[ch];
        variance[ch] += d * d;
      }
    }
    for (let ch = 0; ch < c; ch++) variance[ch] /= m;
    const invStd = new Float32Array(c);
    for (let ch = 0; ch < c; ch++) {
      invStd[ch] = 1 / Math.sqrt(variance[ch] + this.eps);
      this.runningMean[ch] = (1 - this.momentum) * this.runningMean[ch] + this.momentum * mean[ch];
      this.runningVar[ch] = (1 - this.momentum) * this.runningVar[ch] + this.momentum * variance[ch];
    }
    const xhat = new Float32Array(m * c);
    for (let i = 0; i < m; i++) {
      const row = i * c;
      for (let ch = 0; ch < c; ch++) {
        const v = (x.data[row + ch] - mean[ch]) * invStd[ch];
        xhat[row + ch] = v;
        y.data[row + ch] = this.gamma.value[ch] * v + this.beta.value[ch];
      }
    }
    this.xhat = xhat;
    this.invStd = invStd;
    this.inShape = x;
    return y;
  }

  backward(dy: Tensor): Tensor {
    const xhat = this.xhat;
    const invStd = this.invStd;
    const x = this.inShape;
    if (xhat === null || invStd === null || x === null) {
      throw new Error("batchnorm backward called before a training forward");
    }
    const c = this.c;
    const m = x.n * x.h * x.w;
    const dBeta = this.beta.grad;
    const dGamma = this.gamma.grad;
    dBeta.fill(0);
    dGamma.fill(0);
    for (let i = 0; i < m; i++) {
      const row = i * c;
      for (let ch = 0; ch < c; ch++) {
        dBeta[ch] += dy.data[row + ch];
        dGamma[ch] += dy.data[row + ch] * xhat[row + ch];
      }
    }
    const dx = zeros(x.n, x.h, x.w, c);
    for (let ch = 0; ch < c; ch++) {
      const scale = this.gamma.value[ch] * invStd[ch];
      const meanDy = dBeta[ch] / m;
      const meanDyXhat = dGamma[ch] / m;
      for (let i = ch; i < m * c; i += c) {
        dx.data[i] = scale * (dy.data[i] - meanDy - xhat[i] * meanDyXhat);
      }
    }
    this.xhat = null;
    this.invStd = null;
    return dx;
  }
}

/** Elementwise rectifier. */
export class ReLU implements Layer {
  private mask: Uint8Array | null = null;
  private inShape: Tensor | null = null;

  params(): Param[] {
    return [];
  }

  forward(x: Tensor, training: boolean): Tensor {
    const y = zeros(x.n, x.h, x.w, x.c);
    const mask = training ? new Uint8Array(x.data.length) : null;
    for (let i = 0; i < x.data.length; i++) {
      if (x.data[i] > 0) {
        y.data[i] = x.data[i];
        if (mask) mask[i] = 1;
      }
    }
    if (training) {
      this.mask = mask;
      this.inShape = x;
    }
    return y;
  }

  backward(dy: Tensor): Tensor {
    const mask = this.mask;
    const x = this.inShape;
    if (mask === null || x === null) {
      throw new Error("relu backward called before a training forward");
    }
    const dx = zeros(x.n, x.h, x.w, x.c);
    for (let i = 0; i < dx.data.length; i++) {
      if (mask[i]) dx.data[i] = dy.data[i];
    }
    this.mask = null;
    return dx;
  }
}

/** 2x2 max pooling with stride 2. Height and width must be even. */
export class MaxPool2 implements Layer {
  private argmax: Int32Array | null = null;
  private inShape: Tensor | null = null;

  params(): Param[] {
    return [];
  }

  forward(x: Tensor, training: boolean): Tensor {
    if (x.h % 2 !== 0 || x.w % 2 !== 0) {
      throw new ShapeError(`maxpool2 needs even height and width, got ${shapeOf(x)}`);
    }
    const oh = x.h / 2;
    const ow = x.w / 2;
    const y = zeros(x.n, oh, ow, x.c);
    const argmax = training ? new Int32Array(y.data.length) : null;
    for (let b = 0; b < x.n; b++) {
      for (let oy = 0; oy < oh; oy++) {
        for (let ox = 0; ox < ow; ox++) {
          const outIdx = (((b * oh + oy) * ow) + ox) * x.c;
          for (let ch = 0; ch < x.c; ch++) {
            let best = -Infinity;
            let bestIdx = -1;
            for (let ky = 0; ky < 2; ky++) {
              for (let kx = 0; kx < 2; kx++) {
                const idx = (((b * x.h + oy * 2 + ky) * x.w) + ox * 2 + kx) * x.c + ch;
                if (x.data[idx] > best) {
                  best = x.data[idx];
                  bestIdx = idx;
                }
              }
            }
            y.data[outIdx + ch] = best;
            if (argmax) argmax[outIdx + ch] = bestIdx;
          }
        }
      }
    }
    if (training) {
      this.argmax = argmax;
      this.inShape = x;
    }
    return y;
  }

  backward(dy: Tensor): Tensor {
    const argmax = this.argmax;
    const x = this.inShape;
    if (argmax === null || x === null) {
      throw new Error("maxpool2 backward called before a training forward");
    }
    const dx = zeros(x.n, x.h, x.w, x.c);
    for (let i = 0; i < dy.data.length; i++) {
      dx.data[argmax[i]] += dy.data[i];
    }
    this.argmax = null;
    return dx;
  }
}

/** 2x2 transposed convolution with stride 2: doubles height and width. */
export class ConvTranspose2 implements Layer {
  readonly weight: Param;
  readonly bias: Param;
  private input: Tensor | null = null;

  constructor(
    readonly cin: number,
    readonly cout: number,
    name: string,
    rng: Rng,
  ) {
    this.weight = makeParam(`${name}.weight`, 4 * cin * cout);
    this.bias = makeParam(`${name}.bias`, cout);
    heFill(this.weight.value, cin, rng);
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }

  /** View of the (cin x cout) weight block for kernel tap k in 0..3. */
  private block(buf: Float32Array, k: number): Float32Array {
    const size = this.cin * this.cout;
    return buf.subarray(k * size, (k + 1) * size);
  }

  forward(x: Tensor, training: boolean): Tensor {
    if (x.c !== this.cin) {
      throw new ShapeError(`convtranspose2 expected ${this.cin} channels, got ${shapeOf(x)}`);
    }
    const m = x.n * x.h * x.w;
    const oh = x.h * 2;
    const ow = x.w * 2;
    const y = zeros(x.n, oh, ow, this.cout);
    const tmp = new Float32Array(m * this.cout);
    const b = this.bias.value;
    for (let k = 0; k < 4; k++) {
      const ky = k >> 1;
      const kx = k & 1;
      matmul(x.data, this.block(this.weight.value, k), tmp, m, this.cin, this.cout);
      let src = 0;
      for (let bn = 0; bn < x.n; bn++) {
        for (let iy = 0; iy < x.h; iy++) {
          for (let ix = 0; ix < x.w; ix++) {
            const dst = (((bn * oh + iy * 2 + ky) * ow) + ix * 2 + kx) * this.cout;
            for (let ch = 0; ch < this.cout; ch++) {
              y.data[dst + ch] = tmp[src + ch] + b[ch];
            }
            src += this.cout;
          }
        }
      }
    }
    if (training) this.input = x;
    return y;
  }

  backward(dy: Tensor): Tensor {
    const x = this.input;
    if (x === null) throw new Error("convtranspose2 backward called before a training forward");
    const m = x.n * x.h * x.w;
    const oh = x.h * 2;
    const ow = x.w * 2;
    const dx = zeros(x.n, x.h, x.w, x.c);
    const dyk = new Float32Array(m * this.cout);
    const dxk = new Float32Array(m * this.cin);
    const wt = new Float32Array(this.cin * this.cout);
    this.bias.grad.fill(0);
    for (let k = 0; k < 4; k++) {
      const ky = k >> 1;
      const kx = k & 1;
      let dst = 0;
      for (let bn = 0; bn < x.n; bn++) {
        for (let iy = 0; iy < x.h; iy++) {
          for (let ix = 0; ix < x.w; ix++) {
            const src = (((bn * oh + iy * 2 + ky) * ow) + ix * 2 + kx) * this.cout;
            for (let ch = 0; ch < this.cout; ch++) {
              dyk[dst + ch] = dy.data[src + ch];
            }
            dst += this.cout;
          }
        }
      }
      matmulATB(x.data, dyk, this.block(this.weight.grad, k), m, this.cin, this.cout);
      for (let i = 0; i < dyk.length; i += this.cout) {
        for (let ch = 0; ch < this.cout; ch++) {
          this.bias.grad[ch] += dyk[i + ch];
        }
      }
      transpose(this.block(this.weight.value, k), wt, this.cin, this.cout);
      matmul(dyk, wt, dxk, m, this.cout, this.cin);
      for (let i = 0; i < dxk.length; i++) {
        dx.data[i] += dxk[i];
      }
    }
    this.input = null;
    return dx;
  }
}

/** Elementwise logistic squashing onto (0, 1). */
export class Sigmoid implements Layer {
  private output: Tensor | null = null;

  params(): Param[] {
    return [];
  }

  forward(x: Tensor, training: boolean): Tensor {
    const y = zeros(x.n, x.h, x.w, x.c);
    for (let i = 0; i < x.data.length; i++) {
      y.data[i] = 1 / (1 + Math.exp(-x.data[i]));
    }
    if (training) this.output = y;
    return y;
  }

  backward(dy: Tensor): Tensor {
    const y = this.output;
    if (y === null) throw new Error("sigmoid backward called before a training forward");
    const dx = zeros(y.n, y.h, y.w, y.c);
    for (let i = 0; i < dx.data.length; i++) {
      const v = y.data[i];
      dx.data[i] = dy.data[i] * v * (1 - v);
    }
    this.output = null;
    return dx;
  }
}

/** Channel concatenation used to merge upsampled features with a skip. */
export class Concat {
  private ca = 0;
  private cb = 0;

  forward(a: Tensor, b: Tensor): Tensor {
    if (a.n !== b.n || a.h !== b.h || a.w !== b.w) {
      throw new ShapeError(`concat inputs disagree spatially: ${shapeOf(a)} vs ${shapeOf(b)}`);
    }
    this.ca = a.c;
    this.cb = b.c;
    const c = a.c + b.c;
    const y = zeros(a.n, a.h, a.w, c);
    const m = a.n * a.h * a.w;
    for (let i = 0; i < m; i++) {
      const dst = i * c;
      const srcA = i * a.c;
      const srcB = i * b.c;
      for (let ch = 0; ch < a.c; ch++) y.data[dst + ch] = a.data[srcA + ch];
      for (let ch = 0; ch < b.c; ch++) y.data[dst + a.c + ch] = b.data[srcB + ch];
    }
    return y;
  }

  backward(dy: Tensor): [Tensor, Tensor] {
    const { ca, cb } = this;
    const c = ca + cb;
    const da = zeros(dy.n, dy.h, dy.w, ca);
    const db = zeros(dy.n, dy.h, dy.w, cb);
    const m = dy.n * dy.h * dy.w;
    for (let i = 0; i < m; i++) {
      const src = i * c;
      const dstA = i * ca;
      const dstB = i * cb;
      for (let ch = 0; ch < ca; ch++) da.data[dstA + ch] = dy.data[src + ch];
      for (let ch = 0; ch < cb; ch++) db.data[dstB + ch] = dy.data[src + ca + ch];
    }
    return [da, db];
  }
}
