/**
 * Dual-head U-Net: one shared encoder, two independent decoders that emit
 * per-pixel probabilities for the vessel and robot masks respectively.
 *
 * The encoder halves resolution four times, so inputs must have height and
 * width divisible by 16. Both decoders read the same skip tensors; the
 * backward pass sums the gradient contributions flowing into each skip from
 * the two heads before continuing down the encoder.
 */

import {
  BatchNorm,
  Concat,
  Conv1x1,
  Conv3x3,
  ConvTranspose2,
  MaxPool2,
  ReLU,
  Sigmoid,
} from "./layers.js";
import { Rng } from "./rng.js";
import { Param, ShapeError, Tensor, sameShape, shapeOf, zeros } from "./tensor.js";

export const DEPTH = 4;

export interface NetSpec {
  /** Channel count of the first encoder stage; doubles at each downsampling. */
  baseChannels: number;
  /** Channels of the input image (1 for grayscale frames). */
  inChannels: number;
}

export const DEFAULT_SPEC: NetSpec = { baseChannels: 16, inChannels: 1 };

/** Named non-trainable state (batch-norm running statistics). */
export interface Buffer {
  name: string;
  value: Float32Array;
}

/** conv -> batchnorm -> relu, twice. The workhorse encoder block. */
class DoubleConv {
  private readonly conv1: Conv3x3;
  private readonly bn1: BatchNorm;
  private readonly relu1 = new ReLU();
  private readonly conv2: Conv3x3;
  private readonly bn2: BatchNorm;
  private readonly relu2 = new ReLU();

  constructor(cin: number, cout: number, name: string, rng: Rng) {
    this.conv1 = new Conv3x3(cin, cout, `${name}.conv1`, rng);
    this.bn1 = new BatchNorm(cout, `${name}.bn1`);
    this.conv2 = new Conv3x3(cout, cout, `${name}.conv2`, rng);
    this.bn2 = new BatchNorm(cout, `${name}.bn2`);
  }

  forward(x: Tensor, training: boolean): Tensor {
    let t = this.conv1.forward(x, training);
    t = this.bn1.forward(t, training);
    t = this.relu1.forward(t, training);
    t = this.conv2.forward(t, training);
    t = this.bn2.forward(t, training);
    return this.relu2.forward(t, training);
  }

  backward(dy: Tensor): Tensor {
    let d = this.relu2.backward(dy);
    d = this.bn2.backward(d);
    d = this.conv2.backward(d);
    d = this.relu1.backward(d);
    d = this.bn1.backward(d);
    return this.conv1.backward(d);
  }

  params(): Param[] {
    return [...this.conv1.params(), ...this.bn1.params(), ...this.conv2.params(), ...this.bn2.params()];
  }

  norms(): BatchNorm[] {
    return [this.bn1, this.bn2];
  }
}

/** upsample -> concat skip -> conv -> relu, repeated up to full resolution. */
class Decoder {
  private readonly ups: ConvTranspose2[] = [];
  private readonly concats: Concat[] = [];
  private readonly convs: Conv3x3[] = [];
  private readonly relus: ReLU[] = [];
  private readonly head: Conv1x1;
  private readonly sigmoid = new Sigmoid();

  constructor(base: number, name: string, rng: Rng) {
    for (let i = DEPTH - 1; i >= 0; i--) {
      const skipC = base * 2 ** i;
      const inC = i === DEPTH - 1 ? base * 2 ** DEPTH : base * 2 ** (i + 1);
      this.ups.push(new ConvTranspose2(inC, skipC, `${name}.up${i}`, rng));
      this.concats.push(new Concat());
      this.convs.push(new Conv3x3(2 * skipC, skipC, `${name}.conv${i}`, rng));
      this.relus.push(new ReLU());
    }
    this.head = new Conv1x1(base, 1, `${name}.out`, rng);
  }

  /** skips come ordered from full resolution (stage 0) to coarsest (stage 3). */
  forward(bottleneck: Tensor, skips: Tensor[], training: boolean): Tensor {
    let t = bottleneck;
    for (let j = 0; j < DEPTH; j++) {
      const skip = skips[DEPTH - 1 - j];
      t = this.ups[j].forward(t, training);
      t = this.concats[j].forward(t, skip);
      t = this.convs[j].forward(t, training);
      t = this.relus[j].forward(t, training);
    }
    t = this.head.forward(t, training);
    return this.sigmoid.forward(t, training);
  }

  /** Returns the gradient for the bottleneck and adds skip gradients in place. */
  backward(dProb: Tensor, skipGrads: Tensor[]): Tensor {
    let d = this.sigmoid.backward(dProb);
    d = this.head.backward(d);
    for (let j = DEPTH - 1; j >= 0; j--) {
      d = this.relus[j].backward(d);
      d = this.convs[j].backward(d);
      const [dUp, dSkip] = this.concats[j].backward(d);
      const acc = skipGrads[DEPTH - 1 - j];
      for (let i = 0; i < acc.data.length; i++) {
        acc.data[i] += dSkip.data[i];
      }
      d = this.ups[j].backward(dUp);
    }
    return d;
  }

  params(): Param[] {
    const out: Param[] = [];
    for (let j = 0; j < DEPTH; j++) {
      out.push(...this.ups[j].params(), ...this.convs[j].params());
    }
    out.push(...this.head.params());
    return out;
  }
}

export class DualUNet {
  readonly spec: NetSpec;
  private readonly stages: DoubleConv[] = [];
  private readonly pools: MaxPool2[] = [];
  private readonly bottleneck: DoubleConv;
  private readonly decoder1: Decoder;
  private readonly decoder2: Decoder;
  private skips: Tensor[] | null = null;

  constructor(spec: NetSpec, seed: number) {
    this.spec = spec;
    const base = spec.baseChannels;
    let label = 0;
    const next = () => new Rng(Rng.derive(seed, label++));
    let cin = spec.inChannels;
    for (let i = 0; i < DEPTH; i++) {
      const cout = base * 2 ** i;
      this.stages.push(new DoubleConv(cin, cout, `encoder.stage${i}`, next()));
      this.pools.push(new MaxPool2());
      cin = cout;
    }
    this.bottleneck = new DoubleConv(cin, base * 2 ** DEPTH, "encoder.bottleneck", next());
    this.decoder1 = new Decoder(base, "head1", next());
    this.decoder2 = new Decoder(base, "head2", next());
  }

  /** Probability maps for both heads, each shaped like the input with c=1. */
  forward(x: Tensor, training: boolean): [Tensor, Tensor] {
    if (x.c !== this.spec.inChannels) {
      throw new ShapeError(`expected ${this.spec.inChannels} input channels, got ${shapeOf(x)}`);
    }
    const factor = 2 ** DEPTH;
    if (x.h % factor !== 0 || x.w % factor !== 0) {
      throw new ShapeError(
        `input height and width must be divisible by ${factor} for ${DEPTH} downsamplings, got ${shapeOf(x)}`,
      );
    }
    const skips: Tensor[] = [];
    let t = x;
    for (let i = 0; i < DEPTH; i++) {
      const s = this.stages[i].forward(t, training);
      skips.push(s);
      t = this.pools[i].forward(s, training);
    }
    t = this.bottleneck.forward(t, training);
    const p1 = this.decoder1.forward(t, skips, training);
    const p2 = this.decoder2.forward(t, skips, training);
    if (training) this.skips = skips;
    return [p1, p2];
  }

  /**
   * Backpropagate probability-map gradients (already weighted by the loss)
   * through both heads and the shared encoder. Overwrites parameter
   * gradients; returns the gradient with respect to the input.
   */
  backward(dp1: Tensor, dp2: Tensor): Tensor {
    const skips = this.skips;
    if (skips === null) throw new Error("backward called before a training forward");
    const skipGrads = skips.map((s) => zeros(s.n, s.h, s.w, s.c));
    const dBt2 = this.decoder2.backward(dp2, skipGrads);
    const dBt1 = this.decoder1.backward(dp1, skipGrads);
    if (!sameShape(dBt1, dBt2)) {
      throw new ShapeError(`head gradients disagree: ${shapeOf(dBt1)} vs ${shapeOf(dBt2)}`);
    }
    for (let i = 0; i < dBt1.data.length; i++) {
      dBt1.data[i] += dBt2.data[i];
    }
    let d = this.bottleneck.backward(dBt1);
    for (let i = DEPTH - 1; i >= 0; i--) {
      const dPool = this.pools[i].backward(d);
      const dSkip = skipGrads[i];
      for (let j = 0; j < dSkip.data.length; j++) {
        dSkip.data[j] += dPool.data[j];
      }
      d = this.stages[i].backward(dSkip);
    }
    this.skips = null;
    return d;
  }

  encoderParams(): Param[] {
    const out: Param[] = [];
    for (const s of this.stages) out.push(...s.params());
    out.push(...this.bottleneck.params());
    return out;
  }

  headParams(head: 1 | 2): Param[] {
    return head === 1 ? this.decoder1.params() : this.decoder2.params();
  }

  params(): Param[] {
    return [...this.encoderParams(), ...this.headParams(1), ...this.headParams(2)];
  }

  buffers(): Buffer[] {
    const out: Buffer[] = [];
    for (const block of [...this.stages, this.bottleneck]) {
      for (const bn of block.norms()) {
        out.push({ name: `${bn.name}.running_mean`, value: bn.runningMean });
        out.push({ name: `${bn.name}.running_var`, value: bn.runningVar });
      }
    }
    return out;
  }
}
