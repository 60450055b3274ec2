/**
 * Training objective: per-head binary cross-entropy plus soft Dice, with a
 * configurable weight per head. The gradient is taken with respect to the
 * probability maps, so the model's sigmoid stays inside the network.
 */

import { ShapeError, Tensor, like, sameShape, shapeOf } from "./tensor.js";

const EPS = 1e-7;
const SMOOTH = 1.0;

export interface HeadLossTerms {
  bce: number;
  dice: number;
}

export interface LossResult {
  total: number;
  heads: [HeadLossTerms, HeadLossTerms];
  /** d(total)/d(prob) for each head, ready for the model backward pass. */
  grads: [Tensor, Tensor];
}

/**
 * BCE averaged over every pixel plus soft Dice averaged over samples.
 * Probabilities are clamped away from 0 and 1 before the logs; clamped
 * pixels contribute zero gradient.
 */
function headLoss(prob: Tensor, target: Tensor, weight: number): { terms: HeadLossTerms; grad: Tensor } {
  if (!sameShape(prob, target)) {
    throw new ShapeError(`loss target ${shapeOf(target)} does not match prediction ${shapeOf(prob)}`);
  }
  const m = prob.data.length;
  const perSample = prob.h * prob.w * prob.c;
  const grad = like(prob);

  let bce = 0;
  for (let i = 0; i < m; i++) {
    const t = target.data[i];
    const p = Math.min(1 - EPS, Math.max(EPS, prob.data[i]));
    bce -= t * Math.log(p) + (1 - t) * Math.log(1 - p);
    if (prob.data[i] > EPS && prob.data[i] < 1 - EPS) {
      grad.data[i] = (-(t / p) + (1 - t) / (1 - p)) / m;
    }
  }
  bce /= m;

  let diceLoss = 0;
  for (let b = 0; b < prob.n; b++) {
    const off = b * perSample;
    let inter = 0;
    let sumP = 0;
    let sumT = 0;
    for (let i = 0; i < perSample; i++) {
      const p = prob.data[off + i];
      const t = target.data[off + i];
      inter += p * t;
      sumP += p;
      sumT += t;
    }
    const denom = sumP + sumT + SMOOTH;
    const score = (2 * inter + SMOOTH) / denom;
    diceLoss += 1 - score;
    const common = -1 / prob.n;
    for (let i = 0; i < perSample; i++) {
      const t = target.data[off + i];
      grad.data[off + i] += common * ((2 * t * denom - (2 * inter + SMOOTH)) / (denom * denom));
    }
  }
  diceLoss /= prob.n;

  for (let i = 0; i < m; i++) grad.data[i] *= weight;
  return { terms: { bce, dice: diceLoss }, grad };
}

export function dualLoss(
  probs: [Tensor, Tensor],
  targets: [Tensor, Tensor],
  weights: [number, number],
): LossResult {
  const h1 = headLoss(probs[0], targets[0], weights[0]);
  const h2 = headLoss(probs[1], targets[1], weights[1]);
  const total =
    weights[0] * (h1.terms.bce + h1.terms.dice) + weights[1] * (h2.terms.bce + h2.terms.dice);
  return { total, heads: [h1.terms, h2.terms], grads: [h1.grad, h2.grad] };
}

/**
 * Hard Dice overlap between two binary maps (values 0 or 1). Two empty
 * masks count as perfect agreement.
 */
export function diceScore(a: Float32Array | Uint8Array, b: Float32Array | Uint8Array): number {
  if (a.length !== b.length) {
    throw new ShapeError(`dice operands differ in size: ${a.length} vs ${b.length}`);
  }
  let inter = 0;
  let sum = 0;
  for (let i = 0; i < a.length; i++) {
    const av = a[i] ? 1 : 0;
    const bv = b[i] ? 1 : 0;
    inter += av & bv;
    sum += av + bv;
  }
  return sum === 0 ? 1 : (2 * inter) / sum;
}
