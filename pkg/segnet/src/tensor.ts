/** Dense NHWC float tensors and the shape errors raised on misuse. */

export class ShapeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ShapeError";
  }
}

export class ConfigError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConfigError";
  }
}

/** A batch of feature maps laid out as [n, h, w, c] in one flat buffer. */
export interface Tensor {
  data: Float32Array;
  n: number;
  h: number;
  w: number;
  c: number;
}

export function zeros(n: number, h: number, w: number, c: number): Tensor {
  return { data: new Float32Array(n * h * w * c), n, h, w, c };
}

export function like(t: Tensor): Tensor {
  return zeros(t.n, t.h, t.w, t.c);
}

export function sameShape(a: Tensor, b: Tensor): boolean {
  return a.n === b.n && a.h === b.h && a.w === b.w && a.c === b.c;
}

export function shapeOf(t: Tensor): string {
  return `[${t.n}, ${t.h}, ${t.w}, ${t.c}]`;
}

export function assertShape(t: Tensor, n: number, h: number, w: number, c: number, where: string): void {
  if (t.n !== n || t.h !== h || t.w !== w || t.c !== c) {
    throw new ShapeError(`${where}: expected [${n}, ${h}, ${w}, ${c}], got ${shapeOf(t)}`);
  }
}

/** A learnable array together with its gradient accumulator. */
export interface Param {
  name: string;
  value: Float32Array;
  grad: Float32Array;
}

export function makeParam(name: string, size: number): Param {
  return { name, value: new Float32Array(size), grad: new Float32Array(size) };
}
