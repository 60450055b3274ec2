/** Deterministic pseudo-random streams for initialization and sampling. */

/**
 * 32-bit Mulberry32 generator. Small state, good statistical quality for
 * simulation-grade use, and identical sequences across platforms because it
 * only relies on unsigned 32-bit integer arithmetic.
 */
export class Rng {
  private state: number;

  constructor(seed: number) {
    this.state = seed >>> 0;
  }

  /** Uniform float in [0, 1). */
  next(): number {
    this.state = (this.state + 0x6d2b79f5) >>> 0;
    let t = this.state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  }

  /** Uniform integer in [0, n). */
  int(n: number): number {
    return Math.floor(this.next() * n);
  }

  /** Standard normal deviate via Box-Muller. */
  normal(): number {
    let u = 0;
    while (u === 0) u = this.next();
    const v = this.next();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  }

  /** In-place Fisher-Yates shuffle. */
  shuffle<T>(items: T[]): void {
    for (let i = items.length - 1; i > 0; i--) {
      const j = this.int(i + 1);
      const tmp = items[i];
      items[i] = items[j];
      items[j] = tmp;
    }
  }

  /**
   * Derive an independent sub-stream seed. Mixing the label through the
   * generator keeps layer initialization stable when unrelated draws are
   * added elsewhere.
   */
  static derive(seed: number, label: number): number {
    const r = new Rng((seed ^ Math.imul(label + 1, 0x9e3779b9)) >>> 0);
    r.next();
    return Math.floor(r.next() * 4294967296) >>> 0;
  }
}
