/**
 * Deterministic random streams for weight initialization and shuffling.
 *
 * A 64-bit seed plus string labels are folded through splitmix64 into the
 * four-word state of an sfc32 generator, so independently labeled streams
 * never share state and every run is reproducible from (seed, labels).
 */

const MASK64 = (1n << 64n) - 1n;

function splitmix64(state: bigint): { next: bigint; out: bigint } {
  const next = (state + 0x9e3779b97f4a7c15n) & MASK64;
  let z = next;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  z = z ^ (z >> 31n);
  return { next, out: z };
}

/** Fold a label string into a 64-bit value (FNV-1a). */
function hashLabel(label: string): bigint {
  let h = 0xcbf29ce484222325n;
  for (let i = 0; i < label.length; i++) {
    h = (h ^ BigInt(label.charCodeAt(i))) * 0x100000001b3n & MASK64;
  }
  return h;
}

export class Rng {
  private a: number;
  private b: number;
  private c: number;
  private d: number;
  private spare: number | null = null;

  constructor(seed: bigint | number, ...labels: string[]) {
    let state = (typeof seed === "number" ? BigInt(Math.trunc(seed)) : seed) & MASK64;
    for (const label of labels) {
      state = (state ^ hashLabel(label)) & MASK64;
      state = splitmix64(state).next;
    }
    const words: number[] = [];
    for (let i = 0; i < 2; i++) {
      const step = splitmix64(state);
      state = step.next;
      words.push(Number(step.out & 0xffffffffn), Number((step.out >> 32n) & 0xffffffffn));
    }
    [this.a, this.b, this.c, this.d] = words;
    for (let i = 0; i < 12; i++) this.nextU32();
  }

  /** sfc32 core: one 32-bit draw. */
  nextU32(): number {
    const t = (((this.a + this.b) | 0) + this.d) | 0;
    this.d = (this.d + 1) | 0;
    this.a = this.b ^ (this.b >>> 9);
    this.b = (this.c + (this.c << 3)) | 0;
    this.c = (this.c << 21) | (this.c >>> 11);
    this.c = (this.c + t) | 0;
    return t >>> 0;
  }

  /** Uniform in [0, 1) with 53-bit resolution. */
  uniform(): number {
    const hi = this.nextU32() >>> 6; // 26 bits
    const lo = this.nextU32() >>> 5; // 27 bits
    return (hi * 134217728 + lo) / 9007199254740992;
  }

  /** Standard normal via Box-Muller. */
  gauss(): number {
    if (this.spare !== null) {
      const value = this.spare;
      this.spare = null;
      return value;
    }
    let u = 0;
    while (u === 0) u = this.uniform();
    const v = this.uniform();
    const radius = Math.sqrt(-2 * Math.log(u));
    this.spare = radius * Math.sin(2 * Math.PI * v);
    return radius * Math.cos(2 * Math.PI * v);
  }

  /** Integer in [0, bound). */
  int(bound: number): number {
    return Math.floor(this.uniform() * bound);
  }

  /** In-place Fisher-Yates shuffle. */
  shuffle(items: Int32Array | number[]): void {
    for (let i = items.length - 1; i > 0; i--) {
      const j = this.int(i + 1);
      const tmp = items[i];
      items[i] = items[j];
      items[j] = tmp;
    }
  }
}

/** Parse a decimal string as an unsigned 64-bit seed. */
export function parseSeed(text: string): bigint {
  if (!/^\d+$/.test(text)) {
    throw new Error(`seed must be a non-negative integer, got ${JSON.stringify(text)}`);
  }
  const value = BigInt(text);
  if (value > MASK64) {
    throw new Error(`seed ${text} does not fit in 64 bits`);
  }
  return value;
}
