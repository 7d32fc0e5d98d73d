/**
 * Minimal batched-tensor plumbing shared by all layers.
 *
 * Everything is double precision.  A `Batch3` stores a batch of 2-D arrays
 * row-major as [batch][rows][cols]; convolution layers read it as
 * [batch, channels, length] and attention layers as [batch, positions,
 * features].  The two views swap with `transpose12`.
 */

export interface Batch3 {
  data: Float64Array;
  n: number; // batch size
  rows: number;
  cols: number;
}

export function batch3(n: number, rows: number, cols: number, data?: Float64Array): Batch3 {
  const size = n * rows * cols;
  if (data !== undefined && data.length !== size) {
    throw new Error(`buffer holds ${data.length} values, shape needs ${size}`);
  }
  return { data: data ?? new Float64Array(size), n, rows, cols };
}

export function sameShape(a: Batch3, b: Batch3): boolean {
  return a.n === b.n && a.rows === b.rows && a.cols === b.cols;
}

export function shapeOf(x: Batch3): [number, number, number] {
  return [x.n, x.rows, x.cols];
}

/** Swap the two trailing axes: [n, r, c] -> [n, c, r]. */
export function transpose12(x: Batch3): Batch3 {
  const out = batch3(x.n, x.cols, x.rows);
  for (let b = 0; b < x.n; b++) {
    const base = b * x.rows * x.cols;
    for (let r = 0; r < x.rows; r++) {
      for (let c = 0; c < x.cols; c++) {
        out.data[base + c * x.rows + r] = x.data[base + r * x.cols + c];
      }
    }
  }
  return out;
}

export function assertFinite(x: Float64Array, what: string): void {
  for (let i = 0; i < x.length; i++) {
    if (!Number.isFinite(x[i])) {
      throw new Error(`${what} contains a non-finite value at index ${i}`);
    }
  }
}

/** A trainable array with its gradient accumulator. */
export interface Param {
  name: string;
  value: Float64Array;
  grad: Float64Array;
}

export function param(name: string, size: number): Param {
  return { name, value: new Float64Array(size), grad: new Float64Array(size) };
}

export function zeroGrads(params: Param[]): void {
  for (const p of params) p.grad.fill(0);
}
