/**
 * Hand-written neural layers with explicit forward/backward passes.
 *
 * Each layer caches whatever its backward pass needs during forward, then
 * `backward(gradOut)` accumulates parameter gradients and returns the
 * gradient with respect to its input.  Convolutional layers read tensors as
 * [batch, channels, length]; the dense layers read [batch, positions,
 * features].  All math is double precision so finite-difference gradient
 * checks are meaningful down to ~1e-8.
 */

import { Rng } from "./rng.js";
import { Batch3, batch3, Param, param } from "./tensor.js";

export interface Layer {
  forward(x: Batch3, training: boolean): Batch3;
  backward(gradOut: Batch3): Batch3;
  params(): Param[];
}

/** Output length of a stride-`s` kernel-`k` padding-`p` convolution. */
export function convOutLength(inLen: number, kernel: number, stride: number, pad: number): number {
  const out = Math.floor((inLen + 2 * pad - kernel) / stride) + 1;
  if (out < 1) {
    throw new Error(`convolution reduces length ${inLen} below 1`);
  }
  return out;
}

/** He-style normal fill with the leaky-rectifier gain. */
function fillHe(rng: Rng, values: Float64Array, fanIn: number, slope: number): void {
  const std = Math.sqrt(2 / (1 + slope * slope)) / Math.sqrt(fanIn);
  for (let i = 0; i < values.length; i++) values[i] = std * rng.gauss();
}

/** Xavier-style normal fill for layers not followed by a rectifier. */
export function fillXavier(rng: Rng, values: Float64Array, fanIn: number): void {
  const std = 1 / Math.sqrt(fanIn);
  for (let i = 0; i < values.length; i++) values[i] = std * rng.gauss();
}

export class Conv1d implements Layer {
  readonly weight: Param; // [cout, cin, kernel]
  readonly bias: Param; // [cout]
  private x: Batch3 | null = null;

  constructor(
    readonly cin: number,
    readonly cout: number,
    readonly kernel: number,
    readonly stride: number,
    readonly pad: number,
    rng: Rng,
    slope: number,
  ) {
    this.weight = param("conv.weight", cout * cin * kernel);
    this.bias = param("conv.bias", cout);
    fillHe(rng, this.weight.value, cin * kernel, slope);
  }

  forward(x: Batch3, _training: boolean): Batch3 {
    if (x.rows !== this.cin) {
      throw new Error(`expected ${this.cin} input channels, got ${x.rows}`);
    }
    this.x = x;
    const tIn = x.cols;
    const tOut = convOutLength(tIn, this.kernel, this.stride, this.pad);
    const out = batch3(x.n, this.cout, tOut);
    const w = this.weight.value;
    const bias = this.bias.value;
    for (let b = 0; b < x.n; b++) {
      const xBase = b * this.cin * tIn;
      const oBase = b * this.cout * tOut;
      for (let co = 0; co < this.cout; co++) {
        for (let to = 0; to < tOut; to++) {
          let acc = bias[co];
          for (let ci = 0; ci < this.cin; ci++) {
            const wBase = (co * this.cin + ci) * this.kernel;
            const xRow = xBase + ci * tIn;
            for (let k = 0; k < this.kernel; k++) {
              const ti = to * this.stride + k - this.pad;
              if (ti >= 0 && ti < tIn) acc += w[wBase + k] * x.data[xRow + ti];
            }
          }
          out.data[oBase + co * tOut + to] = acc;
        }
      }
    }
    return out;
  }

  backward(gradOut: Batch3): Batch3 {
    const x = this.x;
    if (x === null) throw new Error("backward before forward");
    const tIn = x.cols;
    const tOut = gradOut.cols;
    const gradIn = batch3(x.n, this.cin, tIn);
    const w = this.weight.value;
    const gw = this.weight.grad;
    const gb = this.bias.grad;
    for (let b = 0; b < x.n; b++) {
      const xBase = b * this.cin * tIn;
      const oBase = b * this.cout * tOut;
      for (let co = 0; co < this.cout; co++) {
        for (let to = 0; to < tOut; to++) {
          const g = gradOut.data[oBase + co * tOut + to];
          gb[co] += g;
          for (let ci = 0; ci < this.cin; ci++) {
            const wBase = (co * this.cin + ci) * this.kernel;
            const xRow = xBase + ci * tIn;
            for (let k = 0; k < this.kernel; k++) {
              const ti = to * this.stride + k - this.pad;
              if (ti >= 0 && ti < tIn) {
                gw[wBase + k] += g * x.data[xRow + ti];
                gradIn.data[xRow + ti] += g * w[wBase + k];
              }
            }
          }
        }
      }
    }
    return gradIn;
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }
}

export class ConvTranspose1d implements Layer {
  readonly weight: Param; // [cin, cout, kernel]
  readonly bias: Param; // [cout]
  private x: Batch3 | null = null;

  constructor(
    readonly cin: number,
    readonly cout: number,
    readonly kernel: number,
    readonly stride: number,
    readonly pad: number,
    readonly outPad: number,
    rng: Rng,
    slope: number,
  ) {
    if (outPad < 0 || outPad >= stride) {
      throw new Error(`output padding ${outPad} outside [0, ${stride})`);
    }
    this.weight = param("convt.weight", cin * cout * kernel);
    this.bias = param("convt.bias", cout);
    fillHe(rng, this.weight.value, cin * kernel, slope);
  }

  outLength(inLen: number): number {
    return (inLen - 1) * this.stride - 2 * this.pad + this.kernel + this.outPad;
  }

  forward(x: Batch3, _training: boolean): Batch3 {
    if (x.rows !== this.cin) {
      throw new Error(`expected ${this.cin} input channels, got ${x.rows}`);
    }
    this.x = x;
    const tIn = x.cols;
    const tOut = this.outLength(tIn);
    const out = batch3(x.n, this.cout, tOut);
    const w = this.weight.value;
    for (let b = 0; b < x.n; b++) {
      const oBase = b * this.cout * tOut;
      for (let co = 0; co < this.cout; co++) {
        out.data.fill(this.bias.value[co], oBase + co * tOut, oBase + (co + 1) * tOut);
      }
      const xBase = b * this.cin * tIn;
      for (let ci = 0; ci < this.cin; ci++) {
        const xRow = xBase + ci * tIn;
        for (let co = 0; co < this.cout; co++) {
          const wBase = (ci * this.cout + co) * this.kernel;
          const oRow = oBase + co * tOut;
          for (let ti = 0; ti < tIn; ti++) {
            const xv = x.data[xRow + ti];
            for (let k = 0; k < this.kernel; k++) {
              const t = ti * this.stride - this.pad + k;
              if (t >= 0 && t < tOut) out.data[oRow + t] += w[wBase + k] * xv;
            }
          }
        }
      }
    }
    return out;
  }

  backward(gradOut: Batch3): Batch3 {
    const x = this.x;
    if (x === null) throw new Error("backward before forward");
    const tIn = x.cols;
    const tOut = gradOut.cols;
    const gradIn = batch3(x.n, this.cin, tIn);
    const w = this.weight.value;
    const gw = this.weight.grad;
    const gb = this.bias.grad;
    for (let b = 0; b < x.n; b++) {
      const oBase = b * this.cout * tOut;
      for (let co = 0; co < this.cout; co++) {
        const oRow = oBase + co * tOut;
        for (let t = 0; t < tOut; t++) gb[co] += gradOut.data[oRow + t];
      }
      const xBase = b * this.cin * tIn;
      for (let ci = 0; ci < this.cin; ci++) {
        const xRow = xBase + ci * tIn;
        for (let co = 0; co < this.cout; co++) {
          const wBase = (ci * this.cout + co) * this.kernel;
          const oRow = oBase + co * tOut;
          for (let ti = 0; ti < tIn; ti++) {
            const xv = x.data[xRow + ti];
            let acc = 0;
            for (let k = 0; k < this.kernel; k++) {
              const t = ti * this.stride - this.pad + k;
              if (t >= 0 && t < tOut) {
                const g = gradOut.data[oRow + t];
                gw[wBase + k] += g * xv;
                acc += g * w[wBase + k];
              }
            }
            gradIn.data[xRow + ti] += acc;
          }
        }
      }
    }
    return gradIn;
  }

  params(): Param[] {
    return [this.weight, this.bias];
  }
}

export class BatchNorm1d implements Layer {
  readonly gain: Param; // [channels]
  readonly shift: Param; // [channels]
  readonly runningMean: Float64Array;
  readonly runningVar: Float64Array;
  private xhat: Batch3 | null = null;
  private invStd: Float64Array | null = null;
  private trainedForward = false;

  constructor(
    readonly channels: number,
    readonly eps = 1e-5,
    readonly momentum = 0.1,
  ) {
    this.gain = param("bn.gain", channels);
    this.shift = param("bn.shift", channels);
    this.gain.value.fill(1);
    this.runningMean = new Float64Array(channels);
    this.runningVar = new Float64Array(channels);
    this.runningVar.fill(1);
  }

  forward(x: Batch3, training: boolean): Batch3 {
    if (x.rows !== this.channels) {
      throw new Error(`expected ${this.channels} channels, got ${x.rows}`);
    }
    const t = x.cols;
    const count = x.n * t;
    const out = batch3(x.n, x.rows, t);
    const xhat = batch3(x.n, x.rows, t);
    const invStd = new Float64Array(this.channels);
    this.trainedForward = training;
    for (let c = 0; c < this.channels; c++) {
      let mean: number;
      let variance: number;
      if (training) {
        let sum = 0;
        let sq = 0;
        for (let b = 0; b < x.n; b++) {
          const row = (b * x.rows + c) * t;
          for (let i = 0; i < t; i++) {
            const v = x.data[row + i];
            sum += v;
            sq += v * v;
          }
        }
        mean = sum / count;
        variance = Math.max(sq / count - mean * mean, 0);
        const unbiased = count > 1 ? (variance * count) / (count - 1) : variance;
        this.runningMean[c] += this.momentum * (mean - this.runningMean[c]);
        this.runningVar[c] += this.momentum * (unbiased - this.runningVar[c]);
      } else {
        mean = this.runningMean[c];
        variance = this.runningVar[c];
      }
      const inv = 1 / Math.sqrt(variance + this.eps);
      invStd[c] = inv;
      const g = this.gain.value[c];
      const s = this.shift.value[c];
      for (let b = 0; b < x.n; b++) {
        const row = (b * x.rows + c) * t;
        for (let i = 0; i < t; i++) {
          const h = (x.data[row + i] - mean) * inv;
          xhat.data[row + i] = h;
          out.data[row + i] = g * h + s;
        }
      }
    }
    this.xhat = xhat;
    this.invStd = invStd;
    return out;
  }

  backward(gradOut: Batch3): Batch3 {
    const xhat = this.xhat;
    const invStd = this.invStd;
    if (xhat === null || invStd === null) throw new Error("backward before forward");
    const t = gradOut.cols;
    const count = gradOut.n * t;
    const gradIn = batch3(gradOut.n, gradOut.rows, t);
    for (let c = 0; c < this.channels; c++) {
      const g = this.gain.value[c];
      let sumG = 0;
      let sumGh = 0;
      for (let b = 0; b < gradOut.n; b++) {
        const row = (b * gradOut.rows + c) * t;
        for (let i = 0; i < t; i++) {
          const go = gradOut.data[row + i];
          sumG += go;
          sumGh += go * xhat.data[row + i];
        }
      }
      this.shift.grad[c] += sumG;
      this.gain.grad[c] += sumGh;
      const inv = invStd[c];
      for (let b = 0; b < gradOut.n; b++) {
        const row = (b * gradOut.rows + c) * t;
        for (let i = 0; i < t; i++) {
          const gh = gradOut.data[row + i] * g;
          gradIn.data[row + i] = this.trainedForward
            ? inv * (gh - (g * sumG) / count - (xhat.data[row + i] * g * sumGh) / count)
            : inv * gh;
        }
      }
    }
    return gradIn;
  }

  params(): Param[] {
    return [this.gain, this.shift];
  }
}

export class LeakyReLU implements Layer {
  private x: Batch3 | null = null;

  constructor(readonly slope: number) {}

  forward(x: Batch3, _training: boolean): Batch3 {
    this.x = x;
    const out = batch3(x.n, x.rows, x.cols);
    for (let i = 0; i < x.data.length; i++) {
      const v = x.data[i];
      out.data[i] = v > 0 ? v : this.slope * v;
    }
    return out;
  }

  backward(gradOut: Batch3): Batch3 {
    const x = this.x;
    if (x === null) throw new Error("backward before forward");
    const gradIn = batch3(x.n, x.rows, x.cols);
    for (let i = 0; i < x.data.length; i++) {
      gradIn.data[i] = gradOut.data[i] * (x.data[i] > 0 ? 1 : this.slope);
    }
    return gradIn;
  }

  params(): Param[] {
    return [];
  }
}

/** Dense map over the trailing feature axis of [batch, positions, features]. */
export class Linear implements Layer {
  readonly weight: Param; // [din, dout]
  readonly bias: Param | null; // [dout]
  private x: Batch3 | null = null;

  constructor(
    readonly din: number,
    readonly dout: number,
    withBias: boolean,
    rng: Rng,
  ) {
    this.weight = param("linear.weight", din * dout);
    this.bias = withBias ? param("linear.bias", dout) : null;
    fillXavier(rng, this.weight.value, din);
  }

  forward(x: Batch3, _training: boolean): Batch3 {
    if (x.cols !== this.din) {
      throw new Error(`expected ${this.din} features, got ${x.cols}`);
    }
    this.x = x;
    const rows = x.n * x.rows;
    const out = batch3(x.n, x.rows, this.dout);
    const w = this.weight.value;
    for (let r = 0; r < rows; r++) {
      const xRow = r * this.din;
      const oRow = r * this.dout;
      if (this.bias !== null) {
        out.data.set(this.bias.value, oRow);
      }
      for (let i = 0; i < this.din; i++) {
        const xv = x.data[xRow + i];
        if (xv === 0) continue;
        const wRow = i * this.dout;
        for (let j = 0; j < this.dout; j++) {
          out.data[oRow + j] += xv * w[wRow + j];
        }
      }
    }
    return out;
  }

  backward(gradOut: Batch3): Batch3 {
    const x = this.x;
    if (x === null) throw new Error("backward before forward");
    const rows = x.n * x.rows;
    const gradIn = batch3(x.n, x.rows, this.din);
    const w = this.weight.value;
    const gw = this.weight.grad;
    for (let r = 0; r < rows; r++) {
      const xRow = r * this.din;
      const oRow = r * this.dout;
      if (this.bias !== null) {
        const gb = this.bias.grad;
        for (let j = 0; j < this.dout; j++) gb[j] += gradOut.data[oRow + j];
      }
      for (let i = 0; i < this.din; i++) {
        const xv = x.data[xRow + i];
        const wRow = i * this.dout;
        let acc = 0;
        for (let j = 0; j < this.dout; j++) {
          const g = gradOut.data[oRow + j];
          gw[wRow + j] += g * xv;
          acc += g * w[wRow + j];
        }
        gradIn.data[xRow + i] = acc;
      }
    }
    return gradIn;
  }

  params(): Param[] {
    return this.bias === null ? [this.weight] : [this.weight, this.bias];
  }
}

/** Per-position normalization over the trailing feature axis. */
export class LayerNorm implements Layer {
  readonly gain: Param; // [features]
  readonly shift: Param; // [features]
  private xhat: Batch3 | null = null;
  private invStd: Float64Array | null = null;

  constructor(
    readonly features: number,
    readonly eps = 1e-5,
  ) {
    this.gain = param("ln.gain", features);
    this.shift = param("ln.shift", features);
    this.gain.value.fill(1);
  }

  forward(x: Batch3, _training: boolean): Batch3 {
    if (x.cols !== this.features) {
      throw new Error(`expected ${this.features} features, got ${x.cols}`);
    }
    const d = this.features;
    const rows = x.n * x.rows;
    const out = batch3(x.n, x.rows, d);
    const xhat = batch3(x.n, x.rows, d);
    const invStd = new Float64Array(rows);
    for (let r = 0; r < rows; r++) {
      const base = r * d;
      let sum = 0;
      for (let i = 0; i < d; i++) sum += x.data[base + i];
      const mean = sum / d;
      let sq = 0;
      for (let i = 0; i < d; i++) {
        const dv = x.data[base + i] - mean;
        sq += dv * dv;
      }
      const inv = 1 / Math.sqrt(sq / d + this.eps);
      invStd[r] = inv;
      for (let i = 0; i < d; i++) {
        const h = (x.data[base + i] - mean) * inv;
        xhat.data[base + i] = h;
        out.data[base + i] = this.gain.value[i] * h + this.shift.value[i];
      }
    }
    this.xhat = xhat;
    this.invStd = invStd;
    return out;
  }

  backward(gradOut: Batch3): Batch3 {
    const xhat = this.xhat;
    const invStd = this.invStd;
    if (xhat === null || invStd === null) throw new Error("backward before forward");
    const d = this.features;
    const rows = gradOut.n * gradOut.rows;
    const gradIn = batch3(gradOut.n, gradOut.rows, d);
    for (let r = 0; r < rows; r++) {
      const base = r * d;
      let sumG = 0;
      let sumGh = 0;
      for (let i = 0; i < d; i++) {
        const gh = gradOut.data[base + i] * this.gain.value[i];
        sumG += gh;
        sumGh += gh * xhat.data[base + i];
        this.gain.grad[i] += gradOut.data[base + i] * xhat.data[base + i];
        this.shift.grad[i] += gradOut.data[base + i];
      }
      const inv = invStd[r];
      for (let i = 0; i < d; i++) {
        const gh = gradOut.data[base + i] * this.gain.value[i];
        gradIn.data[base + i] = inv * (gh - sumG / d - (xhat.data[base + i] * sumGh) / d);
      }
    }
    return gradIn;
  }

  params(): Param[] {
    return [this.gain, this.shift];
  }
}
