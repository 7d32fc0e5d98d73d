/**
 * Multi-head attention over encoder feature sequences.
 *
 * For a sequence-major input U of shape [batch, positions, features], each
 * head i applies learned projections Q_i = U Wq_i, K_i = U Wk_i,
 * V_i = U Wv_i, forms row-stochastic weights
 * E_i = softmax(Q_i K_i^T / sqrt(dk)), and emits C_i = E_i V_i.  The head
 * outputs are concatenated and mixed by a final projection.  The enclosing
 * block wraps the attention in two residual + layer-norm stages with a
 * feedforward expansion between them.
 */

import { LayerNorm, LeakyReLU, Linear } from "./layers.js";
import { Param } from "./tensor.js";
import { Batch3, batch3, sameShape } from "./tensor.js";
import { Rng } from "./rng.js";

function addInto(a: Batch3, b: Batch3): Batch3 {
  if (!sameShape(a, b)) throw new Error("residual shapes differ");
  const out = batch3(a.n, a.rows, a.cols);
  for (let i = 0; i < a.data.length; i++) out.data[i] = a.data[i] + b.data[i];
  return out;
}

export class MultiHeadAttention {
  readonly heads: number;
  readonly headDim: number;
  readonly wq: Linear;
  readonly wk: Linear;
  readonly wv: Linear;
  readonly mix: Linear;
  private q: Batch3 | null = null;
  private k: Batch3 | null = null;
  private v: Batch3 | null = null;
  private weightsRows: Float64Array | null = null; // [n, heads, T, T]
  private seqLen = 0;
  private batchSize = 0;

  constructor(features: number, heads: number, keyDim: number, rng: Rng) {
    if (heads < 1) throw new Error("need at least one attention head");
    if (keyDim % heads !== 0) {
      throw new Error(`key dimension ${keyDim} not divisible by ${heads} heads`);
    }
    this.heads = heads;
    this.headDim = keyDim / heads;
    this.wq = new Linear(features, keyDim, false, rng);
    this.wk = new Linear(features, keyDim, false, rng);
    this.wv = new Linear(features, keyDim, false, rng);
    this.mix = new Linear(keyDim, features, false, rng);
  }

  /** Row-stochastic attention weights from the last forward, [n, h, T, T]. */
  lastWeights(): { data: Float64Array; n: number; heads: number; seqLen: number } {
    if (this.weightsRows === null) throw new Error("no forward pass recorded");
    return {
      data: this.weightsRows,
      n: this.batchSize,
      heads: this.heads,
      seqLen: this.seqLen,
    };
  }

  forward(u: Batch3, training: boolean): Batch3 {
    const t = u.rows;
    const dk = this.headDim;
    const keyDim = this.heads * dk;
    const q = this.wq.forward(u, training);
    const k = this.wk.forward(u, training);
    const v = this.wv.forward(u, training);
    this.q = q;
    this.k = k;
    this.v = v;
    this.seqLen = t;
    this.batchSize = u.n;
    const scale = 1 / Math.sqrt(dk);
    const weights = new Float64Array(u.n * this.heads * t * t);
    const context = batch3(u.n, t, keyDim);
    for (let b = 0; b < u.n; b++) {
      const qkBase = b * t * keyDim;
      for (let h = 0; h < this.heads; h++) {
        const col = h * dk;
        const wBase = (b * this.heads + h) * t * t;
        for (let r = 0; r < t; r++) {
          const qRow = qkBase + r * keyDim + col;
          const wRow = wBase + r * t;
          let max = -Infinity;
          for (let c = 0; c < t; c++) {
            const kRow = qkBase + c * keyDim + col;
            let dot = 0;
            for (let i = 0; i < dk; i++) dot += q.data[qRow + i] * k.data[kRow + i];
            const score = dot * scale;
            weights[wRow + c] = score;
            if (score > max) max = score;
          }
          let sum = 0;
          for (let c = 0; c < t; c++) {
            const e = Math.exp(weights[wRow + c] - max);
            weights[wRow + c] = e;
            sum += e;
          }
          for (let c = 0; c < t; c++) weights[wRow + c] /= sum;
          const oRow = qkBase + r * keyDim + col;
          for (let c = 0; c < t; c++) {
            const e = weights[wRow + c];
            const vRow = qkBase + c * keyDim + col;
            for (let i = 0; i < dk; i++) context.data[oRow + i] += e * v.data[vRow + i];
          }
        }
      }
    }
    this.weightsRows = weights;
    return this.mix.forward(context, training);
  }

  backward(gradOut: Batch3): Batch3 {
    const q = this.q;
    const k = this.k;
    const v = this.v;
    const weights = this.weightsRows;
    if (q === null || k === null || v === null || weights === null) {
      throw new Error("backward before forward");
    }
    const t = this.seqLen;
    const dk = this.headDim;
    const keyDim = this.heads * dk;
    const scale = 1 / Math.sqrt(dk);
    const gContext = this.mix.backward(gradOut);
    const gQ = batch3(gradOut.n, t, keyDim);
    const gK = batch3(gradOut.n, t, keyDim);
    const gV = batch3(gradOut.n, t, keyDim);
    const gRow = new Float64Array(t);
    for (let b = 0; b < gradOut.n; b++) {
      const base = b * t * keyDim;
      for (let h = 0; h < this.heads; h++) {
        const col = h * dk;
        const wBase = (b * this.heads + h) * t * t;
        for (let r = 0; r < t; r++) {
          const cRow = base + r * keyDim + col;
          const wRow = wBase + r * t;
          // dL/dE_rc and the softmax Jacobian applied within the row
          let inner = 0;
          for (let c = 0; c < t; c++) {
            const vRow = base + c * keyDim + col;
            let ge = 0;
            for (let i = 0; i < dk; i++) {
              const gc = gContext.data[cRow + i];
              ge += gc * v.data[vRow + i];
              gV.data[vRow + i] += weights[wRow + c] * gc;
            }
            gRow[c] = ge;
            inner += ge * weights[wRow + c];
          }
          for (let c = 0; c < t; c++) {
            const gs = weights[wRow + c] * (gRow[c] - inner) * scale;
            const kRow = base + c * keyDim + col;
            const qRow = base + r * keyDim + col;
            for (let i = 0; i < dk; i++) {
              gQ.data[qRow + i] += gs * k.data[kRow + i];
              gK.data[kRow + i] += gs * q.data[qRow + i];
            }
          }
        }
      }
    }
    const gU = this.wq.backward(gQ);
    const gUk = this.wk.backward(gK);
    const gUv = this.wv.backward(gV);
    for (let i = 0; i < gU.data.length; i++) {
      gU.data[i] += gUk.data[i] + gUv.data[i];
    }
    return gU;
  }

  params(): Param[] {
    return [...this.wq.params(), ...this.wk.params(), ...this.wv.params(), ...this.mix.params()];
  }
}

export class AttentionBlock {
  readonly mha: MultiHeadAttention;
  readonly norm1: LayerNorm;
  readonly norm2: LayerNorm;
  readonly expand: Linear;
  readonly contract: Linear;
  readonly act: LeakyReLU;

  constructor(features: number, heads: number, keyDim: number, ffnHidden: number, slope: number, rng: Rng) {
    this.mha = new MultiHeadAttention(features, heads, keyDim, rng);
    this.norm1 = new LayerNorm(features);
    this.norm2 = new LayerNorm(features);
    this.expand = new Linear(features, ffnHidden, true, rng);
    this.contract = new Linear(ffnHidden, features, true, rng);
    this.act = new LeakyReLU(slope);
  }

  forward(u: Batch3, training: boolean): Batch3 {
    const attended = this.mha.forward(u, training);
    const mid = this.norm1.forward(addInto(u, attended), training);
    const lifted = this.contract.forward(
      this.act.forward(this.expand.forward(mid, training), training),
      training,
    );
    return this.norm2.forward(addInto(mid, lifted), training);
  }

  backward(gradOut: Batch3): Batch3 {
    const gSum2 = this.norm2.backward(gradOut);
    const gLift = this.contract.backward(gSum2);
    const gMidFfn = this.expand.backward(this.act.backward(gLift));
    for (let i = 0; i < gSum2.data.length; i++) gMidFfn.data[i] += gSum2.data[i];
    const gSum1 = this.norm1.backward(gMidFfn);
    const gU = this.mha.backward(gSum1);
    for (let i = 0; i < gU.data.length; i++) gU.data[i] += gSum1.data[i];
    return gU;
  }

  params(): Param[] {
    return [
      ...this.mha.params(),
      ...this.norm1.params(),
      ...this.norm2.params(),
      ...this.expand.params(),
      ...this.contract.params(),
    ];
  }
}
