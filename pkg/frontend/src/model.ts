/**
 * The channel-estimation network: a three-stage strided convolutional
 * encoder, a multi-head attention block over the bottleneck sequence, and a
 * symmetric transposed-convolution decoder.
 *
 * Inputs are complex receive matrices packed as two real channels (real
 * parts then imaginary parts, each flattened row-major), so a record of an
 * M x Q receive block enters as [2, M*Q] and the estimate leaves as
 * [2, M*S].  Each convolution stage halves the sequence length (kernel 3,
 * stride 2, padding 1: L -> floor((L-1)/2)+1) and the decoder mirrors the
 * ladder back up to the label length, choosing per-stage output padding so
 * the lengths land exactly.
 */

import { AttentionBlock } from "./attention.js";
import {
  BatchNorm1d,
  Conv1d,
  convOutLength,
  ConvTranspose1d,
  Layer,
  LeakyReLU,
} from "./layers.js";
import { Rng } from "./rng.js";
import { Batch3, Param, transpose12 } from "./tensor.js";

export interface NetConfig {
  /** Channel widths of the encoder stages, strictly increasing. */
  widths: number[];
  kernel: number;
  stride: number;
  pad: number;
  heads: number;
  /** Total key dimension across heads (split evenly per head). */
  keyDim: number;
  ffnHidden: number;
  leakySlope: number;
  lrInit: number;
  lrHalvingPeriod: number;
  epochs: number;
  batchSize: number;
}

export const DEFAULT_NET_CONFIG: NetConfig = {
  widths: [16, 32, 64],
  kernel: 3,
  stride: 2,
  pad: 1,
  heads: 4,
  keyDim: 64,
  ffnHidden: 128,
  leakySlope: 0.2,
  lrInit: 1e-3,
  lrHalvingPeriod: 15,
  epochs: 30,
  batchSize: 16,
};

export function validateNetConfig(cfg: NetConfig): void {
  if (cfg.widths.length < 1) throw new Error("need at least one encoder stage");
  for (let i = 1; i < cfg.widths.length; i++) {
    if (cfg.widths[i] <= cfg.widths[i - 1]) {
      throw new Error(`encoder widths must strictly increase, got ${cfg.widths.join(",")}`);
    }
  }
  if (cfg.heads < 1) throw new Error("need at least one attention head");
  if (cfg.keyDim % cfg.heads !== 0) {
    throw new Error(`key dimension ${cfg.keyDim} not divisible by ${cfg.heads} heads`);
  }
  if (cfg.lrInit <= 0 || cfg.lrHalvingPeriod < 1 || cfg.epochs < 1 || cfg.batchSize < 1) {
    throw new Error("learning schedule fields must be positive");
  }
}

/** Sequence lengths [inLen, after stage 1, ..., bottleneck]. */
export function encoderLadder(cfg: NetConfig, inLen: number): number[] {
  const ladder = [inLen];
  for (let i = 0; i < cfg.widths.length; i++) {
    ladder.push(convOutLength(ladder[i], cfg.kernel, cfg.stride, cfg.pad));
  }
  return ladder;
}

export class Caeformer {
  readonly cfg: NetConfig;
  readonly inLen: number;
  readonly outLen: number;
  readonly encoder: Layer[] = [];
  readonly attention: AttentionBlock;
  readonly decoder: Layer[] = [];
  readonly encoderLengths: number[];
  readonly decoderLengths: number[];

  constructor(cfg: NetConfig, inLen: number, outLen: number, rng: Rng) {
    validateNetConfig(cfg);
    this.cfg = cfg;
    this.inLen = inLen;
    this.outLen = outLen;
    this.encoderLengths = encoderLadder(cfg, inLen);
    const labelLadder = encoderLadder(cfg, outLen);
    const depth = cfg.widths.length;
    if (this.encoderLengths[depth] !== labelLadder[depth]) {
      throw new Error(
        `input length ${inLen} and label length ${outLen} reach different ` +
          `bottleneck lengths (${this.encoderLengths[depth]} vs ${labelLadder[depth]})`,
      );
    }
    this.decoderLengths = labelLadder.slice().reverse();

    let channels = 2;
    for (let i = 0; i < depth; i++) {
      this.encoder.push(
        new Conv1d(channels, cfg.widths[i], cfg.kernel, cfg.stride, cfg.pad, rng, cfg.leakySlope),
        new BatchNorm1d(cfg.widths[i]),
        new LeakyReLU(cfg.leakySlope),
      );
      channels = cfg.widths[i];
    }
    this.attention = new AttentionBlock(
      channels,
      cfg.heads,
      cfg.keyDim,
      cfg.ffnHidden,
      cfg.leakySlope,
      rng,
    );
    for (let i = 0; i < depth; i++) {
      const cout = i === depth - 1 ? 2 : cfg.widths[depth - 2 - i];
      const target = this.decoderLengths[i + 1];
      const current = this.decoderLengths[i];
      const bare = (current - 1) * cfg.stride - 2 * cfg.pad + cfg.kernel;
      const outPad = target - bare;
      if (outPad < 0 || outPad >= cfg.stride) {
        throw new Error(`cannot reach length ${target} from ${current} with one stage`);
      }
      this.decoder.push(
        new ConvTranspose1d(channels, cout, cfg.kernel, cfg.stride, cfg.pad, outPad, rng, cfg.leakySlope),
        new BatchNorm1d(cout),
        new LeakyReLU(cfg.leakySlope),
      );
      channels = cout;
    }
  }

  encode(x: Batch3, training: boolean): Batch3 {
    if (x.rows !== 2 || x.cols !== this.inLen) {
      throw new Error(`expected input [batch, 2, ${this.inLen}], got [${x.n}, ${x.rows}, ${x.cols}]`);
    }
    let h = x;
    for (const layer of this.encoder) h = layer.forward(h, training);
    return h;
  }

  attend(features: Batch3, training: boolean): Batch3 {
    return transpose12(this.attention.forward(transpose12(features), training));
  }

  decode(features: Batch3, training: boolean): Batch3 {
    let h = features;
    for (const layer of this.decoder) h = layer.forward(h, training);
    return h;
  }

  forward(x: Batch3, training: boolean): Batch3 {
    return this.decode(this.attend(this.encode(x, training), training), training);
  }

  /** Back-propagate through the whole stack; returns the input gradient. */
  backward(gradOut: Batch3): Batch3 {
    let g = gradOut;
    for (let i = this.decoder.length - 1; i >= 0; i--) g = this.decoder[i].backward(g);
    g = transpose12(this.attention.backward(transpose12(g)));
    for (let i = this.encoder.length - 1; i >= 0; i--) g = this.encoder[i].backward(g);
    return g;
  }

  params(): Param[] {
    const out: Param[] = [];
    for (const layer of this.encoder) out.push(...layer.params());
    out.push(...this.attention.params());
    for (const layer of this.decoder) out.push(...layer.params());
    return out;
  }

  /** Running normalization statistics, for checkpointing. */
  normStats(): Float64Array[] {
    const stats: Float64Array[] = [];
    for (const layer of [...this.encoder, ...this.decoder]) {
      if (layer instanceof BatchNorm1d) {
        stats.push(layer.runningMean, layer.runningVar);
      }
    }
    return stats;
  }
}
