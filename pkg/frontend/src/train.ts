/**
 * Training loop, learning-rate schedule, checkpointing, and evaluation
 * metrics for the channel-estimation network.
 *
 * Training minimizes mean squared error between the network output and the
 * least-squares label of each record, with plain stochastic gradient
 * descent whose step size starts at `lrInit` and halves every
 * `lrHalvingPeriod` epochs.  A stratified slice of the training records
 * (same fraction per user) is held out for the per-epoch validation loss.
 * Inputs and labels are scaled by dataset-level root-mean-square constants
 * (raw magnitudes sit near 1e-9); the constants ride along in the
 * checkpoint and predictions are mapped back to physical scale on export.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { RecordBatch } from "./dataset.js";
import { Caeformer, NetConfig, validateNetConfig } from "./model.js";
import { Rng } from "./rng.js";
import { Batch3, batch3, zeroGrads } from "./tensor.js";

export const CHECKPOINT_SCHEMA = "caeformer.checkpoint.v1";

/** Step-decayed learning rate for a 1-indexed epoch. */
export function lrAtEpoch(cfg: NetConfig, epoch: number): number {
  if (epoch < 1) throw new Error("epochs are 1-indexed");
  return cfg.lrInit * 0.5 ** Math.floor((epoch - 1) / cfg.lrHalvingPeriod);
}

export interface SplitIndices {
  fit: Int32Array;
  val: Int32Array;
}

/** Hold out `fraction` of each user's records for validation. */
export function stratifiedSplit(userId: Int32Array, fraction: number, rng: Rng): SplitIndices {
  if (!(fraction > 0 && fraction < 1)) {
    throw new Error(`validation fraction ${fraction} outside (0, 1)`);
  }
  const byUser = new Map<number, number[]>();
  for (let i = 0; i < userId.length; i++) {
    const list = byUser.get(userId[i]) ?? [];
    list.push(i);
    byUser.set(userId[i], list);
  }
  const fit: number[] = [];
  const val: number[] = [];
  for (const user of [...byUser.keys()].sort((a, b) => a - b)) {
    const indices = byUser.get(user)!;
    rng.shuffle(indices);
    const quota = Math.round(fraction * indices.length);
    val.push(...indices.slice(0, quota));
    fit.push(...indices.slice(quota));
  }
  fit.sort((a, b) => a - b);
  val.sort((a, b) => a - b);
  return { fit: Int32Array.from(fit), val: Int32Array.from(val) };
}

export interface Scales {
  inputScale: number;
  labelScale: number;
}

/** Root-mean-square of the packed values over a record subset. */
function rmsOver(values: Float64Array, recordFloats: number, records: Int32Array): number {
  let acc = 0;
  for (const r of records) {
    const base = r * recordFloats;
    for (let i = 0; i < recordFloats; i++) acc += values[base + i] * values[base + i];
  }
  return Math.sqrt(acc / (records.length * recordFloats));
}

export function fitScales(batch: RecordBatch, records: Int32Array): Scales {
  const { m, s, q2 } = batch.header;
  const inputScale = rmsOver(batch.inputs, 2 * m * q2, records);
  const labelScale = rmsOver(batch.labels, 2 * m * s, records);
  if (!(inputScale > 0) || !(labelScale > 0)) {
    throw new Error("degenerate dataset: zero input or label energy");
  }
  return { inputScale, labelScale };
}

/** Gather records into a network batch, dividing by `scale`. */
export function gather(
  source: Float64Array,
  recordFloats: number,
  records: ArrayLike<number>,
  offset: number,
  count: number,
  scale: number,
): Batch3 {
  const out = batch3(count, 2, recordFloats / 2);
  for (let i = 0; i < count; i++) {
    const base = records[offset + i] * recordFloats;
    for (let j = 0; j < recordFloats; j++) {
      out.data[i * recordFloats + j] = source[base + j] / scale;
    }
  }
  return out;
}

/**
 * Squared-error loss and its gradient with respect to the prediction.
 *
 * The loss is the mean over records of the squared Euclidean norm of the
 * error vector — the vector-estimate MSE convention, so the gradient scale
 * is independent of the output length.
 */
export function mseLoss(pred: Batch3, target: Batch3): { loss: number; grad: Batch3 } {
  const n = pred.data.length;
  if (target.data.length !== n) throw new Error("prediction/target size mismatch");
  const grad = batch3(pred.n, pred.rows, pred.cols);
  let acc = 0;
  for (let i = 0; i < n; i++) {
    const d = pred.data[i] - target.data[i];
    acc += d * d;
    grad.data[i] = (2 * d) / pred.n;
  }
  return { loss: acc / pred.n, grad };
}

export interface EpochStats {
  epoch: number;
  lr: number;
  trainLoss: number;
  valLoss: number;
}

export interface TrainResult {
  model: Caeformer;
  scales: Scales;
  split: SplitIndices;
  curve: EpochStats[];
}

export interface TrainOptions {
  valFraction?: number;
  onEpoch?: (stats: EpochStats) => void;
}

/** Average loss over a record set in evaluation mode. */
export function evalLoss(
  model: Caeformer,
  batch: RecordBatch,
  records: Int32Array,
  scales: Scales,
  chunk = 64,
): number {
  const { m, s, q2 } = batch.header;
  const inFloats = 2 * m * q2;
  const outFloats = 2 * m * s;
  let total = 0;
  for (let ofs = 0; ofs < records.length; ofs += chunk) {
    const count = Math.min(chunk, records.length - ofs);
    const x = gather(batch.inputs, inFloats, records, ofs, count, scales.inputScale);
    const t = gather(batch.labels, outFloats, records, ofs, count, scales.labelScale);
    const { loss } = mseLoss(model.forward(x, false), t);
    total += loss * count;
  }
  return total / records.length;
}

export function train(
  batch: RecordBatch,
  cfg: NetConfig,
  seed: bigint,
  options: TrainOptions = {},
): TrainResult {
  validateNetConfig(cfg);
  const { m, s, q2 } = batch.header;
  const inFloats = 2 * m * q2;
  const outFloats = 2 * m * s;
  const split = stratifiedSplit(batch.userId, options.valFraction ?? 0.1, new Rng(seed, "val-split"));
  const scales = fitScales(batch, split.fit);
  const model = new Caeformer(cfg, m * q2, m * s, new Rng(seed, "init"));
  const params = model.params();
  const order = new Rng(seed, "shuffle");
  const indices = Int32Array.from(split.fit);
  const curve: EpochStats[] = [];
  for (let epoch = 1; epoch <= cfg.epochs; epoch++) {
    const lr = lrAtEpoch(cfg, epoch);
    order.shuffle(indices);
    let running = 0;
    let seen = 0;
    for (let ofs = 0; ofs < indices.length; ofs += cfg.batchSize) {
      const count = Math.min(cfg.batchSize, indices.length - ofs);
      const x = gather(batch.inputs, inFloats, indices, ofs, count, scales.inputScale);
      const t = gather(batch.labels, outFloats, indices, ofs, count, scales.labelScale);
      const pred = model.forward(x, true);
      const { loss, grad } = mseLoss(pred, t);
      zeroGrads(params);
      model.backward(grad);
      for (const p of params) {
        for (let i = 0; i < p.value.length; i++) p.value[i] -= lr * p.grad[i];
      }
      running += loss * count;
      seen += count;
    }
    const stats: EpochStats = {
      epoch,
      lr,
      trainLoss: running / seen,
      valLoss: evalLoss(model, batch, split.val, scales),
    };
    curve.push(stats);
    options.onEpoch?.(stats);
  }
  return { model, scales, split, curve };
}

/** Run the model over records and return predictions at physical scale. */
export function predict(
  model: Caeformer,
  batch: RecordBatch,
  scales: Scales,
  chunk = 64,
): Float64Array {
  const { m, s, q2, record_count: count } = batch.header;
  const inFloats = 2 * m * q2;
  const outFloats = 2 * m * s;
  const all = Int32Array.from({ length: count }, (_, i) => i);
  const out = new Float64Array(count * outFloats);
  for (let ofs = 0; ofs < count; ofs += chunk) {
    const n = Math.min(chunk, count - ofs);
    const x = gather(batch.inputs, inFloats, all, ofs, n, scales.inputScale);
    const pred = model.forward(x, false);
    for (let i = 0; i < n * outFloats; i++) {
      out[ofs * outFloats + i] = pred.data[i] * scales.labelScale;
    }
  }
  return out;
}

interface CheckpointDoc {
  schema_version: string;
  net: NetConfig;
  m: number;
  s: number;
  q2: number;
  input_scale: number;
  label_scale: number;
  config_digest: string;
  seed: string;
  params: { name: string; data: string }[];
  norm_stats: string[];
}

function encode(values: Float64Array): string {
  return Buffer.from(values.buffer, values.byteOffset, values.byteLength).toString("base64");
}

function decode(text: string, expect: number, what: string): Float64Array {
  const buf = Buffer.from(text, "base64");
  const out = new Float64Array(buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength));
  if (out.length !== expect) {
    throw new Error(`${what}: expected ${expect} values, got ${out.length}`);
  }
  return out;
}

export function saveCheckpoint(
  file: string,
  result: TrainResult,
  batch: RecordBatch,
  seed: bigint,
): void {
  const { m, s, q2 } = batch.header;
  const doc: CheckpointDoc = {
    schema_version: CHECKPOINT_SCHEMA,
    net: result.model.cfg,
    m,
    s,
    q2,
    input_scale: result.scales.inputScale,
    label_scale: result.scales.labelScale,
    config_digest: batch.header.config_digest,
    seed: seed.toString(),
    params: result.model.params().map((p) => ({ name: p.name, data: encode(p.value) })),
    norm_stats: result.model.normStats().map(encode),
  };
  fs.mkdirSync(path.dirname(path.resolve(file)), { recursive: true });
  fs.writeFileSync(file, `${JSON.stringify(doc, null, 2)}\n`);
}

export interface LoadedModel {
  model: Caeformer;
  scales: Scales;
  configDigest: string;
  m: number;
  s: number;
  q2: number;
}

export function loadCheckpoint(file: string): LoadedModel {
  const doc = JSON.parse(fs.readFileSync(file, "utf-8")) as CheckpointDoc;
  if (doc.schema_version !== CHECKPOINT_SCHEMA) {
    throw new Error(`unsupported checkpoint schema ${JSON.stringify(doc.schema_version)}`);
  }
  const model = new Caeformer(doc.net, doc.m * doc.q2, doc.m * doc.s, new Rng(0n, "load"));
  const params = model.params();
  if (params.length !== doc.params.length) {
    throw new Error(`checkpoint holds ${doc.params.length} tensors, model has ${params.length}`);
  }
  params.forEach((p, i) => {
    const stored = doc.params[i];
    if (stored.name !== p.name) {
      throw new Error(`checkpoint tensor ${i} is ${stored.name}, expected ${p.name}`);
    }
    p.value.set(decode(stored.data, p.value.length, stored.name));
  });
  const stats = model.normStats();
  if (stats.length !== doc.norm_stats.length) {
    throw new Error("checkpoint normalization statistics do not match the model");
  }
  stats.forEach((arr, i) => arr.set(decode(doc.norm_stats[i], arr.length, `norm_stats[${i}]`)));
  return {
    model,
    scales: { inputScale: doc.input_scale, labelScale: doc.label_scale },
    configDigest: doc.config_digest,
    m: doc.m,
    s: doc.s,
    q2: doc.q2,
  };
}

export interface MetricsReport {
  records: number;
  config_digest: string;
  nmse_vs_truth: number;
  nmse_vs_labels: number;
  per_snr: Record<string, { records: number; nmse_vs_truth: number; nmse_vs_labels: number }>;
}

/** NMSE of predictions against labels and truth, overall and per SNR. */
export function metrics(batch: RecordBatch, hPred: Float64Array): MetricsReport {
  const { m, s, record_count: count } = batch.header;
  const per = 2 * m * s;
  const ratio = (ref: Float64Array, records: number[]): number => {
    let err = 0;
    let scale = 0;
    for (const r of records) {
      for (let i = r * per; i < (r + 1) * per; i++) {
        const d = hPred[i] - ref[i];
        err += d * d;
        scale += ref[i] * ref[i];
      }
    }
    return err / scale;
  };
  const all = Array.from({ length: count }, (_, i) => i);
  const perSnr: MetricsReport["per_snr"] = {};
  for (const snr of [...new Set(batch.snrDb)].sort((a, b) => a - b)) {
    const records = all.filter((r) => batch.snrDb[r] === snr);
    perSnr[String(snr)] = {
      records: records.length,
      nmse_vs_truth: ratio(batch.truth, records),
      nmse_vs_labels: ratio(batch.labels, records),
    };
  }
  return {
    records: count,
    config_digest: batch.header.config_digest,
    nmse_vs_truth: ratio(batch.truth, all),
    nmse_vs_labels: ratio(batch.labels, all),
    per_snr: perSnr,
  };
}
