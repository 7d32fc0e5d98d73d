/**
 * Reader/writer for the fieldlab binary dataset interchange format.
 *
 * A dataset is a `<base>.header.json` + `<base>.records.bin` pair.  The
 * payload is little-endian float32, one record per row: the received block
 * (complex M x Q2), the least-squares label (complex M x S), the ground
 * truth (complex M x S), then [snr_db, scenario_id, block_id, user_id].
 * Complex matrices are flattened row-major with real/imaginary parts
 * interleaved.  Prediction files reuse the same convention with rows of
 * [h_pred (complex M x S), scenario_id, block_id, user_id].
 */

import * as fs from "node:fs";
import * as path from "node:path";

export const DATASET_SCHEMA = "fieldlab.dataset.v1";
export const PREDICTION_SCHEMA = "fieldlab.predictions.v1";

export interface DatasetHeader {
  schema_version: string;
  m: number;
  s: number;
  q2: number;
  record_count: number;
  split_tag: string;
  base_seed: number;
  config_digest: string;
  snr_definition: string;
}

export interface RecordBatch {
  header: DatasetHeader;
  /** Network inputs, packed [record][2][m*q2]: channel 0 real, channel 1 imaginary. */
  inputs: Float64Array;
  /** Least-squares labels, packed [record][2][m*s]. */
  labels: Float64Array;
  /** Ground-truth channels, packed [record][2][m*s]. */
  truth: Float64Array;
  snrDb: Float64Array;
  scenarioId: Int32Array;
  blockId: Int32Array;
  userId: Int32Array;
}

function resolvePair(base: string): { headerPath: string; binPath: string } {
  return { headerPath: `${base}.header.json`, binPath: `${base}.records.bin` };
}

/** Read a little-endian float32 payload into an aligned view. */
function readFloat32(binPath: string): Float32Array {
  const buf = fs.readFileSync(binPath);
  if (buf.length % 4 !== 0) {
    throw new Error(`${binPath}: payload size ${buf.length} is not a float32 multiple`);
  }
  const aligned = new ArrayBuffer(buf.length);
  new Uint8Array(aligned).set(buf);
  return new Float32Array(aligned);
}

export function readDatasetHeader(base: string): DatasetHeader {
  const { headerPath } = resolvePair(base);
  const doc = JSON.parse(fs.readFileSync(headerPath, "utf-8")) as DatasetHeader;
  if (doc.schema_version !== DATASET_SCHEMA) {
    throw new Error(`unsupported dataset schema ${JSON.stringify(doc.schema_version)}`);
  }
  return doc;
}

/**
 * Load a dataset file pair.  Complex entries are split into the network's
 * two-channel real packing; ids come back as integer arrays.
 */
export function loadRecords(base: string): RecordBatch {
  const header = readDatasetHeader(base);
  const { binPath } = resolvePair(base);
  const flat = readFloat32(binPath);
  const { m, s, q2, record_count: count } = header;
  const per = 2 * m * q2 + 4 * m * s + 4;
  if (flat.length !== count * per) {
    throw new Error(`payload holds ${flat.length} floats, header implies ${count * per}`);
  }
  const inLen = m * q2;
  const outLen = m * s;
  const batch: RecordBatch = {
    header,
    inputs: new Float64Array(count * 2 * inLen),
    labels: new Float64Array(count * 2 * outLen),
    truth: new Float64Array(count * 2 * outLen),
    snrDb: new Float64Array(count),
    scenarioId: new Int32Array(count),
    blockId: new Int32Array(count),
    userId: new Int32Array(count),
  };
  for (let r = 0; r < count; r++) {
    const row = r * per;
    unpackComplex(flat, row, inLen, batch.inputs, r * 2 * inLen);
    unpackComplex(flat, row + 2 * inLen, outLen, batch.labels, r * 2 * outLen);
    unpackComplex(flat, row + 2 * inLen + 2 * outLen, outLen, batch.truth, r * 2 * outLen);
    const tail = row + 2 * inLen + 4 * outLen;
    batch.snrDb[r] = flat[tail];
    batch.scenarioId[r] = flat[tail + 1];
    batch.blockId[r] = flat[tail + 2];
    batch.userId[r] = flat[tail + 3];
  }
  return batch;
}

/** Interleaved complex run -> two-channel real packing (reals then imags). */
function unpackComplex(
  src: Float32Array,
  srcOfs: number,
  entries: number,
  dst: Float64Array,
  dstOfs: number,
): void {
  for (let i = 0; i < entries; i++) {
    dst[dstOfs + i] = src[srcOfs + 2 * i];
    dst[dstOfs + entries + i] = src[srcOfs + 2 * i + 1];
  }
}

export interface PredictionIds {
  scenarioId: Int32Array;
  blockId: Int32Array;
  userId: Int32Array;
}

/**
 * Write predictions in the binary prediction convention.  `hPred` uses the
 * network's two-channel packing, [record][2][m*s].
 */
export function writePredictions(
  base: string,
  ids: PredictionIds,
  hPred: Float64Array,
  m: number,
  s: number,
  configDigest: string,
): { headerPath: string; binPath: string } {
  const entries = m * s;
  const count = ids.scenarioId.length;
  if (hPred.length !== count * 2 * entries) {
    throw new Error(
      `predictions hold ${hPred.length} values, ${count} records of ${2 * entries} expected`,
    );
  }
  const per = 2 * entries + 3;
  const flat = new Float32Array(count * per);
  for (let r = 0; r < count; r++) {
    const src = r * 2 * entries;
    const row = r * per;
    for (let i = 0; i < entries; i++) {
      flat[row + 2 * i] = hPred[src + i];
      flat[row + 2 * i + 1] = hPred[src + entries + i];
    }
    flat[row + 2 * entries] = ids.scenarioId[r];
    flat[row + 2 * entries + 1] = ids.blockId[r];
    flat[row + 2 * entries + 2] = ids.userId[r];
  }
  const { headerPath, binPath } = resolvePair(base);
  fs.mkdirSync(path.dirname(path.resolve(binPath)), { recursive: true });
  fs.writeFileSync(binPath, new Uint8Array(flat.buffer));
  const doc = {
    config_digest: configDigest,
    m,
    record_count: count,
    s,
    schema_version: PREDICTION_SCHEMA,
  };
  fs.writeFileSync(headerPath, `${JSON.stringify(doc, null, 2)}\n`);
  return { headerPath, binPath };
}

/** Sum of squared magnitudes over two-channel packed records. */
export function energy(values: Float64Array, from = 0, to = values.length): number {
  let acc = 0;
  for (let i = from; i < to; i++) acc += values[i] * values[i];
  return acc;
}

/** NMSE of `pred` against `ref` over an index subset of packed records. */
export function nmseOver(
  pred: Float64Array,
  ref: Float64Array,
  recordFloats: number,
  records: Iterable<number>,
): number {
  let err = 0;
  let scale = 0;
  for (const r of records) {
    const base = r * recordFloats;
    for (let i = 0; i < recordFloats; i++) {
      const d = pred[base + i] - ref[base + i];
      err += d * d;
      scale += ref[base + i] * ref[base + i];
    }
  }
  return err / scale;
}
