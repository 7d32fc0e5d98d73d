import * as fs from "node:fs";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import {
  DATASET_SCHEMA,
  PREDICTION_SCHEMA,
  loadRecords,
  nmseOver,
  readDatasetHeader,
  writePredictions,
} from "../src/dataset.js";
import { assertFinite } from "../src/tensor.js";
import { deskDataset, scoreImport } from "./fixtures.js";

const SNR_GRID = [0, 5, 10, 15, 20];

describe("dataset loading", () => {
  const dir = deskDataset(20, 11);
  const base = path.join(dir, "dataset.train");

  it("reads the header of a generated dataset", () => {
    const header = readDatasetHeader(base);
    expect(header.schema_version).toBe(DATASET_SCHEMA);
    expect(header.m).toBe(1);
    expect(header.s).toBe(9);
    expect(header.q2).toBe(9);
    expect(header.record_count).toBe(162); // 9 users x 20 records x 0.9 train
    expect(header.config_digest).toMatch(/^[0-9a-f]{16,}$/);
  });

  it("unpacks records into two-channel arrays with id columns", () => {
    const batch = loadRecords(base);
    const { m, s, q2, record_count: count } = batch.header;
    expect(batch.inputs.length).toBe(count * 2 * m * q2);
    expect(batch.labels.length).toBe(count * 2 * m * s);
    expect(batch.truth.length).toBe(count * 2 * m * s);
    assertFinite(batch.inputs, "inputs");
    assertFinite(batch.labels, "labels");
    assertFinite(batch.truth, "truth");
    for (let r = 0; r < count; r++) {
      expect(SNR_GRID).toContain(batch.snrDb[r]);
      expect(batch.userId[r]).toBeGreaterThanOrEqual(0);
      expect(batch.userId[r]).toBeLessThan(9);
      expect(batch.blockId[r]).toBeGreaterThanOrEqual(0);
      expect(batch.blockId[r]).toBeLessThan(9);
    }
    // scenario ids identify records uniquely within the split
    expect(new Set(batch.scenarioId).size).toBe(count);
  });

  it("rejects a payload that disagrees with its header", () => {
    const batch = loadRecords(base);
    const clipped = path.join(dir, "clipped");
    fs.copyFileSync(`${base}.header.json`, `${clipped}.header.json`);
    const whole = fs.readFileSync(`${base}.records.bin`);
    fs.writeFileSync(`${clipped}.records.bin`, whole.subarray(0, whole.length - 8));
    expect(() => loadRecords(clipped)).toThrow(/header implies/);
    expect(batch.header.record_count).toBeGreaterThan(0);
  });

  it("rejects an unknown schema tag", () => {
    const renamed = path.join(dir, "badschema");
    const doc = JSON.parse(fs.readFileSync(`${base}.header.json`, "utf-8"));
    doc.schema_version = "someone.else.v9";
    fs.writeFileSync(`${renamed}.header.json`, JSON.stringify(doc));
    fs.copyFileSync(`${base}.records.bin`, `${renamed}.records.bin`);
    expect(() => readDatasetHeader(renamed)).toThrow(/unsupported dataset schema/);
  });
});

describe("prediction interchange", () => {
  const dir = deskDataset(20, 11);
  const base = path.join(dir, "dataset.test");

  it("writes predictions the reference scorer accepts and scores", () => {
    const batch = loadRecords(base);
    const { m, s } = batch.header;
    const predBase = path.join(dir, "roundtrip", "predictions");
    writePredictions(
      predBase,
      { scenarioId: batch.scenarioId, blockId: batch.blockId, userId: batch.userId },
      batch.labels,
      m,
      s,
      batch.header.config_digest,
    );

    const score = scoreImport(predBase, base, path.join(dir, "roundtrip"));
    expect(score.records).toBe(batch.header.record_count);
    expect(score.config_digest).toBe(batch.header.config_digest);
    // labels submitted as predictions must match the stored labels exactly
    expect(score.nmse_vs_labels).toBe(0);
    // and the scorer's truth distance must match our own reader's arithmetic
    const all = Array.from({ length: batch.header.record_count }, (_, i) => i);
    const local = nmseOver(batch.labels, batch.truth, 2 * m * s, all);
    expect(Math.abs(score.nmse_vs_truth - local) / local).toBeLessThan(1e-6);
    for (const key of Object.keys(score.per_snr)) {
      expect(SNR_GRID).toContain(Number(key));
    }
  });

  it("emits the documented header shape", () => {
    const predBase = path.join(dir, "headercheck", "predictions");
    const ids = {
      scenarioId: Int32Array.from([3, 1]),
      blockId: Int32Array.from([0, 4]),
      userId: Int32Array.from([2, 2]),
    };
    writePredictions(predBase, ids, new Float64Array(2 * 2 * 6), 2, 3, "cafe0123");
    const text = fs.readFileSync(`${predBase}.header.json`, "utf-8");
    expect(text.endsWith("\n")).toBe(true);
    const doc = JSON.parse(text);
    expect(doc).toEqual({
      config_digest: "cafe0123",
      m: 2,
      record_count: 2,
      s: 3,
      schema_version: PREDICTION_SCHEMA,
    });
    // keys are serialized in sorted order to keep the files diff-stable
    expect(Object.keys(doc)).toEqual(["config_digest", "m", "record_count", "s", "schema_version"]);
  });

  it("rejects prediction arrays that disagree with the id columns", () => {
    const ids = {
      scenarioId: Int32Array.from([0, 1, 2]),
      blockId: new Int32Array(3),
      userId: new Int32Array(3),
    };
    expect(() =>
      writePredictions(path.join(dir, "never", "p"), ids, new Float64Array(10), 2, 3, "x"),
    ).toThrow(/records of/);
  });
});
