/**
 * Package-level checks covering the two headline guarantees.
 *
 *  1. Attention correctness: softmax weight rows are probability
 *     distributions (each row sums to one within 1e-6) for every head on
 *     every batch, and the analytic gradients of the encoder, attention,
 *     and decoder blocks each agree with central finite differences to
 *     better than 1e-4 relative in double precision.
 *  2. Desk-scale training: a 30-epoch run over the full desk dataset
 *     (9 users x 250 records) with the pinned default configuration cuts
 *     validation loss at least in half relative to epoch 1, and the trained
 *     model's ground-truth NMSE on the held-out split beats the
 *     least-squares labels at the lowest configured SNR.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import { describe, expect, it } from "vitest";

import { loadRecords, writePredictions } from "../src/dataset.js";
import { Layer } from "../src/layers.js";
import { Caeformer, DEFAULT_NET_CONFIG } from "../src/model.js";
import { Rng } from "../src/rng.js";
import { Batch3, batch3, Param, zeroGrads } from "../src/tensor.js";
import { REPO_ROOT, deskDataset, scoreImport } from "./fixtures.js";
import { coordinateCheck, directionalCheck, randomFill } from "./gradcheck.js";

const CLI = path.join(REPO_ROOT, "frontend", "dist", "cli.js");

function cli(args: string[]): string {
  return execFileSync("node", [CLI, ...args], { encoding: "utf-8" });
}

/** Anything with the layer contract: the attention block qualifies too. */
interface BlockLike {
  forward(x: Batch3, training: boolean): Batch3;
  backward(gradOut: Batch3): Batch3;
  params(): Param[];
}

function chainForward(blocks: BlockLike[], x: Batch3): Batch3 {
  let out = x;
  for (const block of blocks) out = block.forward(out, true);
  return out;
}

/**
 * Verify a block's analytic gradients against central finite differences:
 * the whole-block directional derivative must agree to better than 1e-4
 * relative, and sampled per-coordinate derivatives must agree to the same
 * tolerance above the cancellation-noise floor.
 */
function checkBlockGradients(blocks: BlockLike[], x: Batch3, seed: bigint): void {
  const params = blocks.flatMap((b) => b.params());
  const base = chainForward(blocks, x);
  const probe = new Float64Array(base.data.length);
  randomFill(probe, new Rng(seed, "probe"));
  const loss = () => {
    const out = chainForward(blocks, x);
    let acc = 0;
    for (let i = 0; i < probe.length; i++) acc += probe[i] * out.data[i];
    return acc;
  };

  zeroGrads(params);
  const out = chainForward(blocks, x);
  let grad = batch3(out.n, out.rows, out.cols);
  grad.data.set(probe);
  for (let i = blocks.length - 1; i >= 0; i--) grad = blocks[i].backward(grad);

  expect(directionalCheck(loss, params, new Rng(seed, "direction"))).toBeLessThan(1e-4);
  const report = coordinateCheck(loss, params, new Rng(seed, "coordinate"));
  expect(report.checked).toBeGreaterThan(0);
  expect(report.worstRelative).toBeLessThan(1e-4);
}

describe("attention correctness", () => {
  it("softmax weight rows sum to one for every head on every batch", () => {
    for (const [len, batchSize] of [
      [9, 5],
      [81, 3],
    ]) {
      const model = new Caeformer(DEFAULT_NET_CONFIG, len, len, new Rng(7n, "model"));
      const x = batch3(batchSize, 2, len);
      randomFill(x.data, new Rng(13n, "input"));
      model.forward(x, true);

      const w = model.attention.mha.lastWeights();
      expect(w.n).toBe(batchSize);
      expect(w.heads).toBe(DEFAULT_NET_CONFIG.heads);
      const rows = w.data.length / w.seqLen;
      expect(rows).toBe(batchSize * DEFAULT_NET_CONFIG.heads * w.seqLen);
      for (let row = 0; row < rows; row++) {
        let sum = 0;
        for (let j = 0; j < w.seqLen; j++) {
          const v = w.data[row * w.seqLen + j];
          expect(v).toBeGreaterThanOrEqual(0);
          sum += v;
        }
        expect(Math.abs(sum - 1)).toBeLessThanOrEqual(1e-6);
      }
    }
  });

  it("encoder, attention, and decoder gradients match finite differences", () => {
    const started = Date.now();
    const model = new Caeformer(DEFAULT_NET_CONFIG, 9, 9, new Rng(21n, "model"));
    const bottleneck = model.encoderLengths[model.encoderLengths.length - 1];
    const features = DEFAULT_NET_CONFIG.widths[DEFAULT_NET_CONFIG.widths.length - 1];

    const encoderIn = batch3(3, 2, 9);
    randomFill(encoderIn.data, new Rng(31n, "encoder-in"));
    checkBlockGradients(model.encoder, encoderIn, 101n);

    // sequence-major input: positions along the bottleneck, feature channels last
    const attentionIn = batch3(3, bottleneck, features);
    randomFill(attentionIn.data, new Rng(37n, "attention-in"));
    checkBlockGradients([model.attention], attentionIn, 103n);

    const decoderIn = batch3(3, features, bottleneck);
    randomFill(decoderIn.data, new Rng(41n, "decoder-in"));
    checkBlockGradients(model.decoder, decoderIn, 107n);

    expect((Date.now() - started) / 1000).toBeLessThan(120);
  });
});

describe("desk-scale training", () => {
  it(
    "halves validation loss in 30 epochs and beats the least-squares labels at the lowest SNR",
    () => {
      const started = Date.now();
      const data = deskDataset(250, 424242);
      const out = path.join(data, "full-run");

      cli(["train", "--data", data, "--out", out, "--seed", "42"]);
      const log = JSON.parse(
        fs.readFileSync(path.join(out, "training-log.json"), "utf-8"),
      );
      expect(log.records).toBe(2025); // fitted 90% split of the 2250-record desk dataset
      expect(log.net).toEqual({ ...DEFAULT_NET_CONFIG });
      expect(log.curve).toHaveLength(DEFAULT_NET_CONFIG.epochs);
      const first = log.curve[0].val_loss;
      const last = log.curve[log.curve.length - 1].val_loss;
      expect(last).toBeLessThanOrEqual(0.5 * first);

      cli(["eval", "--data", data, "--out", out, "--seed", "42"]);
      const testBase = path.join(data, "dataset.test");
      const net = scoreImport(
        path.join(out, "predictions"),
        testBase,
        path.join(out, "net-score"),
      );
      expect(net.records).toBe(225);
      expect(log.records + net.records).toBe(2250); // the full desk dataset

      // least-squares baseline: feed the labels back in as predictions
      const batch = loadRecords(testBase);
      const lsBase = path.join(out, "ls-baseline");
      writePredictions(
        lsBase,
        { scenarioId: batch.scenarioId, blockId: batch.blockId, userId: batch.userId },
        batch.labels,
        batch.header.m,
        batch.header.s,
        batch.header.config_digest,
      );
      const ls = scoreImport(lsBase, testBase, path.join(out, "ls-score"));
      expect(ls.nmse_vs_labels).toBe(0);

      const lowest = Math.min(...Object.keys(net.per_snr).map(Number));
      const key = String(lowest);
      expect(net.per_snr[key].records).toBeGreaterThan(0);
      expect(net.per_snr[key].nmse_vs_truth).toBeLessThan(ls.per_snr[key].nmse_vs_truth);

      expect((Date.now() - started) / 1000).toBeLessThan(3 * 3600);
    },
    15 * 60_000,
  );
});
