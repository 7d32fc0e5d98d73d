#!/usr/bin/env node
/**
 * Command-line entry points.
 *
 *   caeformer train --data <dir> --out <dir> --seed <u64> [--epochs N] [--batch N]
 *   caeformer eval  --data <dir> --out <dir> --seed <u64> [--model <file>]
 *
 * `train` reads `<data>/dataset.train.{header.json,records.bin}`, fits the
 * network, and writes `model.checkpoint.json` plus `training-log.json` into
 * the output directory.  `eval` reads `<data>/dataset.test.*` and the
 * checkpoint, then writes `predictions.{header.json,records.bin}` in the
 * dataset interchange convention together with `metrics.json`.  Failures
 * print a one-line JSON error envelope on stdout and exit 1.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { parseArgs } from "node:util";

import { loadRecords, writePredictions } from "./dataset.js";
import { DEFAULT_NET_CONFIG, NetConfig } from "./model.js";
import { parseSeed } from "./rng.js";
import {
  loadCheckpoint,
  metrics,
  predict,
  saveCheckpoint,
  train,
} from "./train.js";

const USAGE = `usage: caeformer <train|eval> --data <dir> --out <dir> --seed <u64>
                 [--epochs N] [--batch N] [--model <checkpoint>]`;

function writeJson(file: string, doc: unknown): void {
  fs.mkdirSync(path.dirname(path.resolve(file)), { recursive: true });
  fs.writeFileSync(file, `${JSON.stringify(doc, null, 2)}\n`);
}

function runTrain(data: string, out: string, seed: bigint, overrides: Partial<NetConfig>): void {
  const batch = loadRecords(path.join(data, "dataset.train"));
  const cfg: NetConfig = { ...DEFAULT_NET_CONFIG, ...overrides };
  const result = train(batch, cfg, seed, {
    onEpoch: (stats) =>
      process.stdout.write(
        `epoch ${stats.epoch}/${cfg.epochs} lr ${stats.lr.toExponential(2)} ` +
          `train ${stats.trainLoss.toFixed(6)} val ${stats.valLoss.toFixed(6)}\n`,
      ),
  });
  fs.mkdirSync(out, { recursive: true });
  saveCheckpoint(path.join(out, "model.checkpoint.json"), result, batch, seed);
  writeJson(path.join(out, "training-log.json"), {
    command: "train",
    seed: seed.toString(),
    config_digest: batch.header.config_digest,
    records: batch.header.record_count,
    fit_records: result.split.fit.length,
    val_records: result.split.val.length,
    net: cfg,
    input_scale: result.scales.inputScale,
    label_scale: result.scales.labelScale,
    curve: result.curve.map((c) => ({
      epoch: c.epoch,
      lr: c.lr,
      train_loss: c.trainLoss,
      val_loss: c.valLoss,
    })),
  });
}

function runEval(data: string, out: string, seed: bigint, modelPath: string | undefined): void {
  const checkpoint = modelPath ?? path.join(out, "model.checkpoint.json");
  const loaded = loadCheckpoint(checkpoint);
  const batch = loadRecords(path.join(data, "dataset.test"));
  if (batch.header.config_digest !== loaded.configDigest) {
    throw new Error(
      `dataset digest ${batch.header.config_digest} does not match ` +
        `checkpoint digest ${loaded.configDigest}`,
    );
  }
  const hPred = predict(loaded.model, batch, loaded.scales);
  fs.mkdirSync(out, { recursive: true });
  writePredictions(
    path.join(out, "predictions"),
    { scenarioId: batch.scenarioId, blockId: batch.blockId, userId: batch.userId },
    hPred,
    batch.header.m,
    batch.header.s,
    batch.header.config_digest,
  );
  const report = metrics(batch, hPred);
  writeJson(path.join(out, "metrics.json"), {
    command: "eval",
    seed: seed.toString(),
    ...report,
  });
  process.stdout.write(
    `eval: ${report.records} records nmse_vs_truth ${report.nmse_vs_truth.toFixed(6)} ` +
      `nmse_vs_labels ${report.nmse_vs_labels.toFixed(6)}\n`,
  );
}

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        data: { type: "string" },
        out: { type: "string" },
        seed: { type: "string", default: "0" },
        epochs: { type: "string" },
        batch: { type: "string" },
        model: { type: "string" },
      },
    });
  } catch (err) {
    process.stderr.write(`${USAGE}\n${(err as Error).message}\n`);
    return 2;
  }
  const command = parsed.positionals[0];
  const { data, out } = parsed.values;
  if ((command !== "train" && command !== "eval") || !data || !out) {
    process.stderr.write(`${USAGE}\n`);
    return 2;
  }
  try {
    const seed = parseSeed(parsed.values.seed ?? "0");
    if (command === "train") {
      const overrides: Partial<NetConfig> = {};
      if (parsed.values.epochs !== undefined) {
        overrides.epochs = Number(parsed.values.epochs);
      }
      if (parsed.values.batch !== undefined) {
        overrides.batchSize = Number(parsed.values.batch);
      }
      runTrain(data, out, seed, overrides);
    } else {
      runEval(data, out, seed, parsed.values.model);
    }
    return 0;
  } catch (err) {
    const e = err as Error;
    process.stdout.write(`${JSON.stringify({ error: e.constructor.name, message: e.message })}\n`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${path.resolve(process.argv[1])}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
