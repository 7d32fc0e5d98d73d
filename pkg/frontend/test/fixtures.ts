/**
 * Test fixtures backed by the fieldlab command line.
 *
 * Datasets come from `fieldlab gen-dataset` with the repo's desk-scale
 * configuration, and imported predictions are scored with
 * `fieldlab eval-import`; the estimator under test talks to the generator
 * package only through these commands and the binary file formats.
 * Generation is deterministic per (seed, count), so fixture directories are
 * cached and reused across test runs.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";

export const REPO_ROOT = path.resolve(new URL(".", import.meta.url).pathname, "../..");
export const DESK_CONFIG = path.join(REPO_ROOT, "configs", "desk.json");
const CACHE_DIR = path.join(REPO_ROOT, "frontend", "test", ".fixtures");

let cachedCli: string[] | null = null;

/** Locate the fieldlab CLI: console script if installed, module otherwise. */
export function fieldlabCli(): string[] {
  if (cachedCli !== null) return cachedCli;
  try {
    execFileSync("fieldlab", ["--help"], { stdio: "ignore" });
    cachedCli = ["fieldlab"];
  } catch {
    cachedCli = ["python3", "-m", "fieldlab.cli"];
  }
  return cachedCli;
}

function runCli(args: string[]): string {
  const [head, ...rest] = fieldlabCli();
  return execFileSync(head, [...rest, ...args], { encoding: "utf-8" });
}

/**
 * Generate (or reuse) a desk-config dataset with `count` records per user.
 * Returns the output directory holding dataset, dataset.train, dataset.test.
 */
export function deskDataset(count: number, seed: number): string {
  const dir = path.join(CACHE_DIR, `desk-c${count}-s${seed}`);
  if (!fs.existsSync(path.join(dir, "dataset.test.records.bin"))) {
    fs.rmSync(dir, { recursive: true, force: true });
    runCli([
      "gen-dataset",
      "--config", DESK_CONFIG,
      "--out", dir,
      "--seed", String(seed),
      "--count", String(count),
    ]);
  }
  return dir;
}

export interface ImportScore {
  records: number;
  config_digest: string;
  nmse_vs_truth: number;
  nmse_vs_labels: number;
  per_snr: Record<string, { records: number; nmse_vs_truth: number; nmse_vs_labels: number }>;
}

/** Score a prediction file pair against a dataset pair via eval-import. */
export function scoreImport(predBase: string, dataBase: string, outDir: string): ImportScore {
  runCli(["eval-import", "--pred", predBase, "--data", dataBase, "--out", outDir]);
  return JSON.parse(
    fs.readFileSync(path.join(outDir, "eval-import.json"), "utf-8"),
  ) as ImportScore;
}
