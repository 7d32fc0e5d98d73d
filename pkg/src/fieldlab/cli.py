"""Command-line front end: reproducible experiments emitting CSV/JSON.

Every command is a pure function of (config, seed): all randomness flows
through named substreams of the seed, outputs carry the config digest, and
re-running a command overwrites its files with identical bytes.  CSV files
open with a comment line

    # fieldlab-csv schema=<command>.v1 config=<digest> seed=<seed>

pinning the schema version; a run-meta.json in the output directory lists
the files a run produced.  Failures exit nonzero after printing a one-line
JSON error envelope on stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import dataset_io
from .airlink import amplification_gain, design_pilots, synthesize_rx_frame, \
    synthesize_rx_subframe
from .block_planner import error_ladder, solve_quintic
from .channels import block_permutation, cascaded, ff_channel_g, nf_channel
from .crlb import ApFactors, crlb_general, crlb_report, per_entry_noise_var
from .estimators import ChannelStats, empirical_mse, ls_block, ls_full, lmmse, \
    noise_block_covariance, pilot_gram_eigenvalues
from .power_alloc import mse_coefficients, mse_from_coefficients, optimal_beta
from .sysmodel import (
    BlockPlan,
    ConfigError,
    ScenarioConfig,
    SystemConfig,
    draw_placement,
    draw_surface_link_angles,
    load_config,
    rng_stream,
    sample_path_gain,
    validate_plan,
)

_DEFAULT_BETA_GRID = tuple(round(b, 2) for b in np.linspace(0.05, 0.95, 19))


def _write_csv(path: str, command: str, digest: str, seed: int, columns: list,
               rows: list) -> str:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# fieldlab-csv schema={command}.v1 config={digest} seed={seed}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(v) for v in row) + "\n")
    return path


def _format_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".10g")


def _write_meta(out_dir: str, command: str, digest: str, seed: int,
                outputs: list) -> None:
    meta = {"command": command, "config_digest": digest, "seed": seed,
            "outputs": [os.path.basename(p) for p in outputs]}
    with open(os.path.join(out_dir, "run-meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _draw_link(cfg: SystemConfig, scenario: ScenarioConfig, rng) -> tuple:
    """One (placement, surface matrix) scenario draw shared by the sweeps."""
    placement = draw_placement(cfg, scenario, rng)
    angles = draw_surface_link_angles(scenario, rng)
    eta_g = sample_path_gain(rng, scenario.d_g_m, cfg.wavelength_m,
                             scenario.path_exponent)
    return placement, ff_channel_g(cfg, eta_g, *angles)


def run_paf_sweep(cfg: SystemConfig, scenario: ScenarioConfig, out_dir: str,
                  seed: int, beta_grid=None, draws: int = 200) -> str:
    """MSE versus the power-allocation factor, one curve per surface noise level.

    Emits the closed-form curve, a Monte-Carlo check, and the closed-form
    optimum per curve; the two curves cover the regime flip (surface noise
    at the receiver level vs three orders below it).
    """
    betas = tuple(beta_grid) if beta_grid else _DEFAULT_BETA_GRID
    if not betas or not all(0.0 < b < 1.0 for b in betas):
        raise ConfigError("beta grid must be non-empty inside (0,1)")
    rng = rng_stream(seed, "paf-sweep")
    placement, g = _draw_link(cfg, scenario, rng)
    f = nf_channel(placement, cfg, "exact-distance")
    h = cascaded(g, f)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed)
    rows = []
    for level, sigma2_irs in enumerate((cfg.sigma2_irs_w, cfg.sigma2_irs_w * 1e-3)):
        cfg_level = replace(cfg, sigma2_irs_w=sigma2_irs)
        coeff = mse_coefficients(cfg_level, g, f, frame)
        beta_opt = optimal_beta(coeff).beta_opt
        marker_idx = int(np.argmin([abs(b - beta_opt) for b in betas]))
        for j, beta in enumerate(betas):
            cfg_point = replace(cfg_level, beta=float(beta))
            mc_rng = rng_stream(seed, "paf-mc", level, j)
            total = 0.0
            for _ in range(draws):
                rx = synthesize_rx_frame(cfg_point, h, g, f, frame,
                                         int(mc_rng.integers(2**63)))
                est = ls_full(frame, rx, cfg_point, h_true=h.matrix_h)
                total += est.mse_vs_truth
            rows.append((sigma2_irs, beta, mse_from_coefficients(coeff, beta),
                         total / draws, beta_opt, int(j == marker_idx)))
    path = _write_csv(os.path.join(out_dir, "paf-sweep.csv"), "paf-sweep",
                      cfg.digest(), seed,
                      ["sigma2_irs_w", "beta", "mse_analytic", "mse_monte_carlo",
                       "beta_opt", "is_argmin"], rows)
    _write_meta(out_dir, "paf-sweep", cfg.digest(), seed, [path])
    return path


def run_k_sweep(cfg: SystemConfig, scenario: ScenarioConfig, out_dir: str,
                seed: int) -> str:
    """Approximation/estimation/total error along the feasible block ladder.

    The optimal row is the exhaustive argmin of the exact totals; the
    closed-form count from the polynomial pipeline, with constants read off
    at that plan, is repeated in its own column for comparison.
    """
    rng = rng_stream(seed, "k-sweep")
    placement, g = _draw_link(cfg, scenario, rng)
    budgets = error_ladder(placement, cfg, g, seed)
    best = min(range(len(budgets)), key=lambda i: (budgets[i].eps_total, budgets[i].k))
    ladder = [b.k for b in budgets]
    ref = budgets[best]
    k_closed = solve_quintic(ref.c2, ref.c3, cfg.n_elements,
                             ladder=ladder).k_opt_feasible
    rows = [(b.k, b.eps_approx_direct, b.eps_approx_closed, b.eps_est,
             b.eps_total, int(i == best), k_closed)
            for i, b in enumerate(budgets)]
    path = _write_csv(os.path.join(out_dir, "k-sweep.csv"), "k-sweep",
                      cfg.digest(), seed,
                      ["k", "eps_approx_direct", "eps_approx_closed", "eps_est",
                       "eps_total", "is_optimal", "k_opt_closed"], rows)
    _write_meta(out_dir, "k-sweep", cfg.digest(), seed, [path])
    return path


def _scenario_plan(cfg: SystemConfig, scenario: ScenarioConfig) -> BlockPlan:
    plan = BlockPlan(k_y=scenario.plan_k_y, k_z=scenario.plan_k_z,
                     s_y=cfg.n_y // scenario.plan_k_y,
                     s_z=cfg.n_z // scenario.plan_k_z)
    validate_plan(cfg, plan)
    return plan


def run_mse_vs_snr(cfg: SystemConfig, scenario: ScenarioConfig, out_dir: str,
                   seed: int, draws: int = 300, pred_files=None,
                   data_files=None) -> str:
    """Estimator error versus SNR under the sub-block training protocol.

    LS and linear-MMSE run on freshly synthesized sub-frames of block 0 of
    the scenario partition; the bound column is the averaged general-form
    bound for the same draws.  With an imported prediction file (scored
    against its dataset) the external estimator's per-SNR NMSE-vs-truth
    joins the table, rescaled into the same mean-squared-error units.
    """
    plan = _scenario_plan(cfg, scenario)
    s = plan.s_total
    frame = design_pilots(s, cfg.q2, seed)
    cols = block_permutation(cfg, plan)[:s]
    power_k = cfg.total_power_w / plan.k_total
    scale = np.sqrt(cfg.beta * power_k)

    stats_rng = rng_stream(seed, "snr-stats")
    train_h = []
    for _ in range(max(200, 4 * s * cfg.m_antennas)):
        placement, g = _draw_link(cfg, scenario, stats_rng)
        f = nf_channel(placement, cfg, "exact-distance")
        train_h.append(g.matrix_g[:, cols] * f.vector_f[cols][None, :])
    base_stats = ChannelStats.from_samples(train_h)

    imported = _imported_per_snr(pred_files, data_files) if pred_files else {}
    rows = []
    for snr_db in scenario.snr_grid_db:
        mc_rng = rng_stream(seed, "snr-mc", f"{snr_db:g}")
        ls_total = lmmse_total = bound_total = analytic_total = 0.0
        for _ in range(draws):
            placement, g = _draw_link(cfg, scenario, mc_rng)
            f = nf_channel(placement, cfg, "exact-distance")
            g_k = g.matrix_g[:, cols]
            h_k = g_k * f.vector_f[cols][None, :]
            rho = amplification_gain(cfg.beta, power_k, f.vector_f[cols],
                                     frame.phase_schedule[:, 0], cfg.sigma2_irs_w)
            signal = rho * scale * (h_k @ (frame.phase_schedule
                                           * frame.pilot_symbols[None, :]))
            sigma2_rec = float(np.mean(np.abs(signal) ** 2)) / 10.0 ** (snr_db / 10.0)
            rx = synthesize_rx_subframe(cfg, plan, 0, h_k, g_k, frame,
                                        int(mc_rng.integers(2**63)),
                                        sigma2_bs_w=sigma2_rec)
            ls_total += ls_block(frame, rx, cfg, plan, h_true=h_k).mse_vs_truth
            stats = ChannelStats(
                mean_vec=base_stats.mean_vec, cov=base_stats.cov,
                noise_block_cov=noise_block_covariance(
                    cfg, g_k, frame, rho, sigma2_bs_w=sigma2_rec))
            est = lmmse(frame, rx, cfg, stats, h_true=h_k)
            lmmse_total += empirical_mse(est.h_hat, h_k, s)
            cfg_row = replace(cfg, sigma2_bs_w=sigma2_rec)
            factors = ApFactors(
                gram_eigenvalues=pilot_gram_eigenvalues(frame),
                m_antennas=cfg.m_antennas, rho=rho, beta=cfg.beta,
                total_power_w=power_k)
            half_var = per_entry_noise_var(cfg_row, g_k, frame, rho) / 2.0
            bound_total += crlb_general(factors, half_var) / s
            gv = g_k @ frame.phase_schedule
            tau_inv = float(np.sum(1.0 / pilot_gram_eigenvalues(frame)))
            noise_tr = (rho**2 * cfg.sigma2_irs_w * float(np.sum(np.abs(gv) ** 2))
                        + cfg.m_antennas * sigma2_rec)
            analytic_total += noise_tr * tau_inv / (rho**2 * cfg.beta * power_k) / s
        row = [snr_db, ls_total / draws, lmmse_total / draws, bound_total / draws,
               analytic_total / draws]
        row.append(imported.get(float(snr_db), float("nan")))
        rows.append(tuple(row))
    path = _write_csv(os.path.join(out_dir, "mse-vs-snr.csv"), "mse-vs-snr",
                      cfg.digest(), seed,
                      ["snr_db", "ls_mse", "lmmse_mse", "crlb_general",
                       "ls_mse_analytic", "imported_nmse"], rows)
    _write_meta(out_dir, "mse-vs-snr", cfg.digest(), seed, [path])
    return path


def _imported_per_snr(pred_files, data_files) -> dict:
    if data_files is None:
        raise ConfigError("imported predictions need the dataset they answer")
    metrics = eval_import(pred_files, data_files)
    return {float(k): v["nmse_vs_truth"] for k, v in metrics["per_snr"].items()}


def run_crlb(cfg: SystemConfig, scenario: ScenarioConfig, out_dir: str,
             seed: int, draws: int = 500) -> str:
    """Bound-vs-LS table for the full-frame protocol across the SNR grid."""
    frame = design_pilots(cfg.n_elements, cfg.q1, seed)
    rows = []
    for snr_db in scenario.snr_grid_db:
        mc_rng = rng_stream(seed, "crlb-mc", f"{snr_db:g}")
        ls_total = general_total = closed_total = 0.0
        for _ in range(draws):
            placement, g = _draw_link(cfg, scenario, mc_rng)
            f = nf_channel(placement, cfg, "exact-distance")
            h = cascaded(g, f)
            rho = amplification_gain(cfg.beta, cfg.total_power_w, f,
                                     frame.phase_schedule[:, 0], cfg.sigma2_irs_w)
            signal = rho * np.sqrt(cfg.beta * cfg.total_power_w) * (
                h.matrix_h @ (frame.phase_schedule * frame.pilot_symbols[None, :]))
            sigma2_rec = float(np.mean(np.abs(signal) ** 2)) / 10.0 ** (snr_db / 10.0)
            cfg_row = replace(cfg, sigma2_bs_w=sigma2_rec)
            rx = synthesize_rx_frame(cfg_row, h, g, f, frame,
                                     int(mc_rng.integers(2**63)))
            est = ls_full(frame, rx, cfg_row, h_true=h.matrix_h)
            ls_total += est.mse_vs_truth * cfg.n_elements
            report = crlb_report(cfg_row, g, frame, rho)
            general_total += report.general_form_value
            closed_total += report.closed_form_value
        rows.append((snr_db, general_total / draws, closed_total / draws,
                     ls_total / draws))
    path = _write_csv(os.path.join(out_dir, "crlb.csv"), "crlb", cfg.digest(),
                      seed, ["snr_db", "crlb_general", "crlb_closed", "ls_mse"],
                      rows)
    _write_meta(out_dir, "crlb", cfg.digest(), seed, [path])
    return path


def run_gen_dataset(cfg: SystemConfig, scenario: ScenarioConfig, out_dir: str,
                    seed: int, count: int | None = None) -> list:
    """Generate the labeled dataset and its stratified train/test split."""
    plan = _scenario_plan(cfg, scenario)
    per_user = scenario.records_per_user if count is None else int(count)
    base = os.path.join(out_dir, "dataset")
    paths = list(dataset_io.generate_dataset(cfg, scenario, plan, per_user,
                                             seed, base))
    train, test = dataset_io.split_dataset(base, scenario.train_fraction)
    paths.extend(train)
    paths.extend(test)
    _write_meta(out_dir, "gen-dataset", cfg.digest(), seed, paths)
    return paths


def eval_import(pred_files, data_files) -> dict:
    """Score an external prediction file against the dataset it answers.

    Joins on scenario_id, then reports NMSE against the ground truth and
    against the LS labels, overall and per SNR value.
    """
    batch = dataset_io.load_records(data_files)
    preds = dataset_io.load_predictions(pred_files)
    if preds["h_pred"].shape[1:] != batch.h_true.shape[1:]:
        raise dataset_io.DatasetFormatError(
            f"prediction shape {preds['h_pred'].shape[1:]} does not match "
            f"dataset records {batch.h_true.shape[1:]}")
    order = {int(sid): i for i, sid in enumerate(batch.scenario_id)}
    try:
        align = np.array([order[int(sid)] for sid in preds["scenario_id"]])
    except KeyError as exc:
        raise dataset_io.DatasetFormatError(
            f"prediction record id {exc} not present in the dataset") from None
    if len(align) != len(batch):
        raise dataset_io.DatasetFormatError(
            f"{len(align)} predictions for {len(batch)} dataset records")

    h_pred = preds["h_pred"]
    h_true = batch.h_true[align]
    h_label = batch.h_label_ls[align]
    snr = batch.snr_db[align]

    def nmse(ref: np.ndarray, mask=None) -> float:
        sel = slice(None) if mask is None else mask
        err = np.sum(np.abs(h_pred[sel] - ref[sel]) ** 2)
        return float(err / np.sum(np.abs(ref[sel]) ** 2))

    per_snr = {}
    for value in sorted(set(snr.tolist())):
        mask = snr == value
        per_snr[f"{value:g}"] = {
            "records": int(mask.sum()),
            "nmse_vs_truth": nmse(h_true, mask),
            "nmse_vs_labels": nmse(h_label, mask),
        }
    return {
        "records": len(batch),
        "config_digest": batch.header.config_digest,
        "nmse_vs_truth": nmse(h_true),
        "nmse_vs_labels": nmse(h_label),
        "per_snr": per_snr,
    }


def run_eval_import(out_dir: str, pred_files, data_files) -> str:
    metrics = eval_import(pred_files, data_files)
    path = os.path.join(out_dir, "eval-import.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_meta(out_dir, "eval-import", metrics["config_digest"], 0, [path])
    return path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldlab",
        description="reproducible channel-estimation experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config (system/scenario sections)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="64-bit run seed")

    p = sub.add_parser("paf-sweep", help="MSE vs power-allocation factor")
    common(p)
    p.add_argument("--grid", help="comma-separated beta grid")
    p.add_argument("--draws", type=int, default=200)

    p = sub.add_parser("k-sweep", help="error budgets vs sub-block count")
    common(p)

    p = sub.add_parser("mse-vs-snr", help="estimator error vs SNR")
    common(p)
    p.add_argument("--draws", type=int, default=300)
    p.add_argument("--import-pred", dest="import_pred",
                   help="prediction file base to include")
    p.add_argument("--data", help="dataset base the predictions answer")

    p = sub.add_parser("crlb", help="bound vs LS across SNR")
    common(p)
    p.add_argument("--draws", type=int, default=500)

    p = sub.add_parser("gen-dataset", help="generate + split labeled dataset")
    common(p)
    p.add_argument("--count", type=int, help="records per user override")

    p = sub.add_parser("eval-import", help="score external predictions")
    common(p)
    p.add_argument("--pred", required=True, help="prediction file base")
    p.add_argument("--data", required=True, help="dataset file base")
    return parser


def _dispatch(args) -> None:
    if args.command != "eval-import" and args.seed is not None and \
            not 0 <= args.seed < 2**64:
        raise ConfigError("seed must fit in 64 bits")
    os.makedirs(args.out, exist_ok=True)
    cfg, scenario = load_config(args.config) if args.config else \
        (SystemConfig(), ScenarioConfig())
    if args.command == "paf-sweep":
        grid = [float(v) for v in args.grid.split(",")] if args.grid else None
        run_paf_sweep(cfg, scenario, args.out, args.seed, beta_grid=grid,
                      draws=args.draws)
    elif args.command == "k-sweep":
        run_k_sweep(cfg, scenario, args.out, args.seed)
    elif args.command == "mse-vs-snr":
        run_mse_vs_snr(cfg, scenario, args.out, args.seed, draws=args.draws,
                       pred_files=args.import_pred, data_files=args.data)
    elif args.command == "crlb":
        run_crlb(cfg, scenario, args.out, args.seed, draws=args.draws)
    elif args.command == "gen-dataset":
        run_gen_dataset(cfg, scenario, args.out, args.seed, count=args.count)
    elif args.command == "eval-import":
        run_eval_import(args.out, args.pred, args.data)


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        _dispatch(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
