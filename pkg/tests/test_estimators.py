"""Least-squares and LMMSE estimators: exactness, error statistics, scaling."""
from __future__ import annotations

import math
import time
import tracemalloc

import numpy as np
import pytest
import scipy.linalg

from conftest import (complex_randn, expected_ls_error, random_cascaded,
                      small_config)
from fieldlab import (
    ChannelStats,
    amplification_gain,
    analytic_mse_beta,
    block_pieces,
    c3_constant,
    cascaded,
    combined_schedule,
    design_pilots,
    empirical_mse,
    lmmse,
    ls_block,
    ls_full,
    noise_block_covariance,
    pilot_gram_eigenvalues,
    plan_for,
    rng_stream,
    synthesize_rx_frame,
    synthesize_rx_subframe,
)


# --------------------------------------------------------------- exactness

def test_ls_full_recovers_channel_without_noise():
    cfg = small_config(sigma2_bs_w=0.0, sigma2_irs_w=0.0)
    for seed in range(10):
        g, f, h = random_cascaded(cfg, seed=100 + seed)
        frame = design_pilots(cfg.n_elements, cfg.q1, seed=seed)
        rx = synthesize_rx_frame(cfg, h, g, f, frame, seed=seed)
        est = ls_full(frame, rx, cfg, h_true=h.matrix_h)
        rel = np.linalg.norm(est.h_hat - h.matrix_h) / np.linalg.norm(h.matrix_h)
        assert rel < 1e-8


def test_ls_block_recovers_every_sub_channel_without_noise():
    cfg = small_config(n_y=4, n_z=4, q1=16, q2=4, sigma2_bs_w=0.0, sigma2_irs_w=0.0)
    plan = plan_for(cfg, 2, 2)
    g, f, h = random_cascaded(cfg, seed=7)
    for k in range(plan.k_total):
        g_k, f_k, h_k = block_pieces(g, f, cfg, plan, k)
        frame_k = design_pilots(plan.s_total, cfg.q2, seed=3, block_index=k)
        rx = synthesize_rx_subframe(cfg, plan, k, h_k, g_k, frame_k, seed=k)
        est = ls_block(frame_k, rx, cfg, plan, h_true=h_k)
        assert np.linalg.norm(est.h_hat - h_k) / np.linalg.norm(h_k) < 1e-8


def test_ls_is_linear_in_the_observations():
    cfg = small_config()
    g, f, h = random_cascaded(cfg, seed=4)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=1)
    rx = synthesize_rx_frame(cfg, h, g, f, frame, seed=9)
    est = ls_full(frame, rx, cfg)
    scaled = type(rx)(observations=3.5 * rx.observations, rho_used=rx.rho_used,
                      noise_realization_seed=rx.noise_realization_seed)
    est_scaled = ls_full(frame, scaled, cfg)
    np.testing.assert_allclose(est_scaled.h_hat, 3.5 * est.h_hat, rtol=1e-10)


def test_block_estimate_equals_full_estimate_for_single_block_plan():
    cfg = small_config(q1=9, q2=9)
    plan = plan_for(cfg, 1, 1)
    g, f, h = random_cascaded(cfg, seed=12)
    frame = design_pilots(cfg.n_elements, cfg.q2, seed=6)
    g_k, f_k, h_k = block_pieces(g, f, cfg, plan, 0)
    rx = synthesize_rx_subframe(cfg, plan, 0, h_k, g_k, frame, seed=13)
    est_block = ls_block(frame, rx, cfg, plan, h_true=h_k)
    est_full = ls_full(frame, rx, cfg, h_true=h_k)
    np.testing.assert_allclose(est_block.h_hat, est_full.h_hat, rtol=1e-12)
    assert est_block.mse_vs_truth == pytest.approx(
        est_full.mse_vs_truth * cfg.n_elements / plan.s_total, rel=1e-12)


# --------------------------------------------------------- error statistics

def test_ls_error_energy_matches_trace_formula():
    cfg = small_config(m_y=2, m_z=2, sigma2_bs_w=3e-9, sigma2_irs_w=2e-9)
    g, f, h = random_cascaded(cfg, seed=40)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=2)
    draws = 10_000
    total = 0.0
    rho = None
    for i in range(draws):
        rx = synthesize_rx_frame(cfg, h, g, f, frame, seed=20_000 + i)
        rho = rx.rho_used
        est = ls_full(frame, rx, cfg)
        total += float(np.sum(np.abs(est.h_hat - h.matrix_h) ** 2))
    empirical = total / draws
    expected = expected_ls_error(cfg, g, frame, rho)
    assert abs(empirical - expected) / expected < 0.05


def test_ls_estimator_is_unbiased():
    cfg = small_config(m_y=2, m_z=2, sigma2_bs_w=2e-9, sigma2_irs_w=2e-9)
    g, f, h = random_cascaded(cfg, seed=41)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=3)
    draws = 10_000
    acc = np.zeros((cfg.m_antennas, cfg.n_elements), dtype=complex)
    rho = None
    for i in range(draws):
        rx = synthesize_rx_frame(cfg, h, g, f, frame, seed=50_000 + i)
        rho = rx.rho_used
        acc += ls_full(frame, rx, cfg).h_hat - h.matrix_h
    mean_err = acc / draws
    # whitened aggregate: rows share the per-slot noise covariance, columns the
    # pilot-gram scaling, so T below is chi-square with 2 N M degrees of freedom
    cov = noise_block_covariance(cfg, g, frame, rho)
    scale_sq = rho**2 * cfg.beta * cfg.total_power_w
    tau = pilot_gram_eigenvalues(frame)
    assert np.allclose(tau, tau[0], rtol=1e-9)
    chol = np.linalg.cholesky(cov)
    z = scipy.linalg.solve_triangular(chol, mean_err, lower=True)
    t_stat = 2.0 * draws * scale_sq * float(tau[0]) * float(np.sum(np.abs(z) ** 2))
    dof = 2 * cfg.n_elements * cfg.m_antennas
    assert t_stat < dof + 4.0 * math.sqrt(2.0 * dof)


def test_per_block_error_follows_quadratic_count_law():
    cfg = small_config(n_y=3, n_z=3, q1=9, q2=3, m_y=2, m_z=2,
                       sigma2_bs_w=4e-9, sigma2_irs_w=2e-9)
    plan = plan_for(cfg, 3, 3)      # nine single-element blocks
    g, f, h = random_cascaded(cfg, seed=42)
    k_total, n = plan.k_total, cfg.n_elements
    draws = 10_000
    frames, rhos, pieces = [], [], []
    for k in range(k_total):
        frame_k = design_pilots(plan.s_total, cfg.q2, seed=4, block_index=k)
        g_k, f_k, h_k = block_pieces(g, f, cfg, plan, k)
        rho_k = amplification_gain(cfg.beta, cfg.total_power_w / k_total, f_k,
                                   frame_k.phase_schedule[:, 0], cfg.sigma2_irs_w)
        frames.append(frame_k)
        rhos.append(rho_k)
        pieces.append((g_k, f_k, h_k))
    for k in range(k_total):
        g_k, f_k, h_k = pieces[k]
        total = 0.0
        for i in range(draws):
            rx = synthesize_rx_subframe(cfg, plan, k, h_k, g_k, frames[k],
                                        seed=70_000 + i)
            est = ls_block(frames[k], rx, cfg, plan)
            total += float(np.sum(np.abs(est.h_hat - h_k) ** 2))
        empirical = total / draws / n
        c3 = c3_constant(cfg, plan, g_k, frames[k], rhos[k])
        assert abs(empirical - c3 * k_total**2 / n) / (c3 * k_total**2 / n) < 0.05


# -------------------------------------------------------------------- LMMSE

def _scenario_stats(cfg, g, frame, rho, count, seed):
    samples = [random_cascaded(cfg, seed=seed + i)[2].matrix_h for i in range(count)]
    return ChannelStats.from_samples(
        np.stack(samples), noise_block_cov=noise_block_covariance(cfg, g, frame, rho))


def test_lmmse_with_zero_noise_equals_ls():
    cfg = small_config(sigma2_bs_w=0.0, sigma2_irs_w=0.0)
    g, f, h = random_cascaded(cfg, seed=50)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=5)
    rx = synthesize_rx_frame(cfg, h, g, f, frame, seed=8)
    stats = _scenario_stats(cfg, g, frame, rx.rho_used, count=60, seed=600)
    est_l = lmmse(frame, rx, cfg, stats)
    est_ls = ls_full(frame, rx, cfg)
    rel = np.linalg.norm(est_l.h_hat - est_ls.h_hat) / np.linalg.norm(est_ls.h_hat)
    assert rel < 1e-8


def test_lmmse_tends_to_ls_as_prior_variance_grows():
    cfg = small_config(sigma2_bs_w=1e-9, sigma2_irs_w=1e-9)
    g, f, h = random_cascaded(cfg, seed=51)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=5)
    rx = synthesize_rx_frame(cfg, h, g, f, frame, seed=9)
    est_ls = ls_full(frame, rx, cfg)
    dim = cfg.m_antennas * cfg.n_elements
    level = float(np.mean(np.abs(h.matrix_h) ** 2))
    noise_cov = noise_block_covariance(cfg, g, frame, rx.rho_used)
    gaps = []
    for boost in (1e2, 1e5, 1e8):
        stats = ChannelStats(mean_vec=np.zeros(dim, dtype=complex),
                             cov=boost * level * np.eye(dim, dtype=complex),
                             noise_block_cov=noise_cov)
        est = lmmse(frame, rx, cfg, stats)
        gaps.append(np.linalg.norm(est.h_hat - est_ls.h_hat)
                    / np.linalg.norm(est_ls.h_hat))
    assert gaps[1] < gaps[0] and gaps[2] < gaps[1]
    assert gaps[2] < 1e-5


def test_lmmse_beats_ls_at_unit_per_entry_snr():
    cfg = small_config(m_y=2, m_z=2, sigma2_irs_w=0.0)
    g, f, h = random_cascaded(cfg, seed=52)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=6)
    rho = amplification_gain(cfg.beta, cfg.total_power_w, f,
                             frame.phase_schedule[:, 0], cfg.sigma2_irs_w)
    scale = rho * math.sqrt(cfg.beta * cfg.total_power_w)
    signal = scale * (h.matrix_h @ combined_schedule(frame))
    sigma2 = float(np.mean(np.abs(signal) ** 2))       # per-entry SNR of 0 dB
    cfg0 = small_config(m_y=2, m_z=2, sigma2_irs_w=0.0, sigma2_bs_w=sigma2)
    stats = _scenario_stats(cfg0, g, frame, rho, count=400, seed=800)
    ls_total, lmmse_total = 0.0, 0.0
    for i in range(1000):
        g_i, f_i, h_i = random_cascaded(cfg0, seed=3000 + i)
        rx = synthesize_rx_frame(cfg0, h_i, g_i, f_i, frame, seed=4000 + i)
        ls_total += ls_full(frame, rx, cfg0, h_true=h_i.matrix_h).mse_vs_truth
        lmmse_total += lmmse(frame, rx, cfg0, stats, h_true=h_i.matrix_h).mse_vs_truth
    assert lmmse_total < ls_total


# ---------------------------------------------------- error conventions

def test_empirical_mse_conventions():
    h = complex_randn(rng_stream(1, "mse-conv"), (3, 4))
    assert empirical_mse(h, h, normalizer=4) == 0.0
    u = np.ones((2, 8), dtype=complex) / math.sqrt(2.0)   # ||u||^2 = 8
    assert empirical_mse(u, np.zeros((2, 8)), normalizer=8) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        empirical_mse(np.zeros((2, 2)), np.zeros((2, 3)), normalizer=2)


def test_analytic_mse_equals_trace_formula_across_beta():
    cfg = small_config(m_y=2, m_z=2, sigma2_bs_w=2e-9, sigma2_irs_w=8e-10)
    g, f, h = random_cascaded(cfg, seed=60)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=7)
    rng = rng_stream(61, "beta-grid")
    from dataclasses import replace
    for beta in rng.uniform(0.02, 0.98, size=100):
        cfg_b = replace(cfg, beta=float(beta))
        rho = amplification_gain(cfg_b.beta, cfg_b.total_power_w, f,
                                 frame.phase_schedule[:, 0], cfg_b.sigma2_irs_w)
        direct = expected_ls_error(cfg_b, g, frame, rho) / cfg.n_elements
        closed = analytic_mse_beta(cfg, g, f, frame, beta=float(beta))
        assert abs(closed - direct) / direct < 1e-9


def test_analytic_mse_diverges_at_the_power_split_boundaries():
    cfg = small_config(sigma2_bs_w=1e-9, sigma2_irs_w=1e-9)
    g, f, h = random_cascaded(cfg, seed=62)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=7)
    mid = analytic_mse_beta(cfg, g, f, frame, beta=0.5)
    assert analytic_mse_beta(cfg, g, f, frame, beta=1e-9) > 1e6 * mid
    assert analytic_mse_beta(cfg, g, f, frame, beta=1 - 1e-9) > 1e6 * mid
    with pytest.raises(ValueError):
        analytic_mse_beta(cfg, g, f, frame, beta=0.0)


# ------------------------------------------------------- solver footprint

def test_solver_never_materializes_the_kronecker_operator():
    # M=64, N=256, Q=256: the explicit MQ x MN operator would need 4 GiB
    cfg = small_config(m_y=8, m_z=8, n_y=16, n_z=16, q1=256,
                       sigma2_bs_w=1e-9, sigma2_irs_w=1e-9)
    g, f, h = random_cascaded(cfg, seed=70)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=8)
    rx = synthesize_rx_frame(cfg, h, g, f, frame, seed=71)
    tracemalloc.start()
    start = time.perf_counter()
    est = ls_full(frame, rx, cfg, h_true=h.matrix_h)
    elapsed = time.perf_counter() - start
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    kron_bytes = (cfg.m_antennas * cfg.q1) * (cfg.m_antennas * cfg.n_elements) * 16
    assert peak < 200 * 1024 * 1024
    assert peak < kron_bytes / 20
    assert elapsed < 5.0
    assert est.mse_vs_truth < 1.0
