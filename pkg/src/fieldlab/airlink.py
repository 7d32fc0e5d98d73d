"""Uplink pilot transmission through the amplifying surface.

Synthesizes received frames Y = ρ·√(β·P_t)·H·V·X + ρ·G·V·N_i + N for the
full-array protocol and its per-sub-block variant (block k trained in its own
sub-frame with power budget P_t/K and a re-derived amplification factor).

Noise draws are deterministic given the frame seed: one generator per frame
(keyed by seed, a fixed stream label, and the block index for sub-frames),
drawing the surface noise N_i first, then the receiver noise N, each as a
real standard-normal block followed by an imaginary one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sysmodel import BlockPlan, SystemConfig, rng_stream, validate_plan


@dataclass
class PilotFrame:
    """Surface phase schedule V (columns θ̃_q, norm √dim) plus device pilot symbols."""

    phase_schedule: np.ndarray
    pilot_symbols: np.ndarray
    block_index: int | None = None


@dataclass
class RxFrame:
    """Received M×Q observation block with the amplification factor that produced it."""

    observations: np.ndarray
    rho_used: float
    noise_realization_seed: int


def design_pilots(dim: int, q: int, seed: int, block_index: int | None = None) -> PilotFrame:
    """Pilot design whose combined matrix V·X has orthogonal rows.

    V takes the first `dim` rows of the q-point DFT matrix (unit-modulus
    entries, so every column already has norm √dim; the explicit
    renormalization keeps that a contract rather than an accident), and the
    device symbols are unit-modulus random phases.  (V·X)(V·X)ᴴ = q·I for any
    such X, which at q = dim coincides with orthogonal columns.
    """
    if q < dim:
        raise ValueError(f"pilot length q={q} shorter than dimension {dim}")
    n = np.arange(dim)[:, None]
    m = np.arange(q)[None, :]
    v = np.exp(-2j * math.pi * n * m / q)
    v *= math.sqrt(dim) / np.linalg.norm(v, axis=0, keepdims=True)
    if block_index is None:
        rng = rng_stream(seed, "pilot-symbols")
    else:
        rng = rng_stream(seed, "pilot-symbols", int(block_index))
    x = np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=q))
    return PilotFrame(phase_schedule=v, pilot_symbols=x, block_index=block_index)


def amplification_gain(beta: float, total_power_w: float, f_diag, theta_tilde: np.ndarray,
                       sigma2_irs_w: float) -> float:
    """Amplification factor ρ that spends exactly the reflect-side power budget.

    Solves ρ²·β·P_t·‖F·θ̃‖² + ρ²·σ_i² = (1−β)·P_t for ρ, with F = diag(f).
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0,1), got {beta!r}")
    f = np.asarray(getattr(f_diag, "vector_f", f_diag))
    reflected = beta * total_power_w * float(np.sum(np.abs(f * theta_tilde) ** 2))
    return math.sqrt((1.0 - beta) * total_power_w / (reflected + sigma2_irs_w))


def _complex_normal(rng: np.random.Generator, shape: tuple, variance: float) -> np.ndarray:
    real = rng.standard_normal(shape)
    imag = rng.standard_normal(shape)
    return math.sqrt(variance / 2.0) * (real + 1j * imag)


def _synthesize(h_matrix: np.ndarray, g_matrix: np.ndarray, frame: PilotFrame,
                rho: float, symbol_scale: float, sigma2_irs_w: float,
                sigma2_bs_w: float, rng: np.random.Generator, seed: int) -> RxFrame:
    v = frame.phase_schedule
    q = v.shape[1]
    m = h_matrix.shape[0]
    if h_matrix.shape[1] != v.shape[0] or g_matrix.shape != h_matrix.shape:
        raise ValueError("channel/pilot dimension mismatch")
    if frame.pilot_symbols.shape != (q,):
        raise ValueError("pilot symbol count does not match the schedule")
    signal = rho * symbol_scale * (h_matrix @ (v * frame.pilot_symbols[None, :]))
    n_irs = _complex_normal(rng, (q, q), sigma2_irs_w)
    n_bs = _complex_normal(rng, (m, q), sigma2_bs_w)
    y = signal + rho * (g_matrix @ (v @ n_irs)) + n_bs
    return RxFrame(observations=y, rho_used=rho, noise_realization_seed=int(seed))


def synthesize_rx_frame(cfg: SystemConfig, h, g, f, frame: PilotFrame, seed: int,
                        sigma2_bs_w: float | None = None) -> RxFrame:
    """Simulate one full-array received frame.

    Parameters
    ----------
    h : CascadedChannel or ndarray
        True cascaded channel generating the signal term.
    g : FarFieldChannel or ndarray
        Surface-to-receiver matrix carrying the amplified surface noise.
    f : NearFieldChannel or ndarray
        Device-to-surface vector; sets the amplification factor via ‖F·θ̃‖².
    sigma2_bs_w : float, optional
        Receiver noise override for SNR sweeps (defaults to the configured value).
    """
    h_matrix = np.asarray(getattr(h, "matrix_h", h))
    g_matrix = np.asarray(getattr(g, "matrix_g", g))
    rho = amplification_gain(cfg.beta, cfg.total_power_w, f, frame.phase_schedule[:, 0],
                             cfg.sigma2_irs_w)
    sigma2 = cfg.sigma2_bs_w if sigma2_bs_w is None else float(sigma2_bs_w)
    rng = rng_stream(seed, "frame-noise")
    return _synthesize(h_matrix, g_matrix, frame, rho, math.sqrt(cfg.beta * cfg.total_power_w),
                       cfg.sigma2_irs_w, sigma2, rng, seed)


def synthesize_rx_subframe(cfg: SystemConfig, plan: BlockPlan, k: int, h_k, g_k,
                           frame_k: PilotFrame, seed: int,
                           sigma2_bs_w: float | None = None) -> RxFrame:
    """Simulate the sub-frame training block k under the per-block power budget.

    The device spends P_t/K during this sub-frame and the amplification factor
    is re-derived from the block's own ‖F_k·θ̃_k‖² against the per-block
    reflect budget (1−β)·P_t/K.  The block's diagonal factor f_k is recovered
    from (h_k, g_k) entrywise, which is exact for the rank-one surface link.
    """
    validate_plan(cfg, plan)
    if not 0 <= k < plan.k_total:
        raise ValueError(f"block index {k} outside plan with {plan.k_total} blocks")
    h_matrix = np.asarray(getattr(h_k, "matrix_h", h_k))
    g_matrix = np.asarray(getattr(g_k, "matrix_g", g_k))
    f_k = h_matrix[0, :] / g_matrix[0, :]
    power_k = cfg.total_power_w / plan.k_total
    rho = amplification_gain(cfg.beta, power_k, f_k, frame_k.phase_schedule[:, 0],
                             cfg.sigma2_irs_w)
    sigma2 = cfg.sigma2_bs_w if sigma2_bs_w is None else float(sigma2_bs_w)
    rng = rng_stream(seed, "subframe-noise", k)
    return _synthesize(h_matrix, g_matrix, frame_k, rho, math.sqrt(cfg.beta * power_k),
                       cfg.sigma2_irs_w, sigma2, rng, seed)
