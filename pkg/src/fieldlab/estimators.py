"""Least-squares and linear-MMSE estimation of the cascaded channel.

The observation model is vec(Y) = ρ·√(β·P_t)·((VX)ᵀ ⊗ I_M)·vec(H) + noise,
so the LS solve never forms the Kronecker operator: by the identity
vec(H·VX) = ((VX)ᵀ ⊗ I_M)·vec(H) it reduces to a right-solve of Y against
VX, with peak memory proportional to M·N + N·Q instead of M·Q × M·N.

All vec(·) operations are column-major to match that identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .airlink import PilotFrame, RxFrame
from .sysmodel import BlockPlan, SystemConfig


@dataclass
class EstimateResult:
    """One channel estimate plus its error against the truth when known."""

    h_hat: np.ndarray
    mse_vs_truth: float | None
    method: str


@dataclass
class ChannelStats:
    """Second-order statistics driving the linear-MMSE filter.

    mean_vec and cov describe vec(H) (column-major).  noise_block_cov is the
    M×M per-slot covariance of the aggregate noise (surface noise folded
    through the link plus receiver noise); None means a noiseless filter.
    """

    mean_vec: np.ndarray
    cov: np.ndarray
    noise_block_cov: np.ndarray | None = None

    @classmethod
    def from_samples(cls, h_samples, noise_block_cov: np.ndarray | None = None) -> "ChannelStats":
        """Sample mean/covariance from a training split of channel matrices."""
        vecs = np.stack([np.asarray(h).ravel(order="F") for h in h_samples])
        mean = vecs.mean(axis=0)
        centered = vecs - mean
        cov = centered.conj().T @ centered / len(vecs)
        return cls(mean_vec=mean, cov=cov, noise_block_cov=noise_block_cov)


def combined_schedule(frame: PilotFrame) -> np.ndarray:
    """The combined pilot matrix V·X (phase schedule times device symbols)."""
    return frame.phase_schedule * frame.pilot_symbols[None, :]


def pilot_gram_eigenvalues(frame: PilotFrame) -> np.ndarray:
    """Nonzero eigenvalues τ_i of (VX)(VX)ᴴ, ascending.

    These are the singular values squared of the combined design; the right
    pseudo-inverse exists iff all are positive.
    """
    vx = combined_schedule(frame)
    taus = np.linalg.eigvalsh(vx @ vx.conj().T)
    if taus[0] <= taus[-1] * 1e-12:
        raise np.linalg.LinAlgError("pilot design is rank deficient")
    return taus


def solver_norms(frame: PilotFrame, g) -> tuple:
    """Factored Frobenius norms (‖A⁻¹‖², ‖B‖²) of the LS error operators.

    A⁻¹ = ((VX)⁺)ᵀ ⊗ I_M and B = ((VX)⁺)ᵀ ⊗ (G·V), so the norms factor into
    ‖(VX)⁺‖²·M and ‖(VX)⁺‖²·‖G·V‖² with ‖(VX)⁺‖² = Σ 1/τ_i; no Kronecker
    product is ever materialized.
    """
    g_matrix = np.asarray(getattr(g, "matrix_g", g))
    pinv_sq = float(np.sum(1.0 / pilot_gram_eigenvalues(frame)))
    norm_a_inv_sq = pinv_sq * g_matrix.shape[0]
    gv = g_matrix @ frame.phase_schedule
    norm_b_sq = pinv_sq * float(np.sum(np.abs(gv) ** 2))
    return norm_a_inv_sq, norm_b_sq


def _right_solve(y: np.ndarray, vx: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares H with H·VX ≈ Y (QR-based)."""
    solution, _, rank, _ = scipy.linalg.lstsq(vx.T, y.T, lapack_driver="gelsy")
    if rank < vx.shape[0]:
        raise np.linalg.LinAlgError("pilot design is rank deficient")
    return solution.T


def ls_full(frame: PilotFrame, rx: RxFrame, cfg: SystemConfig,
            h_true: np.ndarray | None = None) -> EstimateResult:
    """Least-squares estimate of the full M×N cascaded channel."""
    scale = rx.rho_used * math.sqrt(cfg.beta * cfg.total_power_w)
    h_hat = _right_solve(rx.observations / scale, combined_schedule(frame))
    mse = None if h_true is None else empirical_mse(h_hat, h_true, cfg.n_elements)
    return EstimateResult(h_hat=h_hat, mse_vs_truth=mse, method="ls")


def ls_block(frame_k: PilotFrame, rx_k: RxFrame, cfg: SystemConfig, plan: BlockPlan,
             h_true: np.ndarray | None = None) -> EstimateResult:
    """Least-squares estimate of one M×S sub-block channel.

    The sub-frame spends P_t/K, so the inverse signal scale carries the √K
    relative to the full-frame protocol.
    """
    scale = rx_k.rho_used * math.sqrt(cfg.beta * cfg.total_power_w / plan.k_total)
    h_hat = _right_solve(rx_k.observations / scale, combined_schedule(frame_k))
    mse = None if h_true is None else empirical_mse(h_hat, h_true, plan.s_total)
    return EstimateResult(h_hat=h_hat, mse_vs_truth=mse, method="ls")


def empirical_mse(h_hat: np.ndarray, h_true: np.ndarray, normalizer: int) -> float:
    """Squared estimation error ‖vec(ĥ) − vec(h)‖² divided by `normalizer`."""
    h_hat = np.asarray(h_hat)
    h_true = np.asarray(h_true)
    if h_hat.shape != h_true.shape:
        raise ValueError(f"shape mismatch: {h_hat.shape} vs {h_true.shape}")
    return float(np.sum(np.abs(h_hat - h_true) ** 2)) / normalizer


def analytic_mse_beta(cfg: SystemConfig, g, f, frame: PilotFrame,
                      beta: float | None = None) -> float:
    """Closed-form LS MSE as a function of the power-allocation factor.

    Evaluates (a₁β + a₂)/(bβ² − bβ) with the scenario's coefficients, which
    equals the direct error expression with the budget-consistent ρ(β)
    substituted.  Diverges at β→0 and β→1.
    """
    from .power_alloc import mse_coefficients, mse_from_coefficients

    value = cfg.beta if beta is None else float(beta)
    if not 0.0 < value < 1.0:
        raise ValueError(f"beta must lie strictly inside (0,1), got {value!r}")
    return mse_from_coefficients(mse_coefficients(cfg, g, f, frame), value)


def noise_block_covariance(cfg: SystemConfig, g, frame: PilotFrame, rho: float,
                           sigma2_bs_w: float | None = None) -> np.ndarray:
    """Per-slot M×M covariance of the aggregate noise ρ·G·V·n + n_bs.

    The surface noise is white across slots, so the full MQ×MQ covariance is
    I_Q ⊗ (this matrix); only the M×M factor is ever formed.
    """
    g_matrix = np.asarray(getattr(g, "matrix_g", g))
    gv = g_matrix @ frame.phase_schedule
    sigma2 = cfg.sigma2_bs_w if sigma2_bs_w is None else float(sigma2_bs_w)
    return rho**2 * cfg.sigma2_irs_w * (gv @ gv.conj().T) + sigma2 * np.eye(g_matrix.shape[0])


def lmmse(frame: PilotFrame, rx: RxFrame, cfg: SystemConfig, stats: ChannelStats,
          h_true: np.ndarray | None = None) -> EstimateResult:
    """Linear-MMSE estimate of the full cascaded channel from supplied statistics.

    Materializes the dense MQ×MN observation operator, which is fine at the
    desk scales this baseline targets; the LS path never does.  The observation
    covariance is regularized by δ = 1e−6·trace/size only when it is not
    positive definite (rank-deficient sample statistics), so in well-posed
    noiseless configurations the filter reproduces LS exactly.
    """
    vx = combined_schedule(frame)
    m = rx.observations.shape[0]
    scale = rx.rho_used * math.sqrt(cfg.beta * cfg.total_power_w)
    a_op = scale * np.kron(vx.T, np.eye(m))
    q = vx.shape[1]
    if stats.noise_block_cov is None:
        r_noise = np.zeros((m * q, m * q), dtype=complex)
    else:
        r_noise = np.kron(np.eye(q), stats.noise_block_cov)
    r_y = a_op @ stats.cov @ a_op.conj().T + r_noise
    y_centered = rx.observations.ravel(order="F") - a_op @ stats.mean_vec
    try:
        factor = scipy.linalg.cho_factor(r_y)
        t = scipy.linalg.cho_solve(factor, y_centered)
    except np.linalg.LinAlgError:
        delta = 1e-6 * float(np.trace(r_y).real) / r_y.shape[0]
        factor = scipy.linalg.cho_factor(r_y + delta * np.eye(r_y.shape[0]))
        t = scipy.linalg.cho_solve(factor, y_centered)
    h_vec = stats.mean_vec + stats.cov @ (a_op.conj().T @ t)
    h_hat = h_vec.reshape(rx.observations.shape[0], -1, order="F")
    mse = None if h_true is None else empirical_mse(h_hat, h_true, h_hat.shape[1])
    return EstimateResult(h_hat=h_hat, mse_vs_truth=mse, method="lmmse")
