"""Closed-form optimization of the device/surface power split.

The LS MSE as a function of the power-allocation factor β is the rational
function ε(β) = (a₁β + a₂)/(bβ² − bβ); its interior stationary points are the
roots of a₁β² + 2a₂β − a₂ = 0.  Roots are evaluated in a cancellation-safe
form and the returned optimum is the argmin of ε over the interior candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .airlink import PilotFrame
from .estimators import solver_norms
from .sysmodel import SystemConfig


@dataclass
class PafCoefficients:
    """Coefficients of ε(β) = (a₁β + a₂)/(bβ² − bβ).

    For physical scenarios a₂ > 0 and b = −N·P_t² < 0; a₁ carries the balance
    between receiver-noise and surface-noise error and may take either sign.
    """

    a1: float
    a2: float
    b: float


@dataclass
class PafSolution:
    """Optimal power split plus the stationary-point candidates it was chosen from."""

    beta_opt: float
    candidates: list
    mse_at_opt: float


def mse_coefficients(cfg: SystemConfig, g, f, frame: PilotFrame) -> PafCoefficients:
    """MSE(β) coefficients for one scenario.

    Uses the factored operator norms from the estimator module; the schedule's
    first column represents ‖F·θ̃‖², which is column-independent for
    unit-modulus schedules against a constant-modulus device link.
    """
    f_vec = np.asarray(getattr(f, "vector_f", f))
    norm_f_theta = float(np.sum(np.abs(f_vec * frame.phase_schedule[:, 0]) ** 2))
    norm_a_inv_sq, norm_b_sq = solver_norms(frame, g)
    p_t = cfg.total_power_w
    s2, s2i = cfg.sigma2_bs_w, cfg.sigma2_irs_w
    a1 = s2 * p_t * norm_f_theta * norm_a_inv_sq - s2i * p_t * norm_b_sq
    a2 = s2i * p_t * norm_b_sq + s2 * s2i * norm_a_inv_sq
    b = -float(len(f_vec)) * p_t**2
    return PafCoefficients(a1=a1, a2=a2, b=b)


def mse_from_coefficients(c: PafCoefficients, beta: float) -> float:
    """Evaluate ε(β) = (a₁β + a₂)/(bβ² − bβ)."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie strictly inside (0,1), got {beta!r}")
    return (c.a1 * beta + c.a2) / (c.b * beta**2 - c.b * beta)


def optimal_beta(c: PafCoefficients) -> PafSolution:
    """Closed-form optimal power-allocation factor.

    Roots of a₁β² + 2a₂β − a₂ = 0 computed stably: with s = √(a₂(a₁+a₂)) the
    pair is −(a₂+s)/a₁ (never interior) and a₂/(a₂+s) ∈ (0,1), the latter
    written without subtractive cancellation.  a₁ = 0 degenerates to the
    linear root β = 1/2.
    """
    if not (math.isfinite(c.a1) and math.isfinite(c.a2) and math.isfinite(c.b)):
        raise ValueError("coefficients must be finite")
    if c.a1 == 0.0:
        candidates = [0.5]
    else:
        disc = c.a2 * (c.a1 + c.a2)
        if disc < 0:
            raise ValueError("negative discriminant: scenario is mis-specified")
        s = math.sqrt(disc)
        candidates = [-(c.a2 + s) / c.a1]
        if c.a2 + s > 0:
            candidates.append(c.a2 / (c.a2 + s))
    interior = [b for b in candidates if 0.0 < b < 1.0]
    if not interior:
        raise ValueError("no stationary point inside (0,1): scenario is mis-specified")
    beta_opt = min(interior, key=lambda b: (mse_from_coefficients(c, b), b))
    return PafSolution(beta_opt=beta_opt, candidates=candidates,
                       mse_at_opt=mse_from_coefficients(c, beta_opt))
