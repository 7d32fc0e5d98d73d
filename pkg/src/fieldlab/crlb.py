"""Cramér-Rao lower bounds for the cascaded-channel estimate.

Two evaluation paths are first-class:

  - the general eigenvalue form, σ_n²·tr{(AᴴA)⁻¹} with A the stacked pilot
    operator, evaluated through the pilot Gram eigenvalues without ever
    materializing A (normative for the bound checks), and
  - the closed form 2σ_n²·M/(N²·Q₁⁴·ρ²·β·P_t), whose constant rests on a
    trace substitution that is not reproducible from the pilot
    normalizations alone; its ratio to the general form is reported for
    diagnostics and nothing is asserted about it.

Noise-variance conventions (the source of most unit bugs here):
`effective_noise_var` is the aggregate-operator form ρ²σ_i²·Q₁·‖GV‖²_F + σ²;
`per_entry_noise_var` is the white-equivalent variance of one complex
observation entry, ρ²σ_i²·‖GV‖²_F/M + σ².  The general bound takes the
variance of one REAL noise component, i.e. half the per-complex-entry
value, so that the real and imaginary parameter halves each contribute one
identical term of the total.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import pilot_gram_eigenvalues
from .sysmodel import SystemConfig


@dataclass
class ApFactors:
    """Everything the general bound needs about the stacked pilot operator."""

    gram_eigenvalues: np.ndarray
    m_antennas: int
    rho: float
    beta: float
    total_power_w: float


@dataclass
class CrlbResult:
    """Bound report: real/imaginary split, both evaluation paths."""

    gamma_real: float
    gamma_imag: float
    gamma_total: float
    sigma_n2: float
    closed_form_value: float
    general_form_value: float

    def __post_init__(self) -> None:
        values = (self.gamma_real, self.gamma_imag, self.gamma_total,
                  self.sigma_n2, self.closed_form_value, self.general_form_value)
        if not all(v > 0 for v in values):
            raise ValueError("bound quantities must all be positive")

    @property
    def closed_to_general_ratio(self) -> float:
        return self.closed_form_value / self.general_form_value


def a_p_factors(cfg: SystemConfig, frame, rho: float) -> ApFactors:
    """Collect the pilot Gram eigenvalues and power scaling of the operator."""
    return ApFactors(
        gram_eigenvalues=pilot_gram_eigenvalues(frame),
        m_antennas=cfg.m_antennas,
        rho=float(rho),
        beta=cfg.beta,
        total_power_w=cfg.total_power_w,
    )


def effective_noise_var(cfg: SystemConfig, g, frame, rho: float) -> float:
    """Aggregate-noise variance constant ρ²σ_i²·Q₁·‖GV‖²_F + σ²."""
    g_matrix = np.asarray(getattr(g, "matrix_g", g))
    gv = g_matrix @ frame.phase_schedule
    q = frame.phase_schedule.shape[1]
    return rho**2 * cfg.sigma2_irs_w * q * float(np.sum(np.abs(gv) ** 2)) + cfg.sigma2_bs_w


def per_entry_noise_var(cfg: SystemConfig, g, frame, rho: float) -> float:
    """White-equivalent variance of one complex received entry.

    The amplified-surface noise contributes ρ²σ_i²·(GV)(GV)ᴴ per slot; its
    trace spread over the M receive antennas plus the receiver floor gives
    the average per-entry power, which is what a Monte-Carlo noise-power
    measurement of the synthesized frames converges to.
    """
    g_matrix = np.asarray(getattr(g, "matrix_g", g))
    gv = g_matrix @ frame.phase_schedule
    return (rho**2 * cfg.sigma2_irs_w * float(np.sum(np.abs(gv) ** 2)) / cfg.m_antennas
            + cfg.sigma2_bs_w)


def crlb_general(factors: ApFactors, sigma_n2: float) -> float:
    """General-form bound 2·σ_n²·(M/(ρ²βP_t))·Σᵢ 1/τᵢ.

    sigma_n2 is the variance per real noise component (half the complex
    entry variance); the factor 2 restores the real+imaginary total.
    Raises on a singular Gram (rank-deficient pilot design).
    """
    tau = np.asarray(factors.gram_eigenvalues, dtype=float)
    if np.any(tau <= 0):
        raise np.linalg.LinAlgError("pilot Gram is singular")
    scale2 = factors.rho**2 * factors.beta * factors.total_power_w
    return 2.0 * sigma_n2 * factors.m_antennas / scale2 * float(np.sum(1.0 / tau))


def crlb_closed(cfg: SystemConfig, rho: float, sigma_n2: float) -> float:
    """Closed-form bound 2·σ_n²·M/(N²·Q₁⁴·ρ²·β·P_t)."""
    n, q1 = cfg.n_elements, cfg.q1
    return (2.0 * sigma_n2 * cfg.m_antennas
            / (n**2 * q1**4 * rho**2 * cfg.beta * cfg.total_power_w))


def crlb_report(cfg: SystemConfig, g, frame, rho: float) -> CrlbResult:
    """Evaluate both bound paths for one scenario.

    The general path uses the white-equivalent per-real-component noise
    variance, under which it exactly predicts the LS total error; the
    closed path uses the aggregate form, as its constant expects.  The
    two real/imaginary halves are a single shared expression, so their
    equality is structural.
    """
    factors = a_p_factors(cfg, frame, rho)
    half_var = per_entry_noise_var(cfg, g, frame, rho) / 2.0
    gamma_half = crlb_general(factors, half_var) / 2.0
    sigma_n2_eff = effective_noise_var(cfg, g, frame, rho)
    return CrlbResult(
        gamma_real=gamma_half,
        gamma_imag=gamma_half,
        gamma_total=2.0 * gamma_half,
        sigma_n2=sigma_n2_eff,
        closed_form_value=crlb_closed(cfg, rho, sigma_n2_eff),
        general_form_value=2.0 * gamma_half,
    )
