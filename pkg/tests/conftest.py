"""Shared scenario factories for the test suite.

Every helper is deterministic given its seed so failures reproduce exactly.
"""
from __future__ import annotations

import numpy as np

from fieldlab import (
    ScenarioConfig,
    SystemConfig,
    cascaded,
    draw_placement,
    draw_surface_link_angles,
    ff_channel_g,
    nf_channel,
    noise_block_covariance,
    pilot_gram_eigenvalues,
    rng_stream,
    sample_path_gain,
)


def small_config(**overrides) -> SystemConfig:
    """2x2 receiver, 3x3 surface: the smallest full-rank scenario."""
    base = dict(m_y=2, m_z=2, n_y=3, n_z=3, p_users=3, q1=9, q2=9)
    base.update(overrides)
    return SystemConfig(**base)


def random_link(cfg: SystemConfig, seed: int, scenario: ScenarioConfig | None = None):
    """One full random draw: device placement plus both propagation links."""
    scenario = scenario if scenario is not None else ScenarioConfig()
    rng = rng_stream(seed, "test-link")
    placement = draw_placement(cfg, scenario, rng)
    angles = draw_surface_link_angles(scenario, rng)
    eta_g = sample_path_gain(rng, scenario.d_g_m, cfg.wavelength_m,
                             scenario.path_exponent)
    g = ff_channel_g(cfg, eta_g, *angles)
    f = nf_channel(placement, cfg, "exact-distance")
    return placement, g, f


def random_cascaded(cfg: SystemConfig, seed: int):
    """Random scenario reduced to the estimation target H = G diag(f)."""
    placement, g, f = random_link(cfg, seed)
    return g, f, cascaded(g, f)


def complex_randn(rng: np.random.Generator, shape: tuple, variance: float = 1.0):
    return np.sqrt(variance / 2.0) * (rng.standard_normal(shape)
                                      + 1j * rng.standard_normal(shape))


def expected_ls_error(cfg, g, frame, rho, sigma2_bs_w=None, power_w=None):
    """Trace-formula oracle for the LS error energy E||H_hat - H||_F^2."""
    cov = noise_block_covariance(cfg, g, frame, rho, sigma2_bs_w=sigma2_bs_w)
    inv_tau = float(np.sum(1.0 / pilot_gram_eigenvalues(frame)))
    power = cfg.total_power_w if power_w is None else power_w
    return float(np.trace(cov).real) * inv_tau / (rho**2 * cfg.beta * power)
