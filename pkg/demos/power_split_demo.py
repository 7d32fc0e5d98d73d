"""
Splitting transmit power between device and surface
====================================================

The device spends a fraction beta of its power budget on the pilot symbols;
the active surface amplifies with the remaining (1-beta) share.  Too little
signal power starves the estimator, too little amplifier power lets the
receiver noise dominate, so the estimation error is a U-shaped function of
beta with a closed-form optimum.  Which side of 1/2 the optimum falls on is
decided by the surface amplifier's own noise level: a noisy amplifier wants
more device power, a quiet one wants more amplification.

Run from the repository root:

    python3 demos/power_split_demo.py
"""

import os
from dataclasses import replace

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fieldlab import (
    amplification_gain,
    analytic_mse_beta,
    cascaded,
    design_pilots,
    draw_placement,
    draw_surface_link_angles,
    ff_channel_g,
    ls_full,
    mse_coefficients,
    nf_channel,
    optimal_beta,
    rng_stream,
    sample_path_gain,
    synthesize_rx_frame,
)
from fieldlab.sysmodel import ScenarioConfig, SystemConfig

OUT_DIR = os.path.join(os.path.dirname(__file__), "output")
DRAWS = 400  # Monte-Carlo draws per grid point


def main() -> None:
    os.makedirs(OUT_DIR, exist_ok=True)

    # One random deployment: a 7x7 surface, a 2x2 receiver, a device 5-20 m
    # from the surface.  All randomness flows through named seed streams.
    cfg = SystemConfig(m_y=2, m_z=2, n_y=7, n_z=7, p_users=1, q1=49, q2=49,
                       total_power_w=1e-3, sigma2_bs_w=1e-10,
                       sigma2_irs_w=1e-9)
    scenario = ScenarioConfig()
    rng = rng_stream(2024, "demo-link")
    placement = draw_placement(cfg, scenario, rng)
    angles = draw_surface_link_angles(scenario, rng)
    eta_g = sample_path_gain(rng, scenario.d_g_m, cfg.wavelength_m,
                             scenario.path_exponent)
    g = ff_channel_g(cfg, eta_g, *angles)
    f = nf_channel(placement, cfg, "exact-distance")
    h = cascaded(g, f)
    frame = design_pilots(cfg.n_elements, cfg.q1, seed=5)

    betas = np.linspace(0.05, 0.95, 19)
    fig, ax = plt.subplots(figsize=(7.0, 4.6))

    # Two amplifier-noise levels: at the receiver noise level, and three
    # orders of magnitude below it.  The optimum flips across 1/2.
    for sigma2_irs, style, label in (
            (1e-9, "C0", "surface noise 10 dB above receiver noise"),
            (1e-13, "C1", "surface noise 30 dB below receiver noise")):
        cfg_level = replace(cfg, sigma2_irs_w=sigma2_irs)
        analytic = [analytic_mse_beta(replace(cfg_level, beta=b), g, f, frame)
                    for b in betas]

        empirical = []
        for j, beta in enumerate(betas):
            cfg_b = replace(cfg_level, beta=float(beta))
            mc = rng_stream(99, "demo-mc", f"{sigma2_irs:g}", j)
            total = 0.0
            for _ in range(DRAWS):
                rx = synthesize_rx_frame(cfg_b, h, g, f, frame,
                                         int(mc.integers(2**63)))
                total += ls_full(frame, rx, cfg_b,
                                 h_true=h.matrix_h).mse_vs_truth
            empirical.append(total / DRAWS)

        best = optimal_beta(mse_coefficients(cfg_level, g, f, frame))
        ax.semilogy(betas, analytic, style + "-", label=label)
        ax.semilogy(betas, empirical, style + "o", mfc="none",
                    label=f"Monte Carlo ({DRAWS} draws)")
        ax.axvline(best.beta_opt, color=style, ls=":", lw=1)
        rho = amplification_gain(best.beta_opt, cfg.total_power_w, f,
                                 frame.phase_schedule[:, 0], sigma2_irs)
        print(f"sigma_i^2 = {sigma2_irs:g} W: optimal split "
              f"beta = {best.beta_opt:.3f} (amplification {rho:.1f}x, "
              f"predicted error {best.mse_at_opt:.3e})")

    ax.set_xlabel("device share of the power budget  " + r"$\beta$")
    ax.set_ylabel("estimation error per element")
    ax.set_title("Least-squares error vs power split, with closed-form optima")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    target = os.path.join(OUT_DIR, "power-split.png")
    fig.savefig(target, dpi=150)
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
