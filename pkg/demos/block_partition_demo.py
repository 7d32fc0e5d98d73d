"""
Choosing how finely to partition the surface for training
=========================================================

Per-block training replaces the full cascaded channel with one shared
steering correction per sub-block.  Fewer, larger blocks need fewer pilots
but suffer a larger geometric approximation error; many small blocks nail
the geometry but spread the training power thin.  The total error is a
U-shaped function of the block count K, and its continuous minimizer is the
positive root of a quintic that is solved here in closed form and projected
back onto the feasible partition ladder.

Run from the repository root:

    python3 demos/block_partition_demo.py
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fieldlab import (
    UserPlacement,
    error_ladder,
    ff_channel_g,
    optimal_k,
    solve_quintic,
    total_error_closed,
)
from fieldlab.sysmodel import SystemConfig

OUT_DIR = os.path.join(os.path.dirname(__file__), "output")


def main() -> None:
    os.makedirs(OUT_DIR, exist_ok=True)

    # A 144-element surface and a mildly oblique device placement 10 m out.
    cfg = SystemConfig(m_y=2, m_z=1, n_y=12, n_z=12, p_users=1,
                       q1=144, q2=1, total_power_w=1e-6,
                       sigma2_bs_w=1e-10, sigma2_irs_w=1e-5)
    placement = UserPlacement(10.0, 0.08, 0.06, path_gain=1e-4 + 0j)
    g = ff_channel_g(cfg, 1e-3 + 0j, 0.2, -0.1, 0.15, 0.1)

    budgets = error_ladder(placement, cfg, g, seed=3)
    ks = np.array([b.k for b in budgets])
    approx = np.array([b.eps_approx_closed for b in budgets])
    est = np.array([b.eps_est for b in budgets])
    total = np.array([b.eps_total for b in budgets])

    best_row = budgets[int(np.argmin(total))]
    solution = solve_quintic(best_row.c2, best_row.c3, cfg.n_elements,
                             ladder=ks.tolist())
    root = [r for r in solution.real_roots if r > 0][0]
    k_star = optimal_k(cfg, best_row.c2, best_row.c3)

    print("feasible ladder:", ks.tolist())
    print(f"exhaustive argmin of the exact totals: K = {best_row.k}")
    print(f"quintic root {root:.2f} -> feasible projection K = {k_star} "
          f"({solution.newton_iterations} Newton steps)")

    fig, ax = plt.subplots(figsize=(7.0, 4.6))
    ax.loglog(ks, approx, "o-", label="approximation error (closed form)")
    ax.loglog(ks, est, "s-", label="estimation error")
    ax.loglog(ks, total, "k^-", label="total")
    curve_k = np.geomspace(1, cfg.n_elements, 200)
    curve = [total_error_closed(best_row.c2, best_row.c3, cfg.n_elements, k)
             for k in curve_k]
    ax.loglog(curve_k, curve, "k--", lw=1,
              label="polynomial error model (continuous K)")
    ax.axvline(root, color="r", ls=":", lw=1, label=f"quintic root {root:.1f}")
    ax.scatter([best_row.k], [best_row.eps_total], s=120, facecolors="none",
               edgecolors="r", zorder=5, label=f"selected K = {best_row.k}")
    ax.set_xlabel("number of sub-blocks K")
    ax.set_ylabel("squared error")
    ax.set_title("Approximation vs estimation trade-off across partitions")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    target = os.path.join(OUT_DIR, "block-partition.png")
    fig.savefig(target, dpi=150)
    print(f"wrote {target}")


if __name__ == "__main__":
    main()
