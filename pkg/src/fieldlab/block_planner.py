"""Sub-block partition planning: error budgets versus the block count K and
the closed-form selection of the optimal feasible K.

Three error views exist per partition:
  - the direct approximation error (literal complex phase-gap sum),
  - its closed form from per-axis second-moment identities (the two coincide
    in the small-angle regime and both vanish at K = N),
  - the estimation error C₃·K³/N of the per-block LS protocol.
The fixed-constant total φ(K) = C₂N²/K² − C₂N/K + C₃K³/N is strictly convex
on (0, 3N], and its unique positive stationary point solves the quintic
3C₃K⁵ + C₂N²K − 2C₂N³ = 0.  That root is found by damped-free Newton from
K₀ = (2C₂N³/3C₃)^{1/5} (monotone by convexity), the quintic is deflated by
synthetic division, and the remaining quartic is solved in closed form by
Ferrari's method, so all five candidates are reported.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .airlink import amplification_gain, design_pilots
from .channels import block_geometry, block_permutation, nf_channel
from .estimators import pilot_gram_eigenvalues
from .sysmodel import (
    BlockPlan,
    ConfigError,
    SystemConfig,
    UserPlacement,
    centered_offsets,
    feasible_ladder,
)


@dataclass
class ErrorBudget:
    """Error accounting for one partition: approximation, estimation, total."""

    k: int
    eps_approx_direct: float
    eps_approx_closed: float
    eps_est: float
    eps_total: float
    c1_per_block: list
    c2: float
    c3: float


@dataclass
class QuinticSolution:
    """All five stationarity candidates plus the feasible projection of the real one."""

    real_roots: list
    candidates: list
    k_opt_feasible: int
    newton_iterations: int


def c1_constants(placement: UserPlacement, cfg: SystemConfig, plan: BlockPlan) -> np.ndarray:
    """Per-block curvature constants C₁ = (2π/λ)²·(a_y² + a_z²)/12, block-major."""
    geo = block_geometry(placement, cfg, plan)
    k0 = 2.0 * math.pi / cfg.wavelength_m
    return k0**2 * (geo["a_y"] ** 2 + geo["a_z"] ** 2) / 12.0


def approx_error_direct(placement: UserPlacement, cfg: SystemConfig, plan: BlockPlan) -> float:
    """Literal phase-gap energy of the block model against its block centers.

    Sums |exp(−j·k0·(r_center + Δr)) − exp(−j·k0·r_center)|² over all elements,
    with Δr the block-local linear phase term; zero exactly for S = 1.
    """
    geo = block_geometry(placement, cfg, plan)
    k0 = 2.0 * math.pi / cfg.wavelength_m
    sy = centered_offsets(plan.s_y)[:, None]
    sz = centered_offsets(plan.s_z)[None, :]
    total = 0.0
    for a_y, a_z in zip(geo["a_y"], geo["a_z"]):
        delta_r = a_y * sy + a_z * sz
        total += float(np.sum(np.abs(np.exp(-1j * k0 * delta_r) - 1.0) ** 2))
    return total


def approx_error_closed(placement: UserPlacement, cfg: SystemConfig, plan_or_k) -> float:
    """Second-moment closed form of the block approximation error.

    Per block: (2π/λ)²/12 · (a_y²·S_z·S_y·(S_y²−1) + a_z²·S_y·S_z·(S_z²−1)),
    the exact sum of (k0·Δr)² over centered offsets.  For square blocks this
    collapses to C₁·S·(S−1) per block, i.e. C₂N²/K² − C₂N/K overall.
    An integer argument selects the most-square feasible plan with that count.
    """
    plan = _resolve_plan(cfg, plan_or_k)
    geo = block_geometry(placement, cfg, plan)
    k0 = 2.0 * math.pi / cfg.wavelength_m
    s_y, s_z = plan.s_y, plan.s_z
    mom_y = s_z * s_y * (s_y**2 - 1) / 12.0
    mom_z = s_y * s_z * (s_z**2 - 1) / 12.0
    return float(np.sum(k0**2 * (geo["a_y"] ** 2 * mom_y + geo["a_z"] ** 2 * mom_z)))


def _resolve_plan(cfg: SystemConfig, plan_or_k) -> BlockPlan:
    if isinstance(plan_or_k, BlockPlan):
        return plan_or_k
    k = int(plan_or_k)
    for plan in feasible_ladder(cfg):
        if plan.k_total == k:
            return plan
    raise ConfigError(f"no feasible partition with K={k} for this array")


def c3_constant(cfg: SystemConfig, plan: BlockPlan, g_k, frame_k, rho: float) -> float:
    """Estimation-error constant of one sub-block's LS protocol.

    (ρ²σ_i²·‖B_k‖² + σ²·‖A_k⁻¹‖²)/(ρ²·β·P_t·K) with both norms in factored
    form (see the estimator module); ρ is the sub-frame's amplification
    factor and K the partition size.  The 1/K folds in the per-block share
    of the training power (each sub-frame transmits with P_t/K), so one
    sub-block's expected LS error is exactly C₃·K²/N and the K-block total
    is C₃·K³/N.
    """
    g_matrix = np.asarray(getattr(g_k, "matrix_g", g_k))
    pinv_sq = float(np.sum(1.0 / pilot_gram_eigenvalues(frame_k)))
    norm_a_inv_sq = pinv_sq * g_matrix.shape[0]
    gv = g_matrix @ frame_k.phase_schedule
    norm_b_sq = pinv_sq * float(np.sum(np.abs(gv) ** 2))
    num = rho**2 * cfg.sigma2_irs_w * norm_b_sq + cfg.sigma2_bs_w * norm_a_inv_sq
    return num / (rho**2 * cfg.beta * cfg.total_power_w * plan.k_total)


def estimation_error_closed(cfg: SystemConfig, plan: BlockPlan, c3: float) -> float:
    """Total estimation error C₃·K³/N: K blocks, each contributing C₃·K²/N."""
    return c3 * plan.k_total**3 / cfg.n_elements


def total_error_closed(c2: float, c3: float, n: int, k: float) -> float:
    """Fixed-constant total error φ(K) = C₂N²/K² − C₂N/K + C₃K³/N."""
    return c2 * n**2 / k**2 - c2 * n / k + c3 * k**3 / n


def error_budget(placement: UserPlacement, cfg: SystemConfig, plan: BlockPlan,
                 c3: float) -> ErrorBudget:
    """Assemble the per-partition error budget for a given estimation constant."""
    c1 = c1_constants(placement, cfg, plan)
    closed = approx_error_closed(placement, cfg, plan)
    est = estimation_error_closed(cfg, plan, c3)
    return ErrorBudget(
        k=plan.k_total,
        eps_approx_direct=approx_error_direct(placement, cfg, plan),
        eps_approx_closed=closed,
        eps_est=est,
        eps_total=closed + est,
        c1_per_block=[float(v) for v in c1],
        c2=float(np.sum(c1)),
        c3=c3,
    )


def error_ladder(placement: UserPlacement, cfg: SystemConfig, g, seed: int) -> list:
    """Exact error budgets along the feasible K ladder.

    For each partition the per-block estimation constants are computed from
    that block's own pilot design and amplification factor (pilot length is
    raised to the block size when the configured q2 is shorter) and their
    exact sum forms eps_est; c3 reports the per-block mean.
    """
    g_matrix = np.asarray(getattr(g, "matrix_g", g))
    f = nf_channel(placement, cfg, "exact-distance")
    budgets = []
    for plan in feasible_ladder(cfg):
        s = plan.s_total
        frame = design_pilots(s, max(cfg.q2, s), seed)
        perm = block_permutation(cfg, plan)
        power_k = cfg.total_power_w / plan.k_total
        c3_blocks = np.empty(plan.k_total)
        for k in range(plan.k_total):
            cols = perm[k * s:(k + 1) * s]
            g_k = g_matrix[:, cols]
            f_k = f.vector_f[cols]
            rho_k = amplification_gain(cfg.beta, power_k, f_k, frame.phase_schedule[:, 0],
                                       cfg.sigma2_irs_w)
            c3_blocks[k] = c3_constant(cfg, plan, g_k, frame, rho_k)
        budget = error_budget(placement, cfg, plan, float(c3_blocks.mean()))
        # exact per-block sum Σ_k c3_k·K²/N (equals the mean-field form when
        # the blocks share their design, but is reported from the true sum)
        est_exact = float(np.sum(c3_blocks) * plan.k_total**2 / cfg.n_elements)
        budget.eps_est = est_exact
        budget.eps_total = budget.eps_approx_closed + est_exact
        budgets.append(budget)
    return budgets


def _largest_real_cubic_root(a2: float, a1: float, a0: float) -> float:
    """Largest real root of z³ + a2·z² + a1·z + a0 (Cardano/trigonometric)."""
    p = a1 - a2**2 / 3.0
    q = 2.0 * a2**3 / 27.0 - a2 * a1 / 3.0 + a0
    shift = -a2 / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc >= 0.0:
        root = math.sqrt(disc)
        u = np.cbrt(-q / 2.0 + root)
        v = np.cbrt(-q / 2.0 - root)
        candidates = [u + v]
        if disc == 0.0:
            candidates.append(-(u + v) / 2.0)
        return max(candidates) + shift
    # three real roots; k = 0 gives the largest
    m = 2.0 * math.sqrt(-p / 3.0)
    phi = math.acos(max(-1.0, min(1.0, 3.0 * q / (p * m))))
    return m * math.cos(phi / 3.0) + shift


def ferrari_quartic(b4: float, b3: float, b2: float, b1: float, b0: float) -> list:
    """All four roots of b4·x⁴ + b3·x³ + b2·x² + b1·x + b0 in closed form.

    Depresses the quartic, factors it through the resolvent cubic (whose
    largest real root is positive whenever the linear term survives), and
    solves the two quadratic factors with complex arithmetic.
    """
    if b4 == 0.0:
        raise ValueError("leading coefficient must be nonzero")
    a, b, c, d = b3 / b4, b2 / b4, b1 / b4, b0 / b4
    p = b - 3.0 * a**2 / 8.0
    q = c - a * b / 2.0 + a**3 / 8.0
    r = d - a * c / 4.0 + a**2 * b / 16.0 - 3.0 * a**4 / 256.0
    shift = -a / 4.0
    scale = max(abs(p) ** 0.5, abs(r) ** 0.25, abs(q) ** (1.0 / 3.0), 1e-300)
    if abs(q) <= 1e-12 * scale**3:
        # biquadratic: solve in t²
        inner = cmath.sqrt(p * p - 4.0 * r)
        roots_t = []
        for z in ((-p + inner) / 2.0, (-p - inner) / 2.0):
            s = cmath.sqrt(z)
            roots_t.extend([s, -s])
    else:
        z0 = _largest_real_cubic_root(2.0 * p, p * p - 4.0 * r, -q * q)
        s = math.sqrt(z0)
        u = (p + z0 - q / s) / 2.0
        w = (p + z0 + q / s) / 2.0
        d1 = cmath.sqrt(s * s - 4.0 * u)
        d2 = cmath.sqrt(s * s - 4.0 * w)
        roots_t = [(-s + d1) / 2.0, (-s - d1) / 2.0, (s + d2) / 2.0, (s - d2) / 2.0]
    return [t + shift for t in roots_t]


def solve_quintic(c2: float, c3: float, n: int, ladder: list | None = None) -> QuinticSolution:
    """Solve 3C₃K⁵ + C₂N²K − 2C₂N³ = 0 for all five candidates.

    The single positive real root (one sign change in the coefficients) is
    found by Newton from K₀ = (2C₂N³/3C₃)^{1/5}, where the iteration is
    monotone because the polynomial is convex and positive at K₀.  Synthetic
    division then deflates to a quartic handled by `ferrari_quartic`.  When a
    feasible-count ladder is supplied, k_opt_feasible is the φ-argmin of the
    ladder points bracketing the root (which convexity makes the global ladder
    argmin); otherwise the root is rounded and clamped to [1, n].
    """
    if not (c2 > 0 and c3 > 0 and n >= 1):
        raise ValueError("need c2 > 0, c3 > 0, n >= 1")
    lin = c2 * float(n) ** 2
    const = -2.0 * c2 * float(n) ** 3
    lead = 3.0 * c3

    def poly(k: float) -> float:
        return lead * k**5 + lin * k + const

    def dpoly(k: float) -> float:
        return 5.0 * lead * k**4 + lin

    k = (2.0 * c2 * float(n) ** 3 / (3.0 * c3)) ** 0.2
    tol = 1e-12 * abs(const)
    iterations = 0
    while abs(poly(k)) > tol:
        iterations += 1
        if iterations > 200:
            raise RuntimeError("Newton iteration did not converge: pathological constants")
        k = k - poly(k) / dpoly(k)
    root = k

    # deflate by (K - root): Horner on [lead, 0, 0, 0, lin, const]
    b4 = lead
    b3 = b4 * root
    b2 = b3 * root
    b1 = b2 * root
    b0 = b1 * root + lin
    candidates = [complex(root)] + ferrari_quartic(b4, b3, b2, b1, b0)
    real_roots = [c.real for c in candidates if abs(c.imag) <= 1e-9 * max(1.0, abs(c))]

    if ladder:
        below = [kk for kk in ladder if kk <= root]
        above = [kk for kk in ladder if kk >= root]
        bracket = ([max(below)] if below else []) + ([min(above)] if above else [])
        k_opt = min(bracket, key=lambda kk: (total_error_closed(c2, c3, n, kk), kk))
    else:
        k_opt = min(max(int(round(root)), 1), n)
    return QuinticSolution(real_roots=real_roots, candidates=candidates,
                           k_opt_feasible=int(k_opt), newton_iterations=iterations)


def optimal_k(cfg: SystemConfig, c2: float, c3: float) -> int:
    """Optimal feasible block count for fixed scenario constants.

    Runs the closed-form pipeline (quintic root, feasibility projection); by
    convexity of φ this always equals `exhaustive_k`.
    """
    ladder = [plan.k_total for plan in feasible_ladder(cfg)]
    return solve_quintic(c2, c3, cfg.n_elements, ladder=ladder).k_opt_feasible


def exhaustive_k(cfg: SystemConfig, c2: float, c3: float) -> int:
    """Brute-force φ-argmin over the entire feasible ladder (test oracle path)."""
    ladder = [plan.k_total for plan in feasible_ladder(cfg)]
    return min(ladder, key=lambda kk: (total_error_closed(c2, c3, cfg.n_elements, kk), kk))
