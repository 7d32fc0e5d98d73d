"""Channel models: planar-array steering, spherical-wavefront device links,
their Taylor and block-wise far-field approximations, and the cascaded matrix.

Element ordering is y-major everywhere (outer iy, inner iz), matching the
Kronecker factorization c_y ⊗ c_z.  Block-approximated vectors are stored
block-major (all elements of block 0, then block 1, …, blocks themselves
y-major); `block_permutation` maps that ordering back to global y-major.

Phase conventions (all exponents in radians, k0 = 2π/λ):
  far field:   entry(iy, iz) = exp(+j·k0·(iy·dy·sin(az)·cos(el) + iz·dz·sin(el)))
  exact:       entry = gain · exp(−j·k0·(r_exact − r))       (constant r removed)
  taylor:      entry = gain · exp(−j·k0·(r_y(iy) + r_z(iz)))  (constant r removed)
  block-ff:    entry = gain · exp(−j·k0·(r_center + Δr)), Δr = a_y·sy + a_z·sz
with a_y = −d_ya·sin(δ)·cos(ε), a_z = −d_za·sin(ε) from the block-local angles.
The per-block constants exp(−j·k0·r_center) are kept: the approximation-error
budgets compare against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sysmodel import (  # noqa: F401  (BlockPlan re-exported as part of this API)
    BlockPlan,
    SystemConfig,
    UserPlacement,
    Vec3,
    centered_offsets,
    user_position,
    validate_plan,
)


@dataclass
class SteeringVector:
    """Unit-modulus planar-array response, y-major."""

    entries: np.ndarray


@dataclass
class FarFieldChannel:
    """Rank-one surface-to-receiver channel G = η·a_r·a_tᵀ."""

    matrix_g: np.ndarray
    path_gain: complex
    bs_azimuth: float
    bs_elevation: float
    irs_azimuth: float
    irs_elevation: float


@dataclass
class NearFieldChannel:
    """Device-to-surface channel vector under one of the three phase models.

    mode "exact-distance" and "taylor" vectors are global y-major;
    mode "block-ff" vectors are block-major and carry their plan.
    """

    vector_f: np.ndarray
    placement: UserPlacement
    mode: str
    plan: BlockPlan | None = None


@dataclass
class CascadedChannel:
    """Device→surface→receiver matrix H = G·diag(f), columns in global y-major order."""

    matrix_h: np.ndarray
    source: str


def upa_steering(az: float, el: float, ny: int, nz: int, dy: float, dz: float,
                 wavelength: float) -> SteeringVector:
    """Far-field planar-array steering vector.

    Parameters
    ----------
    az, el : float
        Azimuth and elevation of the impinging/departing ray, radians.
    ny, nz : int
        Element counts along y and z.
    dy, dz : float
        Element spacings in meters.
    wavelength : float
        Carrier wavelength in meters.

    Returns
    -------
    SteeringVector
        kron(c_y, c_z) with c_y[iy] = exp(+j·(2π/λ)·iy·dy·sin(az)·cos(el))
        and c_z[iz] = exp(+j·(2π/λ)·iz·dz·sin(el)), centered offsets.
    """
    k0 = 2.0 * math.pi / wavelength
    c_y = np.exp(1j * k0 * dy * math.sin(az) * math.cos(el) * centered_offsets(ny))
    c_z = np.exp(1j * k0 * dz * math.sin(el) * centered_offsets(nz))
    return SteeringVector(entries=np.kron(c_y, c_z))


def ff_channel_g(cfg: SystemConfig, path_gain: complex, bs_azimuth: float,
                 bs_elevation: float, irs_azimuth: float, irs_elevation: float) -> FarFieldChannel:
    """Rank-one far-field channel between the surface and the receiver array."""
    a_r = upa_steering(bs_azimuth, bs_elevation, cfg.m_y, cfg.m_z, cfg.d_yb, cfg.d_zb,
                       cfg.wavelength_m)
    a_t = upa_steering(irs_azimuth, irs_elevation, cfg.n_y, cfg.n_z, cfg.d_ya, cfg.d_za,
                       cfg.wavelength_m)
    matrix = path_gain * np.outer(a_r.entries, a_t.entries)  # a_r·a_tᵀ, no conjugate
    return FarFieldChannel(matrix_g=matrix, path_gain=complex(path_gain),
                           bs_azimuth=bs_azimuth, bs_elevation=bs_elevation,
                           irs_azimuth=irs_azimuth, irs_elevation=irs_elevation)


def nf_distance_exact(user: Vec3, element: Vec3) -> float:
    """Euclidean propagation distance between a device and one element."""
    return float(np.linalg.norm(np.asarray(user, dtype=float) - np.asarray(element, dtype=float)))


def _taylor_axis_terms(placement: UserPlacement, cfg: SystemConfig) -> tuple:
    """Per-axis second-order distance terms (r_y over iy, r_z over iz)."""
    r = placement.r_m
    sin_a, sin_b = math.sin(placement.azimuth_rad), math.sin(placement.elevation_rad)
    cos_b = math.cos(placement.elevation_rad)
    iy = centered_offsets(cfg.n_y)
    iz = centered_offsets(cfg.n_z)
    r_y = -iy * cfg.d_ya * sin_a * cos_b + iy**2 * cfg.d_ya**2 * (1.0 - sin_a**2 * cos_b**2) / (2.0 * r)
    r_z = -iz * cfg.d_za * sin_b + iz**2 * cfg.d_za**2 * cos_b**2 / (2.0 * r)
    return r_y, r_z


def nf_distance_taylor(placement: UserPlacement, iy: float, iz: float,
                       cfg: SystemConfig) -> float:
    """Second-order separable approximation of the device-to-element distance.

    Equals r + r_y(iy) + r_z(iz); the bilinear iy·iz term is dropped, which is
    what makes the y/z phase decomposition separable.
    """
    r_y, r_z = _taylor_axis_terms(placement, cfg)
    off_y = centered_offsets(cfg.n_y)
    off_z = centered_offsets(cfg.n_z)
    jy = int(np.argmin(np.abs(off_y - iy)))
    jz = int(np.argmin(np.abs(off_z - iz)))
    if abs(off_y[jy] - iy) > 1e-9 or abs(off_z[jz] - iz) > 1e-9:
        raise ValueError(f"({iy},{iz}) is not a centered element offset of this array")
    return placement.r_m + float(r_y[jy]) + float(r_z[jz])


def nf_channel(placement: UserPlacement, cfg: SystemConfig, mode: str,
               plan: BlockPlan | None = None) -> NearFieldChannel:
    """Device-to-surface channel vector under the requested phase model.

    Parameters
    ----------
    mode : {"exact-distance", "taylor", "block-ff"}
        "exact-distance" uses per-element Euclidean distances (minus the
        constant r), "taylor" the separable second-order expansion (same
        constant removed), "block-ff" the block-wise far-field model (requires
        `plan`; per-block distance constants are kept).
    """
    k0 = 2.0 * math.pi / cfg.wavelength_m
    gain = placement.path_gain
    if mode == "exact-distance":
        user = user_position(placement)
        y = centered_offsets(cfg.n_y) * cfg.d_ya
        z = centered_offsets(cfg.n_z) * cfg.d_za
        dist = np.sqrt(user[0]**2 + (user[1] - y[:, None])**2 + (user[2] - z[None, :])**2)
        phase = -k0 * (dist - placement.r_m)
        return NearFieldChannel(vector_f=gain * np.exp(1j * phase).ravel(),
                                placement=placement, mode=mode)
    if mode == "taylor":
        r_y, r_z = _taylor_axis_terms(placement, cfg)
        c_y = np.exp(-1j * k0 * r_y)
        c_z = np.exp(-1j * k0 * r_z)
        return NearFieldChannel(vector_f=gain * np.kron(c_y, c_z),
                                placement=placement, mode=mode)
    if mode == "block-ff":
        if plan is None:
            raise ValueError("block-ff mode requires a BlockPlan")
        return block_ff_channel(placement, cfg, plan)
    raise ValueError(f"unknown channel mode {mode!r}")


def block_geometry(placement: UserPlacement, cfg: SystemConfig, plan: BlockPlan) -> dict:
    """Per-block local geometry, block-major order.

    Returns arrays over the K blocks: "r_center" (device-to-block-center
    distance), "delta" and "eps" (block-local azimuth/elevation of the device
    as seen from the block center), and the per-element phase slopes
    "a_y" = −d_ya·sin(δ)·cos(ε), "a_z" = −d_za·sin(ε).
    """
    validate_plan(cfg, plan)
    user = user_position(placement)
    ky = centered_offsets(plan.k_y)
    kz = centered_offsets(plan.k_z)
    cy = (ky * plan.s_y * cfg.d_ya)[:, None]    # block-center y per ky
    cz = (kz * plan.s_z * cfg.d_za)[None, :]    # block-center z per kz
    ux, uy, uz = user[0], user[1] - cy, user[2] - cz
    uy, uz = np.broadcast_arrays(uy, uz)
    r_center = np.sqrt(ux**2 + uy**2 + uz**2)
    eps = np.arcsin(np.clip(uz / r_center, -1.0, 1.0))
    delta = np.arctan2(uy, ux)
    a_y = -cfg.d_ya * np.sin(delta) * np.cos(eps)
    a_z = -cfg.d_za * np.sin(eps)
    return {
        "r_center": r_center.ravel(),
        "delta": delta.ravel(),
        "eps": eps.ravel(),
        "a_y": a_y.ravel(),
        "a_z": a_z.ravel(),
    }


def block_ff_channel(placement: UserPlacement, cfg: SystemConfig,
                     plan: BlockPlan) -> NearFieldChannel:
    """Block-wise far-field approximation of the device-to-surface channel.

    Within each sub-block the phase is linear in the element offsets around
    the exact block-center distance; the result is stored block-major with the
    per-block constants exp(−j·k0·r_center) retained.
    """
    geo = block_geometry(placement, cfg, plan)
    k0 = 2.0 * math.pi / cfg.wavelength_m
    sy = centered_offsets(plan.s_y)[:, None]
    sz = centered_offsets(plan.s_z)[None, :]
    segments = []
    for r_c, a_y, a_z in zip(geo["r_center"], geo["a_y"], geo["a_z"]):
        r_lin = r_c + a_y * sy + a_z * sz
        segments.append(np.exp(-1j * k0 * r_lin).ravel())
    vector = placement.path_gain * np.concatenate(segments)
    return NearFieldChannel(vector_f=vector, placement=placement, mode="block-ff", plan=plan)


def _block_permutation(n_y: int, n_z: int, plan: BlockPlan) -> np.ndarray:
    half_y, half_z = (n_y - 1) / 2.0, (n_z - 1) / 2.0
    idx = np.empty(n_y * n_z, dtype=np.intp)
    pos = 0
    for ky in centered_offsets(plan.k_y):
        for kz in centered_offsets(plan.k_z):
            for sy in centered_offsets(plan.s_y):
                gy = int(round(ky * plan.s_y + sy + half_y))
                for sz in centered_offsets(plan.s_z):
                    gz = int(round(kz * plan.s_z + sz + half_z))
                    idx[pos] = gy * n_z + gz
                    pos += 1
    return idx


def block_permutation(cfg: SystemConfig, plan: BlockPlan) -> np.ndarray:
    """Global y-major element index for every block-major vector position."""
    validate_plan(cfg, plan)
    return _block_permutation(cfg.n_y, cfg.n_z, plan)


def block_columns(cfg: SystemConfig, plan: BlockPlan, k: int) -> np.ndarray:
    """Global y-major column indices of the k-th block (blocks in block-major order)."""
    if not 0 <= k < plan.k_total:
        raise ValueError(f"block index {k} outside plan with {plan.k_total} blocks")
    perm = block_permutation(cfg, plan)
    s = plan.s_total
    return perm[k * s:(k + 1) * s]


def block_pieces(g: FarFieldChannel, f: NearFieldChannel, cfg: SystemConfig,
                 plan: BlockPlan, k: int) -> tuple:
    """(g_k, f_k, h_k) for block k: the M×S channel slice and its factors.

    Accepts f in any mode; block-ff vectors are sliced directly, global-order
    vectors through the block's column indices.
    """
    cols = block_columns(cfg, plan, k)
    g_k = g.matrix_g[:, cols]
    if f.mode == "block-ff":
        s = plan.s_total
        f_k = f.vector_f[k * s:(k + 1) * s]
    else:
        f_k = f.vector_f[cols]
    return g_k, f_k, g_k * f_k[None, :]


def cascaded(g: FarFieldChannel, f: NearFieldChannel) -> CascadedChannel:
    """Cascaded channel H = G·diag(f) with columns in global y-major order.

    Block-major f vectors are first mapped back to global order so that
    column j of the result is always column j of G times entry j of the
    globally-ordered f.
    """
    n = g.matrix_g.shape[1]
    if f.vector_f.shape != (n,):
        raise ValueError(f"dimension mismatch: G has {n} columns, f has shape {f.vector_f.shape}")
    if f.mode == "block-ff":
        cfg_n = f.plan.k_y * f.plan.s_y * f.plan.k_z * f.plan.s_z
        if cfg_n != n:
            raise ValueError("block plan does not match G's column count")
        f_global = np.empty(n, dtype=complex)
        # invert the block-major storage: position p holds global element perm[p]
        perm = _block_permutation(f.plan.k_y * f.plan.s_y, f.plan.k_z * f.plan.s_z, f.plan)
        f_global[perm] = f.vector_f
    else:
        f_global = f.vector_f
    return CascadedChannel(matrix_h=g.matrix_g * f_global[None, :], source=f.mode)
