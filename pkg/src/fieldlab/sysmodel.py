"""System configuration, unit conversions, and array/user geometry.

Coordinate convention: the reflecting surface is a uniform planar array in the
x = 0 plane, centered at the origin, with elements along the y and z axes.
Element, block, and antenna indices are *centered offsets*: integers for odd
counts, half-integers for even counts, always symmetric about 0.  Vectors over
array elements are ordered y-major (outer index iy, inner index iz); every
vectorization downstream depends on this ordering.

Positions are plain numpy arrays of shape (3,) in meters (x, y, z).
"""

from __future__ import annotations

import hashlib
import json
import math
import zlib
from dataclasses import asdict, dataclass, fields

import numpy as np

Vec3 = np.ndarray  # shape (3,), meters


class ConfigError(ValueError):
    """Raised for malformed or inconsistent configuration input."""


def dbm_to_watts(level_dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** ((level_dbm - 30.0) / 10.0)


def watts_to_dbm(power_w: float) -> float:
    """Convert a power in watts to dBm."""
    if power_w <= 0:
        raise ValueError("power must be positive")
    return 10.0 * math.log10(power_w) + 30.0


def centered_offsets(count: int) -> np.ndarray:
    """Centered, unit-spaced index offsets for a `count`-element axis.

    Integers for odd counts (…,-1, 0, 1,…), half-integers for even counts
    (…,-0.5, 0.5,…).  Always sums to zero, and sum of squares is
    count·(count²−1)/12, which is what the block error budgets rely on.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    return np.arange(count, dtype=float) - (count - 1) / 2.0


@dataclass
class SystemConfig:
    """Static deployment parameters shared by every module.

    Antenna/element counts are per axis: the receiver has m_y·m_z antennas,
    the surface n_y·n_z elements.  q1 is the full-array pilot length, q2 the
    per-sub-block pilot length.  All powers in watts, lengths in meters,
    angles in radians everywhere except the CLI boundary.
    """

    m_y: int = 3
    m_z: int = 3
    n_y: int = 7
    n_z: int = 7
    p_users: int = 9
    total_power_w: float = 1.0
    beta: float = 0.3
    sigma2_bs_w: float = 1e-10
    sigma2_irs_w: float = 1e-10
    wavelength_m: float = 0.0107
    d_yb: float = 0.00535
    d_zb: float = 0.00535
    d_ya: float = 0.00535
    d_za: float = 0.00535
    q1: int = 49
    q2: int = 9
    rng_seed: int = 0

    def __post_init__(self) -> None:
        for name in ("m_y", "m_z", "n_y", "n_z", "p_users", "q1", "q2"):
            value = getattr(self, name)
            if int(value) != value or int(value) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
            setattr(self, name, int(value))
        self.rng_seed = int(self.rng_seed)
        if not 0 <= self.rng_seed < 2**64:
            raise ConfigError("rng_seed must fit in 64 bits")
        for name in ("total_power_w", "wavelength_m", "d_yb", "d_zb", "d_ya", "d_za"):
            value = float(getattr(self, name))
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be positive and finite, got {value!r}")
            setattr(self, name, value)
        for name in ("sigma2_bs_w", "sigma2_irs_w"):
            value = float(getattr(self, name))
            if not (value >= 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be non-negative and finite, got {value!r}")
            setattr(self, name, value)
        self.beta = float(self.beta)
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie in (0,1), got {self.beta!r}")
        if self.q1 < self.n_elements:
            raise ConfigError("q1 must be >= n_y*n_z so the pilot design admits a right pseudo-inverse")

    @property
    def m_antennas(self) -> int:
        return self.m_y * self.m_z

    @property
    def n_elements(self) -> int:
        return self.n_y * self.n_z

    @classmethod
    def from_dict(cls, raw: dict) -> "SystemConfig":
        return cls(**_checked_keys(cls, raw, dbm_fields=("sigma2_bs_w", "sigma2_irs_w")))

    def digest(self) -> str:
        """Hex digest identifying this configuration (stable across platforms)."""
        payload = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class ScenarioConfig:
    """Sampling ranges and deployment constants used to draw random scenarios.

    The surface-to-receiver link is a fixed deployment: one distance d_g_m and
    one random set of link angles per seed stream.  Users are drawn per record.
    snr definition for sweeps/datasets: mean received signal power per antenna
    over sigma2_bs; sigma2_irs stays at its configured value.
    """

    d_g_m: float = 20.0
    r_min_m: float = 5.0
    r_max_m: float = 20.0
    angle_half_range_rad: float = math.pi / 3
    path_exponent: float = 1.0
    snr_grid_db: tuple = (-10.0, 0.0, 10.0, 20.0)
    records_per_user: int = 250
    plan_k_y: int = 7
    plan_k_z: int = 7
    train_fraction: float = 0.9

    def __post_init__(self) -> None:
        if not 0 < self.r_min_m <= self.r_max_m:
            raise ConfigError("need 0 < r_min_m <= r_max_m")
        if not 0 < self.angle_half_range_rad < math.pi / 2:
            raise ConfigError("angle_half_range_rad must lie in (0, pi/2)")
        if self.d_g_m <= 0:
            raise ConfigError("d_g_m must be positive")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0,1)")
        if int(self.records_per_user) < 1 or int(self.plan_k_y) < 1 or int(self.plan_k_z) < 1:
            raise ConfigError("records_per_user and plan factors must be positive integers")
        self.records_per_user = int(self.records_per_user)
        self.plan_k_y = int(self.plan_k_y)
        self.plan_k_z = int(self.plan_k_z)
        self.snr_grid_db = tuple(float(s) for s in self.snr_grid_db)
        if not self.snr_grid_db:
            raise ConfigError("snr_grid_db must be non-empty")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        return cls(**_checked_keys(cls, raw))


def _checked_keys(cls, raw: dict, dbm_fields: tuple = ()) -> dict:
    """Validate config keys strictly; accept `<field>_dbm` variants at the boundary."""
    known = {f.name for f in fields(cls)}
    out = {}
    for key, value in raw.items():
        if key in known:
            out[key] = value
            continue
        watt_key = key[:-4] + "_w" if key.endswith("_dbm") else None
        if watt_key in dbm_fields:
            if watt_key in raw:
                raise ConfigError(f"both {key} and {watt_key} given")
            out[watt_key] = dbm_to_watts(float(value))
            continue
        raise ConfigError(f"unknown config key {key!r} for {cls.__name__}")
    return out


@dataclass
class UserPlacement:
    """Polar placement of one transmitting device plus its link path gain."""

    r_m: float
    azimuth_rad: float
    elevation_rad: float
    path_gain: complex

    def __post_init__(self) -> None:
        if not self.r_m > 0:
            raise ConfigError("r_m must be positive")
        half_pi = math.pi / 2
        if not (-half_pi < self.azimuth_rad < half_pi and -half_pi < self.elevation_rad < half_pi):
            raise ConfigError("azimuth and elevation must lie in (-pi/2, pi/2)")
        self.path_gain = complex(self.path_gain)
        if abs(self.path_gain) == 0:
            raise ConfigError("path_gain must be nonzero")


@dataclass
class BlockPlan:
    """Regular partition of the surface into k_y·k_z sub-blocks of s_y·s_z elements."""

    k_y: int
    k_z: int
    s_y: int
    s_z: int

    def __post_init__(self) -> None:
        for name in ("k_y", "k_z", "s_y", "s_z"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")

    @property
    def k_total(self) -> int:
        return self.k_y * self.k_z

    @property
    def s_total(self) -> int:
        return self.s_y * self.s_z


def plan_for(cfg: SystemConfig, k_y: int, k_z: int) -> BlockPlan:
    """Build the plan with k_y·k_z blocks, checking divisibility against cfg."""
    if cfg.n_y % k_y or cfg.n_z % k_z:
        raise ConfigError(f"block counts ({k_y},{k_z}) do not divide the array ({cfg.n_y},{cfg.n_z})")
    return BlockPlan(k_y=k_y, k_z=k_z, s_y=cfg.n_y // k_y, s_z=cfg.n_z // k_z)


def validate_plan(cfg: SystemConfig, plan: BlockPlan) -> None:
    if plan.k_y * plan.s_y != cfg.n_y or plan.k_z * plan.s_z != cfg.n_z:
        raise ConfigError("plan does not tile the configured array")


def feasible_plans(cfg: SystemConfig) -> list:
    """All (k_y, k_z) divisor-pair plans, ordered by total block count."""
    divs_y = [d for d in range(1, cfg.n_y + 1) if cfg.n_y % d == 0]
    divs_z = [d for d in range(1, cfg.n_z + 1) if cfg.n_z % d == 0]
    plans = [plan_for(cfg, ky, kz) for ky in divs_y for kz in divs_z]
    plans.sort(key=lambda p: (p.k_total, p.k_y))
    return plans


def feasible_ladder(cfg: SystemConfig) -> list:
    """One plan per distinct feasible K: the most nearly square block shape.

    For each product K the plan minimizing |log(s_y/s_z)| is kept (ties break
    toward smaller k_y), giving a deterministic ladder sorted by K.
    """
    best = {}
    for plan in feasible_plans(cfg):
        skew = abs(math.log(plan.s_y / plan.s_z))
        key = plan.k_total
        if key not in best or skew < best[key][0] - 1e-12:
            best[key] = (skew, plan)
    return [best[k][1] for k in sorted(best)]


def element_position(cfg: SystemConfig, iy: float, iz: float) -> Vec3:
    """Position of the surface element at centered offsets (iy, iz)."""
    _check_offset(iy, cfg.n_y, "iy")
    _check_offset(iz, cfg.n_z, "iz")
    return np.array([0.0, iy * cfg.d_ya, iz * cfg.d_za])


def block_center(cfg: SystemConfig, plan: BlockPlan, ky: float, kz: float) -> Vec3:
    """Position of the center of the sub-block at centered offsets (ky, kz)."""
    validate_plan(cfg, plan)
    _check_offset(ky, plan.k_y, "ky")
    _check_offset(kz, plan.k_z, "kz")
    return np.array([0.0, ky * plan.s_y * cfg.d_ya, kz * plan.s_z * cfg.d_za])


def user_position(placement: UserPlacement) -> Vec3:
    """Cartesian position of a device given its polar placement."""
    r, az, el = placement.r_m, placement.azimuth_rad, placement.elevation_rad
    return np.array([
        r * math.cos(az) * math.cos(el),
        r * math.sin(az) * math.cos(el),
        r * math.sin(el),
    ])


def _check_offset(value: float, count: int, name: str) -> None:
    limit = (count - 1) / 2.0
    if abs(value) > limit + 1e-9 or abs((value + limit) - round(value + limit)) > 1e-9:
        raise ConfigError(f"{name}={value!r} is not a centered offset of a {count}-element axis")


def rng_stream(seed: int, *key) -> np.random.Generator:
    """Independent, platform-stable generator for (seed, key...).

    String key parts are hashed with crc32 so call sites can label streams;
    integer parts pass through.  Streams with different keys never collide.
    """
    words = [int(seed)]
    for part in key:
        words.append(zlib.crc32(part.encode("utf-8")) if isinstance(part, str) else int(part))
    return np.random.default_rng(np.random.SeedSequence(words))


def sample_path_gain(rng: np.random.Generator, distance_m: float, wavelength_m: float,
                     exponent: float = 1.0) -> complex:
    """Random-phase path gain with free-space amplitude (λ/4πd)^exponent."""
    amplitude = (wavelength_m / (4.0 * math.pi * distance_m)) ** exponent
    return amplitude * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi))


def draw_placement(cfg: SystemConfig, scenario: ScenarioConfig,
                   rng: np.random.Generator) -> UserPlacement:
    """Draw one device placement from the scenario's sampling ranges."""
    r = rng.uniform(scenario.r_min_m, scenario.r_max_m)
    a = scenario.angle_half_range_rad
    az = rng.uniform(-a, a)
    el = rng.uniform(-a, a)
    gain = sample_path_gain(rng, r, cfg.wavelength_m, scenario.path_exponent)
    return UserPlacement(r_m=r, azimuth_rad=az, elevation_rad=el, path_gain=gain)


def draw_surface_link_angles(scenario: ScenarioConfig, rng: np.random.Generator) -> tuple:
    """Draw (bs_az, bs_el, irs_az, irs_el) for the surface-to-receiver link."""
    a = scenario.angle_half_range_rad
    return tuple(rng.uniform(-a, a) for _ in range(4))


def load_config(path: str) -> tuple:
    """Read one JSON document with optional "system" and "scenario" sections.

    Unknown keys anywhere are rejected; dBm noise variants are accepted in the
    system section only.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(raw) - {"system", "scenario"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = SystemConfig.from_dict(raw.get("system", {}))
    scenario = ScenarioConfig.from_dict(raw.get("scenario", {}))
    return cfg, scenario
