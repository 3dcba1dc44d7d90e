"""Scenario configuration, decision-variable containers and random channel draws.

The default scenario is the normalized one used by all experiments: the
free-space factor of the link budget is set to 1 and the per-user channel
power equals the beam-pattern gain at the user's boresight angle.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pattern import beam_gain, first_null_angle

SPEED_OF_LIGHT = 299792458.0


class ConfigError(ValueError):
    """Raised for invalid scenario configurations."""


@dataclass(frozen=True)
class SystemConfig:
    """All scenario constants for one simulation setup.

    Rates are in bit/s, powers in watts, angles in radians. ``num_users``
    defaults to twice the number of beams.
    """

    num_beams: int = 5
    num_resource_blocks: int = 5
    num_users: int | None = None
    total_power: float = 60.0
    interference_threshold: float = 3.0
    geo_interference: float = 4.0
    min_rate: float = 1e6
    bandwidth_per_beam: float = 10e6
    carrier_frequency: float = 19e9
    noise_density_dbm: float = -170.0
    step_size: float = 1e-3
    step_decay: float = 0.9995
    max_iterations: int = 10_000
    convergence_tolerance: float = 2e-5
    g_max: float = 20.0
    theta_3db: float = 0.07
    g_t: float = 1.0
    g_r: float = 1.0
    channel_mode: str = "normalized"
    user_angle_spread: float = 2.2
    geo_gain_lo: float = 0.1
    geo_gain_hi: float = 1.5
    block_pairing: str = "diagonal"
    rng_seed: int = 20240905

    def __post_init__(self):
        if self.num_users is None:
            object.__setattr__(self, "num_users", 2 * self.num_beams)
        self.validate()

    def validate(self):
        c = self
        if not (c.num_beams >= 1 and c.num_resource_blocks >= 1 and c.num_users >= 1):
            raise ConfigError("num_beams, num_resource_blocks and num_users must be >= 1")
        if c.num_users < c.num_beams:
            raise ConfigError("num_users must be >= num_beams so every beam gets a user")
        for name in ("total_power", "interference_threshold", "bandwidth_per_beam",
                     "step_size", "convergence_tolerance", "g_max", "theta_3db",
                     "carrier_frequency", "user_angle_spread"):
            if getattr(c, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if c.geo_interference < 0 or c.min_rate < 0:
            raise ConfigError("geo_interference and min_rate must be nonnegative")
        if not (0 < c.step_decay <= 1):
            raise ConfigError("step_decay must lie in (0, 1]")
        if c.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if c.channel_mode not in ("normalized", "physical"):
            raise ConfigError(f"unknown channel_mode {c.channel_mode!r}")
        if c.block_pairing not in ("diagonal", "free"):
            raise ConfigError(f"unknown block_pairing {c.block_pairing!r}")
        if not (0 < c.geo_gain_lo <= c.geo_gain_hi):
            raise ConfigError("require 0 < geo_gain_lo <= geo_gain_hi")
        if noise_power(c) <= 0:
            raise ConfigError("derived noise power must be positive")

    @property
    def sigma2(self) -> float:
        return noise_power(self)

    def to_file(self, path):
        save_config(self, path)

    @classmethod
    def from_file(cls, path) -> "SystemConfig":
        return load_config(path)


def noise_power(cfg: SystemConfig) -> float:
    """Noise power in watts over one beam bandwidth from the density in dBm/Hz."""
    return 10.0 ** ((cfg.noise_density_dbm - 30.0) / 10.0) * cfg.bandwidth_per_beam


_INT_FIELDS = {"num_beams", "num_resource_blocks", "num_users", "max_iterations", "rng_seed"}
_STR_FIELDS = {"channel_mode", "block_pairing"}


def save_config(cfg: SystemConfig, path):
    lines = ["# leo_rsma scenario configuration"]
    for f in dataclasses.fields(SystemConfig):
        lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_config(path) -> SystemConfig:
    """Parse a flat ``key = value`` file (UTF-8, ``#`` comments) into a config."""
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    kwargs = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in _STR_FIELDS:
            kwargs[key] = value
        elif key in _INT_FIELDS:
            kwargs[key] = int(value)
        else:
            kwargs[key] = float(value)
    return SystemConfig(**kwargs)


@dataclass(frozen=True)
class ChannelRealization:
    """One Monte Carlo draw of every link gain, indexed [beam, user, block]."""

    leo_gains: np.ndarray           # complex, (M, U, K)
    geo_to_leo_gains: np.ndarray    # power gains, (M, U, K); unused by default rates
    leo_to_geo_gains: np.ndarray    # power gains, (M, K)
    doppler_phases: np.ndarray      # radians, (M, U, K)
    distances: np.ndarray           # meters, (M, U, K)
    boresight_angles: np.ndarray    # radians, (M, U, K)

    @property
    def power_gains(self) -> np.ndarray:
        """|h|^2 per (beam, user, block)."""
        return np.abs(self.leo_gains) ** 2


def channel_amplitude(cfg: SystemConfig, theta, distance):
    """|h| for given boresight angles and distances under the configured mode."""
    gain = beam_gain(theta, cfg.theta_3db, cfg.g_max)
    if cfg.channel_mode == "normalized":
        return np.sqrt(gain)
    freespace = cfg.g_t * cfg.g_r * (
        SPEED_OF_LIGHT / (4.0 * np.pi * cfg.carrier_frequency * distance)
    ) ** 2
    return np.sqrt(gain * freespace)


# Slant-range window for the physical mode; rate-neutral in normalized mode.
_DISTANCE_LO = 600e3
_DISTANCE_HI = 1200e3


def generate_realization(cfg: SystemConfig, trial_index: int) -> ChannelRealization:
    """Draw one channel realization, deterministic in (cfg.rng_seed, trial_index).

    Boresight angles are uniform on [0, spread * theta_3dB], truncated just
    inside the first pattern null so channel powers stay positive.
    """
    if trial_index < 0:
        raise ConfigError(f"trial_index must be nonnegative, got {trial_index}")
    cfg.validate()
    m, u, k = cfg.num_beams, cfg.num_users, cfg.num_resource_blocks
    rng = np.random.default_rng([cfg.rng_seed, trial_index])

    theta_hi = min(cfg.user_angle_spread * cfg.theta_3db,
                   0.999 * first_null_angle(cfg.theta_3db))
    theta = rng.uniform(0.0, theta_hi, size=(m, u, k))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(m, u, k))
    distances = rng.uniform(_DISTANCE_LO, _DISTANCE_HI, size=(m, u, k))
    geo_to_leo = rng.uniform(0.1, 1.0, size=(m, u, k))
    leo_to_geo = rng.uniform(cfg.geo_gain_lo, cfg.geo_gain_hi, size=(m, k))

    amp = channel_amplitude(cfg, theta, distances)
    h = amp * np.exp(1j * phases)
    return ChannelRealization(
        leo_gains=h,
        geo_to_leo_gains=geo_to_leo,
        leo_to_geo_gains=leo_to_geo,
        doppler_phases=phases,
        distances=distances,
        boresight_angles=theta,
    )


@dataclass
class AllocationState:
    """Decision variables: powers, splitting coefficients, shares, assignment."""

    beam_power: np.ndarray     # (M, K) watts
    common_coeff: np.ndarray   # (M, K) eta_0 in [0, 1]
    private_coeff: np.ndarray  # (M, U, K) eta in [0, 1]
    common_share: np.ndarray   # (M, U, K) bit/s
    assignment: np.ndarray     # (M, U, K) binary
    precoders: np.ndarray      # (M, U + 1, K) complex; index U is the common stream

    @classmethod
    def initial(cls, cfg: SystemConfig, assignment: np.ndarray,
                real: ChannelRealization | None = None) -> "AllocationState":
        """Feasible start: each beam's equal budget share spread over the blocks
        it uses and clipped by the interference cap; eta_0 = 0.2 with the rest
        split equally, zero common shares."""
        m, u, k = cfg.num_beams, cfg.num_users, cfg.num_resource_blocks
        active = assignment.sum(axis=1) > 0  # (M, K)
        blocks_used = np.maximum(active.sum(axis=1), 1)  # per beam
        p = np.where(active, cfg.total_power / (m * blocks_used[:, None]), 0.0)
        if real is not None:
            cap = cfg.interference_threshold / real.leo_to_geo_gains
            p = np.minimum(p, cap)
        counts = assignment.sum(axis=1)  # users per (m, k)
        eta = np.zeros((m, u, k))
        with np.errstate(divide="ignore", invalid="ignore"):
            per_user = np.where(counts > 0, 0.8 / np.maximum(counts, 1), 0.0)
        eta = assignment * per_user[:, None, :]
        eta0 = np.where(active, 0.2, 0.0)
        return cls(
            beam_power=p,
            common_coeff=eta0,
            private_coeff=eta,
            common_share=np.zeros((m, u, k)),
            assignment=assignment.astype(np.int8),
            precoders=np.ones((m, u + 1, k), dtype=complex),
        )

    def check_invariants(self, cfg: SystemConfig, tol: float = 1e-6):
        """Raise AssertionError if any structural constraint is violated."""
        x = self.assignment
        budget = self.common_coeff + np.einsum("muk,muk->mk", x, self.private_coeff)
        assert np.all(budget <= 1.0 + tol), "per-group coefficient budget exceeded"
        assert self.beam_power.sum() <= cfg.total_power * (1.0 + tol), "power budget exceeded"
        assert np.all(x.sum(axis=(0, 2)) == 1), "each user needs exactly one (beam, block)"
        norms = np.abs(self.precoders)
        assert np.allclose(norms[norms > 0], 1.0, atol=tol), "precoders must be unit norm"


@dataclass
class DualState:
    """Multipliers and the SCA expansion point, in bandwidth-normalized units."""

    lam1: np.ndarray   # (U,)
    lam2: np.ndarray   # (M, K)
    lam3: np.ndarray   # (M, K)
    lam4: np.ndarray   # (M, K)
    lam5: float
    sca_gamma_private: np.ndarray  # (M, U, K)
    sca_gamma_common: np.ndarray   # (M, K)

    @classmethod
    def initial(cls, cfg: SystemConfig, value: float = 0.1) -> "DualState":
        m, u, k = cfg.num_beams, cfg.num_users, cfg.num_resource_blocks
        return cls(
            lam1=np.full(u, value),
            lam2=np.full((m, k), value),
            lam3=np.full((m, k), value),
            lam4=np.full((m, k), value),
            lam5=value,
            sca_gamma_private=np.zeros((m, u, k)),
            sca_gamma_common=np.zeros((m, k)),
        )

    def all_nonnegative(self) -> bool:
        return bool(
            np.all(self.lam1 >= 0) and np.all(self.lam2 >= 0)
            and np.all(self.lam3 >= 0) and np.all(self.lam4 >= 0) and self.lam5 >= 0
        )
