"""SINR and achievable-rate expressions for the common and private streams.

All groups are the users assigned to one (beam, resource block). The common
stream of a group must be decodable by every member, so its rate is set by the
group's worst user. Private streams see the other members' private power as
interference; the common power never appears in a denominator because it is
removed before private decoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import AllocationState, ChannelRealization, SystemConfig, noise_power
from .pattern import beam_gain, first_null_angle, pattern_envelope  # noqa: F401  (public API)


class EmptyGroupError(ValueError):
    """A common-stream quantity was requested for a (beam, block) with no users."""


GAMMA_FLOOR = 1e-9


def sca_coefficients(gamma0: float) -> tuple[float, float]:
    """Surrogate coefficients (tau, varpi) at expansion SINR ``gamma0``.

    The concave surrogate s(g) = tau*log2(g) + varpi touches log2(1+g) at
    gamma0 and lower-bounds it everywhere on g > 0.
    """
    if gamma0 <= 0.0:
        raise ValueError(f"expansion SINR must be positive, got {gamma0}")
    tau = gamma0 / (1.0 + gamma0)
    varpi = np.log2(1.0 + gamma0) - tau * np.log2(gamma0)
    return tau, varpi


def surrogate_rate(gamma, tau, varpi):
    """Evaluate tau*log2(gamma) + varpi with a floor to keep the log finite."""
    return tau * np.log2(np.maximum(gamma, GAMMA_FLOOR)) + varpi


def _effective_gain(real: ChannelRealization, alloc: AllocationState, m, u, k) -> float:
    w = alloc.precoders[m, u, k]
    return abs(np.conj(w) * real.leo_gains[m, u, k]) ** 2


def private_sinr(real: ChannelRealization, alloc: AllocationState,
                 m: int, u: int, k: int, sigma2: float, i_p: float) -> float:
    """SINR of user u's private stream on (beam m, block k)."""
    if not alloc.assignment[m, u, k]:
        raise ValueError(f"user {u} is not assigned to beam {m}, block {k}")
    g = _effective_gain(real, alloc, m, u, k)
    p = alloc.beam_power[m, k]
    others = float(np.sum(alloc.assignment[m, :, k] * alloc.private_coeff[m, :, k])) \
        - alloc.private_coeff[m, u, k]
    return g * alloc.private_coeff[m, u, k] * p / (i_p + g * others * p + sigma2)


def common_sinr_and_rate(real: ChannelRealization, alloc: AllocationState,
                         m: int, k: int, sigma2: float, i_p: float,
                         bandwidth: float) -> tuple[float, float]:
    """Group SINR (min over assigned users) and rate of the common stream."""
    users = np.flatnonzero(alloc.assignment[m, :, k])
    if users.size == 0:
        raise EmptyGroupError(f"no user assigned to beam {m}, block {k}")
    p = alloc.beam_power[m, k]
    total_eta = float(np.sum(alloc.private_coeff[m, users, k]))
    gamma = np.inf
    for u in users:
        g_num = abs(np.conj(alloc.precoders[m, -1, k]) * real.leo_gains[m, u, k]) ** 2
        g_den = _effective_gain(real, alloc, m, u, k)
        gamma_u = g_num * alloc.common_coeff[m, k] * p / (i_p + g_den * total_eta * p + sigma2)
        gamma = min(gamma, gamma_u)
    return gamma, bandwidth * np.log2(1.0 + gamma)


@dataclass
class RateBreakdown:
    """Per-group and per-user rates for one allocation, in bit/s."""

    common_rate: np.ndarray    # (M, K); zero where no user is assigned
    private_rate: np.ndarray   # (M, U, K); zero off-assignment
    common_sinr: np.ndarray    # (M, K)
    private_sinr: np.ndarray   # (M, U, K)
    total_per_user: np.ndarray  # (U,) = sum over (m, k) of x * (C + R_private)


def rate_breakdown(real: ChannelRealization, alloc: AllocationState,
                   cfg: SystemConfig) -> RateBreakdown:
    """Vectorized rates for scalar (single-feed) precoders."""
    x = alloc.assignment.astype(float)
    g = real.power_gains * np.abs(alloc.precoders[:, :-1, :]) ** 2
    p = alloc.beam_power[:, None, :]
    a = cfg.geo_interference + noise_power(cfg)

    eta = alloc.private_coeff * x
    sum_eta = eta.sum(axis=1)[:, None, :]
    gam_p = np.where(
        x > 0, g * eta * p / (a + g * (sum_eta - eta) * p), 0.0)
    r_p = cfg.bandwidth_per_beam * np.log2(1.0 + gam_p)

    gam_c_users = np.where(
        x > 0,
        g * alloc.common_coeff[:, None, :] * p / (a + g * sum_eta * p),
        np.inf,
    )
    gam_c = gam_c_users.min(axis=1)
    active = x.sum(axis=1) > 0
    gam_c = np.where(active, gam_c, 0.0)
    r_c = np.where(active, cfg.bandwidth_per_beam * np.log2(1.0 + gam_c), 0.0)

    per_user = np.einsum("muk,muk->u", x, alloc.common_share + r_p)
    return RateBreakdown(common_rate=r_c, private_rate=r_p,
                         common_sinr=gam_c, private_sinr=gam_p,
                         total_per_user=per_user)


class SumRateResult(NamedTuple):
    total: float           # bit/s
    c2_violation: float    # bit/s, max over groups of (sum of shares - common rate)


def sum_rate(real: ChannelRealization, alloc: AllocationState,
             cfg: SystemConfig) -> SumRateResult:
    """Network sum rate plus the worst decodability violation of common shares.

    Violations are reported, never raised: the solver drives them to zero
    through the corresponding multiplier.
    """
    rb = rate_breakdown(real, alloc, cfg)
    shares = np.einsum("muk,muk->mk", alloc.assignment.astype(float), alloc.common_share)
    violation = float(np.max(np.maximum(shares - rb.common_rate, 0.0), initial=0.0))
    return SumRateResult(float(rb.total_per_user.sum()), violation)


def mmse_precoder(channel: np.ndarray, intra_power: float, sigma2: float) -> np.ndarray:
    """Unit-norm regularized precoder (sigma2 I + p h h^H)^-1 h for one stream."""
    h = np.atleast_1d(np.asarray(channel, dtype=complex))
    mat = sigma2 * np.eye(h.size) + intra_power * np.outer(h, h.conj())
    w = np.linalg.solve(mat, h)
    return w / np.linalg.norm(w)


def compute_precoders(real: ChannelRealization, alloc: AllocationState,
                      sigma2: float) -> np.ndarray:
    """Precoder weights per (beam, stream, block); scalar channels give all ones."""
    m_n, u_n, k_n = real.leo_gains.shape
    out = np.ones((m_n, u_n + 1, k_n), dtype=complex)
    # Single feed per beam: any unit-norm scalar is optimal, use 1 exactly.
    return out
