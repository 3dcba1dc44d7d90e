"""Iterative dual solver for the joint power / rate-splitting allocation.

Each iteration refreshes the concave rate surrogates at the current iterate,
recomputes beam powers from a per-group cubic stationarity condition, private
splitting coefficients from a per-user quadratic, the common coefficient and
common-rate shares from their closed forms, and finally takes one projected
subgradient step on the multipliers with a geometrically decaying step size.

Unit convention: the solver works with rates measured in units of the beam
bandwidth (log2 spectral efficiencies), so a single step size serves every
multiplier family. Multipliers and the SCA expansion point are stored in these
normalized units; all reported rates are converted back to bit/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import (AllocationState, ChannelRealization, DualState,
                    SystemConfig, noise_power)
from .rates import GAMMA_FLOOR, rate_breakdown

LOG2 = math.log(2.0)

# Multiplier runaway cap used by the minimum-rate infeasibility detector.
_LAM1_CAP = 1e6
_INFEASIBLE_PATIENCE = 500

# Diagonal preconditioning of the subgradient: the share/decodability pair
# iterates faster than the rest, and the wattage- and rate-scaled families
# step in violation-relative units so one nominal step size serves all.
_SHARE_STEP_SCALE = 10.0
# Relaxation factors damping the closed-form jumps of the power and splitting
# updates; they kill the limit-cycle ringing of the coupled dual loop. The
# factors shrink geometrically so the iteration can actually settle.
_POWER_RELAXATION = 0.15
_SPLIT_RELAXATION = 0.3
_COMMON_RELAXATION = 0.05
_RELAXATION_DECAY = 0.999
# SINR floor for the surrogate expansion point inside the solve loop. Keeping
# it well above GAMMA_FLOOR preserves an escape gradient for streams whose
# SINR collapsed to zero; the surrogate stays a valid global lower bound.
_SCA_EXPANSION_FLOOR = 1e-2
# Cadence of the feasible-iterate (primal recovery) bookkeeping.
_RECOVERY_EVERY = 10
# Weight that makes the recovery scoring lexicographic: minimum-rate
# feasibility first, decodable sum rate second.
_C1_PENALTY = 1e12


class NoStationaryPointError(RuntimeError):
    """The power polynomial degenerated to a nonzero constant."""


@dataclass(frozen=True)
class CubicCoefficients:
    """Coefficients of the beam-power stationarity cubic, highest degree first."""

    zeta3: float
    zeta2: float
    zeta1: float
    zeta0: float

    def as_tuple(self):
        return (self.zeta3, self.zeta2, self.zeta1, self.zeta0)

    def __call__(self, p):
        z3, z2, z1, z0 = self.as_tuple()
        return ((z3 * p + z2) * p + z1) * p + z0


@dataclass(frozen=True)
class EtaQuadratic:
    """Closed-form pieces of the private-coefficient update eta = (mu1 +- sqrt(mu2))/mu3."""

    mu1: float
    mu2: float
    mu3: float


# ---------------------------------------------------------------------------
# Closed forms on the public dense types
# ---------------------------------------------------------------------------

def _group_users(alloc: AllocationState, m: int, k: int) -> np.ndarray:
    return np.flatnonzero(alloc.assignment[m, :, k])


def cubic_coefficients(real: ChannelRealization, alloc: AllocationState,
                       dual: DualState, m: int, k: int,
                       cfg: SystemConfig) -> CubicCoefficients:
    """Assemble the power cubic for one (beam, block) group.

    The double sum ranges over ordered pairs of distinct users assigned to the
    group; expansion-point SINRs come from the dual state. Bandwidth-normalized
    units (W = 1).
    """
    users = _group_users(alloc, m, k)
    a = cfg.geo_interference + noise_power(cfg)
    f = real.leo_to_geo_gains[m, k]
    lam53 = dual.lam5 + f * dual.lam3[m, k]
    lam2 = dual.lam2[m, k]
    gc = dual.sca_gamma_common[m, k]

    h = real.power_gains[m, :, k]
    eta = alloc.private_coeff[m, :, k]
    gp = dual.sca_gamma_private[m, :, k]

    z3 = z2 = z1 = z0 = 0.0
    for u in users:
        for j in users:
            if j == u:
                continue
            q_tilde = lam2 * gc + dual.lam1[u] * gp[u]
            q_full = q_tilde + gp[u]
            z3 += h[j] * h[u] * eta[j] * eta[u] * lam53
            z2 += h[j] * eta[u] * a * lam53 \
                + h[u] * eta[j] * (a * lam53 - h[j] * eta[u] * q_tilde)
            z1 += a * (a * lam53 - h[j] * eta[u] * q_full
                       - h[u] * eta[j] * (gp[j] + q_tilde))
            z0 += -a * a * (gp[j] + q_full)
    return CubicCoefficients(float(z3), float(z2), float(z1), float(z0))


def eta_quadratic(real: ChannelRealization, alloc: AllocationState,
                  dual: DualState, m: int, u: int, k: int,
                  cfg: SystemConfig) -> EtaQuadratic:
    """Quadratic for user u's private coefficient on (beam m, block k).

    mu2 is the discriminant of the aggregated quadratic, so the update has a
    real stationary point exactly when mu2 >= 0.
    """
    users = _group_users(alloc, m, k)
    if u not in users:
        raise ValueError(f"user {u} is not assigned to beam {m}, block {k}")
    a = cfg.geo_interference + noise_power(cfg)
    lam4 = dual.lam4[m, k]
    lam1 = dual.lam1[u]
    p = alloc.beam_power[m, k]
    h = real.power_gains[m, :, k]
    gp = dual.sca_gamma_private[m, :, k]

    others = [j for j in users if j != u]
    mu1 = sum(-lam4 * a + h[j] * p * ((1.0 + lam1) * gp[u] - gp[j]) for j in others)
    mu3 = sum(2.0 * h[j] * lam4 * p for j in others)
    c_total = len(others) * (1.0 + lam1) * gp[u] * a
    mu2 = mu1 * mu1 + 2.0 * mu3 * c_total
    return EtaQuadratic(float(mu1), float(mu2), float(mu3))


def _cubic_antiderivative(coef: CubicCoefficients):
    z3, z2, z1, z0 = coef.as_tuple()

    def value(p):
        return ((z3 / 4.0 * p + z2 / 3.0) * p + z1 / 2.0) * p * p + z0 * p

    return value


def solve_beam_power(coef: CubicCoefficients, p_max_beam: float,
                     objective: Callable[[float], float] | None = None) -> float:
    """Best beam power among the in-range real roots of the cubic.

    ``objective`` scores candidates (the per-group dual objective during the
    solve); by default the cubic's antiderivative is used, which ranks
    stationary points consistently with the polynomial's sign structure.
    Falls back to the better of the interval endpoints when no root is usable.
    """
    z = coef.as_tuple()
    scale = max(abs(v) for v in z)
    if scale == 0.0:
        raise NoStationaryPointError("all cubic coefficients vanish")
    if abs(z[0]) <= 1e-15 * scale and abs(z[1]) <= 1e-15 * scale \
            and abs(z[2]) <= 1e-15 * scale:
        raise NoStationaryPointError("polynomial degenerated to a nonzero constant")
    if objective is None:
        objective = _cubic_antiderivative(coef)
    roots, valid = real_cubic_roots(*[np.array([v]) for v in z])
    candidates = [float(r) for r, ok in zip(roots[0], valid[0])
                  if ok and 0.0 <= r <= p_max_beam]
    if not candidates:
        candidates = [0.0, p_max_beam]
    return max(candidates, key=objective)


def solve_private_eta(quad: EtaQuadratic,
                      objective: Callable[[float], float] | None = None) -> float:
    """Select the private coefficient from the quadratic's branches.

    The branch (mu1 + sqrt(mu2))/mu3 is the interior maximizer whenever it is
    real (the other branch is the interior minimizer); it is clipped to [0, 1].
    A negative discriminant leaves only the boundary, chosen by ``objective``
    when given, otherwise by clamping the complex pair's real part.
    """
    if not all(np.isfinite(v) for v in (quad.mu1, quad.mu2, quad.mu3)):
        raise ValueError("quadratic coefficients must be finite")
    if quad.mu3 == 0.0:
        raise ZeroDivisionError("degenerate quadratic: mu3 = 0")
    if quad.mu2 < 0.0:
        if objective is not None:
            return max((0.0, 1.0), key=objective)
        return min(1.0, max(0.0, quad.mu1 / quad.mu3))
    branches = [(quad.mu1 + math.sqrt(quad.mu2)) / quad.mu3,
                (quad.mu1 - math.sqrt(quad.mu2)) / quad.mu3]
    inside = [b for b in branches if 0.0 <= b <= 1.0]
    if inside:
        if objective is not None:
            return max(inside, key=objective)
        return max(inside)
    clipped = [min(1.0, max(0.0, b)) for b in branches]
    if objective is not None:
        return max(clipped, key=objective)
    return min(1.0, max(0.0, (quad.mu1 + math.sqrt(quad.mu2)) / quad.mu3))


def solve_common_eta(dual: DualState, m: int, k: int, cfg: SystemConfig,
                     previous: float = 0.0) -> float:
    """Closed-form common coefficient, clipped to keep the group budget reachable."""
    lam4 = dual.lam4[m, k]
    if lam4 <= 0.0:
        return previous
    return min(1.0, dual.lam2[m, k] * dual.sca_gamma_common[m, k] / lam4)


def update_common_share(c: float, lam1_u: float, lam2_mk: float, delta: float) -> float:
    """One projected gradient-ascent step on a user's common-rate share."""
    if delta <= 0.0:
        raise ValueError("step size must be positive")
    return max(0.0, c + delta * (1.0 + lam1_u - lam2_mk))


def update_multipliers(dual: DualState, real: ChannelRealization,
                       alloc: AllocationState, cfg: SystemConfig,
                       step: float | None = None) -> DualState:
    """One projected subgradient step on every multiplier family.

    Rates are recomputed for the given allocation and normalized by the beam
    bandwidth before entering the subgradients.
    """
    delta = cfg.step_size if step is None else step
    b = cfg.bandwidth_per_beam
    rb = rate_breakdown(real, alloc, cfg)
    x = alloc.assignment.astype(float)

    user_rate = rb.total_per_user / b
    lam1 = np.maximum(0.0, dual.lam1 + delta * (cfg.min_rate / b - user_rate))
    shares = np.einsum("muk,muk->mk", x, alloc.common_share) / b
    lam2 = np.maximum(0.0, dual.lam2 + delta * (shares - rb.common_rate / b))
    lam3 = np.maximum(0.0, dual.lam3 + delta * (
        real.leo_to_geo_gains * alloc.beam_power - cfg.interference_threshold))
    budget = alloc.common_coeff + np.einsum("muk,muk->mk", x, alloc.private_coeff)
    lam4 = np.maximum(0.0, dual.lam4 + delta * (budget - 1.0))
    lam5 = max(0.0, dual.lam5 + delta * (alloc.beam_power.sum() - cfg.total_power))
    return DualState(lam1=lam1, lam2=lam2, lam3=lam3, lam4=lam4, lam5=float(lam5),
                     sca_gamma_private=dual.sca_gamma_private,
                     sca_gamma_common=dual.sca_gamma_common)


# ---------------------------------------------------------------------------
# Vectorized real-root cubic solver
# ---------------------------------------------------------------------------

def real_cubic_roots(c3, c2, c1, c0):
    """Real roots of batched cubics c3 x^3 + c2 x^2 + c1 x + c0.

    Returns (roots, valid) of shape (n, 3). Degenerate leading coefficients
    fall through to the quadratic/linear cases; each root gets one Newton
    polish on the original polynomial.
    """
    c3, c2, c1, c0 = np.broadcast_arrays(*(np.atleast_1d(np.asarray(c, float))
                                           for c in (c3, c2, c1, c0)))
    n = c3.size
    roots = np.full((n, 3), np.nan)
    valid = np.zeros((n, 3), dtype=bool)
    scale = np.maximum.reduce([np.abs(c3), np.abs(c2), np.abs(c1), np.abs(c0)])
    scale = np.where(scale == 0.0, 1.0, scale)

    is3 = np.abs(c3) > 1e-13 * scale
    is2 = ~is3 & (np.abs(c2) > 1e-13 * scale)
    is1 = ~is3 & ~is2 & (np.abs(c1) > 1e-13 * scale)

    if np.any(is3):
        a = c2[is3] / c3[is3]
        b = c1[is3] / c3[is3]
        c = c0[is3] / c3[is3]
        # depressed form t^3 + pt + q, x = t - a/3
        p = b - a * a / 3.0
        q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
        disc = -4.0 * p**3 - 27.0 * q * q
        shift = -a / 3.0
        r3 = np.full((is3.sum(), 3), np.nan)
        v3 = np.zeros((is3.sum(), 3), dtype=bool)

        three = disc > 0.0
        if np.any(three):
            pp = p[three]
            qq = q[three]
            m = 2.0 * np.sqrt(-pp / 3.0)
            arg = np.clip(3.0 * qq / (pp * m), -1.0, 1.0)
            phi = np.arccos(arg) / 3.0
            for i in range(3):
                r3[three, i] = m * np.cos(phi - 2.0 * np.pi * i / 3.0) + shift[three]
            v3[three] = True

        one = ~three
        if np.any(one):
            pp = p[one]
            qq = q[one]
            d = np.sqrt(np.maximum(qq * qq / 4.0 + pp**3 / 27.0, 0.0))
            u = np.cbrt(-qq / 2.0 + d)
            v = np.cbrt(-qq / 2.0 - d)
            r3[one, 0] = u + v + shift[one]
            v3[one, 0] = True

        roots[is3] = r3
        valid[is3] = v3

    if np.any(is2):
        a = c2[is2]
        b = c1[is2]
        c = c0[is2]
        disc = b * b - 4.0 * a * c
        ok = disc >= 0.0
        sq = np.sqrt(np.maximum(disc, 0.0))
        r = np.full((is2.sum(), 3), np.nan)
        v = np.zeros((is2.sum(), 3), dtype=bool)
        r[ok, 0] = (-b[ok] + sq[ok]) / (2.0 * a[ok])
        r[ok, 1] = (-b[ok] - sq[ok]) / (2.0 * a[ok])
        v[ok, 0] = v[ok, 1] = True
        roots[is2] = r
        valid[is2] = v

    if np.any(is1):
        r = np.full((is1.sum(), 3), np.nan)
        v = np.zeros((is1.sum(), 3), dtype=bool)
        r[:, 0] = -c0[is1] / c1[is1]
        v[:, 0] = True
        roots[is1] = r
        valid[is1] = v

    # Newton polish on the original cubic.
    for _ in range(2):
        r = roots
        fval = ((c3[:, None] * r + c2[:, None]) * r + c1[:, None]) * r + c0[:, None]
        fder = (3.0 * c3[:, None] * r + 2.0 * c2[:, None]) * r + c1[:, None]
        step = np.where(valid & (np.abs(fder) > 0), fval / np.where(fder == 0, 1.0, fder), 0.0)
        roots = np.where(valid, r - step, r)
    return roots, valid


# ---------------------------------------------------------------------------
# Batched solve core
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    """Converged allocation, duals, rates and diagnostics for one realization.

    ``sum_rate_bps`` and ``per_user_rates_bps`` credit common shares only up to
    each group's decodable common rate; any excess in the raw shares is
    reported as the C2 residual instead of being counted.
    """

    allocation: AllocationState
    dual: DualState
    residuals: dict
    sum_rate_bps: float
    per_user_rates_bps: np.ndarray
    iterations: int
    converged: bool
    infeasible_min_rate: bool
    trace: np.ndarray | None  # (iterations, 7): lam norms, lam5, sum rate, residual

    @property
    def multiplier_trajectory(self) -> np.ndarray | None:
        return None if self.trace is None else self.trace[:, :5]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


TRACE_COLUMNS = ("lam1_norm", "lam2_norm", "lam3_norm", "lam4_norm",
                 "lam5", "sum_rate_bps", "max_residual")


def write_trace(report: SolveReport, path):
    """Dump the per-iteration trace as CSV (one row per solver iteration)."""
    if report.trace is None:
        raise ValueError("solve() was run without trace recording")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("iteration," + ",".join(TRACE_COLUMNS) + "\n")
        for i, row in enumerate(report.trace, start=1):
            fh.write(str(i) + "," + ",".join(f"{v:.12g}" for v in row) + "\n")


class _Batch:
    """Group-major arrays for a set of trials solved in lockstep.

    Shapes: (T, G) per group, (T, G, S) per user slot. Padded groups/slots are
    masked out of every update and reduction.
    """

    def __init__(self, cfg: SystemConfig, reals: Sequence[ChannelRealization],
                 assignments: Sequence[np.ndarray]):
        t_n = len(reals)
        layouts = []
        for real, x in zip(reals, assignments):
            groups = []
            for m in range(cfg.num_beams):
                for k in range(cfg.num_resource_blocks):
                    users = np.flatnonzero(x[m, :, k])
                    if users.size:
                        groups.append((m, k, users))
            layouts.append(groups)
        g_n = max(len(g) for g in layouts)
        s_n = max(max(len(u) for _, _, u in g) for g in layouts)

        self.t_n, self.g_n, self.s_n = t_n, g_n, s_n
        self.h2 = np.zeros((t_n, g_n, s_n))
        self.slot_ok = np.zeros((t_n, g_n, s_n), dtype=bool)
        self.slot_user = np.full((t_n, g_n, s_n), -1, dtype=np.int64)
        self.f = np.ones((t_n, g_n))
        self.gmask = np.zeros((t_n, g_n), dtype=bool)
        self.midx = np.zeros((t_n, g_n), dtype=np.int64)
        self.kidx = np.zeros((t_n, g_n), dtype=np.int64)
        for t, (real, groups) in enumerate(zip(reals, layouts)):
            pow_gain = real.power_gains
            for g, (m, k, users) in enumerate(groups):
                s = users.size
                self.h2[t, g, :s] = pow_gain[m, users, k]
                self.slot_ok[t, g, :s] = True
                self.slot_user[t, g, :s] = users
                self.f[t, g] = real.leo_to_geo_gains[m, k]
                self.gmask[t, g] = True
                self.midx[t, g] = m
                self.kidx[t, g] = k
        self.n = self.slot_ok.sum(axis=2).astype(float)  # users per group
        self.pmax = np.where(
            self.gmask,
            np.minimum(cfg.interference_threshold / self.f, cfg.total_power),
            0.0,
        )
        # Blocks carrying traffic per beam, replicated onto that beam's groups;
        # sets the equal-power share P_tot / (M * blocks_used).
        self.nblocks = np.ones((t_n, g_n))
        for t, groups in enumerate(layouts):
            per_beam: dict[int, int] = {}
            for m, _, _ in groups:
                per_beam[m] = per_beam.get(m, 0) + 1
            for g, (m, _, _) in enumerate(groups):
                self.nblocks[t, g] = per_beam[m]

    def equal_power(self, cfg: SystemConfig) -> np.ndarray:
        """Equal budget share per beam over its used blocks, interference-capped."""
        share = cfg.total_power / (cfg.num_beams * self.nblocks)
        return np.where(self.gmask, np.minimum(share, self.pmax), 0.0)


def _batch_sinrs(b: _Batch, p, eta, eta0, a_const):
    """Private and common SINRs for the whole batch at the given allocation."""
    pe = p[..., None]
    sum_eta = (eta * b.slot_ok).sum(axis=2)
    inter = sum_eta[..., None] - eta
    gam_p = np.where(b.slot_ok, b.h2 * eta * pe / (a_const + b.h2 * inter * pe), 0.0)
    gc_slots = np.where(
        b.slot_ok,
        b.h2 * eta0[..., None] * pe / (a_const + b.h2 * sum_eta[..., None] * pe),
        np.inf,
    )
    gam_c = np.where(b.gmask, gc_slots.min(axis=2), 0.0)
    return gam_p, gam_c


def _surrogate_power_objective(b, eta, eta0, lam1s, lam2, tau_p, tau_c, lam53,
                               p_cand, a_const):
    """Per-group dual objective at candidate powers, shape (T, G, C)."""
    pe = p_cand[..., None]                        # (T, G, C, 1)
    h2 = b.h2[:, :, None, :]
    ok = b.slot_ok[:, :, None, :]
    eta_e = eta[:, :, None, :]
    sum_eta = (eta * b.slot_ok).sum(axis=2)[:, :, None, None]
    inter = sum_eta - eta_e
    gam_p = np.where(ok, h2 * eta_e * pe / (a_const + h2 * inter * pe), GAMMA_FLOOR)
    gc = np.where(ok, h2 * eta0[:, :, None, None] * pe /
                  (a_const + h2 * sum_eta * pe), np.inf).min(axis=3)
    gc = np.where(b.gmask[:, :, None], gc, GAMMA_FLOOR)
    per_user = np.where(ok, (1.0 + lam1s[:, :, None, :]) * tau_p[:, :, None, :]
                        * np.log2(np.maximum(gam_p, GAMMA_FLOOR)), 0.0).sum(axis=3)
    common = lam2[:, :, None] * tau_c[:, :, None] * np.log2(np.maximum(gc, GAMMA_FLOOR))
    return per_user + common - lam53[:, :, None] * p_cand


def _power_candidates(b, cfg_a, eta, eta0, lam1s, lam2, lam3, lam4, lam5,
                      g0p, g0c, tau_p, tau_c, p):
    """New beam powers: cubic (or single-user quadratic) roots scored by the
    per-group dual objective, with interval endpoints as fallback."""
    t_n, g_n, s_n = b.h2.shape
    a = cfg_a
    lam53 = lam5[:, None] + b.f * lam3

    ok = b.slot_ok
    h = np.where(ok, b.h2, 0.0)
    e = np.where(ok, eta, 0.0)
    av = h * e
    gam = np.where(ok, g0p, 0.0)
    q_t = np.where(ok, lam2[..., None] * g0c[..., None] + lam1s * g0p, 0.0)
    q_f = q_t + gam

    s_h = h.sum(2); s_e = e.sum(2); s_a = av.sum(2)
    s_he = (h * e).sum(2)
    s_a2 = (av * av).sum(2)
    s_aqt = (av * q_t).sum(2)
    s_a2qt = (av * av * q_t).sum(2)
    s_gam = gam.sum(2)
    s_qf = q_f.sum(2)
    s_eqf = (e * q_f).sum(2)
    s_heqf = (h * e * q_f).sum(2)
    s_egam = (e * gam).sum(2)
    s_hegam = (h * e * gam).sum(2)
    s_hqt = (h * q_t).sum(2)
    s_heqt = (h * e * q_t).sum(2)
    n = b.n

    z3 = lam53 * (s_a * s_a - s_a2)
    z2 = 2.0 * a * lam53 * (s_h * s_e - s_he) - (s_aqt * s_a - s_a2qt)
    z1 = a * (a * lam53 * n * (n - 1.0)
              - ((s_eqf * s_h - s_heqf) + (s_h * s_egam - s_hegam)
                 + (s_hqt * s_e - s_heqt)))
    z0 = -a * a * (n - 1.0) * (s_gam + s_qf)

    # Single-user groups: stationarity of the group objective is a quadratic.
    single = b.gmask & (n == 1.0)
    if np.any(single):
        h1 = h.sum(2)
        e1 = e.sum(2)
        tau1 = (tau_p * ok).sum(2)
        w1 = 1.0 + (lam1s * ok).sum(2)
        he = h1 * e1
        a2 = LOG2 * lam53 * he
        a1 = LOG2 * lam53 * a - w1 * tau1 * he
        a0 = -a * (w1 * tau1 + lam2 * tau_c)
        z3 = np.where(single, 0.0, z3)
        z2 = np.where(single, a2, z2)
        z1 = np.where(single, a1, z1)
        z0 = np.where(single, a0, z0)

    roots, valid = real_cubic_roots(z3.ravel(), z2.ravel(), z1.ravel(), z0.ravel())
    roots = roots.reshape(t_n, g_n, 3)
    valid = valid.reshape(t_n, g_n, 3)
    in_range = valid & (roots >= 0.0) & (roots <= b.pmax[..., None])
    roots = np.where(in_range, roots, 0.0)

    cand = np.concatenate([roots, b.pmax[..., None], p[..., None]], axis=2)
    cand_ok = np.concatenate(
        [in_range, b.gmask[..., None], b.gmask[..., None]], axis=2)
    phi = _surrogate_power_objective(b, eta, eta0, lam1s, lam2, tau_p, tau_c,
                                     lam53, cand, a)
    phi = np.where(cand_ok, phi, -np.inf)
    best = np.argmax(phi, axis=2)
    p_new = np.take_along_axis(cand, best[..., None], axis=2)[..., 0]
    return np.where(b.gmask, p_new, 0.0)


def _project_feasible(cfg, b, p, eta, eta0):
    """Clip powers to the interference caps and budget, rescale coefficient sums."""
    p = np.minimum(p, b.pmax)
    tot = (p * b.gmask).sum(axis=1)
    scale = np.where(tot > cfg.total_power,
                     cfg.total_power / np.maximum(tot, 1e-300), 1.0)
    p = p * scale[:, None]
    budget = eta0 + (eta * b.slot_ok).sum(2)
    bscale = np.where(budget > 1.0, 1.0 / np.maximum(budget, 1e-300), 1.0)
    return p, eta * bscale[..., None], eta0 * bscale


def _decodable_rate(cfg, b, a, p, eta, eta0, shares):
    """Per-trial decodable sum rate and worst min-rate shortfall (normalized)."""
    gam_p, gam_c = _batch_sinrs(b, p, eta, eta0, a)
    r_p = np.where(b.slot_ok, np.log2(1.0 + gam_p), 0.0)
    r_c = np.where(b.gmask, np.log2(1.0 + gam_c), 0.0)
    share_sum = (shares * b.slot_ok).sum(2)
    credit = np.where(share_sum > r_c, r_c / np.maximum(share_sum, 1e-300), 1.0)
    user_rate = shares * credit[..., None] + r_p
    rate = (user_rate * b.slot_ok).sum(axis=(1, 2)) * cfg.bandwidth_per_beam
    rmin = cfg.min_rate / cfg.bandwidth_per_beam
    shortfall = np.maximum(
        0.0, rmin - np.where(b.slot_ok, user_rate, np.inf)).max(axis=(1, 2))
    return rate, shortfall


def _solve_batch_core(cfg: SystemConfig, reals, assignments, *,
                      optimize_power=True, record_trace=False,
                      sca_refresh_every=1):
    b = _Batch(cfg, reals, assignments)
    band = cfg.bandwidth_per_beam
    a = cfg.geo_interference + noise_power(cfg)
    rmin = cfg.min_rate / band
    tol = cfg.convergence_tolerance
    scale_l1 = 1.0 / rmin if rmin > 0 else 1.0
    scale_l3 = 1.0 / cfg.interference_threshold
    scale_l5 = 1.0 / cfg.total_power

    t_n, g_n, s_n = b.h2.shape
    p = b.equal_power(cfg)
    eta0 = np.where(b.gmask, 0.25, 0.0)
    eta = np.where(b.slot_ok, 0.7 / np.maximum(b.n[..., None], 1.0), 0.0)
    # Warm start: shares cover each user's initial min-rate deficit, and the
    # budget multiplier is placed where the common-coefficient update is
    # stationary, which keeps the common stream from collapsing early.
    gp_init, gc_init = _batch_sinrs(b, p, eta, eta0, a)
    rp_init = np.where(b.slot_ok, np.log2(1.0 + gp_init), 0.0)
    shares = np.where(b.slot_ok, np.maximum(0.0, rmin - rp_init), 0.0)
    lam1s = np.where(b.slot_ok, 0.1, 0.0)
    lam2 = np.where(b.gmask, 1.0, 0.0)
    lam3 = np.where(b.gmask, 0.1, 0.0)
    lam4 = np.where(b.gmask,
                    np.maximum(0.1, np.maximum(gc_init, _SCA_EXPANSION_FLOOR) / 0.25),
                    0.0)
    lam5 = np.full(t_n, 0.1)

    delta = cfg.step_size
    relax = 1.0
    active = np.ones(t_n, dtype=bool)
    converged_at = np.zeros(t_n, dtype=np.int64)
    infeasible = np.zeros(t_n, dtype=bool)
    runaway = np.zeros(t_n, dtype=np.int64)
    prev_c1 = np.full(t_n, np.inf)
    trace_rows = [] if record_trace else None
    best_score = np.full(t_n, -np.inf)
    best = None
    g0p = g0c = tau_p = tau_c = None

    def masked(new, old, mask):
        return np.where(np.reshape(mask, mask.shape + (1,) * (new.ndim - 1)), new, old)

    for it in range(1, cfg.max_iterations + 1):
        acts = active
        beta_p = _POWER_RELAXATION * relax
        beta_e = _SPLIT_RELAXATION * relax
        beta_c = _COMMON_RELAXATION * relax
        if g0p is None or (it - 1) % sca_refresh_every == 0:
            gam_p, gam_c = _batch_sinrs(b, p, eta, eta0, a)
            g0p = np.where(b.slot_ok, np.maximum(gam_p, _SCA_EXPANSION_FLOOR), 0.0)
            g0c = np.where(b.gmask, np.maximum(gam_c, _SCA_EXPANSION_FLOOR), 0.0)
            tau_p = np.where(b.slot_ok, g0p / (1.0 + g0p), 0.0)
            tau_c = np.where(b.gmask, g0c / (1.0 + g0c), 0.0)

        if optimize_power:
            p_star = _power_candidates(b, a, eta, eta0, lam1s, lam2, lam3, lam4,
                                       lam5, g0p, g0c, tau_p, tau_c, p)
            p_next = masked((1.0 - beta_p) * p + beta_p * p_star, p, acts)
        else:
            p_next = p

        # Private coefficients from the aggregated quadratic.
        h = np.where(b.slot_ok, b.h2, 0.0)
        s_h = h.sum(2, keepdims=True)
        s_hg = (h * g0p).sum(2, keepdims=True)
        h_other = s_h - h
        pe = p_next[..., None]
        mu3 = 2.0 * lam4[..., None] * pe * h_other
        mu1 = -(b.n[..., None] - 1.0) * lam4[..., None] * a \
            + pe * ((1.0 + lam1s) * g0p * h_other - (s_hg - h * g0p))
        c_tot = (b.n[..., None] - 1.0) * (1.0 + lam1s) * g0p * a
        mu2 = mu1 * mu1 + 2.0 * mu3 * c_tot
        with np.errstate(divide="ignore", invalid="ignore"):
            eta_root = np.clip((mu1 + np.sqrt(np.maximum(mu2, 0.0))) / mu3, 0.0, 1.0)
            eta_clamp = np.clip(mu1 / mu3, 0.0, 1.0)
        eta_split = np.maximum(0.0, 1.0 - eta0[..., None]) / np.maximum(b.n[..., None], 1.0)
        eta_star = np.where(mu3 > 1e-300, np.where(mu2 >= 0.0, eta_root, eta_clamp),
                            eta_split)
        eta_star = np.where(b.slot_ok, eta_star, 0.0)
        eta_next = masked((1.0 - beta_e) * eta + beta_e * eta_star, eta, acts)

        # Common coefficient and common-rate shares.
        with np.errstate(divide="ignore", invalid="ignore"):
            eta0_star = np.where(lam4 > 0.0, np.minimum(1.0, lam2 * g0c / lam4), eta0)
        eta0_star = np.where(b.gmask, eta0_star, 0.0)
        eta0_next = masked((1.0 - beta_c) * eta0 + beta_c * eta0_star, eta0, acts)
        shares_new = np.where(
            b.slot_ok,
            np.maximum(0.0, shares + _SHARE_STEP_SCALE * delta
                       * (1.0 + lam1s - lam2[..., None])), 0.0)
        shares_next = masked(shares_new, shares, acts)

        # Rates at the updated allocation feed the subgradients.
        gam_p_now, gam_c_now = _batch_sinrs(b, p_next, eta_next, eta0_next, a)
        r_p = np.where(b.slot_ok, np.log2(1.0 + gam_p_now), 0.0)
        r_c = np.where(b.gmask, np.log2(1.0 + gam_c_now), 0.0)
        user_rate = shares_next + r_p
        share_sum = (shares_next * b.slot_ok).sum(2)

        lam1_new = np.where(b.slot_ok,
                            np.maximum(0.0, lam1s + scale_l1 * delta
                                       * (rmin - user_rate)), 0.0)
        lam2_new = np.where(b.gmask,
                            np.maximum(0.0, lam2 + _SHARE_STEP_SCALE * delta
                                       * (share_sum - r_c)), 0.0)
        budget = eta0_next + (eta_next * b.slot_ok).sum(2)
        lam4_new = np.where(b.gmask,
                            np.maximum(0.0, lam4 + delta * (budget - 1.0)), 0.0)
        if optimize_power:
            lam3_new = np.where(b.gmask,
                                np.maximum(0.0, lam3 + scale_l3 * delta * (
                                    b.f * p_next - cfg.interference_threshold)), 0.0)
            total_p = (p_next * b.gmask).sum(1)
            lam5_new = np.maximum(0.0, lam5 + scale_l5 * delta
                                  * (total_p - cfg.total_power))
        else:
            lam3_new, lam5_new = lam3, lam5

        lam1_next = masked(lam1_new, lam1s, acts)
        lam2_next = masked(lam2_new, lam2, acts)
        lam3_next = masked(lam3_new, lam3, acts)
        lam4_next = masked(lam4_new, lam4, acts)
        lam5_next = np.where(acts, lam5_new, lam5)
        assert lam5_next.min() >= 0.0 and lam1_next.min() >= 0.0 \
            and lam2_next.min() >= 0.0 and lam3_next.min() >= 0.0 \
            and lam4_next.min() >= 0.0, "multiplier projection failed"

        # Per-trial convergence: every multiplier and primal variable settled
        # (powers compared relative to the total budget).
        diff = np.maximum.reduce([
            np.abs(lam1_next - lam1s).max(axis=(1, 2)),
            np.abs(lam2_next - lam2).max(axis=1),
            np.abs(lam3_next - lam3).max(axis=1),
            np.abs(lam4_next - lam4).max(axis=1),
            np.abs(lam5_next - lam5),
            np.abs(p_next - p).max(axis=1) / cfg.total_power,
            np.abs(eta_next - eta).max(axis=(1, 2)),
            np.abs(eta0_next - eta0).max(axis=1),
            np.abs(shares_next - shares).max(axis=(1, 2)),
        ])

        # Divergence guard for unreachable minimum rates.
        c1_viol = np.maximum(0.0, rmin - user_rate).max(axis=(1, 2))
        blown = acts & (lam1_next.max(axis=(1, 2)) > _LAM1_CAP) \
            & (c1_viol >= prev_c1 - 1e-12)
        runaway = np.where(blown, runaway + 1, 0)
        prev_c1 = np.where(acts, c1_viol, prev_c1)
        gave_up = runaway >= _INFEASIBLE_PATIENCE
        infeasible |= gave_up

        p, eta, eta0, shares = p_next, eta_next, eta0_next, shares_next
        lam1s, lam2, lam3, lam4, lam5 = (lam1_next, lam2_next, lam3_next,
                                         lam4_next, lam5_next)

        # Primal recovery: remember the best feasible iterate so far, ranking
        # min-rate feasibility ahead of the decodable sum rate.
        if it % _RECOVERY_EVERY == 0 and acts.any():
            pp, ee, ee0 = _project_feasible(cfg, b, p, eta, eta0)
            rate_now, short_now = _decodable_rate(cfg, b, a, pp, ee, ee0, shares)
            score = rate_now - _C1_PENALTY * np.maximum(short_now - 1e-9, 0.0)
            better = acts & (score > best_score)
            if better.any():
                snap = (pp, ee, ee0, shares)
                if best is None:
                    best = [arr.copy() for arr in snap]
                for kept, cand in zip(best, snap):
                    sel = np.reshape(better, better.shape + (1,) * (kept.ndim - 1))
                    np.copyto(kept, np.where(sel, cand, kept))
                best_score = np.where(better, score, best_score)

        if record_trace:
            srate = ((shares + r_p) * b.slot_ok).sum(axis=(1, 2)) * band
            res = _batch_residuals(cfg, b, p, eta, eta0, shares, r_p, r_c, user_rate)
            trace_rows.append(np.column_stack([
                np.sqrt((lam1s**2).sum(axis=(1, 2))),
                np.sqrt((lam2**2).sum(axis=1)),
                np.sqrt((lam3**2).sum(axis=1)),
                np.sqrt((lam4**2).sum(axis=1)),
                lam5, srate, res,
            ]))

        newly = acts & ((diff < tol) | gave_up)
        converged_at = np.where(newly, it, converged_at)
        active = acts & ~newly
        delta *= cfg.step_decay
        relax *= _RELAXATION_DECAY
        if not active.any():
            break

    converged_at = np.where(active, cfg.max_iterations, converged_at)

    # Final iterate, projected; keep it unless an earlier iterate scored better.
    p, eta, eta0 = _project_feasible(cfg, b, p, eta, eta0)
    final_rate, final_short = _decodable_rate(cfg, b, a, p, eta, eta0, shares)
    final_score = final_rate - _C1_PENALTY * np.maximum(final_short - 1e-9, 0.0)
    if best is not None:
        use_best = best_score > final_score
        sel2 = use_best[:, None]
        sel3 = use_best[:, None, None]
        p = np.where(sel2, best[0], p)
        eta = np.where(sel3, best[1], eta)
        eta0 = np.where(sel2, best[2], eta0)
        shares = np.where(sel3, best[3], shares)

    state = dict(p=p, eta=eta, eta0=eta0, shares=shares, lam1s=lam1s, lam2=lam2,
                 lam3=lam3, lam4=lam4, lam5=lam5, converged_at=converged_at,
                 active=active, infeasible=infeasible)
    return b, state, trace_rows


def _batch_residuals(cfg, b, p, eta, eta0, shares, r_p, r_c, user_rate):
    """Worst relative violation over C1..C5 per trial (normalized units)."""
    band = cfg.bandwidth_per_beam
    rmin = cfg.min_rate / band
    c1 = np.maximum(0.0, rmin - np.where(b.slot_ok, user_rate, np.inf)
                    ).max(axis=(1, 2)) / max(rmin, 1e-300)
    share_sum = (shares * b.slot_ok).sum(2)
    c2 = (np.maximum(0.0, share_sum - r_c) / np.maximum(r_c, 1e-12)).max(axis=1)
    c3 = (np.maximum(0.0, b.f * p - cfg.interference_threshold)
          / cfg.interference_threshold).max(axis=1)
    c4 = np.maximum(0.0, eta0 + (eta * b.slot_ok).sum(2) - 1.0).max(axis=1)
    c5 = np.maximum(0.0, (p * b.gmask).sum(1) - cfg.total_power) / cfg.total_power
    return np.maximum.reduce([c1, c2, c3, c4, c5])


def _package_reports(cfg, reals, assignments, b, state, trace_rows) -> list[SolveReport]:
    band = cfg.bandwidth_per_beam
    m_n, u_n, k_n = cfg.num_beams, cfg.num_users, cfg.num_resource_blocks
    reports = []
    traces = None
    if trace_rows is not None:
        traces = np.stack(trace_rows, axis=0) if trace_rows else \
            np.zeros((0, b.t_n, len(TRACE_COLUMNS)))
    gam_p_all, gam_c_all = _batch_sinrs(b, state["p"], state["eta"], state["eta0"],
                                        cfg.geo_interference + noise_power(cfg))
    for t, (real, x) in enumerate(zip(reals, assignments)):
        p_d = np.zeros((m_n, k_n))
        eta0_d = np.zeros((m_n, k_n))
        lam2_d = np.zeros((m_n, k_n))
        lam3_d = np.zeros((m_n, k_n))
        lam4_d = np.zeros((m_n, k_n))
        gc_d = np.zeros((m_n, k_n))
        eta_d = np.zeros((m_n, u_n, k_n))
        c_d = np.zeros((m_n, u_n, k_n))
        gp_d = np.zeros((m_n, u_n, k_n))
        lam1_d = np.zeros(u_n)

        for g in range(b.g_n):
            if not b.gmask[t, g]:
                continue
            m, k = b.midx[t, g], b.kidx[t, g]
            p_d[m, k] = state["p"][t, g]
            eta0_d[m, k] = state["eta0"][t, g]
            lam2_d[m, k] = state["lam2"][t, g]
            lam3_d[m, k] = state["lam3"][t, g]
            lam4_d[m, k] = state["lam4"][t, g]
            gc_d[m, k] = gam_c_all[t, g]
            for s in range(b.s_n):
                if not b.slot_ok[t, g, s]:
                    continue
                u = b.slot_user[t, g, s]
                eta_d[m, u, k] = state["eta"][t, g, s]
                c_d[m, u, k] = state["shares"][t, g, s] * band
                gp_d[m, u, k] = gam_p_all[t, g, s]
                lam1_d[u] = state["lam1s"][t, g, s]

        alloc = AllocationState(
            beam_power=p_d, common_coeff=eta0_d, private_coeff=eta_d,
            common_share=c_d, assignment=np.asarray(x, dtype=np.int8),
            precoders=np.ones((m_n, u_n + 1, k_n), dtype=complex),
        )
        dual = DualState(lam1=lam1_d, lam2=lam2_d, lam3=lam3_d, lam4=lam4_d,
                         lam5=float(state["lam5"][t]),
                         sca_gamma_private=gp_d, sca_gamma_common=gc_d)

        rb = rate_breakdown(real, alloc, cfg)
        xf = x.astype(float)
        shares_mk = np.einsum("muk,muk->mk", xf, c_d)
        # Shares are credited only up to the decodable common rate; the raw
        # excess stays visible as the C2 residual.
        with np.errstate(divide="ignore", invalid="ignore"):
            credit = np.where(shares_mk > rb.common_rate,
                              rb.common_rate / np.maximum(shares_mk, 1e-300), 1.0)
        per_user = np.einsum("muk,muk->u", xf,
                             c_d * credit[:, None, :] + rb.private_rate)
        c2_rel = np.maximum(shares_mk - rb.common_rate, 0.0) / np.maximum(rb.common_rate, 1.0)
        res = {
            "C1": float(np.max(np.maximum(0.0, cfg.min_rate - per_user))
                        / max(cfg.min_rate, 1e-300)),
            "C2": float(c2_rel.max()),
            "C3": float(np.max(np.maximum(
                0.0, real.leo_to_geo_gains * p_d - cfg.interference_threshold))
                / cfg.interference_threshold),
            "C4": float(np.max(np.maximum(
                0.0, eta0_d + np.einsum("muk,muk->mk", xf, eta_d) - 1.0))),
            "C5": float(max(0.0, p_d.sum() - cfg.total_power) / cfg.total_power),
            "C7": 0.0,
        }
        feas = max(res["C3"], res["C4"], res["C5"]) <= 1e-6
        its = int(state["converged_at"][t])
        conv = (not state["active"][t]) and feas and not state["infeasible"][t]
        trace = None if traces is None else traces[:its, t, :]
        reports.append(SolveReport(
            allocation=alloc, dual=dual, residuals=res,
            sum_rate_bps=float(per_user.sum()), per_user_rates_bps=per_user,
            iterations=its, converged=conv,
            infeasible_min_rate=bool(state["infeasible"][t]), trace=trace,
        ))
    return reports


def _as_assignment_array(x, cfg: SystemConfig) -> np.ndarray:
    arr = x.x if hasattr(x, "x") else np.asarray(x)
    expected = (cfg.num_beams, cfg.num_users, cfg.num_resource_blocks)
    if arr.shape != expected:
        raise ValueError(f"assignment shape {arr.shape} != {expected}")
    counts = arr.sum(axis=(0, 2))
    if not np.all(counts == 1):
        raise ValueError("each user must be assigned exactly one (beam, block)")
    return arr.astype(np.int8)


def solve_batch(reals: Sequence[ChannelRealization], assignments, cfg: SystemConfig,
                *, optimize_power: bool = True, record_trace: bool = False,
                sca_refresh_every: int = 1) -> list[SolveReport]:
    """Solve many independent realizations in lockstep (identical to solo runs)."""
    if sca_refresh_every < 1:
        raise ValueError("sca_refresh_every must be >= 1")
    xs = [_as_assignment_array(x, cfg) for x in assignments]
    b, state, rows = _solve_batch_core(cfg, reals, xs, optimize_power=optimize_power,
                                       record_trace=record_trace,
                                       sca_refresh_every=sca_refresh_every)
    return _package_reports(cfg, reals, xs, b, state, rows)


def solve(real: ChannelRealization, x, cfg: SystemConfig, *,
          optimize_power: bool = True, record_trace: bool = True,
          sca_refresh_every: int = 1) -> SolveReport:
    """Run the full iterative allocation for one realization and assignment.

    The returned allocation is the best feasible iterate encountered (primal
    recovery); multipliers and the iteration count describe the dual loop's
    end state. Deterministic for fixed (realization, assignment, config).
    """
    return solve_batch([real], [x], cfg, optimize_power=optimize_power,
                       record_trace=record_trace,
                       sca_refresh_every=sca_refresh_every)[0]
