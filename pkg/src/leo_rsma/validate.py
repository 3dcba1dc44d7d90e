"""Built-in oracle checks behind the ``validate`` CLI subcommand.

Each check compares a closed-form code path against an independent reference:
dense grids, direct polynomial evaluation, or hand arithmetic. They are
deliberately small so the whole suite runs in seconds.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .assignment import greedy_assign
from .model import SystemConfig, generate_realization, noise_power
from .pattern import beam_gain
from .rates import sca_coefficients
from .solver import (EtaQuadratic, real_cubic_roots, solve,
                     solve_private_eta)


def _check_beam_pattern(cfg):
    g0 = beam_gain(0.0, cfg.theta_3db, cfg.g_max)
    g3 = beam_gain(cfg.theta_3db, cfg.theta_3db, cfg.g_max)
    ok = abs(g0 - cfg.g_max) < 1e-9 * cfg.g_max \
        and abs(g3 - cfg.g_max / 2) < 0.01 * cfg.g_max / 2
    return ok, f"boresight={g0:.6g}, halfpower={g3:.6g}"


def _check_surrogate(cfg):
    rng = np.random.default_rng(1)
    worst_tight = 0.0
    worst_bound = 0.0
    grid = np.logspace(-3, 3, 301)
    for g0 in 10 ** rng.uniform(-3, 3, 50):
        tau, varpi = sca_coefficients(g0)
        worst_tight = max(worst_tight,
                          abs(tau * np.log2(g0) + varpi - np.log2(1 + g0)))
        gap = tau * np.log2(grid) + varpi - np.log2(1 + grid)
        worst_bound = max(worst_bound, float(gap.max()))
    ok = worst_tight < 1e-12 and worst_bound < 1e-12
    return ok, f"tightness={worst_tight:.2e}, bound_excess={worst_bound:.2e}"


def _check_cubic_roots(cfg):
    rng = np.random.default_rng(2)
    coeffs = rng.standard_normal((2000, 4))
    roots, valid = real_cubic_roots(*coeffs.T)
    poly = ((coeffs[:, :1] * roots + coeffs[:, 1:2]) * roots
            + coeffs[:, 2:3]) * roots + coeffs[:, 3:4]
    bound = 1e-9 * np.maximum(1.0, np.abs(coeffs[:, 3:4]))
    # assert over the feasible power range; far larger roots are never used
    in_range = valid & (np.abs(roots) <= 100.0)
    worst = float(np.max(np.where(in_range, np.abs(poly) / bound, 0.0)))
    return worst <= 1.0, f"worst residual = {worst:.3g} of bound"


def _check_eta_branch(cfg):
    rng = np.random.default_rng(3)
    a = cfg.geo_interference + noise_power(cfg)
    worst = 0.0
    grid = np.linspace(1e-6, 1.0, 10_001)
    for _ in range(200):
        h_u, h_j = rng.uniform(0.1, 20.0, 2)
        p = rng.uniform(0.5, 30.0)
        lam1 = rng.uniform(0.0, 2.0)
        lam4 = rng.uniform(0.05, 2.0)
        eta_u0, eta_j = rng.uniform(0.05, 0.6, 2)
        g_u = h_u * eta_u0 * p / (a + h_u * eta_j * p)
        g_j = h_j * eta_j * p / (a + h_j * eta_u0 * p)
        mu1 = -lam4 * a + h_j * p * ((1 + lam1) * g_u - g_j)
        mu3 = 2 * h_j * lam4 * p
        mu2 = mu1 * mu1 + 2 * mu3 * (1 + lam1) * g_u * a
        chosen = solve_private_eta(EtaQuadratic(mu1, mu2, mu3))
        lagr = (1 + lam1) * g_u * np.log(h_u * grid * p / (a + h_u * eta_j * p)) \
            + g_j * np.log(h_j * eta_j * p / (a + h_j * grid * p)) - lam4 * grid
        worst = max(worst, abs(chosen - float(grid[np.argmax(lagr)])))
    return worst < 2e-4, f"worst |branch - grid argmax| = {worst:.2e}"


def _check_small_instance(cfg):
    small = replace(cfg, num_beams=1, num_resource_blocks=1, num_users=2)
    a = small.geo_interference + noise_power(small)
    band = small.bandwidth_per_beam
    rmin = small.min_rate / band
    worst = np.inf
    for trial in range(3):
        real = generate_realization(small, trial)
        x = greedy_assign(real, small).x
        rep = solve(real, x, small, record_trace=False)
        users = np.flatnonzero(x[0, :, 0])
        h = np.abs(real.leo_gains[0, users, 0]) ** 2
        pmax = min(small.interference_threshold / real.leo_to_geo_gains[0, 0],
                   small.total_power)
        pts = np.linspace(0, pmax, 30)
        e = np.linspace(0, 1, 30)
        pp, e0, e1, e2 = np.meshgrid(pts, e, e, e, indexing="ij")
        feas = (e0 + e1 + e2) <= 1 + 1e-12
        g1 = h[0] * e1 * pp / (a + h[0] * e2 * pp)
        g2 = h[1] * e2 * pp / (a + h[1] * e1 * pp)
        r1, r2 = np.log2(1 + g1), np.log2(1 + g2)
        gc = np.minimum(h[0] * e0 * pp / (a + h[0] * (e1 + e2) * pp),
                        h[1] * e0 * pp / (a + h[1] * (e1 + e2) * pp))
        rc = np.log2(1 + gc)
        need = np.maximum(0, rmin - r1) + np.maximum(0, rmin - r2)
        obj = np.where(feas & (need <= rc + 1e-15), r1 + r2 + rc, -np.inf)
        worst = min(worst, rep.sum_rate_bps / (obj.max() * band))
    return worst >= 0.98, f"worst solver/grid ratio = {worst:.4f}"


def _check_determinism(cfg):
    r1 = generate_realization(cfg, 5)
    r2 = generate_realization(cfg, 5)
    ok = np.array_equal(r1.leo_gains, r2.leo_gains) \
        and np.array_equal(r1.leo_to_geo_gains, r2.leo_to_geo_gains)
    return ok, "regeneration is bitwise identical"


CHECKS = [
    ("beam-pattern", _check_beam_pattern),
    ("sca-surrogate", _check_surrogate),
    ("cubic-roots", _check_cubic_roots),
    ("eta-branch", _check_eta_branch),
    ("small-instance", _check_small_instance),
    ("determinism", _check_determinism),
]


def run_all(cfg: SystemConfig | None = None, verbose: bool = False) -> bool:
    cfg = cfg or SystemConfig()
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn(cfg)
        all_ok &= ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return all_ok
