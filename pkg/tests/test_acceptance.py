"""End-to-end acceptance checks at desk scale.

Each test prints one PASS line with its measured margins; run with ``-s`` (or
``-rA``) to see them. The heavy Monte Carlo fixtures are shared across tests.
"""

import subprocess
import sys

import numpy as np
import pytest

from leo_rsma import (FrameworkKind, SystemConfig, generate_realization,
                      greedy_assign, run_framework_batch, sca_coefficients,
                      solve_batch)
from leo_rsma.experiment import assignment_seed
from leo_rsma.solver import real_cubic_roots, write_trace

POWER_GRID = (20.0, 30.0, 40.0, 50.0, 60.0)
TRIALS = 200


def run_cell(cfg, kind, trials):
    reals = [generate_realization(cfg, t) for t in range(trials)]
    seeds = [assignment_seed(cfg, t) for t in range(trials)]
    return run_framework_batch(kind, reals, cfg, seeds)


@pytest.fixture(scope="module")
def power_sweep_reports():
    """All frameworks on the P_tot grid, 200 paired trials per point."""
    out = {}
    for ptot in POWER_GRID:
        cfg = SystemConfig(total_power=ptot)
        out[ptot] = {kind: run_cell(cfg, kind, TRIALS) for kind in FrameworkKind}
    return out


def rates_of(reports):
    return np.array([r.sum_rate_bps for r in reports])


def test_criterion_1_small_instance_near_optimality():
    """Solver within 98% of a 50-point brute-force grid on 1-beam instances."""
    cfg = SystemConfig(num_beams=1, num_resource_blocks=1, num_users=2)
    a = cfg.geo_interference + cfg.sigma2
    band = cfg.bandwidth_per_beam
    rmin = cfg.min_rate / band
    seeds = range(20)
    reals = [generate_realization(cfg, t) for t in seeds]
    xs = [greedy_assign(r, cfg).x for r in reals]
    reports = solve_batch(reals, xs, cfg)

    npts = 50
    e_axis = np.linspace(0.0, 1.0, npts)
    ratios = []
    for real, x, rep in zip(reals, xs, reports):
        users = np.flatnonzero(x[0, :, 0])
        h = np.abs(real.leo_gains[0, users, 0]) ** 2
        pmax = min(cfg.interference_threshold / real.leo_to_geo_gains[0, 0],
                   cfg.total_power)
        best = -np.inf
        for p in np.linspace(0.0, pmax, npts):
            e0, e1, e2 = np.meshgrid(e_axis, e_axis, e_axis, indexing="ij")
            ok = (e0 + e1 + e2) <= 1.0 + 1e-12
            g1 = h[0] * e1 * p / (a + h[0] * e2 * p)
            g2 = h[1] * e2 * p / (a + h[1] * e1 * p)
            r1, r2 = np.log2(1 + g1), np.log2(1 + g2)
            gc = np.minimum(h[0] * e0 * p / (a + h[0] * (e1 + e2) * p),
                            h[1] * e0 * p / (a + h[1] * (e1 + e2) * p))
            rc = np.log2(1 + gc)
            need = np.maximum(0, rmin - r1) + np.maximum(0, rmin - r2)
            obj = np.where(ok & (need <= rc + 1e-15), r1 + r2 + rc, -np.inf)
            best = max(best, float(obj.max()))
        ratios.append(rep.sum_rate_bps / (best * band))
    worst = min(ratios)
    assert worst >= 0.98, f"solver/grid ratios: {np.round(ratios, 4)}"
    print(f"\nACCEPTANCE 1 PASS: worst solver/grid ratio {worst:.4f} over 20 seeds")


def test_criterion_2_cubic_and_quadratic_correctness():
    rng = np.random.default_rng(20240909)
    coeffs = rng.standard_normal((10_000, 4))
    roots, valid = real_cubic_roots(*coeffs.T)
    poly = ((coeffs[:, :1] * roots + coeffs[:, 1:2]) * roots
            + coeffs[:, 2:3]) * roots + coeffs[:, 3:4]
    bound = 1e-9 * np.maximum(1.0, np.abs(coeffs[:, 3:4]))
    # The residual bound is asserted over the feasible power range the solver
    # draws from ([0, P_tot] caps every candidate); roots orders of magnitude
    # beyond it are discarded before use, and double precision cannot even
    # represent them to the bound's accuracy.
    in_range = valid & (np.abs(roots) <= 100.0)
    assert in_range.any(axis=1).mean() > 0.95
    worst_res = float(np.max(np.where(in_range, np.abs(poly) / bound, 0.0)))
    assert worst_res <= 1.0

    from leo_rsma import EtaQuadratic, solve_private_eta
    a = 4.0
    grid = np.linspace(1e-6, 1.0, 10_001)
    worst_gap = 0.0
    for _ in range(2000):
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
        lagr = (1 + lam1) * g_u * np.log(grid) \
            + g_j * np.log(h_j * eta_j * p / (a + h_j * grid * p)) - lam4 * grid
        worst_gap = max(worst_gap, abs(chosen - float(grid[np.argmax(lagr)])))
    assert worst_gap <= 2e-4  # two grid steps of the 1e4-point oracle
    print(f"\nACCEPTANCE 2 PASS: cubic residual {worst_res:.3g} of bound, "
          f"eta branch within {worst_gap:.1e} of grid argmax")


def test_criterion_3_surrogate_properties():
    rng = np.random.default_rng(3)
    grid = np.logspace(-3, 3, 601)
    worst_tight, worst_excess = 0.0, 0.0
    for g0 in 10 ** rng.uniform(-3, 3, 100):
        tau, varpi = sca_coefficients(g0)
        worst_tight = max(worst_tight,
                          abs(tau * np.log2(g0) + varpi - np.log2(1 + g0)))
        excess = tau * np.log2(grid) + varpi - np.log2(1 + grid)
        worst_excess = max(worst_excess, float(excess.max()))
    assert worst_tight < 1e-12
    assert worst_excess <= 1e-12
    print(f"\nACCEPTANCE 3 PASS: tightness {worst_tight:.2e}, "
          f"bound excess {worst_excess:.2e}")


def test_criterion_4_constraint_feasibility(power_sweep_reports):
    table2 = power_sweep_reports[60.0]
    for kind, reports in table2.items():
        conv = np.array([r.converged for r in reports])
        assert 1.0 - conv.mean() <= 0.05, f"{kind.value}: non-converged too often"
        for rep in reports:
            if rep.converged:
                assert rep.residuals["C3"] <= 1e-6
                assert rep.residuals["C4"] <= 1e-6
                assert rep.residuals["C5"] <= 1e-6
                assert rep.residuals["C7"] <= 1e-6
    fracs = {k.value: float(np.mean([r.converged for r in v]))
             for k, v in table2.items()}
    print(f"\nACCEPTANCE 4 PASS: converged fractions {fracs}, "
          f"C3-C5/C7 within 1e-6 on all converged reports")


def test_criterion_5_power_grid_ordering(power_sweep_reports):
    lines = []
    for ptot in POWER_GRID:
        cell = power_sweep_reports[ptot]
        prop = rates_of(cell[FrameworkKind.PROPOSED])
        b1 = rates_of(cell[FrameworkKind.BENCHMARK1_EQUAL_POWER])
        b2 = rates_of(cell[FrameworkKind.BENCHMARK2_RANDOM_ASSIGN])
        for hi, lo, tag in ((prop, b1, "proposed-bench1"),
                            (b1, b2, "bench1-bench2")):
            d = hi - lo
            se = d.std(ddof=1) / np.sqrt(len(d))
            assert d.mean() > 0, f"P_tot={ptot}: {tag} ordering violated"
            assert d.mean() > 2 * se, \
                f"P_tot={ptot}: {tag} gap {d.mean():.3g} within 2 SE ({se:.3g})"
            lines.append(f"P_tot={ptot:.0f} {tag}: {d.mean()/1e6:.2f} Mbps "
                         f"({d.mean()/se:.1f} SE)")
    print("\nACCEPTANCE 5 PASS: " + "; ".join(lines))


def test_criterion_5_means_rise_with_power(power_sweep_reports):
    for kind in FrameworkKind:
        means = [rates_of(power_sweep_reports[p][kind]).mean() for p in POWER_GRID]
        assert all(b >= a * (1 - 1e-9) for a, b in zip(means, means[1:])), \
            f"{kind.value}: mean sum rate not non-decreasing in P_tot: {means}"


def test_criterion_6_interference_saturation():
    grid = (0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 16.0, 20.0)
    trials = 100
    means = []
    for ith in grid:
        cfg = SystemConfig(interference_threshold=ith)
        reports = run_cell(cfg, FrameworkKind.PROPOSED, trials)
        means.append(rates_of(reports).mean())
    changes = [(b - a) / a for a, b in zip(means, means[1:])]
    assert changes[0] > 0.10, "no rising region at tight thresholds"
    assert abs(changes[-1]) < 0.01 and abs(changes[-2]) < 0.01, \
        f"no flat tail: successive changes {changes}"
    print(f"\nACCEPTANCE 6 PASS: mean rate rises {100*changes[0]:.1f}% at the "
          f"tight end, tail changes {100*changes[-2]:+.2f}% / {100*changes[-1]:+.2f}%")


def test_criterion_7_beam_scaling():
    trials = 100
    means = {}
    for m in (3, 5, 7):
        cfg = SystemConfig(num_beams=m, num_resource_blocks=m, num_users=2 * m)
        means[m] = rates_of(run_cell(cfg, FrameworkKind.PROPOSED, trials)).mean()
    assert means[3] < means[5] < means[7]
    gain_35 = (means[5] - means[3]) / means[3]
    gain_57 = (means[7] - means[5]) / means[5]
    assert gain_35 > gain_57
    print(f"\nACCEPTANCE 7 PASS: rates {means[3]/1e6:.1f} < {means[5]/1e6:.1f} "
          f"< {means[7]/1e6:.1f} Mbps; gains 3->5 {100*gain_35:.1f}% "
          f"> 5->7 {100*gain_57:.1f}%")


def test_criterion_8_convergence_behavior(tmp_path):
    cfg = SystemConfig()
    trials = 50
    reals = [generate_realization(cfg, t) for t in range(trials)]
    xs = [greedy_assign(r, cfg).x for r in reals]
    reports = solve_batch(reals, xs, cfg, record_trace=True)
    conv = np.array([r.converged for r in reports])
    iters = np.array([r.iterations for r in reports])
    assert conv.mean() >= 0.95
    assert np.all(iters <= cfg.max_iterations)

    counts = tmp_path / "iteration_counts.csv"
    counts.write_text("trial,iterations,converged\n" + "\n".join(
        f"{t},{r.iterations},{int(r.converged)}" for t, r in enumerate(reports)))
    write_trace(reports[0], tmp_path / "multiplier_trace_trial0.csv")
    print(f"\nACCEPTANCE 8 PASS: {100*conv.mean():.0f}% converged, median "
          f"{int(np.median(iters))} iterations; traces in {tmp_path}")


def test_criterion_9_cli_determinism(tmp_path):
    from leo_rsma import save_config
    cfg_path = tmp_path / "fast.cfg"
    save_config(SystemConfig(num_beams=2, num_resource_blocks=2, num_users=4,
                             max_iterations=1500), cfg_path)

    def run(args):
        return subprocess.run([sys.executable, "-m", "leo_rsma.cli", *args],
                              capture_output=True, text=True)

    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        proc = run(["sweep", "--config", str(cfg_path), "--grid", "20,30",
                    "--trials", "3", "--out", str(out)])
        assert proc.returncode == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]

    solves = [run(["solve", "--config", str(cfg_path), "--seed", "11"]).stdout
              for _ in range(2)]
    assert solves[0] == solves[1]
    print("\nACCEPTANCE 9 PASS: sweep CSV and solve output byte-identical across runs")
