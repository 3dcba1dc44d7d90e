import numpy as np
import pytest

from leo_rsma import (SystemConfig, generate_realization, greedy_assign,
                      solve, solve_batch)
from leo_rsma.solver import write_trace
from tests.conftest import make_realization


@pytest.fixture(scope="module")
def tiny_report(tiny_cfg):
    real = generate_realization(tiny_cfg, 0)
    x = greedy_assign(real, tiny_cfg).x
    return real, x, solve(real, x, tiny_cfg)


def test_solve_is_deterministic(tiny_cfg, tiny_report):
    real, x, first = tiny_report
    second = solve(real, x, tiny_cfg)
    assert first.sum_rate_bps == second.sum_rate_bps
    assert np.array_equal(first.allocation.beam_power, second.allocation.beam_power)
    assert np.array_equal(first.dual.lam1, second.dual.lam1)
    assert first.iterations == second.iterations


def test_batch_matches_solo_runs(tiny_cfg):
    reals = [generate_realization(tiny_cfg, t) for t in range(3)]
    xs = [greedy_assign(r, tiny_cfg).x for r in reals]
    batch = solve_batch(reals, xs, tiny_cfg)
    for real, x, from_batch in zip(reals, xs, batch):
        solo = solve(real, x, tiny_cfg, record_trace=False)
        assert solo.sum_rate_bps == pytest.approx(from_batch.sum_rate_bps, rel=1e-12)
        assert np.allclose(solo.allocation.beam_power,
                           from_batch.allocation.beam_power, rtol=1e-12, atol=0)
        assert solo.iterations == from_batch.iterations
        assert solo.converged == from_batch.converged


def test_report_feasibility_and_flags(tiny_cfg, tiny_report):
    real, x, rep = tiny_report
    rep.allocation.check_invariants(tiny_cfg)
    assert rep.dual.all_nonnegative()
    assert rep.residuals["C3"] <= 1e-6
    assert rep.residuals["C4"] <= 1e-6
    assert rep.residuals["C5"] <= 1e-6
    assert rep.residuals["C7"] == 0.0
    assert rep.iterations <= tiny_cfg.max_iterations
    assert rep.sum_rate_bps == pytest.approx(rep.per_user_rates_bps.sum(), rel=1e-12)
    # trace covers exactly the iterations that ran and the multipliers stayed >= 0
    assert rep.trace.shape == (rep.iterations, 7)
    assert rep.multiplier_trajectory.shape == (rep.iterations, 5)
    assert rep.multiplier_trajectory.min() >= 0.0


def test_symmetric_beams_get_equal_power():
    cfg = SystemConfig(num_beams=2, num_resource_blocks=2, num_users=4,
                       total_power=20.0, max_iterations=6000)
    h2 = np.zeros((2, 4, 2))
    # beam 0 / block 0 serves users 0, 1; beam 1 / block 1 serves users 2, 3
    h2[0, 0, 0] = h2[1, 2, 1] = 9.0
    h2[0, 1, 0] = h2[1, 3, 1] = 3.0
    real = make_realization(cfg, h2, [[0.5, 0.5], [0.5, 0.5]])
    x = np.zeros((2, 4, 2), dtype=np.int8)
    x[0, 0, 0] = x[0, 1, 0] = 1
    x[1, 2, 1] = x[1, 3, 1] = 1
    rep = solve(real, x, cfg, record_trace=False)
    p = rep.allocation.beam_power
    assert p[0, 0] == pytest.approx(p[1, 1], abs=1e-6)
    eta = rep.allocation.private_coeff
    assert eta[0, 0, 0] == pytest.approx(eta[1, 2, 1], abs=1e-6)
    assert rep.allocation.common_coeff[0, 0] == pytest.approx(
        rep.allocation.common_coeff[1, 1], abs=1e-6)


def test_fixed_power_stays_fixed(tiny_cfg):
    real = generate_realization(tiny_cfg, 1)
    x = greedy_assign(real, tiny_cfg).x
    rep = solve(real, x, tiny_cfg, optimize_power=False, record_trace=False)
    active = x.sum(axis=1) > 0
    blocks_used = np.maximum(active.sum(axis=1), 1)
    expected = np.where(
        active,
        np.minimum(tiny_cfg.total_power / (tiny_cfg.num_beams * blocks_used[:, None]),
                   tiny_cfg.interference_threshold / real.leo_to_geo_gains),
        0.0)
    assert np.allclose(rep.allocation.beam_power, expected, rtol=1e-12)


def test_sca_refresh_cadence_option(tiny_cfg):
    """Coarser refresh trades solution quality for per-iteration work."""
    real = generate_realization(tiny_cfg, 2)
    x = greedy_assign(real, tiny_cfg).x
    every = solve(real, x, tiny_cfg, record_trace=False)
    coarse = solve(real, x, tiny_cfg, record_trace=False, sca_refresh_every=5)
    assert 0 < coarse.sum_rate_bps <= every.sum_rate_bps * (1 + 1e-9)
    coarse.allocation.check_invariants(tiny_cfg)
    with pytest.raises(ValueError):
        solve(real, x, tiny_cfg, sca_refresh_every=0)


def test_assignment_shape_validation(tiny_cfg):
    real = generate_realization(tiny_cfg, 0)
    bad = np.zeros((1, 2, 1), dtype=np.int8)
    with pytest.raises(ValueError):
        solve(real, bad, tiny_cfg)
    x = greedy_assign(real, tiny_cfg).x.copy()
    x[:, 0, :] = 0  # user 0 unassigned violates the one-slot-per-user rule
    with pytest.raises(ValueError):
        solve(real, x, tiny_cfg)


def test_trace_csv_round_trip(tmp_path, tiny_cfg, tiny_report):
    _, _, rep = tiny_report
    path = tmp_path / "trace.csv"
    write_trace(rep, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ("iteration,lam1_norm,lam2_norm,lam3_norm,lam4_norm,"
                        "lam5,sum_rate_bps,max_residual")
    assert len(lines) == rep.iterations + 1
    first = lines[1].split(",")
    assert int(first[0]) == 1 and len(first) == 8


def test_infeasible_min_rate_reported_not_looped():
    """An absurd rate floor ends with an honest residual, not an endless loop."""
    cfg = SystemConfig(num_beams=1, num_resource_blocks=1, num_users=2,
                       min_rate=1e12, max_iterations=4000)
    real = generate_realization(cfg, 0)
    x = greedy_assign(real, cfg).x
    rep = solve(real, x, cfg, record_trace=False)
    assert rep.residuals["C1"] > 0.5
    assert rep.iterations <= cfg.max_iterations
