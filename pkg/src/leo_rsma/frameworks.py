"""The three optimization frameworks compared in the experiments.

Proposed: greedy assignment, full joint optimization. Benchmark 1: greedy
assignment with the power budget spread equally over the beam/block grid
(capped by the interference limit), only the splitting variables iterate.
Benchmark 2: random assignment, full optimization.
"""

from __future__ import annotations

import enum

from .assignment import greedy_assign, random_assign
from .model import ChannelRealization, SystemConfig
from .solver import SolveReport, solve, solve_batch


class FrameworkKind(enum.Enum):
    PROPOSED = "proposed"
    BENCHMARK1_EQUAL_POWER = "benchmark1"
    BENCHMARK2_RANDOM_ASSIGN = "benchmark2"

    @classmethod
    def from_name(cls, name: str) -> "FrameworkKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown framework {name!r}; "
                         f"expected one of {[k.value for k in cls]}")


def run_proposed(real: ChannelRealization, cfg: SystemConfig,
                 record_trace: bool = False) -> SolveReport:
    """Greedy assignment followed by the full joint solve."""
    assign = greedy_assign(real, cfg)
    return solve(real, assign.x, cfg, record_trace=record_trace)


def run_benchmark1(real: ChannelRealization, cfg: SystemConfig,
                   record_trace: bool = False) -> SolveReport:
    """Equal power min(I_th/f, P_tot/(M K)) per active pair, frozen during the solve."""
    assign = greedy_assign(real, cfg)
    return solve(real, assign.x, cfg, optimize_power=False,
                 record_trace=record_trace)


def run_benchmark2(real: ChannelRealization, cfg: SystemConfig, seed: int,
                   record_trace: bool = False) -> SolveReport:
    """Random user placement, all continuous variables optimized."""
    assign = random_assign(cfg, seed)
    return solve(real, assign.x, cfg, record_trace=record_trace)


def run_framework(kind: FrameworkKind, real: ChannelRealization,
                  cfg: SystemConfig, seed: int,
                  record_trace: bool = False) -> SolveReport:
    if kind is FrameworkKind.PROPOSED:
        return run_proposed(real, cfg, record_trace)
    if kind is FrameworkKind.BENCHMARK1_EQUAL_POWER:
        return run_benchmark1(real, cfg, record_trace)
    return run_benchmark2(real, cfg, seed, record_trace)


def run_framework_batch(kind: FrameworkKind, reals, cfg: SystemConfig,
                        seeds) -> list[SolveReport]:
    """Vectorized variant of run_framework over many paired realizations."""
    if kind is FrameworkKind.BENCHMARK2_RANDOM_ASSIGN:
        assigns = [random_assign(cfg, seed).x for seed in seeds]
        return solve_batch(reals, assigns, cfg)
    assigns = [greedy_assign(real, cfg).x for real in reals]
    optimize = kind is not FrameworkKind.BENCHMARK1_EQUAL_POWER
    return solve_batch(reals, assigns, cfg, optimize_power=optimize)


def percentage_gain(rate_proposed: float, rate_benchmark: float) -> float:
    """Relative sum-rate gain of the proposed scheme over a benchmark, in percent."""
    if rate_benchmark <= 0.0:
        raise ValueError("benchmark rate must be positive to express a gain")
    return (rate_proposed - rate_benchmark) * 100.0 / rate_benchmark


REPORT_ROW_HEADER = ("framework,seed,p_tot,i_th,num_beams,num_blocks,"
                     "sum_rate_bps,iterations,converged,max_residual")


def report_row(kind: FrameworkKind, seed: int, cfg: SystemConfig,
               report: SolveReport) -> str:
    """One CSV line summarizing a solved realization."""
    return ",".join([
        kind.value, str(seed),
        f"{cfg.total_power:.12g}", f"{cfg.interference_threshold:.12g}",
        str(cfg.num_beams), str(cfg.num_resource_blocks),
        f"{report.sum_rate_bps:.12g}", str(report.iterations),
        str(int(report.converged)), f"{report.max_residual:.12g}",
    ])
