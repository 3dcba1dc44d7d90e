"""Monte Carlo sweep harness emitting CSV tables for the trend experiments.

All frameworks of a trial share one channel realization (paired design), and
realizations are seeded by (base seed, trial index), so any sweep re-run with
the same configuration reproduces its output byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .frameworks import FrameworkKind, percentage_gain, run_framework_batch
from .model import ConfigError, SystemConfig, generate_realization

CSV_SCHEMA = 1
CSV_HEADER = "param,framework,mean_sum_rate_bps,stderr_bps,mean_iters,converged_frac"

SWEEP_PARAMETERS = ("ptot", "ith", "beams")

DEFAULT_GRIDS = {
    "ptot": (20.0, 30.0, 40.0, 50.0, 60.0),
    "ith": (0.5, 1.0, 2.0, 3.0, 5.0, 8.0, 12.0, 16.0, 20.0),
    "beams": (3.0, 5.0, 7.0),
}

ALL_FRAMEWORKS = (FrameworkKind.PROPOSED, FrameworkKind.BENCHMARK1_EQUAL_POWER,
                  FrameworkKind.BENCHMARK2_RANDOM_ASSIGN)


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: a parameter grid, trial count and frameworks to compare."""

    swept_parameter: str
    grid: tuple[float, ...]
    trials: int = 1000
    frameworks: tuple[FrameworkKind, ...] = ALL_FRAMEWORKS
    base: SystemConfig = field(default_factory=SystemConfig)
    output_path: str | None = None

    def __post_init__(self):
        if self.swept_parameter not in SWEEP_PARAMETERS:
            raise ConfigError(f"swept_parameter must be one of {SWEEP_PARAMETERS}")
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ConfigError("sweep grid must be non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("sweep grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.frameworks:
            raise ConfigError("at least one framework required")

    def config_at(self, value: float) -> SystemConfig:
        """Scenario configuration for one grid point."""
        if self.swept_parameter == "ptot":
            return replace(self.base, total_power=value)
        if self.swept_parameter == "ith":
            return replace(self.base, interference_threshold=value)
        m = int(round(value))
        if m != value or m < 1:
            raise ConfigError(f"beam count grid values must be positive integers, got {value}")
        # Users track the beam count (U = 2M) and each beam keeps one block.
        return replace(self.base, num_beams=m, num_resource_blocks=m, num_users=2 * m)


@dataclass(frozen=True)
class PointResult:
    """Aggregate over the trials of one (grid value, framework) cell."""

    param_value: float
    framework: FrameworkKind
    mean_sum_rate_bps: float
    stderr_bps: float
    mean_iterations: float
    converged_fraction: float


@dataclass
class SweepResult:
    swept_parameter: str
    rows: list[PointResult]

    def cell(self, value: float, framework: FrameworkKind) -> PointResult:
        for row in self.rows:
            if row.framework is framework and math.isclose(row.param_value, value):
                return row
        raise KeyError(f"no cell for ({value}, {framework.value})")

    def grid(self) -> list[float]:
        seen = []
        for row in self.rows:
            if row.param_value not in seen:
                seen.append(row.param_value)
        return seen

    def series(self, framework: FrameworkKind) -> np.ndarray:
        return np.array([self.cell(v, framework).mean_sum_rate_bps
                         for v in self.grid()])

    def gains_over(self, benchmark: FrameworkKind) -> list[float]:
        """Percentage gain of the proposed framework per grid point."""
        return [percentage_gain(self.cell(v, FrameworkKind.PROPOSED).mean_sum_rate_bps,
                                self.cell(v, benchmark).mean_sum_rate_bps)
                for v in self.grid()]

    def to_csv(self, path):
        lines = [f"# schema={CSV_SCHEMA}",
                 f"# parameter={self.swept_parameter}",
                 CSV_HEADER]
        for r in self.rows:
            lines.append(",".join([
                f"{r.param_value:.17g}", r.framework.value,
                f"{r.mean_sum_rate_bps:.17g}", f"{r.stderr_bps:.17g}",
                f"{r.mean_iterations:.17g}", f"{r.converged_fraction:.17g}",
            ]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "SweepResult":
        parameter = None
        rows = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if line.startswith("#"):
                body = line.lstrip("#").strip()
                if body.startswith("parameter="):
                    parameter = body.split("=", 1)[1]
                continue
            if not line or line == CSV_HEADER:
                continue
            value, fw, mean, err, iters, conv = line.split(",")
            rows.append(PointResult(
                param_value=float(value), framework=FrameworkKind.from_name(fw),
                mean_sum_rate_bps=float(mean), stderr_bps=float(err),
                mean_iterations=float(iters), converged_fraction=float(conv)))
        if parameter is None:
            raise ConfigError(f"{path}: missing '# parameter=' line")
        return cls(swept_parameter=parameter, rows=rows)


def assignment_seed(cfg: SystemConfig, trial: int) -> int:
    """Seed for the random-assignment benchmark, unique per (scenario, trial)."""
    return (cfg.rng_seed << 20) + trial


def run_point(cfg: SystemConfig, trials: int,
              frameworks=ALL_FRAMEWORKS) -> dict[FrameworkKind, PointResult]:
    """Run all requested frameworks on one configuration, paired over trials."""
    reals = [generate_realization(cfg, t) for t in range(trials)]
    seeds = [assignment_seed(cfg, t) for t in range(trials)]
    out = {}
    for fw in frameworks:
        reports = run_framework_batch(fw, reals, cfg, seeds)
        rates = np.array([r.sum_rate_bps for r in reports])
        iters = np.array([r.iterations for r in reports], dtype=float)
        conv = np.array([r.converged for r in reports], dtype=float)
        stderr = float(rates.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
        out[fw] = PointResult(
            param_value=math.nan, framework=fw,
            mean_sum_rate_bps=float(rates.mean()), stderr_bps=stderr,
            mean_iterations=float(iters.mean()),
            converged_fraction=float(conv.mean()))
    return out


def run_sweep(spec: SweepSpec) -> SweepResult:
    rows = []
    for value in spec.grid:
        cfg = spec.config_at(value)
        cells = run_point(cfg, spec.trials, spec.frameworks)
        for fw in spec.frameworks:
            rows.append(replace(cells[fw], param_value=value))
    result = SweepResult(swept_parameter=spec.swept_parameter, rows=rows)
    if spec.output_path is not None:
        try:
            result.to_csv(spec.output_path)
        except OSError as exc:
            raise OSError(f"cannot write sweep output to {spec.output_path}: {exc}") from exc
    return result
