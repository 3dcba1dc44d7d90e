"""Sum-rate optimization for a rate-splitting LEO downlink under GEO spectrum sharing."""

from .assignment import Assignment, greedy_assign, random_assign
from .experiment import (DEFAULT_GRIDS, PointResult, SweepResult, SweepSpec,
                         run_point, run_sweep)
from .frameworks import (FrameworkKind, percentage_gain, run_benchmark1,
                         run_benchmark2, run_framework, run_framework_batch,
                         run_proposed)
from .model import (AllocationState, ChannelRealization, ConfigError, DualState,
                    SystemConfig, generate_realization, load_config, noise_power,
                    save_config)
from .pattern import beam_gain, first_null_angle
from .rates import (RateBreakdown, common_sinr_and_rate, compute_precoders,
                    private_sinr, rate_breakdown, sca_coefficients, sum_rate)
from .solver import (CubicCoefficients, EtaQuadratic, NoStationaryPointError,
                     SolveReport, cubic_coefficients, eta_quadratic,
                     real_cubic_roots, solve, solve_batch, solve_beam_power,
                     solve_common_eta, solve_private_eta, update_common_share,
                     update_multipliers, write_trace)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
