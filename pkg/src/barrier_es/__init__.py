"""Evolution strategy with estimated values and an adjusted extreme barrier
for noisy constrained black-box minimization."""

from .config import RunConfig, read_config, suite, write_config
from .constraints import INFEASIBLE, BarrierValue, adjusted_barrier, exact_barrier, violation
from .diagnostics import (TraceRecord, accuracy_summary, expected_decrease_audit, lyapunov,
                          read_trace, sigma_convergence_check, stationarity_box, write_trace)
from .engine import EngineConfig, RunResult, SearchState, run, run_detailed
from .errors import BarrierESError, ConfigError
from .guided import GESDistribution, SurrogateBuffer, psi_average, psi_guided
from .oracles import AccuracySchedule, estimate, required_samples
from .problems import ConstrainedProblem, make_problem

__all__ = [
    "AccuracySchedule", "BarrierESError", "BarrierValue", "ConfigError", "ConstrainedProblem",
    "EngineConfig", "GESDistribution", "INFEASIBLE", "RunConfig", "RunResult", "SearchState",
    "SurrogateBuffer", "TraceRecord", "accuracy_summary", "adjusted_barrier", "estimate",
    "exact_barrier", "expected_decrease_audit", "lyapunov", "make_problem", "psi_average",
    "psi_guided", "read_config", "read_trace", "required_samples", "run", "run_detailed",
    "sigma_convergence_check", "stationarity_box", "suite", "violation", "write_config",
    "write_trace",
]
