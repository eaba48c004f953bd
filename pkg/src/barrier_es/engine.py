"""Evolution strategy with estimated values, an adjusted extreme barrier and a
sufficient-decrease test on the trial point.

Each iteration samples offspring around the incumbent at scale ``sigma_es``,
ranks them by barrier value, recombines the best into a direction ``d``,
evaluates the trial point ``x + sigma * d`` and accepts it only when its
barrier estimate beats the incumbent estimate by ``kappa / 2 * sigma**2``.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import rng as streams
from .constraints import INFEASIBLE, BarrierValue, adjusted_barrier, violation
from .diagnostics import TraceRecord, lyapunov
from .errors import (AllInfeasible, ConfigError, EvaluationError, InfeasibleStart,
                     NonFiniteObjective)
from .guided import (GESDistribution, SurrogateBuffer, log_rank_weights, mirrored_pairs,
                     psi_average, psi_guided, uniform_weights)
from .oracles import AccuracySchedule, Estimate, RunningVariance, accuracy_event, estimate
from .problems import ConstrainedProblem

log = logging.getLogger(__name__)

AVERAGE = "average"
GUIDED = "guided"
SURROGATES = ("update", "problem", "none")


@dataclass
class EngineConfig:
    """Engine hyperparameters; defaults follow the practical control-task setup
    (asymmetric clamped step factors). ``symmetric`` builds the theory mode."""

    lam: int = 40
    lam_prime: int = 20
    sigma0: float = 0.1
    sigma_es0: float = 1.0
    gamma_up: float = 1.01
    gamma_down: float = 0.99
    sigma_min: float = 0.001
    sigma_max: float = 0.1
    kappa: float = 0.005
    d_max: float = 10.0
    eps_c: float = 1.0
    psi_kind: str = GUIDED
    weights: str = "log-rank"
    mirrored: bool = True
    beta: float = 5.0
    alpha: float = 0.5
    m: int = 20
    budget: int = 1000
    warmup: int = 0
    surrogate: str = "update"
    workers: int = 1

    def __post_init__(self):
        def bad(name, msg):
            raise ConfigError(f"engine.{name}", msg)

        if self.lam_prime < 1 or self.lam < self.lam_prime:
            bad("lambda_prime", "need lambda >= lambda_prime >= 1")
        if self.psi_kind not in (AVERAGE, GUIDED):
            bad("psi_kind", f"unknown recombination {self.psi_kind!r}")
        if self.psi_kind == GUIDED:
            if self.lam != 2 * self.lam_prime:
                bad("lambda", "antithetic recombination needs lambda == 2 * lambda_prime")
            self.mirrored = True
        if self.mirrored and self.lam % 2:
            bad("lambda", "mirrored sampling needs an even lambda")
        if self.weights not in ("log-rank", "uniform"):
            bad("weights", f"unknown weights {self.weights!r}")
        if self.gamma_up < 1.0:
            bad("gamma_up", "must be >= 1")
        if not 0.0 < self.gamma_down <= 1.0:
            bad("gamma_down", "must lie in (0, 1]")
        if self.sigma0 <= 0 or self.sigma_es0 <= 0:
            bad("sigma0", "initial step sizes must be positive")
        if self.sigma_min < 0 or self.sigma_max <= 0 or self.sigma_min > self.sigma_max:
            bad("sigma_min", "need 0 <= sigma_min <= sigma_max")
        for name in ("kappa", "d_max", "beta"):
            if getattr(self, name) <= 0:
                bad(name, "must be positive")
        if self.eps_c < 0:
            bad("eps_c", "must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            bad("alpha", "must lie in [0, 1]")
        if self.m < 1:
            bad("m", "must be positive")
        if self.budget < 0 or self.warmup < 0:
            bad("budget", "must be non-negative")
        if self.surrogate not in SURROGATES:
            bad("surrogate", f"unknown surrogate provider {self.surrogate!r}")
        if self.workers < 1:
            bad("workers", "must be positive")

    @classmethod
    def symmetric(cls, gamma: float = 1.01, **kwargs) -> "EngineConfig":
        """Theory mode: sigma multiplied by gamma or 1/gamma, no clamps."""
        return cls(gamma_up=gamma, gamma_down=1.0 / gamma, sigma_min=0.0,
                   sigma_max=math.inf, **kwargs)

    def to_dict(self) -> dict:
        out = {"lambda": self.lam, "lambda_prime": self.lam_prime}
        out.update((f.name, getattr(self, f.name)) for f in fields(self)
                   if f.name not in ("lam", "lam_prime"))
        return out


@dataclass
class SearchState:
    x: np.ndarray
    sigma: float
    sigma_es: float
    f: float                 # carried barrier estimate at x, always finite
    c: np.ndarray            # carried constraint estimate at x
    iteration: int
    seed: int


@dataclass
class Offspring:
    direction: np.ndarray
    point: np.ndarray
    index: int
    barrier: BarrierValue | None = None
    samples: int = 0
    f_var: float = math.nan


@dataclass
class _Evaluator:
    """Barrier estimates for one run; holds the schedules and variance tracker."""

    problem: ConstrainedProblem
    config: EngineConfig
    schedule: AccuracySchedule
    offspring_schedule: AccuracySchedule
    seed: int
    variance: RunningVariance = field(default_factory=RunningVariance)

    def v(self, schedule: AccuracySchedule) -> float | None:
        if schedule.v is not None:
            return schedule.v
        declared = getattr(self.problem.oracle, "variance_bound", None)
        return declared if declared is not None else self.variance.bound()

    def estimate(self, point, sigma, schedule, rng) -> Estimate:
        return estimate(point, sigma, self.problem.oracle, schedule, rng, self.v(schedule))

    def barrier(self, point, sigma, schedule, rng) -> tuple[BarrierValue, Estimate | None]:
        try:
            est = self.estimate(point, sigma, schedule, rng)
        except EvaluationError as exc:
            log.info("evaluation failed at %s: %s", point, exc)
            return INFEASIBLE, None
        return adjusted_barrier(est.f, est.c, self.config.eps_c, sigma), est


def init_state(config: EngineConfig, problem: ConstrainedProblem, seed: int,
               schedule: AccuracySchedule | None = None) -> SearchState:
    """Estimate f and c once at the initial point and check relaxed feasibility."""
    schedule = schedule or AccuracySchedule()
    ev = _Evaluator(problem, config, schedule, schedule, seed)
    x0 = np.asarray(problem.x0, dtype=float).copy()
    try:
        est = ev.estimate(x0, config.sigma0, schedule,
                          streams.substream(seed, 0, 0, streams.INIT))
    except EvaluationError as exc:
        raise NonFiniteObjective(f"no usable estimate at x0: {exc}") from exc
    if est.c.size and np.max(est.c) > config.eps_c * config.sigma0:
        raise InfeasibleStart(
            f"max constraint estimate {np.max(est.c):g} exceeds eps_c*sigma0 = "
            f"{config.eps_c * config.sigma0:g}")
    if not math.isfinite(est.f):
        raise NonFiniteObjective("objective estimate at x0 is not finite")
    return SearchState(x0, config.sigma0, config.sigma_es0, est.f, est.c, 0, seed)


def generate_offspring(state: SearchState, distribution: GESDistribution, lam: int,
                       mirrored: bool = False, stream_key: tuple = ()) -> list[Offspring]:
    """Sample ``lam`` offspring ``x + sigma_es * d``; with mirroring the second
    half are the negated first half."""
    k = state.iteration
    count = lam // 2 if mirrored else lam
    dirs = [distribution.sample(streams.substream(state.seed, *stream_key, k, i,
                                                  streams.DIRECTION))
            for i in range(count)]
    if mirrored:
        dirs = mirrored_pairs(dirs)
    return [Offspring(d, state.x + state.sigma_es * d, i) for i, d in enumerate(dirs)]


def rank_offspring(offspring: list[Offspring]) -> list[Offspring]:
    """Ascending barrier value, infeasible last, ties by index."""
    return sorted(offspring, key=lambda o: (o.barrier.sort_key(), o.index))


def recombine(ranked: list[Offspring], config: EngineConfig, sigma_es: float) -> np.ndarray:
    """Apply the recombination map and radially rescale to norm ``d_max``.

    ``ranked`` is the full ranked population. The averaging map uses the
    feasible members among the best ``lam_prime``; the antithetic map uses
    every mirrored pair and skips pairs with an infeasible member.
    """
    if config.psi_kind == AVERAGE:
        chosen = [o for o in ranked[:config.lam_prime] if o.barrier.is_feasible]
        if not chosen:
            raise AllInfeasible("no feasible offspring among the selected parents")
        w = (log_rank_weights if config.weights == "log-rank" else uniform_weights)(len(chosen))
        d = psi_average([o.direction for o in chosen], w)
    else:
        by_index = sorted(ranked, key=lambda o: o.index)
        half = len(by_index) // 2
        pairs = [(by_index[i].barrier.as_float(), by_index[i + half].barrier.as_float())
                 for i in range(half)]
        d = psi_guided([o.direction for o in by_index[:half]], pairs, sigma_es,
                       config.beta, len(by_index))
    norm = float(np.linalg.norm(d))
    if norm > config.d_max:
        d = d * (config.d_max / norm)
    return d


def update_sigmas(state: SearchState, success: bool, config: EngineConfig) -> tuple[float, float]:
    """New (sigma, sigma_es). sigma is clamped to [sigma_min, sigma_max];
    sigma_es takes the same factor without the clamps."""
    if success:
        return min(config.gamma_up * state.sigma, config.sigma_max), config.gamma_up * state.sigma_es
    return max(config.gamma_down * state.sigma, config.sigma_min), config.gamma_down * state.sigma_es


def trial_and_accept(state: SearchState, d: np.ndarray, barrier_oracle, config: EngineConfig):
    """Evaluate ``x + sigma * d`` and apply the sufficient-decrease test.

    ``barrier_oracle(point, sigma)`` returns ``(BarrierValue, Estimate | None)``.
    Returns ``(new_state, success, trial_barrier, trial_estimate)``.
    """
    trial = state.x + state.sigma * d
    barrier, est = barrier_oracle(trial, state.sigma)
    threshold = state.f - 0.5 * config.kappa * state.sigma ** 2
    success = barrier.is_feasible and barrier.value <= threshold
    sigma, sigma_es = update_sigmas(state, success, config)
    if success:
        new = replace(state, x=trial, f=barrier.value, c=est.c, sigma=sigma,
                      sigma_es=sigma_es, iteration=state.iteration + 1)
    else:
        new = replace(state, sigma=sigma, sigma_es=sigma_es, iteration=state.iteration + 1)
    return new, success, barrier, est


@dataclass
class RunResult:
    trace: list[TraceRecord]
    initial: SearchState
    final: SearchState


class _Runner:
    def __init__(self, config, problem, seed, schedule, offspring_schedule, nu, timing):
        self.config = config
        self.problem = problem
        self.seed = seed
        self.schedule = schedule or AccuracySchedule()
        self.ev = _Evaluator(problem, config, self.schedule,
                             offspring_schedule or self.schedule, seed)
        self.nu = nu
        self.timing = timing
        self.buffer = SurrogateBuffer(config.m, problem.n)
        self.dist = GESDistribution(config.alpha, problem.n, self.buffer)
        self.pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
        self._exact_cache: tuple[bytes, float | None, float] | None = None

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()

    def _evaluate(self, offspring: list[Offspring], state: SearchState, key: tuple) -> None:
        sched = self.ev.offspring_schedule

        def one(o: Offspring):
            rng = streams.substream(self.seed, *key, state.iteration, o.index, streams.OFFSPRING)
            barrier, est = self.ev.barrier(o.point, state.sigma, sched, rng)
            o.barrier = barrier
            if est is not None:
                o.samples, o.f_var = est.n, est.f_var
            else:
                o.samples = sched.n_samples(state.sigma, self.ev.v(sched))

        if self.pool is None:
            for o in offspring:
                one(o)
        else:
            list(self.pool.map(one, offspring))

    def _direction(self, state: SearchState, key: tuple = ()):
        cfg = self.config
        offspring = generate_offspring(state, self.dist, cfg.lam, cfg.mirrored, key)
        self._evaluate(offspring, state, key)
        ranked = rank_offspring(offspring)
        try:
            d = recombine(ranked, cfg, state.sigma_es)
        except AllInfeasible:
            d = None
        return d, offspring

    def _exact(self, x) -> tuple[float | None, float | None]:
        # (exact f, exact violation); either may be unavailable
        if not self.problem.has_exact:
            return None, None
        key = np.asarray(x).tobytes()
        if self._exact_cache and self._exact_cache[0] == key:
            return self._exact_cache[1], self._exact_cache[2]
        f = float(self.problem.exact_objective(x))
        cons = self.problem.exact_constraints
        viol = None if cons is None else violation(cons(x))
        self._exact_cache = (key, f, viol)
        return f, viol

    def _push_surrogate(self, state: SearchState, d, key: tuple) -> None:
        kind = self.config.surrogate
        if kind == "update":
            if d is not None:
                self.buffer.push(d)
        elif kind == "problem" and self.problem.surrogate is not None:
            rng = streams.substream(self.seed, *key, state.iteration, 0, streams.SURROGATE)
            self.buffer.push(self.problem.surrogate(state.x, rng))

    def warmup(self, state: SearchState) -> None:
        # Fill the surrogate buffer at x0 before any parameter update.
        for w in range(self.config.warmup):
            probe = replace(state, iteration=w)
            key = (streams.WARMUP,)
            d = None
            if self.config.surrogate == "update":
                d, _ = self._direction(probe, key)
            self._push_surrogate(probe, d, key)

    def step(self, state: SearchState) -> tuple[SearchState, TraceRecord]:
        cfg = self.config
        t0 = time.perf_counter()
        d, offspring = self._direction(state)
        samples = sum(o.samples for o in offspring)
        for o in offspring:
            self.ev.variance.update(o.f_var, o.samples)

        f_trial = None
        acc = None
        if d is None:
            sigma, sigma_es = update_sigmas(state, False, cfg)
            new = replace(state, sigma=sigma, sigma_es=sigma_es, iteration=state.iteration + 1)
            success = False
        else:
            rng = streams.substream(self.seed, state.iteration, 0, streams.TRIAL)

            def oracle(point, sigma):
                return self.ev.barrier(point, sigma, self.schedule, rng)

            new, success, barrier, est = trial_and_accept(state, d, oracle, cfg)
            f_trial = barrier.as_float()
            if est is not None:
                samples += est.n
                self.ev.variance.update(est.f_var, est.n)
                if self.problem.has_exact:
                    f0, _ = self._exact(state.x)
                    f1 = float(self.problem.exact_objective(state.x + state.sigma * d))
                    acc = accuracy_event(state.f, est.f, f0, f1, self.schedule.eps_f,
                                         state.sigma)
        self._push_surrogate(new, d if success else None, ())
        f_exact, viol = self._exact(new.x)
        if viol is None:
            viol = violation(new.c)
        lyap = lyapunov(f_exact if f_exact is not None else new.f, new.sigma, self.nu)
        wall = (time.perf_counter() - t0) * 1e3 if self.timing else None
        rec = TraceRecord(state.iteration, new.sigma, new.sigma_es, success, new.f, f_exact,
                          viol, lyap, samples, acc, wall, f_trial)
        return new, rec


def run_detailed(config: EngineConfig, problem: ConstrainedProblem, seed: int, *,
                 schedule: AccuracySchedule | None = None,
                 offspring_schedule: AccuracySchedule | None = None,
                 nu: float = 0.95, timing: bool = False, callback=None) -> RunResult:
    """Run at most ``config.budget`` iterations and return the trace with the
    initial and final states. ``schedule`` sizes incumbent and trial
    estimates; ``offspring_schedule`` (default: the same) sizes the ranking
    estimates."""
    runner = _Runner(config, problem, seed, schedule, offspring_schedule, nu, timing)
    try:
        state = init_state(config, problem, seed, runner.schedule)
        initial = state
        runner.warmup(state)
        trace = []
        for _ in range(config.budget):
            state, rec = runner.step(state)
            trace.append(rec)
            if callback is not None:
                callback(state, rec)
    finally:
        runner.close()
    return RunResult(trace, initial, state)


def run(config: EngineConfig, problem: ConstrainedProblem, seed: int, **kwargs) -> list[TraceRecord]:
    return run_detailed(config, problem, seed, **kwargs).trace
