"""Sample-average estimators of objective and constraints, and accuracy audits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import DomainError, EvaluationError

log = logging.getLogger(__name__)

THEORETICAL = "theoretical"
FIXED = "fixed"
CAPPED = "capped"
MODES = (THEORETICAL, FIXED, CAPPED)

# Refuse to allocate beyond this many oracle draws for a single estimate.
MAX_SAMPLES = 50_000_000


class NoisyOracle(Protocol):
    n_constraints: int
    variance_bound: float | None

    def sample(self, point: np.ndarray, rng: np.random.Generator,
               n: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Return ``n`` objective draws, shape (n,), and constraint draws, shape (n, r)."""
        ...


@dataclass
class AccuracySchedule:
    """How many oracle draws to average for one estimate.

    ``theoretical`` sizes the batch from the concentration bound so that the
    estimate lies within ``eps_f * sigma**2`` of the truth with probability
    ``p``; ``fixed`` always uses ``n_fixed``; ``capped`` is the theoretical
    size clipped at ``n_cap``. ``v`` is the declared variance bound; when it
    is None the engine supplies a running estimate.
    """

    mode: str = FIXED
    eps_f: float = 1e-3
    p: float = 0.75
    n_fixed: int = 40
    n_cap: int = 10_000
    v: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown schedule mode {self.mode!r}")
        if self.eps_f <= 0:
            raise DomainError("eps_f must be positive")
        if not 0.5 < self.p <= 1.0:
            raise DomainError("p must lie in (1/2, 1]")
        if self.n_fixed < 1 or self.n_cap < 1:
            raise DomainError("batch sizes must be positive")

    def satisfies_theory(self, kappa: float) -> bool:
        return self.eps_f < kappa / 4

    def n_samples(self, sigma: float, v: float | None = None) -> int:
        if self.mode == FIXED:
            return self.n_fixed
        v = self.v if v is None else v
        if v is None:
            return self.n_fixed
        return required_samples(v, self.eps_f, sigma, self.p, mode=self.mode,
                                n_cap=self.n_cap)


def required_samples(v: float, eps_f: float, sigma: float, p: float,
                     mode: str = THEORETICAL, n_cap: int | None = None) -> int:
    """Batch size meeting both the accuracy and the variance requirement.

    N >= 16 v / (eps_f^2 sigma^4) * log(2 / (1 - p)) and N >= v / (eps_f sigma^4).
    """
    if v < 0 or eps_f <= 0 or sigma <= 0:
        raise DomainError("need v >= 0, eps_f > 0, sigma > 0")
    if v == 0:
        return 1
    if p >= 1.0:
        if mode == CAPPED and n_cap is not None:
            return n_cap
        raise DomainError("p >= 1 makes the sample bound diverge")
    s4 = sigma ** 4
    accuracy = 16.0 * v / (eps_f ** 2 * s4) * math.log(2.0 / (1.0 - p))
    variance = v / (eps_f * s4)
    bound = max(accuracy, variance, 1.0)
    if mode == CAPPED and n_cap is not None and bound >= n_cap:
        return n_cap
    return int(math.ceil(bound))


@dataclass(frozen=True)
class Estimate:
    f: float
    c: np.ndarray
    n: int
    f_var: float = math.nan


def estimate(point: np.ndarray, sigma: float, oracle: NoisyOracle,
             schedule: AccuracySchedule, rng: np.random.Generator,
             v: float | None = None) -> Estimate:
    """Average a batch of oracle draws sized by ``schedule`` at step ``sigma``."""
    n = schedule.n_samples(sigma, v)
    if n > MAX_SAMPLES:
        raise DomainError(f"schedule asks for {n} samples at sigma={sigma:g}")
    try:
        fs, cs = oracle.sample(np.asarray(point, dtype=float), rng, n)
    except EvaluationError:
        raise
    except Exception as exc:  # noqa: BLE001 - any oracle failure is a hidden constraint
        raise EvaluationError(f"oracle failed: {exc!r}") from exc
    fs = np.asarray(fs, dtype=float).reshape(n)
    cs = np.asarray(cs, dtype=float).reshape(n, oracle.n_constraints)
    f_mean = fs.sum() / n
    c_mean = cs.sum(axis=0) / n
    if not (math.isfinite(f_mean) and np.isfinite(c_mean).all()):
        raise EvaluationError("oracle returned non-finite values")
    if n > 1:
        dev = fs - f_mean
        f_var = float(dev @ dev) / (n - 1)
    else:
        f_var = math.nan
    return Estimate(float(f_mean), c_mean, n, f_var)


def estimate_objective(point, sigma, oracle, schedule, rng, v=None) -> tuple[float, int]:
    est = estimate(point, sigma, oracle, schedule, rng, v)
    return est.f, est.n


def estimate_constraints(point, sigma, oracle, schedule, rng, v=None) -> np.ndarray:
    return estimate(point, sigma, oracle, schedule, rng, v).c


def accuracy_event(f_est0: float, f_est1: float, f_true0: float, f_true1: float,
                   eps_f: float, sigma: float) -> bool:
    tol = eps_f * sigma ** 2
    return abs(f_est0 - f_true0) <= tol and abs(f_est1 - f_true1) <= tol


def constraint_accuracy_event(c_est0, c_est1, c_true0, c_true1, eps_c: float,
                              sigma: float) -> bool:
    tol = eps_c * sigma

    def gap(a, b):
        d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
        return float(d.max()) if d.size else 0.0

    return gap(c_est0, c_true0) <= tol and gap(c_est1, c_true1) <= tol


@dataclass
class RunningVariance:
    """Pooled running estimate of the per-draw objective variance.

    ``bound()`` returns the pooled variance times a safety factor of 2, and
    is what the engine hands to a schedule that has no declared ``v``.
    """

    safety: float = 2.0
    count: int = 0
    _sum: float = field(default=0.0, repr=False)

    def update(self, f_var: float, n: int) -> None:
        if n < 2 or not math.isfinite(f_var):
            return
        self._sum += f_var * (n - 1)
        self.count += n - 1

    def bound(self) -> float | None:
        if self.count == 0:
            return None
        return self.safety * self._sum / self.count
