"""Per-iteration trace records, Lyapunov and step-size diagnostics, trace
re-checkers and CSV persistence."""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, InsufficientSeeds

COLUMNS = ("iteration", "sigma", "sigma_es", "success", "f_est", "f_exact", "violation",
           "lyapunov", "samples", "accuracy_event", "wall_ms", "f_trial")


@dataclass(frozen=True)
class TraceRecord:
    """State after one iteration.

    ``sigma``, ``sigma_es``, ``f_est`` and ``lyapunov`` describe the iterate
    that the iteration hands on. ``f_trial`` is the barrier estimate at the
    trial point (inf when infeasible, None when no trial was evaluated).
    """

    iteration: int
    sigma: float
    sigma_es: float
    success: bool
    f_est: float
    f_exact: float | None
    violation: float
    lyapunov: float
    samples: int
    accuracy_event: bool | None
    wall_ms: float | None
    f_trial: float | None


def lyapunov(f: float, sigma: float, nu: float) -> float:
    """nu * f + (1 - nu) * sigma**2."""
    return nu * f + (1.0 - nu) * sigma ** 2


def min_theory_nu(gamma: float, kappa: float) -> float:
    """Smallest nu with nu / (1 - nu) >= 4 (gamma^2 - 1) / kappa."""
    ratio = 4.0 * (gamma ** 2 - 1.0) / kappa
    return ratio / (1.0 + ratio)


# ---------------------------------------------------------------------------
# Trace re-checkers. They only read logged columns and take the run's initial
# state explicitly, so they stay independent of the engine code path.


def _previous(trace: Sequence[TraceRecord], f0: float, sigma0: float):
    prev_f, prev_sigma = f0, sigma0
    for rec in trace:
        yield rec, prev_f, prev_sigma
        prev_f, prev_sigma = rec.f_est, rec.sigma


def sufficient_decrease_violations(trace: Sequence[TraceRecord], kappa: float, f0: float,
                                   sigma0: float) -> list[int]:
    """Iterations whose acceptance breaks f_new <= f_old - kappa/2 sigma_old^2
    by more than one unit in the last place."""
    bad = []
    for rec, f_old, s_old in _previous(trace, f0, sigma0):
        if not rec.success:
            continue
        bound = f_old - 0.5 * kappa * s_old ** 2
        if rec.f_est > np.nextafter(bound, math.inf):
            bad.append(rec.iteration)
    return bad


def step_rule_violations(trace: Sequence[TraceRecord], sigma0: float, gamma_up: float,
                         gamma_down: float, sigma_min: float, sigma_max: float) -> list[int]:
    bad = []
    for rec, _, s_old in _previous(trace, math.nan, sigma0):
        expect = (min(gamma_up * s_old, sigma_max) if rec.success
                  else max(gamma_down * s_old, sigma_min))
        if rec.sigma != expect:
            bad.append(rec.iteration)
    return bad


def decision_mismatches(trace: Sequence[TraceRecord], kappa: float, f0: float,
                        sigma0: float) -> list[int]:
    """Re-decide every iteration from the logged trial value with a scalar
    comparison and list where the engine decided differently."""
    bad = []
    for rec, f_old, s_old in _previous(trace, f0, sigma0):
        trial = math.inf if rec.f_trial is None else rec.f_trial
        accept = trial <= f_old - kappa / 2 * s_old * s_old
        if accept != rec.success:
            bad.append(rec.iteration)
    return bad


# ---------------------------------------------------------------------------


@dataclass
class AuditReport:
    buckets: list[tuple[int, int, float]]   # (first iteration, last iteration, mean increment)
    fraction_nonpositive: float
    violations: list[int]                    # indices of buckets with positive mean

    def to_dict(self) -> dict:
        return {"buckets": [list(b) for b in self.buckets],
                "fraction_nonpositive": self.fraction_nonpositive,
                "violations": self.violations}


def expected_decrease_audit(traces: Sequence[Sequence[TraceRecord]], nu: float,
                            bucket: int = 10, min_seeds: int = 10) -> AuditReport:
    """Seed-averaged increments of nu*f + (1-nu)*sigma^2 grouped in iteration buckets.

    f is the exact objective when the trace carries it, else the estimate.
    """
    if len(traces) < min_seeds:
        raise InsufficientSeeds(f"need at least {min_seeds} seeds, got {len(traces)}")
    per_seed = []
    for trace in traces:
        phi = np.array([lyapunov(r.f_exact if r.f_exact is not None else r.f_est, r.sigma, nu)
                        for r in trace])
        per_seed.append(np.diff(phi))
    length = min((len(p) for p in per_seed), default=0)
    if length == 0:
        return AuditReport([], 1.0, [])
    mean_inc = np.mean([p[:length] for p in per_seed], axis=0)
    first = traces[0][1].iteration
    buckets, bad = [], []
    for j, start in enumerate(range(0, length, bucket)):
        chunk = mean_inc[start:start + bucket]
        value = float(chunk.mean())
        buckets.append((first + start, first + start + len(chunk) - 1, value))
        if value > 0:
            bad.append(j)
    return AuditReport(buckets, 1.0 - len(bad) / len(buckets), bad)


def sigma_convergence_check(trace_or_sigmas, ratio: float = 0.1) -> bool:
    """True iff the final-quarter median of sigma is at most ``ratio`` times
    the first-quarter median."""
    sig = np.array([r.sigma if isinstance(r, TraceRecord) else r for r in trace_or_sigmas],
                   dtype=float)
    q = len(sig) // 4
    if q == 0:
        return False
    return bool(np.median(sig[-q:]) <= ratio * np.median(sig[:q]))


def accuracy_summary(trace: Iterable[TraceRecord], p: float, confidence: float = 0.99) -> dict:
    """Frequency of audited accuracy events and its one-sided Clopper-Pearson
    lower bound; passes when the bound reaches ``p``."""
    events = [r.accuracy_event for r in trace if r.accuracy_event is not None]
    n = len(events)
    k = int(sum(events))
    lower = float(stats.beta.ppf(1.0 - confidence, k, n - k + 1)) if k > 0 else 0.0
    return {"audited": n, "accurate": k, "frequency": k / n if n else math.nan,
            "lower_bound": lower, "p": p, "confidence": confidence,
            "pass": n > 0 and lower >= p}


def stationarity_box(x, grad, lower, upper) -> float:
    """Norm of the projection of -grad onto the tangent cone of the box at x."""
    x, g = np.asarray(x, dtype=float), np.asarray(grad, dtype=float)
    lo, hi = np.asarray(lower, dtype=float), np.asarray(upper, dtype=float)
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError("x lies outside the box")
    step = -g
    step = np.where((x <= lo) & (step < 0), 0.0, step)
    step = np.where((x >= hi) & (step > 0), 0.0, step)
    return float(np.linalg.norm(step))


# ---------------------------------------------------------------------------
# CSV


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


_KINDS = {f.name: f.type for f in fields(TraceRecord)}


def _parse(name: str, text: str):
    kind = _KINDS[name]
    if text == "":
        if "None" not in kind:
            raise ValueError(f"column {name} may not be empty")
        return None
    if kind.startswith("bool"):
        return text == "1"
    if kind.startswith("int"):
        return int(text)
    return float(text)


def write_trace(records: Iterable[TraceRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for rec in records:
            w.writerow([_fmt(v) for v in astuple(rec)])


def read_trace(path) -> list[TraceRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError(f"{path}: unexpected trace header")
    return [TraceRecord(**{n: _parse(n, t) for n, t in zip(COLUMNS, row)}) for row in rows[1:]]


def read_traces(directory) -> list[list[TraceRecord]]:
    return [read_trace(p) for p in sorted(Path(directory).glob("*.csv"))]
