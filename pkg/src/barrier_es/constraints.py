"""Extreme-barrier handling of inequality constraints c_i(x) <= 0."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@functools.total_ordering
@dataclass(frozen=True)
class BarrierValue:
    """Finite barrier value, or the infeasible sentinel when ``value`` is None.

    The sentinel compares greater than every finite value and equal to itself,
    so lists of barrier values sort with infeasible entries last.
    """

    value: float | None

    @classmethod
    def finite(cls, value: float) -> "BarrierValue":
        return cls(float(value))

    @property
    def is_feasible(self) -> bool:
        return self.value is not None

    def as_float(self) -> float:
        return math.inf if self.value is None else self.value

    def sort_key(self):
        return (1, 0.0) if self.value is None else (0, self.value)

    def __lt__(self, other: "BarrierValue") -> bool:
        if not isinstance(other, BarrierValue):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BarrierValue):
            return NotImplemented
        return self.sort_key() == other.sort_key()

    def __hash__(self) -> int:
        return hash(self.sort_key())

    def __repr__(self) -> str:
        return "Infeasible" if self.value is None else f"Finite({self.value!r})"


INFEASIBLE = BarrierValue(None)


def exact_barrier(f_value: float, c_values: Sequence[float]) -> BarrierValue:
    c = np.asarray(c_values, dtype=float)
    if c.size and not np.all(c <= 0.0):
        return INFEASIBLE
    return BarrierValue.finite(f_value)


def adjusted_barrier(f_est: float, c_est: Sequence[float], eps_c: float,
                     sigma: float) -> BarrierValue:
    """Barrier on estimates: feasible iff ``max(c_est) <= eps_c * sigma``.

    The tolerance shrinks with the step size, so small violations of the
    estimated constraints are admitted early in a run.
    """
    c = np.asarray(c_est, dtype=float)
    if c.size and not np.all(c <= eps_c * sigma):
        return INFEASIBLE
    return BarrierValue.finite(f_est)


def violation(c_values: Sequence[float]) -> float:
    c = np.asarray(c_values, dtype=float)
    if c.size == 0:
        return 0.0
    return float(max(np.max(c), 0.0))


def equality(h: Callable[[np.ndarray], float]) -> list[Callable[[np.ndarray], float]]:
    """Split ``h(x) = 0`` into the pair ``h <= 0`` and ``-h <= 0``.

    Under the adjusted barrier this admits ``|h(x)| <= eps_c * sigma``.
    """
    return [h, lambda x: -h(x)]


@dataclass
class FeasibleRegion:
    constraints: list[Callable[[np.ndarray], float]]

    @property
    def r(self) -> int:
        return len(self.constraints)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.array([c(x) for c in self.constraints], dtype=float)

    def contains(self, x: np.ndarray) -> bool:
        return violation(self(x)) == 0.0
