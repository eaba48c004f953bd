"""Guided search distribution: a low-rank subspace from recent surrogate
gradients mixed with an isotropic Gaussian, mirrored sampling, and the two
recombination maps (weighted average and antithetic finite differences).
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AllInfeasible, DegenerateSampler, WeightError

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
ZERO_GRADIENT = 1e-14


def orthonormal_basis(gradients: Sequence[np.ndarray], n: int | None = None) -> np.ndarray:
    """Rank-revealing modified Gram-Schmidt, two passes per column.

    Columns keep the input order. A vector whose residual after projection
    falls below ``RANK_TOL`` times its own norm adds nothing and is dropped.
    """
    if len(gradients) == 0:
        return np.zeros((n or 0, 0))
    dim = len(gradients[0])
    cols: list[np.ndarray] = []
    for g in gradients:
        g = np.asarray(g, dtype=float)
        norm = np.linalg.norm(g)
        if norm == 0.0:
            continue
        v = g.copy()
        for _ in range(2):
            for q in cols:
                v -= (q @ v) * q
        res = np.linalg.norm(v)
        if res < RANK_TOL * norm:
            continue
        cols.append(v / res)
    if not cols:
        return np.zeros((dim, 0))
    return np.column_stack(cols)


@dataclass
class SurrogateBuffer:
    """Ring of the ``capacity`` most recent surrogate gradients and their basis."""

    capacity: int
    n: int
    gradients: deque = field(init=False)
    basis: np.ndarray = field(init=False)

    def __post_init__(self):
        self.gradients = deque(maxlen=self.capacity)
        self.basis = np.zeros((self.n, 0))

    def __len__(self) -> int:
        return len(self.gradients)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def push(self, g: np.ndarray) -> "SurrogateBuffer":
        g = np.asarray(g, dtype=float).reshape(-1)
        if g.shape[0] != self.n:
            raise ValueError(f"expected gradient of dimension {self.n}, got {g.shape[0]}")
        if not np.all(np.isfinite(g)) or np.linalg.norm(g) < ZERO_GRADIENT:
            log.info("skipping zero or non-finite surrogate gradient")
            return self
        self.gradients.append(g.copy())
        self.basis = orthonormal_basis(list(self.gradients), self.n)
        return self


def push_surrogate(buffer: SurrogateBuffer, g: np.ndarray) -> SurrogateBuffer:
    return buffer.push(g)


@dataclass
class GESDistribution:
    alpha: float
    n: int
    buffer: SurrogateBuffer

    @property
    def effective_alpha(self) -> float:
        return 1.0 if self.buffer.rank == 0 else self.alpha

    def covariance(self) -> np.ndarray:
        a = self.effective_alpha
        u = self.buffer.basis
        return (a / self.n) * np.eye(self.n) + ((1.0 - a) / self.buffer.capacity) * (u @ u.T)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.n == 0:
            raise DegenerateSampler("cannot sample in dimension 0")
        a = self.effective_alpha
        d = math.sqrt(a / self.n) * rng.standard_normal(self.n)
        k = self.buffer.rank
        if k and a < 1.0:
            d += math.sqrt((1.0 - a) / self.buffer.capacity) * (
                self.buffer.basis @ rng.standard_normal(k))
        return d


def covariance(distribution: GESDistribution) -> np.ndarray:
    return distribution.covariance()


def sample_direction(distribution: GESDistribution, rng: np.random.Generator) -> np.ndarray:
    """Unit-scale direction ~ N(0, C); the sampling scale is applied by the caller."""
    return distribution.sample(rng)


def mirrored_pairs(directions: Sequence[np.ndarray]) -> list[np.ndarray]:
    directions = [np.asarray(d, dtype=float) for d in directions]
    return directions + [-d for d in directions]


def log_rank_weights(k: int) -> np.ndarray:
    """Weights proportional to ln(k + 1/2) - ln(i) for ranks i = 1..k."""
    w = math.log(k + 0.5) - np.log(np.arange(1, k + 1))
    return w / w.sum()


def uniform_weights(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def psi_average(directions: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if len(w) != len(directions) or len(w) == 0:
        raise WeightError("need one weight per direction")
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-12:
        raise WeightError("weights must lie in the probability simplex")
    return np.tensordot(w, np.asarray(directions, dtype=float), axes=1)


def psi_guided(directions: Sequence[np.ndarray], f_pairs: Sequence[tuple[float, float]],
               sigma_es: float, beta: float, lam: int) -> np.ndarray:
    """Antithetic update direction -(beta / (sigma_es * lam)) * sum_i (f_i - f_i') d_i.

    ``f_pairs[i]`` holds the values at ``x + sigma_es d_i`` and its mirror.
    Pairs with an infinite member are skipped.
    """
    if lam != 2 * len(directions):
        raise ValueError("antithetic recombination needs lam == 2 * len(directions)")
    acc = None
    for d, (fp, fm) in zip(directions, f_pairs):
        if not (math.isfinite(fp) and math.isfinite(fm)):
            continue
        term = (fp - fm) * np.asarray(d, dtype=float)
        acc = term if acc is None else acc + term
    if acc is None:
        raise AllInfeasible("every mirrored pair has an infeasible member")
    return -(beta / (sigma_es * lam)) * acc


def finite_difference_gradient(fun, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``fun`` at ``x``; a surrogate for synthetic problems."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g
