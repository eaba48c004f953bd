"""Benchmark problems: noisy synthetic functions with exact references, and
small tabular MDPs for entropy-constrained and cost-constrained policy search.
"""

from __future__ import annotations

import inspect
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, SizeError
from .guided import finite_difference_gradient

# Largest S * A * S * T handled by the exact backward-induction oracles.
EXACT_LIMIT = 10**8


@dataclass
class FunctionOracle:
    """Exact functions plus Gaussian objective noise and bounded uniform
    constraint noise of half-width ``constraint_noise``."""

    objective: Callable[[np.ndarray], float]
    constraints: Sequence[Callable[[np.ndarray], float]] = ()
    noise_sd: float = 0.0
    constraint_noise: float = 0.0

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def variance_bound(self) -> float:
        return self.noise_sd ** 2

    def sample(self, point, rng, n=1):
        f = np.full(n, float(self.objective(point)))
        if self.noise_sd > 0:
            f += self.noise_sd * rng.standard_normal(n)
        if not self.constraints:
            return f, np.zeros((n, 0))
        c = np.tile([float(ci(point)) for ci in self.constraints], (n, 1))
        if self.constraint_noise > 0:
            c += rng.uniform(-self.constraint_noise, self.constraint_noise, c.shape)
        return f, c


@dataclass
class ConstrainedProblem:
    name: str
    n: int
    x0: np.ndarray
    oracle: object
    exact_objective: Callable[[np.ndarray], float] | None = None
    exact_constraints: Callable[[np.ndarray], np.ndarray] | None = None
    optimum: np.ndarray | None = None
    optimum_value: float | None = None
    surrogate: Callable[[np.ndarray, np.random.Generator], np.ndarray] | None = None
    box: tuple[np.ndarray, np.ndarray] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def has_exact(self) -> bool:
        return self.exact_objective is not None


def noisy_sphere(n: int = 10, noise_sd: float = 0.1, x0=None) -> ConstrainedProblem:
    if n < 1 or noise_sd < 0:
        raise ValueError("need n >= 1 and noise_sd >= 0")

    def f(x):
        return float(np.dot(x, x))

    x0 = np.ones(n) if x0 is None else np.asarray(x0, dtype=float)
    return ConstrainedProblem(
        name=f"noisy-sphere-{n}", n=n, x0=x0,
        oracle=FunctionOracle(f, (), noise_sd),
        exact_objective=f, exact_constraints=lambda x: np.zeros(0),
        optimum=np.zeros(n), optimum_value=0.0,
        surrogate=lambda x, rng: finite_difference_gradient(f, x),
    )


def constrained_quadratic(n: int = 2, noise_sd: float = 0.01, ball_radius: float = 1.0,
                          constraint_noise: float = 0.0) -> ConstrainedProblem:
    """Minimize ||x - a||^2 over the ball ||x|| <= r with a = (2r, 0, ..., 0).

    The unconstrained minimizer a lies outside the ball, so the solution is
    its projection (r, 0, ..., 0) with value r^2.
    """
    if ball_radius <= 0:
        raise ValueError("ball_radius must be positive")
    target = np.zeros(n)
    target[0] = 2.0 * ball_radius
    center = np.zeros(n)

    def f(x):
        d = x - target
        return float(np.dot(d, d))

    def c(x):
        d = x - center
        return float(np.dot(d, d) - ball_radius ** 2)

    optimum = np.zeros(n)
    optimum[0] = ball_radius
    return ConstrainedProblem(
        name=f"constrained-quadratic-{n}", n=n, x0=center.copy(),
        oracle=FunctionOracle(f, (c,), noise_sd, constraint_noise),
        exact_objective=f, exact_constraints=lambda x: np.array([c(x)]),
        optimum=optimum, optimum_value=ball_radius ** 2,
        surrogate=lambda x, rng: finite_difference_gradient(f, x),
        meta={"center": center, "target": target, "radius": ball_radius},
    )


# ---------------------------------------------------------------------------
# Tabular MDPs


@dataclass
class TabularMDP:
    P: np.ndarray            # (S, A, S) transition probabilities
    R: np.ndarray            # (S, A) rewards
    costs: np.ndarray        # (r, S, A) cost functions
    discount: float
    horizon: int
    init: np.ndarray         # (S,) initial state distribution

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        self.init = np.asarray(self.init, dtype=float)
        S, A = self.R.shape
        self.costs = np.asarray(self.costs, dtype=float).reshape(-1, S, A)
        if self.P.shape != (S, A, S):
            raise ValueError("transition tensor must have shape (S, A, S)")
        if np.any(np.abs(self.P.sum(axis=2) - 1.0) > 1e-12) or np.any(self.P < 0):
            raise ValueError("transition rows must be probability vectors")
        if abs(self.init.sum() - 1.0) > 1e-12:
            raise ValueError("initial distribution must sum to 1")
        if not 0.0 <= self.discount <= 1.0 or self.horizon < 1:
            raise ValueError("need discount in [0, 1] and a positive horizon")

    @property
    def S(self) -> int:
        return self.R.shape[0]

    @property
    def A(self) -> int:
        return self.R.shape[1]

    @property
    def r(self) -> int:
        return self.costs.shape[0]


@dataclass
class SoftmaxPolicy:
    logits: np.ndarray       # (S, A)

    @classmethod
    def from_vector(cls, x, S: int, A: int) -> "SoftmaxPolicy":
        return cls(np.asarray(x, dtype=float).reshape(S, A))

    @property
    def probs(self) -> np.ndarray:
        z = self.logits - self.logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def state_entropy(self) -> np.ndarray:
        p = self.probs
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, -p * np.log(p), 0.0)
        return terms.sum(axis=1)


@dataclass
class Rollouts:
    returns: np.ndarray      # (n,)
    entropy: np.ndarray      # (n,)
    costs: np.ndarray        # (n, r)
    states: np.ndarray | None = None   # (T, n)
    actions: np.ndarray | None = None  # (T, n)
    rewards: np.ndarray | None = None  # (T, n), undiscounted


def _draw(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse-CDF sampling, one row of ``cum`` per draw
    idx = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


def simulate(mdp: TabularMDP, policy: SoftmaxPolicy, n: int, rng: np.random.Generator,
             record: bool = False) -> Rollouts:
    """``n`` independent trajectories of length T, vectorized over trajectories."""
    T = mdp.horizon
    u = rng.random((2 * T + 1, n))
    pi_cum = np.cumsum(policy.probs, axis=1)
    P_cum = np.cumsum(mdp.P, axis=2)
    h = policy.state_entropy()
    s = _draw(np.broadcast_to(np.cumsum(mdp.init), (n, mdp.S)), u[0])
    ret = np.zeros(n)
    ent = np.zeros(n)
    cost = np.zeros((n, mdp.r))
    if record:
        states = np.empty((T, n), dtype=int)
        actions = np.empty((T, n), dtype=int)
        rewards = np.empty((T, n))
    w = 1.0
    for t in range(T):
        a = _draw(pi_cum[s], u[2 * t + 1])
        r = mdp.R[s, a]
        ret += w * r
        ent += h[s]
        if mdp.r:
            cost += w * mdp.costs[:, s, a].T
        if record:
            states[t], actions[t], rewards[t] = s, a, r
        s = _draw(P_cum[s, a], u[2 * t + 2])
        w *= mdp.discount
    if record:
        return Rollouts(ret, ent, cost, states, actions, rewards)
    return Rollouts(ret, ent, cost)


def rollout(mdp: TabularMDP, policy: SoftmaxPolicy,
            rng: np.random.Generator) -> tuple[float, float, np.ndarray]:
    """One trajectory: (discounted return, trajectory entropy, discounted costs)."""
    out = simulate(mdp, policy, 1, rng)
    return float(out.returns[0]), float(out.entropy[0]), out.costs[0]


def _check_size(mdp: TabularMDP) -> None:
    if mdp.S * mdp.A * mdp.S * mdp.horizon > EXACT_LIMIT:
        raise SizeError("MDP too large for exact finite-horizon evaluation")


def _backward(mdp: TabularMDP, pi: np.ndarray, q: np.ndarray, discount: float) -> float:
    # V_t(s) = sum_a pi(a|s) [q(s, a) + discount * sum_s' P(s'|s, a) V_{t+1}(s')]
    _check_size(mdp)
    V = np.zeros(mdp.S)
    for _ in range(mdp.horizon):
        Q = q + discount * (mdp.P @ V)
        V = (pi * Q).sum(axis=1)
    return float(mdp.init @ V)


def exact_return(mdp: TabularMDP, policy: SoftmaxPolicy) -> float:
    return _backward(mdp, policy.probs, mdp.R, mdp.discount)


def exact_entropy(mdp: TabularMDP, policy: SoftmaxPolicy) -> float:
    h = policy.state_entropy()
    q = np.broadcast_to(h[:, None], (mdp.S, mdp.A))
    return _backward(mdp, policy.probs, q, 1.0)


def exact_costs(mdp: TabularMDP, policy: SoftmaxPolicy) -> np.ndarray:
    pi = policy.probs
    return np.array([_backward(mdp, pi, g, mdp.discount) for g in mdp.costs])


def optimal_return(mdp: TabularMDP) -> float:
    """Best achievable expected return, by backward induction with a max."""
    _check_size(mdp)
    V = np.zeros(mdp.S)
    for _ in range(mdp.horizon):
        V = (mdp.R + mdp.discount * (mdp.P @ V)).max(axis=1)
    return float(mdp.init @ V)


def reinforce_gradient(mdp: TabularMDP, x: np.ndarray, rng: np.random.Generator,
                       n_rollouts: int = 32) -> np.ndarray:
    """Policy-gradient surrogate for -E[R] with respect to the logits.

    Advantages are undiscounted reward-to-go minus a per-time-step batch mean.
    """
    policy = SoftmaxPolicy.from_vector(x, mdp.S, mdp.A)
    out = simulate(mdp, policy, n_rollouts, rng, record=True)
    to_go = np.cumsum(out.rewards[::-1], axis=0)[::-1]
    adv = to_go - to_go.mean(axis=1, keepdims=True)
    pi = policy.probs
    grad = np.zeros((mdp.S, mdp.A))
    for t in range(mdp.horizon):
        s, a = out.states[t], out.actions[t]
        score = -pi[s]
        score[np.arange(n_rollouts), a] += 1.0
        np.add.at(grad, s, adv[t][:, None] * score)
    return -(grad / n_rollouts).reshape(-1)


@dataclass
class MDPOracle:
    """Rollout-based oracle for the two policy-search formulations.

    ``kind == "entropy"``: f = -R - mu*H with constraints h_l - H <= 0 and
    H - h_u <= 0. ``kind == "cmdp"``: f = -R + sign*mu*sum(g) with
    constraints g_i - t_i <= 0.
    """

    mdp: TabularMDP
    kind: str
    mu: float
    bounds: tuple[float, float] = (0.0, math.inf)
    thresholds: np.ndarray | None = None
    penalty_sign: float = 1.0
    variance_bound: float | None = None

    @property
    def n_constraints(self) -> int:
        return 2 if self.kind == "entropy" else self.mdp.r

    def policy(self, x) -> SoftmaxPolicy:
        return SoftmaxPolicy.from_vector(x, self.mdp.S, self.mdp.A)

    def combine(self, ret, ent, cost):
        ret, ent, cost = np.asarray(ret), np.asarray(ent), np.asarray(cost)
        if self.kind == "entropy":
            f = -ret - self.mu * ent
            c = np.stack([self.bounds[0] - ent, ent - self.bounds[1]], axis=-1)
        else:
            f = -ret + self.penalty_sign * self.mu * cost.sum(axis=-1)
            c = cost - self.thresholds
        return f, c

    def sample(self, point, rng, n=1):
        out = simulate(self.mdp, self.policy(point), n, rng)
        return self.combine(out.returns, out.entropy, out.costs)

    def exact(self, x) -> tuple[float, np.ndarray]:
        pol = self.policy(x)
        f, c = self.combine(exact_return(self.mdp, pol), exact_entropy(self.mdp, pol),
                            exact_costs(self.mdp, pol))
        return float(f), np.atleast_1d(c)


def _mdp_problem(name: str, oracle: MDPOracle, meta: dict) -> ConstrainedProblem:
    mdp = oracle.mdp
    return ConstrainedProblem(
        name=name, n=mdp.S * mdp.A, x0=np.zeros(mdp.S * mdp.A), oracle=oracle,
        exact_objective=lambda x: oracle.exact(x)[0],
        exact_constraints=lambda x: oracle.exact(x)[1],
        surrogate=lambda x, rng: reinforce_gradient(mdp, x, rng),
        meta={"mdp": mdp, **meta},
    )


def entropy_problem(mdp: TabularMDP, mu: float = 1e-4, h_l: float = 0.0,
                    h_u: float | None = None, name: str = "entropy") -> ConstrainedProblem:
    """Maximize E[R] + mu E[H] subject to h_l <= E[H] <= h_u, as a minimization."""
    if h_u is None:
        h_u = mdp.horizon * math.log(mdp.A)
    if h_l > h_u or mu < 0:
        raise ValueError("need h_l <= h_u and mu >= 0")
    oracle = MDPOracle(mdp, "entropy", mu, bounds=(h_l, h_u))
    return _mdp_problem(name, oracle, {"mu": mu, "bounds": (h_l, h_u),
                                       "optimal_return": optimal_return(mdp)})


def cmdp_problem(mdp: TabularMDP, mu: float = 1e-4, thresholds=None,
                 penalty_sign: float = 1.0, name: str = "cmdp") -> ConstrainedProblem:
    """Maximize E[R] subject to E[g_i] <= t_i; ``penalty_sign=+1`` makes cost
    worsen the minimized objective."""
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=float))
    if thresholds.shape != (mdp.r,):
        raise ValueError("need one threshold per cost function")
    oracle = MDPOracle(mdp, "cmdp", mu, thresholds=thresholds, penalty_sign=penalty_sign)
    return _mdp_problem(name, oracle, {"mu": mu, "thresholds": thresholds,
                                       "optimal_return": optimal_return(mdp)})


def chain_mdp(n_states: int = 5, slip: float = 0.1, horizon: int = 15,
              discount: float = 0.99) -> TabularMDP:
    """Chain with reward only at the far end.

    Action 1 moves right with probability ``1 - slip`` (else stays), action 0
    moves left. Every step spent in the last state pays 1.
    """
    S, A = n_states, 2
    P = np.zeros((S, A, S))
    for s in range(S):
        P[s, 0, max(s - 1, 0)] += 1.0
        P[s, 1, min(s + 1, S - 1)] += 1.0 - slip
        P[s, 1, s] += slip
    R = np.zeros((S, A))
    R[S - 1, :] = 1.0
    init = np.zeros(S)
    init[0] = 1.0
    return TabularMDP(P, R, np.zeros((0, S, A)), discount, horizon, init)


GRID_MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))  # up, down, left, right


def grid_mdp(size: int = 4, hazards=((1, 1), (2, 2)), slip: float = 0.1,
             horizon: int = 20, discount: float = 0.99) -> TabularMDP:
    """Gridworld from the top-left corner to an absorbing goal bottom-right.

    Moves succeed with probability ``1 - slip`` and otherwise leave the agent
    in place; walls reflect. Each step in the goal pays 1; each step taken in
    a hazard cell costs 1.
    """
    S, A = size * size, 4
    P = np.zeros((S, A, S))
    goal = S - 1
    for s in range(S):
        r, c = divmod(s, size)
        for a, (dr, dc) in enumerate(GRID_MOVES):
            if s == goal:
                P[s, a, s] = 1.0
                continue
            rr = min(max(r + dr, 0), size - 1)
            cc = min(max(c + dc, 0), size - 1)
            P[s, a, rr * size + cc] += 1.0 - slip
            P[s, a, s] += slip
    R = np.zeros((S, A))
    R[goal, :] = 1.0
    G = np.zeros((1, S, A))
    for r, c in hazards:
        G[0, r * size + c, :] = 1.0
    init = np.zeros(S)
    init[0] = 1.0
    return TabularMDP(P, R, G, discount, horizon, init)


# ---------------------------------------------------------------------------
# Registry


def _chain_entropy(mu: float = 1e-4, n_states: int = 5, horizon: int = 15):
    mdp = chain_mdp(n_states=n_states, horizon=horizon)
    return entropy_problem(mdp, mu, 0.0, mdp.horizon * math.log(mdp.A), name="chain-entropy")


def _grid_cmdp(mu: float = 1e-4, threshold: float = 2.5, penalty_sign: float = 1.0):
    return cmdp_problem(grid_mdp(), mu, [threshold], penalty_sign, name="grid-cmdp")


def _noisy_sphere(n: int = 10, noise_sd: float = 0.1):
    return noisy_sphere(n, noise_sd)


def _constrained_quadratic(n: int = 2, noise_sd: float = 0.01, ball_radius: float = 1.0,
                           constraint_noise: float = 0.0):
    return constrained_quadratic(n, noise_sd, ball_radius, constraint_noise)


REGISTRY: dict[str, Callable[..., ConstrainedProblem]] = {
    "noisy-sphere": _noisy_sphere,
    "constrained-quadratic": _constrained_quadratic,
    "chain-entropy": _chain_entropy,
    "grid-cmdp": _grid_cmdp,
}


def make_problem(source: str | dict) -> ConstrainedProblem:
    """Build a problem from a registry name such as ``noisy-sphere-10`` or a
    dict ``{"name": ..., **params}``. A trailing integer sets the dimension."""
    params = {}
    if isinstance(source, dict):
        params = dict(source)
        try:
            source = params.pop("name")
        except KeyError:
            raise ConfigError("problem.name", "missing required key") from None
    name = str(source)
    m = re.fullmatch(r"(.+?)-(\d+)", name)
    if name not in REGISTRY and m and m.group(1) in REGISTRY:
        name = m.group(1)
        params.setdefault("n", int(m.group(2)))
    if name not in REGISTRY:
        raise ConfigError("problem", f"unknown problem {source!r}")
    factory = REGISTRY[name]
    allowed = set(inspect.signature(factory).parameters)
    for key in params:
        if key not in allowed:
            raise ConfigError(f"problem.{key}", "unknown key")
    return factory(**params)
