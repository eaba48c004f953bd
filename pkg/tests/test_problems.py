import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from barrier_es.config import SUITES, suite
from barrier_es.constraints import adjusted_barrier
from barrier_es.engine import EngineConfig, init_state
from barrier_es.errors import ConfigError, SizeError
from barrier_es.problems import (MDPOracle, SoftmaxPolicy, TabularMDP, chain_mdp, cmdp_problem,
                                 constrained_quadratic, entropy_problem, exact_costs,
                                 exact_entropy, exact_return, grid_mdp, make_problem,
                                 noisy_sphere, optimal_return, reinforce_gradient, rollout,
                                 simulate)


# --- synthetic problems -------------------------------------------------------


def test_sphere_values(rng):
    p = noisy_sphere(2, 0.0)
    assert p.exact_objective(np.zeros(2)) == 0.0
    assert p.exact_objective(np.array([3.0, 4.0])) == 25.0
    f, c = p.oracle.sample(np.array([3.0, 4.0]), rng, 5)
    assert f.tolist() == [25.0] * 5 and c.shape == (5, 0)


def test_sphere_noise_is_unbiased():
    p = noisy_sphere(3, 1.0)
    x = np.array([0.5, -1.0, 2.0])
    f, _ = p.oracle.sample(x, np.random.default_rng(0), 10_000)
    assert abs(f.mean() - p.exact_objective(x)) < 0.05
    assert p.oracle.variance_bound == 1.0


def test_quadratic_constraint_geometry():
    p = constrained_quadratic(2, 0.0)
    assert p.exact_constraints(np.zeros(2))[0] < 0
    assert p.exact_constraints(np.array([0.6, 0.8]))[0] == pytest.approx(0.0, abs=1e-15)
    assert p.exact_constraints(np.array([1.0, 0.0]))[0] == 0.0


def test_quadratic_optimum_by_grid_search():
    p = constrained_quadratic(2, 0.0)
    t = np.linspace(-1, 1, 801)
    X, Y = np.meshgrid(t, t)
    inside = X ** 2 + Y ** 2 <= 1.0
    vals = np.where(inside, (X - 2.0) ** 2 + Y ** 2, np.inf)
    i = np.unravel_index(np.argmin(vals), vals.shape)
    assert (X[i], Y[i]) == (1.0, 0.0)
    assert vals[i] == pytest.approx(1.0)
    assert p.optimum_value == 1.0 and p.optimum.tolist() == [1.0, 0.0]


def test_constraint_noise_is_bounded(rng):
    p = constrained_quadratic(2, 0.0, constraint_noise=0.05)
    _, c = p.oracle.sample(np.zeros(2), rng, 1000)
    assert np.all(np.abs(c + 1.0) <= 0.05)


# --- MDP oracles ----------------------------------------------------------------


def small_mdp(T=4, discount=0.9):
    P = np.array([[[0.7, 0.3], [0.2, 0.8]],
                  [[0.5, 0.5], [0.9, 0.1]]])
    R = np.array([[1.0, 0.0], [0.5, 2.0]])
    G = np.array([[[0.0, 1.0], [1.0, 0.0]]])
    return TabularMDP(P, R, G, discount, T, np.array([0.6, 0.4]))


def enumerate_expectations(mdp, pi):
    """Sum over every state/action path of length T: (return, entropy, cost)."""
    T, S, A = mdp.horizon, mdp.S, mdp.A
    h = -(pi * np.log(pi)).sum(axis=1)
    ret = ent = cost = 0.0
    for states in itertools.product(range(S), repeat=T):
        for actions in itertools.product(range(A), repeat=T):
            prob = mdp.init[states[0]]
            r = e = g = 0.0
            for t in range(T):
                s, a = states[t], actions[t]
                prob *= pi[s, a]
                if t + 1 < T:
                    prob *= mdp.P[s, a, states[t + 1]]
                r += mdp.discount ** t * mdp.R[s, a]
                g += mdp.discount ** t * mdp.costs[0, s, a]
                e += h[s]
            ret += prob * r
            ent += prob * e
            cost += prob * g
    return ret, ent, cost


def test_exact_oracles_match_enumeration():
    mdp = small_mdp()
    pol = SoftmaxPolicy(np.array([[0.3, -0.4], [1.2, 0.1]]))
    ret, ent, cost = enumerate_expectations(mdp, pol.probs)
    assert abs(exact_return(mdp, pol) - ret) <= 1e-12
    assert abs(exact_entropy(mdp, pol) - ent) <= 1e-12
    assert abs(exact_costs(mdp, pol)[0] - cost) <= 1e-12


def test_geometric_return():
    mdp = TabularMDP(np.ones((1, 1, 1)), np.ones((1, 1)), np.zeros((0, 1, 1)), 0.99, 10,
                     np.ones(1))
    expected = (1 - 0.99 ** 10) / (1 - 0.99)
    assert expected == pytest.approx(9.5618, abs=1e-4)
    assert exact_return(mdp, SoftmaxPolicy(np.zeros((1, 1)))) == pytest.approx(expected, abs=1e-12)


def test_zero_reward_mdp():
    mdp = small_mdp()
    mdp.R = np.zeros_like(mdp.R)
    for logits in ([[0, 0], [0, 0]], [[5, -5], [-2, 3]]):
        assert exact_return(mdp, SoftmaxPolicy(np.array(logits, float))) == 0.0


def test_uniform_policy_entropy(rng):
    mdp = chain_mdp(horizon=10)
    ret, ent, costs = rollout(mdp, SoftmaxPolicy(np.zeros((mdp.S, mdp.A))), rng)
    assert ent == pytest.approx(10 * math.log(2), abs=1e-12)
    assert costs.shape == (0,)


def test_single_action_has_no_entropy(rng):
    P = np.zeros((3, 1, 3))
    P[[0, 1, 2], 0, [1, 2, 2]] = 1.0
    mdp = TabularMDP(P, np.ones((3, 1)), np.zeros((0, 3, 1)), 0.99, 6, np.array([1.0, 0, 0]))
    out = simulate(mdp, SoftmaxPolicy(np.zeros((3, 1))), 50, rng)
    assert np.all(out.entropy == 0.0)


def mc_agrees(mdp, pol, n=100_000, k=4.0, seed=0):
    out = simulate(mdp, pol, n, np.random.default_rng(seed))
    checks = [(out.returns, exact_return(mdp, pol)), (out.entropy, exact_entropy(mdp, pol))]
    checks += [(out.costs[:, i], exact_costs(mdp, pol)[i]) for i in range(mdp.r)]
    for draws, exact in checks:
        se = draws.std(ddof=1) / math.sqrt(n)
        assert abs(draws.mean() - exact) <= k * se + 1e-12, (draws.mean(), exact, se)


def test_two_state_rollouts_match_exact():
    mdp = small_mdp(T=10, discount=0.99)
    mc_agrees(mdp, SoftmaxPolicy(np.array([[0.5, -0.5], [-1.0, 1.0]])), k=3.0)


@pytest.mark.parametrize("make", [chain_mdp, grid_mdp])
def test_benchmark_rollouts_match_exact(make):
    mdp = make()
    logits = np.random.default_rng(1).standard_normal((mdp.S, mdp.A))
    mc_agrees(mdp, SoftmaxPolicy(logits))


@settings(max_examples=30)
@given(hnp.arrays(float, (5, 2), elements=st.floats(-20, 20)))
def test_trajectory_entropy_bounds(logits):
    mdp = chain_mdp(horizon=8)
    out = simulate(mdp, SoftmaxPolicy(logits), 64, np.random.default_rng(0))
    assert np.all(out.entropy >= 0.0)
    assert np.all(out.entropy <= 8 * math.log(2) + 1e-12)


def test_optimal_return_dominates():
    mdp = grid_mdp()
    best = optimal_return(mdp)
    gen = np.random.default_rng(2)
    for _ in range(20):
        pol = SoftmaxPolicy(3 * gen.standard_normal((mdp.S, mdp.A)))
        assert exact_return(mdp, pol) <= best + 1e-12


def test_size_limit():
    S, T = 60, 30_000
    P = np.zeros((S, 2, S))
    P[:, :, 0] = 1.0
    mdp = TabularMDP(P, np.zeros((S, 2)), np.zeros((0, S, 2)), 1.0, T, np.eye(S)[0])
    with pytest.raises(SizeError):
        exact_return(mdp, SoftmaxPolicy(np.zeros((S, 2))))


def test_invalid_mdp():
    with pytest.raises(ValueError):
        TabularMDP(np.full((2, 1, 2), 0.6), np.zeros((2, 1)), np.zeros((0, 2, 1)), 0.9, 3,
                   np.array([1.0, 0.0]))


def test_reinforce_points_uphill_on_chain():
    # moving right is the only way to collect reward, so the gradient of -E[R]
    # must favour action 1 in the start state
    mdp = chain_mdp()
    g = reinforce_gradient(mdp, np.zeros(10), np.random.default_rng(0), n_rollouts=2000)
    assert g[1] < 0 < g[0]


# --- problem constructors -------------------------------------------------------------


def test_entropy_problem_objective():
    mdp = chain_mdp()
    x = np.random.default_rng(0).standard_normal(10)
    pol = SoftmaxPolicy.from_vector(x, 5, 2)
    p0 = entropy_problem(mdp, mu=0.0)
    assert p0.exact_objective(x) == pytest.approx(-exact_return(mdp, pol), abs=1e-12)
    p = entropy_problem(mdp)
    assert p.meta["mu"] == 0.0001
    assert p.exact_objective(x) == pytest.approx(
        -exact_return(mdp, pol) - 1e-4 * exact_entropy(mdp, pol), abs=1e-12)
    wide = entropy_problem(mdp, h_l=0.0, h_u=1000.0)
    assert wide.meta["bounds"] == (0.0, 1000.0)
    h = exact_entropy(mdp, pol)
    np.testing.assert_allclose(wide.exact_constraints(x), [-h, h - 1000.0])


def test_cmdp_problem_constraints():
    mdp = grid_mdp()
    x = np.zeros(mdp.S * mdp.A)
    g = exact_costs(mdp, SoftmaxPolicy.from_vector(x, mdp.S, mdp.A))[0]
    for t in (30.0, 10.0):
        p = cmdp_problem(mdp, thresholds=[t])
        assert p.exact_constraints(x)[0] == pytest.approx(g - t)
        assert adjusted_barrier(0.0, p.exact_constraints(x), 1.0, 0.1).is_feasible


def test_cmdp_penalty_sign():
    mdp = grid_mdp()
    x = np.zeros(mdp.S * mdp.A)
    plus = cmdp_problem(mdp, mu=0.5, thresholds=[30.0], penalty_sign=1.0).exact_objective(x)
    minus = cmdp_problem(mdp, mu=0.5, thresholds=[30.0], penalty_sign=-1.0).exact_objective(x)
    g = exact_costs(mdp, SoftmaxPolicy.from_vector(x, mdp.S, mdp.A))[0]
    assert plus - minus == pytest.approx(2 * 0.5 * g)


def test_zero_costs_leave_every_point_feasible():
    mdp = grid_mdp(hazards=())
    p = cmdp_problem(mdp, thresholds=[0.0])
    gen = np.random.default_rng(0)
    for _ in range(5):
        assert np.all(p.exact_constraints(gen.standard_normal(mdp.S * mdp.A)) <= 0.0)


def test_mdp_oracle_sample_shapes(rng):
    oracle = MDPOracle(chain_mdp(), "entropy", 1e-4, bounds=(0.0, 10.0))
    f, c = oracle.sample(np.zeros(10), rng, 7)
    assert f.shape == (7,) and c.shape == (7, 2)


# --- registry ---------------------------------------------------------------------------


def test_registry_names():
    assert make_problem("noisy-sphere-10").n == 10
    assert make_problem("noisy-sphere-3").n == 3
    assert make_problem({"name": "constrained-quadratic", "ball_radius": 2.0}).optimum_value == 4.0
    assert make_problem("chain-entropy").n == 10
    assert make_problem("grid-cmdp").n == 64
    with pytest.raises(ConfigError) as err:
        make_problem({"name": "noisy-sphere", "bogus": 1})
    assert err.value.key_path == "problem.bogus"
    with pytest.raises(ConfigError):
        make_problem("nope")


@pytest.mark.parametrize("name", SUITES)
def test_every_benchmark_starts_feasible(name):
    cfg = suite(name)
    state = init_state(cfg.engine, make_problem(cfg.problem), 0, cfg.schedule)
    assert math.isfinite(state.f)
    problem = make_problem(cfg.problem)
    assert adjusted_barrier(0.0, problem.exact_constraints(problem.x0), 1.0,
                            EngineConfig().sigma0).is_feasible
