import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riskfilt import example4 as ex
from riskfilt.errors import NonFinite
from riskfilt.filters import leg_gains, rs_gains
from riskfilt.model import ModelSpec, SymMat2, TimeGrid, validate_model
from riskfilt.montecarlo import (BLOCK, RunningStats, mc_compare, path_cost, path_key,
                                 path_normals, simulate_block, simulate_paths)


def test_zero_mode(ex4_1000):
    for b in simulate_paths(ex4_1000, 3, 5, zero=True):
        assert np.all(b.X == 0) and np.all(b.Y == 0)


def test_paths_start_at_origin(ex4_1000):
    for b in simulate_paths(ex4_1000, 4, 5):
        assert b.X[0] == 0 and b.Y[0] == 0
        np.testing.assert_allclose(np.diff(b.X), b.dB, atol=1e-15)  # a = 0


def test_euler_observation_recursion(ex4_1000):
    b = next(simulate_paths(ex4_1000, 1, 3))
    dt = ex4_1000.grid.dt
    np.testing.assert_allclose(np.diff(b.Y), b.X[:-1] * dt + b.dBt, atol=1e-15)


def test_n_must_be_positive(ex4_1000):
    with pytest.raises(ValueError):
        next(simulate_paths(ex4_1000, 0, 1))


def test_path_streams_independent_of_batch(ex4_1000):
    whole = simulate_block(ex4_1000, 42, 0, 5)[2]
    piece = simulate_block(ex4_1000, 42, 3, 2)[2]
    np.testing.assert_array_equal(whole[3:], piece)
    assert path_key(42, 3) != path_key(43, 3) != path_key(42, 4)


def test_normals_moments():
    z = np.concatenate([path_normals(9, k, 5000) for k in range(20)])
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * math.sqrt(2 / z.size)
    assert np.all(np.isfinite(z))


def test_brownian_variance_at_one():
    m = ex.example_model(1.0, 100)
    n = 100_000
    X = simulate_block(m, 20240917, 0, n)[2]
    assert abs(X[:, -1].var(ddof=1) - 1.0) <= 3 * math.sqrt(2 / n)


def test_path_cost_trivial(ex4_1000, singular_1000, rng):
    z = np.zeros(1001)
    assert path_cost(ex4_1000, z, z).value == -1.0
    X = np.cumsum(rng.standard_normal(1001)) * 0.03
    c = path_cost(singular_1000, X, X)
    assert c.value == -1.0 and c.logmag == 0.0


def test_path_cost_zero_weights(rng):
    grid = TimeGrid(1.0, 100)
    z = np.zeros(101)
    from riskfilt.model import ValidatedModel
    m = ValidatedModel(grid, z, z + 1, z, z, z, -2.0, z)
    X, h = rng.standard_normal((2, 101))
    assert path_cost(m, X, h).value == -2.0


@settings(max_examples=30)
@given(st.floats(-3, 3).filter(lambda v: v != 0), st.integers(0, 2 ** 32 - 1))
def test_cost_sign_and_log(mu, seed):
    m = ex.example_model(1.0, 100, mu=mu)
    r = np.random.default_rng(seed)
    X, h = r.standard_normal((2, 101))
    c = path_cost(m, X, h)
    assert np.sign(c.value) == np.sign(mu)
    assert math.isclose(c.value, mu * math.exp(c.logmag), rel_tol=1e-15)


def test_path_cost_overflow_detected():
    m = ex.example_model(1.0, 100, mu=1.0)
    with pytest.raises(NonFinite):
        path_cost(m, np.full(101, 1e200), np.zeros(101))


def test_determinism_across_threads(ex4_1000):
    strategies = [("LEG", leg_gains(ex4_1000)), ("RS", rs_gains(ex4_1000)),
                  ("risk-neutral", "risk-neutral")]
    n = 2 * BLOCK + 17
    r1 = mc_compare(ex4_1000, strategies, n, 5, threads=1, keep_paths=True)
    r8 = mc_compare(ex4_1000, strategies, n, 5, threads=8, keep_paths=True)
    assert r1.estimates == r8.estimates and r1.paired == r8.paired
    for k in r1.per_path:
        assert np.array_equal(r1.per_path[k], r8.per_path[k])


def test_singular_leg_rs_costs_agree(singular_1000):
    m = singular_1000
    r = mc_compare(m, [("LEG", leg_gains(m)), ("RS", rs_gains(m))], 500, 3, keep_paths=True)
    np.testing.assert_allclose(r.per_path["LEG"], r.per_path["RS"], rtol=0, atol=1e-9)


def test_uncorrelated_criterion_all_equal():
    m = ex.example_model(1.0, 500, SymMat2(2.0, 0.0, 1.0))
    r = mc_compare(m, [("LEG", leg_gains(m)), ("RS", rs_gains(m)),
                       ("risk-neutral", "risk-neutral")], 300, 3, keep_paths=True)
    assert np.array_equal(r.per_path["LEG"], r.per_path["RS"])
    assert np.array_equal(r.per_path["LEG"], r.per_path["risk-neutral"])


def test_stderr_definition(ex4_1000):
    r = mc_compare(ex4_1000, [("LEG", leg_gains(ex4_1000))], 1500, 8, keep_paths=True)
    x = r.per_path["LEG"]
    e = r.estimates["LEG"]
    assert math.isclose(e.mean, x.mean(), rel_tol=1e-12)
    assert math.isclose(e.stderr, x.std(ddof=1) / math.sqrt(x.size), rel_tol=1e-10)


def test_rejects_foreign_grid(ex4_1000):
    other = leg_gains(ex.example_model(1.0, 500))
    with pytest.raises(ValueError):
        mc_compare(ex4_1000, [("LEG", other)], 10, 1)


@settings(max_examples=30)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=200), st.integers(1, 199))
def test_running_stats_merge(xs, cut):
    cut = min(cut, len(xs) - 1)
    x = np.array(xs)
    a, b = RunningStats(), RunningStats()
    a.add_block(x[:cut])
    b.add_block(x[cut:])
    a.merge(b)
    est = a.estimate()
    assert math.isclose(est.mean, x.mean(), rel_tol=1e-9, abs_tol=1e-9)
    assert math.isclose(est.stderr, x.std(ddof=1) / math.sqrt(x.size), rel_tol=1e-7, abs_tol=1e-9)


@pytest.mark.slow
def test_strong_order_sanity():
    m = ex.example_model(1.0, 2000)
    n = 100_000
    X = np.concatenate([simulate_block(m, 77, s, BLOCK)[2][:, -1] for s in range(0, n, BLOCK)])
    sq = X * X
    assert abs(sq.mean() - 1.0) <= 3 * sq.std(ddof=1) / math.sqrt(n)
