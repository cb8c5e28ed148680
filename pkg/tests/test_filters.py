import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import brownian_increments
from riskfilt import example4 as ex
from riskfilt.filters import (apply_filter, convolve_kernel, extract_kernel, kalman_filter,
                              leg_gains, risk_neutral_gains, risk_neutral_h, rs_feedback,
                              rs_gains)
from riskfilt.model import ModelSpec, SymMat2, TimeGrid, validate_model
from riskfilt.riccati import solve_forward_gamma


def conditioning_oracle(m, dY):
    """E[X_{t_i} | dY_0..dY_{i-1}] by Gaussian conditioning (a = 0, A = 1).

    With X Brownian and dY_j = X_{t_j} dt + noise_j, every quantity is jointly
    Gaussian with explicit covariances.
    """
    t, dt, N = m.t, m.grid.dt, m.grid.N
    tj = t[:-1]
    cov_yy = np.minimum.outer(tj, tj) * dt * dt + dt * np.eye(N)
    out = np.zeros(N + 1)
    for i in range(1, N + 1):
        S = cov_yy[:i, :i]
        c = np.minimum(t[i], tj[:i]) * dt
        out[i] = c @ np.linalg.solve(S, dY[:i])
    return out


def test_kalman_against_conditioning(rng):
    errs = []
    for N in (100, 400):
        m = ex.example_model(1.0, N, mu=0.0)
        fine = brownian_increments(np.random.default_rng(5), TimeGrid(1.0, 400))
        dY = fine.reshape(N, -1).sum(axis=1)
        pi = kalman_filter(m, dY).piX
        errs.append(np.max(np.abs(pi - conditioning_oracle(m, dY))))
    assert errs[1] < errs[0] and errs[1] < 0.02, errs


def test_kalman_uninformative(rng):
    m = validate_model(ModelSpec(0.0, 0.0, ex.LAMBDA, -1.0, 1.0), TimeGrid(1.0, 100))
    dY = brownian_increments(rng, m.grid)
    out = kalman_filter(m, dY)
    np.testing.assert_array_equal(out.piX, 0.0)
    np.testing.assert_array_equal(out.nu, dY)


def test_kalman_zero_record(ex4_1000):
    out = kalman_filter(ex4_1000, np.zeros(1000))
    np.testing.assert_array_equal(out.piX, 0.0)


def test_innovation_reproducible(ex4_1000, rng):
    m = ex4_1000
    dY = brownian_increments(rng, m.grid)
    out = kalman_filter(m, dY)
    np.testing.assert_array_equal(out.nu, dY - m.A[:-1] * out.piX[:-1] * m.grid.dt)


def test_kalman_variance_tanh():
    m = ex.example_model(1.0, 2000, mu=0.0)
    g0 = risk_neutral_gains(m).obsgain
    assert abs(g0[-1] - 0.761594) < 1e-6


def test_risk_neutral_h(ex4_1000, rng):
    m = ex4_1000
    kal = kalman_filter(m, brownian_increments(rng, m.grid))
    np.testing.assert_array_equal(risk_neutral_h(m, kal), kal.piX)
    m0 = ex.example_model(1.0, 1000, SymMat2(2, 0, 1))
    assert np.all(risk_neutral_h(m0, kal) == 0)


def test_leg_gain_values(ex4_2000):
    lg = leg_gains(ex4_2000)
    assert lg.c[0] == 1.0
    assert abs(lg.c[1000] - 0.842752) < 1e-6
    assert lg.c[-1] == 1.0  # -L12/L22 since Gamma(T,T) = 0
    np.testing.assert_allclose(lg.obsgain, ex.gammaXX(ex4_2000.t), atol=1e-10)


def test_leg_drift_matches_printed_example(ex4_1000):
    m = ex4_1000
    g = ex.gammaXX(m.t)
    G = ex.Gamma(1.0, m.t)
    np.testing.assert_allclose(leg_gains(m).zdrift, -2 * g - g * g * G, atol=1e-10)


def test_rs_gain_values(ex4_1000):
    m = ex4_1000
    rs = rs_gains(m)
    assert rs.c[0] == 1.0
    np.testing.assert_allclose(rs_feedback(m, np.full(m.t.size, 0.5)), 2 / 3)


def test_singular_gains(singular_1000):
    m = singular_1000
    np.testing.assert_allclose(leg_gains(m).c, 1.0, atol=1e-10)
    np.testing.assert_array_equal(rs_gains(m).c, 1.0)


def test_apply_zero_input(ex4_1000):
    h, Z = apply_filter(leg_gains(ex4_1000), np.zeros(1000))
    assert np.all(h == 0) and np.all(Z == 0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 32 - 1))
def test_apply_linearity(alpha, beta, seed):
    m = ex.example_model(1.0, 200)
    gains = leg_gains(m)
    r = np.random.default_rng(seed)
    d1, d2 = brownian_increments(r, m.grid), brownian_increments(r, m.grid)
    lhs = apply_filter(gains, alpha * d1 + beta * d2)[0]
    rhs = alpha * apply_filter(gains, d1)[0] + beta * apply_filter(gains, d2)[0]
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12)


@pytest.mark.parametrize("kind", ["leg", "rs"])
def test_impulse_matches_kernel(ex4_2000, kind):
    m = ex4_2000
    gains = leg_gains(m) if kind == "leg" else rs_gains(m)
    H = extract_kernel(gains).values
    for j in (0, 1, 700, 1999):
        dY = np.zeros(2000)
        dY[j] = 1.0
        h = apply_filter(gains, dY)[0]
        np.testing.assert_allclose(h[j + 1:], H[j + 1:, j], rtol=0, atol=1e-8)
        assert np.all(h[: j + 1] == 0)


def test_kernel_diagonal_and_spot_values(ex4_2000):
    m = ex4_2000
    lg = leg_gains(m)
    K = extract_kernel(lg)
    np.testing.assert_allclose(np.diag(K.values), lg.c * m.A * solve_forward_gamma(m).gammaXX)
    assert abs(K.at(1.0, 1.0) - 0.542303) < 1e-6
    assert abs(K.at(1.0, 0.5) - 0.241843) < 1e-4
    np.testing.assert_array_equal(K.values[:, 0], 0.0)


def test_kernel_against_printed_hbar(ex4_2000):
    t = ex4_2000.t
    H = extract_kernel(leg_gains(ex4_2000)).values
    Ti, Sj = np.meshgrid(t, t, indexing="ij")
    tri = Sj <= Ti
    assert np.max(np.abs(H - ex.Hbar(1.0, Ti, Sj))[tri]) <= 1e-4


def test_kernel_convolution(ex4_1000, rng):
    for gains in (leg_gains(ex4_1000), rs_gains(ex4_1000)):
        dY = brownian_increments(rng, ex4_1000.grid, 20)
        h = apply_filter(gains, dY)[0]
        np.testing.assert_allclose(convolve_kernel(extract_kernel(gains), dY), h, atol=1e-8)


def test_rs_kernel_horizon_free():
    m1 = ex.example_model(1.0, 1000)
    m2 = ex.example_model(2.0, 2000)
    H1 = extract_kernel(rs_gains(m1)).values
    H2 = extract_kernel(rs_gains(m2)).values[:1001, :1001]
    tri = np.tril(np.ones_like(H1, dtype=bool))
    assert np.array_equal(H1[tri], H2[tri])


def test_leg_kernel_depends_on_horizon():
    m2 = ex.example_model(2.0, 2000)
    g = solve_forward_gamma(m2).gammaXX
    H1 = extract_kernel(leg_gains(m2, 1.0, g))
    H2 = extract_kernel(leg_gains(m2, 2.0, g))
    assert abs(H1.at(0.5, 0.25) - H2.at(0.5, 0.25)) > 0.01


def test_leg_shared_forward_solve():
    m2 = ex.example_model(2.0, 2000)
    g = solve_forward_gamma(m2).gammaXX
    direct = leg_gains(ex.example_model(1.0, 1000))
    shared = leg_gains(m2, 1.0, g)
    np.testing.assert_array_equal(direct.c, shared.c)


def test_singular_leg_equals_rs(singular_1000, rng):
    m = singular_1000
    lg, rs = leg_gains(m), rs_gains(m)
    np.testing.assert_allclose(extract_kernel(lg).values, extract_kernel(rs).values, atol=1e-9)
    dY = brownian_increments(rng, m.grid, 10)
    hl, Zl = apply_filter(lg, dY)
    hr, Zr = apply_filter(rs, dY)
    np.testing.assert_allclose(hl, hr, atol=1e-9)
    np.testing.assert_array_equal(hr, Zr)


def test_mu_zero_reduces_to_risk_neutral(rng):
    m = ex.example_model(1.0, 1000, mu=0.0)
    dY = brownian_increments(rng, m.grid, 10)
    ref = risk_neutral_h(m, kalman_filter(m, dY))
    for gains in (leg_gains(m), rs_gains(m)):
        np.testing.assert_allclose(apply_filter(gains, dY)[0], ref, atol=1e-9)
