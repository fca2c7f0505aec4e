import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracjko.caputo import (History, caputo_left, caputo_right, history_combination, l1_weights,
                            right_surrogate, summation_by_parts, weight_sum_identity)
from fracjko.spectral import Density, Grid

alphas = st.floats(min_value=0.01, max_value=0.99)


def test_first_step_weights():
    for a in (0.1, 0.5, 0.9):
        w = l1_weights(1, a)
        np.testing.assert_array_equal(w.b, [1.0, -1.0])
        assert w.c_alpha == pytest.approx(1.0 / math.gamma(2.0 - a), rel=1e-15)


def test_second_step_weights_closed_form():
    # (1, sqrt2 - 2, 1 - sqrt2), evaluated by hand
    b = l1_weights(2, 0.5).b
    np.testing.assert_allclose(b, [1.0, -0.5857864376269049, -0.41421356237309515], atol=1e-15)
    assert -b[2] - b[1] == pytest.approx(1.0, abs=1e-15)


def test_c_alpha_half():
    assert l1_weights(3, 0.5).c_alpha == pytest.approx(2.0 / math.sqrt(math.pi), rel=1e-14)


@pytest.mark.parametrize("k, alpha", [(0, 0.5), (1, 0.0), (1, 1.0), (2, -0.1), (1.5, 0.5)])
def test_rejects_bad_input(k, alpha):
    with pytest.raises(ValueError):
        l1_weights(k, alpha)


@settings(max_examples=60, deadline=None)
@given(k=st.integers(1, 200), alpha=alphas)
def test_weight_invariants(k, alpha):
    w = l1_weights(k, alpha)
    assert w.b[0] == 1.0
    assert np.all(w.b[1:] <= 0.0)
    assert math.fsum(w.history_weights()) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(k=st.integers(1, 100), alpha=alphas)
def test_weight_sum_identity_property(k, alpha):
    ws = [l1_weights(i, alpha) for i in range(1, k + 1)]
    assert weight_sum_identity(ws) == pytest.approx(k ** (1.0 - alpha), abs=1e-12)


def test_weight_sum_identity_examples():
    assert weight_sum_identity([l1_weights(1, 0.7)]) == pytest.approx(1.0, abs=1e-15)
    ws = [l1_weights(i, 0.5) for i in (1, 2, 3)]
    assert weight_sum_identity(ws) == pytest.approx(1.7320508075688772, abs=1e-12)
    ws = [l1_weights(i, 0.3) for i in range(1, 11)]
    assert weight_sum_identity(ws) == pytest.approx(5.011872336272722, abs=1e-12)


def test_weight_sum_identity_rejects_mixed_alpha():
    with pytest.raises(ValueError):
        weight_sum_identity([l1_weights(1, 0.3), l1_weights(2, 0.4)])


def _bumps(grid, centers):
    x, = grid.coords()
    return [Density.normalized(grid, np.exp(-(x - c) ** 2)) for c in centers]


def test_history_combination_cases():
    g = Grid(1, 32, 10.0)
    u = _bumps(g, [3.0, 5.0, 7.0])
    one = history_combination(History(u[:1], 0.1), l1_weights(1, 0.5))
    np.testing.assert_allclose(one.values, u[0].values, rtol=1e-14)
    same = history_combination(History([u[1], u[1]], 0.1), l1_weights(2, 0.5))
    np.testing.assert_allclose(same.values, u[1].values, rtol=1e-13)
    mix = history_combination(History(u, 0.1), l1_weights(3, 0.5))
    lo = np.minimum.reduce([v.values for v in u])
    hi = np.maximum.reduce([v.values for v in u])
    assert np.all(mix.values >= lo - 1e-15) and np.all(mix.values <= hi + 1e-15)
    assert mix.mass == pytest.approx(1.0, abs=1e-14)


def test_history_combination_length_mismatch():
    g = Grid(1, 16, 1.0)
    with pytest.raises(ValueError):
        history_combination(History(_bumps(g, [0.5]), 0.1), l1_weights(2, 0.5))


def test_caputo_left_constant_and_linear():
    N = 32
    t = np.linspace(0.0, 1.0, N + 1)
    np.testing.assert_allclose(caputo_left(np.ones(N + 1), 0.5, 1 / N), 0.0, atol=1e-13)
    # the L1 rule is exact for affine data: t^{1/2} 2/sqrt(pi)
    v = caputo_left(t, 0.5, 1 / N)
    assert v[-1] == pytest.approx(1.1283791670955126, rel=1e-12)


def test_caputo_left_quadratic_order():
    errs = []
    for N in (16, 32, 64):
        t = np.linspace(0.0, 1.0, N + 1)
        errs.append(abs(caputo_left(t**2, 0.5, 1 / N)[-1] - 1.5045055561273088))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.3)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("m", [1, 2])
def test_caputo_left_converges(alpha, m):
    exact = math.gamma(m + 1) / math.gamma(m + 1 - alpha)
    errs = []
    for N in (16, 32, 64):
        t = np.linspace(0.0, 1.0, N + 1)
        errs.append(abs(caputo_left(t**m, alpha, 1 / N)[-1] - exact))
    if m == 1:
        assert max(errs) < 1e-12
    else:
        assert math.log2(errs[1] / errs[2]) >= 1.0


def test_caputo_left_needs_two_samples():
    with pytest.raises(ValueError):
        caputo_left([1.0], 0.5, 0.1)


def test_caputo_right_constant():
    q, s = caputo_right(np.ones(17), 0.5, 1 / 16, 1.0)
    np.testing.assert_allclose(q, 0.0, atol=1e-14)
    np.testing.assert_allclose(s, 0.0, atol=1e-14)


def test_caputo_right_linear():
    N, T = 32, 1.0
    t = np.linspace(0.0, T, N + 1)
    q, s = caputo_right(T - t, 0.5, T / N, T)
    exact = (T - t) ** 0.5 / math.gamma(1.5)
    np.testing.assert_allclose(q, exact, atol=1e-12)
    np.testing.assert_allclose(s, exact, atol=1e-12)


def test_caputo_right_quadratic_rate():
    # surrogate error for (T-t)^2 at alpha=0.5 decays like tau^{1.5}
    errs = []
    for N in (64, 128):
        t = np.linspace(0.0, 1.0, N + 1)
        exact = 2.0 * (1 - t) ** 1.5 / math.gamma(2.5)
        q, s = caputo_right((1 - t) ** 2, 0.5, 1 / N, 1.0)
        np.testing.assert_allclose(q, exact, atol=1e-12)
        errs.append(np.abs(s - exact).max())
    assert 1.3 <= math.log2(errs[0] / errs[1]) <= 1.7


def test_right_surrogate_endpoint_is_zero():
    assert right_surrogate(np.arange(5.0), 0.4, 0.25)[-1] == 0.0


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 32), alpha=alphas, seed=st.integers(0, 2**31))
def test_summation_by_parts(N, alpha, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(N + 1)
    # cell integrals of psi by the midpoint rule, applied to both sides
    tau = 1.0 / N
    mid = (np.arange(1, N + 1) - 0.5) * tau
    Psi = tau * np.cos(3 * mid) * (1 - mid)
    lhs, rhs = summation_by_parts(u, Psi, alpha)
    assert lhs == pytest.approx(rhs, abs=1e-10)
