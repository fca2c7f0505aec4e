import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracjko.caputo import gamma_fn
from fracjko.mobility import Constant, ExponentOne, PorousBeta
from fracjko.spectral import Density, Grid, sobolev_norm_sq, to_spectral
from fracjko.transport import (FREE, TransportPath, action_value, continuity_residual, jko_objective,
                               jko_step, project_continuity, prox_action, solve_distance)

TWO_PI = 2.0 * math.pi


def _bump(g, c, w=1.0, floor=0.05):
    x, = g.coords()
    return Density.normalized(g, floor + np.exp(-((x - c) / w) ** 2))


def test_action_examples():
    g = Grid(1, 32, TWO_PI)
    M = 4
    rho = np.full((M + 1, 32), 1 / TWO_PI)
    assert action_value(TransportPath(g, M, rho, np.zeros((M, 1, 32))), Constant(1.0)) == 0.0
    nu = np.full((M, 1, 32), 0.3)
    a = action_value(TransportPath(g, M, rho, nu), Constant(1.0))
    assert a == pytest.approx(TWO_PI * 0.09, rel=1e-13)
    a2 = action_value(TransportPath(g, M, rho, 2 * nu), PorousBeta(0.5, 0.1))
    assert a2 == pytest.approx(4 * action_value(TransportPath(g, M, rho, nu), PorousBeta(0.5, 0.1)),
                               rel=1e-13)


def _random_path(g, M, seed):
    rng = np.random.default_rng(seed)
    return TransportPath(g, M, rng.uniform(0, 1, (M + 1,) + g.shape),
                         rng.standard_normal((M, g.d) + g.shape))


@pytest.mark.parametrize("d, end_free", [(1, True), (1, False), (2, True), (2, False)])
def test_projection_feasible_and_idempotent(d, end_free):
    g = Grid(d, 16, 5.0)
    start = Density(g, g.uniform())
    end = FREE if end_free else _bump(g, 2.0) if d == 1 else Density(g, g.uniform())
    p1 = project_continuity(_random_path(g, 6, d), start, end)
    assert continuity_residual(p1) < 1e-10
    np.testing.assert_allclose(p1.rho[0], start.values, atol=1e-12)
    if not end_free:
        np.testing.assert_allclose(p1.rho[-1], end.values, atol=1e-12)
    np.testing.assert_allclose(p1.masses(), 1.0, atol=1e-12)
    p2 = project_continuity(p1, start, end)
    np.testing.assert_allclose(p2.rho, p1.rho, atol=1e-12)
    np.testing.assert_allclose(p2.nu, p1.nu, atol=1e-12)


def test_projection_uniform_static():
    g = Grid(1, 32, 10.0)
    uni = Density(g, g.uniform())
    p = TransportPath(g, 8, np.zeros((9, 32)), np.zeros((8, 1, 32)))
    out = project_continuity(p, uni, uni)
    np.testing.assert_allclose(out.rho, np.tile(g.uniform(), (9, 1)), atol=1e-14)
    np.testing.assert_allclose(out.nu, 0.0, atol=1e-14)


def test_projection_is_orthogonal():
    # <x - P x, P y - P x> = 0 for the affine projection
    g = Grid(1, 16, 4.0)
    start, end = _bump(g, 1.0), _bump(g, 3.0)
    x, y = _random_path(g, 5, 10), _random_path(g, 5, 11)
    px, py = project_continuity(x, start, end), project_continuity(y, start, end)
    ip = np.sum((x.rho - px.rho) * (py.rho - px.rho)) + np.sum((x.nu - px.nu) * (py.nu - px.nu))
    assert abs(ip) < 1e-9


def test_prox_zero_momentum():
    r, s = prox_action(np.array([-0.5, 0.0, 2.0]), 0.0, 0.7, PorousBeta(0.5, 0.1))
    np.testing.assert_allclose(r, [0.0, 0.0, 2.0], atol=1e-14)
    np.testing.assert_array_equal(s, 0.0)


def test_prox_constant_closed_form():
    r, s = prox_action(np.array([-1.0, 0.4]), np.array([2.0, -1.0]), 0.5, Constant(2.0))
    np.testing.assert_allclose(r, [0.0, 0.4])
    np.testing.assert_allclose(s, np.array([2.0, -1.0]) / 1.5)


def test_prox_brute_force_oracle():
    # grid search over (r, s) at resolution 1e-4 minimizes the prox objective at (1.1038, 0.3556)
    r, s = prox_action(1.0, 1.0, 1.0, PorousBeta(1.0, 1e-9))
    assert float(r) == pytest.approx(1.1038, abs=2e-4)
    assert float(s) == pytest.approx(0.3556, abs=2e-4)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(-3, 3), s=st.floats(-3, 3), sigma=st.floats(0.01, 10),
       beta=st.floats(0.1, 1.0), delta=st.floats(1e-3, 1.0))
def test_prox_first_order_optimality(r, s, sigma, beta, delta):
    spec = PorousBeta(beta, delta)
    ro, so = prox_action(r, s, sigma, spec)
    ro, so = float(ro), float(so)
    assert ro >= 0
    assert so == pytest.approx(s / (1 + 2 * sigma / float(spec(ro))), rel=1e-12, abs=1e-15)
    # the minimum beats nearby feasible points
    f = lambda a, b: 0.5 * (a - r) ** 2 + 0.5 * (b - s) ** 2 + sigma * b**2 / float(spec(max(a, 0)))
    best = f(ro, so)
    for da, db in [(1e-4, 0), (-1e-4, 0), (0, 1e-4), (0, -1e-4)]:
        if ro + da >= 0:
            assert best <= f(ro + da, so + db) + 1e-12


def test_distance_identical_is_zero():
    g = Grid(1, 32, 10.0)
    u = _bump(g, 4.0)
    w2, path, info = solve_distance(u, u, PorousBeta(1.0, 0.5), g, M=8)
    assert w2 == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(path.nu, 0.0, atol=1e-12)
    assert info.converged


def test_distance_constant_mobility_oracle():
    g = Grid(1, 64, 10.0)
    a, b = _bump(g, 3.0), _bump(g, 6.0, 1.5)
    w2, _, info = solve_distance(a, b, Constant(2.0), g, M=16)
    exact = sobolev_norm_sq(a.values - b.values, g, -1.0) / 2.0
    assert abs(w2 - exact) / exact < 1e-3


def test_distance_rejects_unequal_mass():
    g = Grid(1, 16, 1.0)
    with pytest.raises(ValueError):
        solve_distance(np.ones(16), 2 * np.ones(16), Constant(1.0), g)


def test_distance_symmetric_and_triangle():
    g = Grid(1, 32, 10.0)
    a, b, c = _bump(g, 3.0), _bump(g, 6.0), _bump(g, 4.5, 2.0)
    spec = PorousBeta(1.0, 0.3)
    tol = 1e-9
    dab, *_ = solve_distance(a, b, spec, g, M=8, tol=tol)
    dba, *_ = solve_distance(b, a, spec, g, M=8, tol=tol)
    assert dab == pytest.approx(dba, rel=1e-5)
    dac, *_ = solve_distance(a, c, spec, g, M=8, tol=tol)
    dcb, *_ = solve_distance(c, b, spec, g, M=8, tol=tol)
    assert math.sqrt(dab) <= (math.sqrt(dac) + math.sqrt(dcb)) * (1 + 1e-4)
    # larger mobility makes transport cheaper
    d_big, *_ = solve_distance(a, b, PorousBeta(1.0, 1.0), g, M=8, tol=tol)
    assert d_big < dab


def test_jko_uniform_fixed_point():
    g = Grid(1, 32, 10.0)
    uni = Density(g, g.uniform())
    u, _, info = jko_step(uni, PorousBeta(1.0, 0.5), g, 0.05, 0.5, 0.25, M=8)
    np.testing.assert_allclose(u.values, uni.values, atol=1e-12)
    assert info.converged


def test_jko_constant_mobility_modes():
    g = Grid(1, 64, 10.0)
    ub = _bump(g, 5.0)
    tau, alpha, s, c = 0.05, 0.5, 0.25, 1.0
    u, _, _ = jko_step(ub, Constant(c), g, tau, alpha, s, M=16, tol=1e-12)
    lam = tau**alpha * c * gamma_fn(2 - alpha)
    exact = to_spectral(ub.values, g) / (1 + lam * g.xi_abs() ** (2 - 2 * s))
    got = to_spectral(u.values, g)
    mask = np.abs(exact) > 1e-8
    assert np.max(np.abs(got[mask] - exact[mask]) / np.abs(exact[mask])) < 1e-3


def test_jko_objective_decrease_and_mass():
    g = Grid(1, 64, 10.0)
    ub = _bump(g, 5.0)
    tau, alpha, s = 0.05, 0.5, 0.25
    spec = PorousBeta(1.0, tau ** (alpha / 4))
    u, path, info = jko_step(ub, spec, g, tau, alpha, s, M=16)
    assert info.converged and info.clipped_mass < 1e-10
    assert u.mass == pytest.approx(1.0, abs=1e-12)
    w2 = action_value(path, spec)
    assert jko_objective(u, ub, w2, g, tau, alpha, s) <= 0.5 * sobolev_norm_sq(ub, g, -s)
    assert sobolev_norm_sq(u, g, -s) < sobolev_norm_sq(ub, g, -s)


def test_jko_validates():
    g = Grid(1, 16, 1.0)
    uni = Density(g, g.uniform())
    with pytest.raises(ValueError):
        jko_step(uni, ExponentOne(0.5), g, 0.1, 1.0, 0.25)
    with pytest.raises(ValueError):
        jko_step(uni, ExponentOne(0.5), g, 0.1, 0.5, 0.5)
    with pytest.raises(ValueError):
        jko_step(uni, PorousBeta(1.0, 0.0), g, 0.1, 0.5, 0.25)
