import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracjko.spectral import (Density, Grid, SpectralField, check_order, divergence,
                              frac_laplacian, from_spectral, gradient, lp_norm, nonlocal_flux,
                              random_smooth_field, sobolev_inner, sobolev_norm_sq, sobolev_ratio,
                              to_spectral)

TWO_PI = 2.0 * math.pi


@pytest.fixture
def g1():
    return Grid(1, 64, TWO_PI)


@pytest.mark.parametrize("d, n, L", [(3, 16, 1.0), (1, 12, 1.0), (1, 4, 1.0), (2, 16, 0.0)])
def test_grid_validation(d, n, L):
    with pytest.raises(ValueError):
        Grid(d, n, L)


def test_grid_frequencies():
    g = Grid(1, 16, 4.0)
    k, = g.wavenumbers()
    expected = TWO_PI / 4.0 * np.r_[0:8, -8:0]
    np.testing.assert_allclose(k, expected)
    assert g.cell_volume == 0.25


def test_density_validation():
    g = Grid(1, 16, 1.0)
    with pytest.raises(ValueError):
        Density(g, np.full(16, 2.0))
    v = np.ones(16)
    v[0] = -1e-6
    with pytest.raises(ValueError):
        Density(g, v / g.integrate(v))
    assert Density.normalized(g, np.arange(1.0, 17.0)).mass == pytest.approx(1.0, abs=1e-14)


def test_frac_laplacian_examples(g1):
    x, = g1.coords()
    for r in (-0.4, 0.3, 1.0):
        np.testing.assert_allclose(frac_laplacian(np.sin(x), g1, r), np.sin(x), atol=1e-12)
    np.testing.assert_allclose(frac_laplacian(np.cos(2 * x), g1, 0.5), 2 * np.cos(2 * x),
                               atol=1e-12)
    np.testing.assert_allclose(frac_laplacian(np.full(64, 3.0), g1, -0.3), 0.0, atol=1e-14)


def test_sobolev_norm_examples(g1):
    x, = g1.coords()
    for r in (-1.0, -0.25, 0.0, 0.6):
        assert sobolev_norm_sq(np.cos(x), g1, r) == pytest.approx(math.pi, rel=1e-12)
    assert sobolev_norm_sq(np.cos(2 * x), g1, -0.5) == pytest.approx(math.pi / 2, rel=1e-12)
    assert sobolev_norm_sq(np.full(64, 7.0), g1, 0.3) == pytest.approx(0.0, abs=1e-20)


def test_sobolev_inner_examples(g1):
    x, = g1.coords()
    assert sobolev_inner(np.cos(x), np.sin(x), g1, 0.2) == pytest.approx(0.0, abs=1e-12)
    assert sobolev_inner(np.cos(x), np.cos(x), g1, 0.5) == pytest.approx(math.pi, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), r=st.floats(-1.0, 1.0), d=st.sampled_from([1, 2]))
def test_sobolev_inner_bilinear_symmetric(seed, r, d):
    g = Grid(d, 16, 3.0)
    rng = np.random.default_rng(seed)
    u, v, w = (rng.standard_normal(g.shape) for _ in range(3))
    a = sobolev_inner(2 * u + w, v, g, r)
    b = 2 * sobolev_inner(u, v, g, r) + sobolev_inner(w, v, g, r)
    assert a == pytest.approx(b, rel=1e-10, abs=1e-10)
    assert sobolev_inner(u, v, g, r) == pytest.approx(sobolev_inner(v, u, g, r), rel=1e-10)
    assert sobolev_inner(u, u, g, r) == pytest.approx(sobolev_norm_sq(u, g, r), rel=1e-12)


def test_lp_norm_examples():
    g = Grid(1, 64, 10.0)
    uni = Density(g, g.uniform())
    assert lp_norm(uni, g, 1) == pytest.approx(1.0, abs=1e-14)
    assert lp_norm(uni, g, 2) == pytest.approx(0.31622776601683794, rel=1e-14)
    x, = g.coords()
    b = Density.normalized(g, np.exp(-(x - 5) ** 2))
    assert lp_norm(b, g, 2) >= lp_norm(uni, g, 2)
    assert lp_norm(b, g, np.inf) == pytest.approx(b.values.max())
    with pytest.raises(ValueError):
        lp_norm(b, g, 0.5)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), d=st.sampled_from([1, 2]))
def test_round_trip(seed, d):
    g = Grid(d, 16, 5.0)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    np.testing.assert_allclose(from_spectral(to_spectral(f, g), g), f, rtol=1e-12, atol=1e-12)
    sf = SpectralField.from_real(f, g)
    np.testing.assert_allclose(sf.to_real(), f, atol=1e-12)
    # Parseval with the continuum normalization
    assert np.sum(np.abs(sf.coeffs) ** 2) == pytest.approx(g.integrate(f**2), rel=1e-12)


@pytest.mark.parametrize("r", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("d", [1, 2])
def test_frac_laplacian_inverse(r, d):
    g = Grid(d, 32, 7.0)
    f = np.random.default_rng(1).standard_normal(g.shape)
    back = frac_laplacian(frac_laplacian(f, g, r), g, -r)
    np.testing.assert_allclose(back, f - f.mean(), atol=1e-10)


@pytest.mark.parametrize("d", [1, 2])
def test_interpolation_inequality(d):
    g = Grid(d, 32, 10.0)
    rng = np.random.default_rng(2)
    s = 0.25 if d == 1 else 0.4
    for _ in range(100):
        f = random_smooth_field(g, rng, width=g.xi_max() * rng.uniform(0.05, 0.5))
        lhs = math.sqrt(sobolev_norm_sq(f, g, 1 - 2 * s))
        rhs = (sobolev_norm_sq(f, g, -s) ** (s / 2) * sobolev_norm_sq(f, g, 1 - s) ** ((1 - s) / 2))
        assert lhs <= rhs * (1 + 1e-12)


def test_sobolev_ratio_is_finite_and_seeded():
    g = Grid(2, 32, 10.0)
    a = sobolev_ratio(g, 0.5, np.random.default_rng(0), samples=20)
    b = sobolev_ratio(g, 0.5, np.random.default_rng(0), samples=20)
    assert a == b and 0 < a < np.inf
    # r >= d/2 uses the max norm
    assert 0 < sobolev_ratio(Grid(1, 32, 10.0), 0.75, np.random.default_rng(0), samples=10) < np.inf


def test_gradient_divergence_single_mode(g1):
    x, = g1.coords()
    np.testing.assert_allclose(gradient(np.sin(3 * x), g1)[0], 3 * np.cos(3 * x), atol=1e-11)
    np.testing.assert_allclose(divergence(np.cos(x)[None], g1), -np.sin(x), atol=1e-12)


def test_nonlocal_flux_examples(g1):
    uni = Density(g1, g1.uniform())
    np.testing.assert_allclose(nonlocal_flux(uni, g1, 1.0, 0.25), 0.0, atol=1e-15)
    x, = g1.coords()
    u = (1 + 0.5 * np.cos(x)) / TWO_PI
    F = nonlocal_flux(u, g1, 1.0, 0.25)
    assert g1.integrate(F[0]) == pytest.approx(0.0, abs=1e-14)
    # u = 1 where the powers coincide
    v = np.where(np.abs(x - math.pi) < 1.0, 1.0, 0.5)
    F1, F2 = nonlocal_flux(v, g1, 1.0, 0.25), nonlocal_flux(v, g1, 0.5, 0.25)
    np.testing.assert_allclose(F1[0][v == 1.0], F2[0][v == 1.0], rtol=1e-14)


@pytest.mark.parametrize("d", [1, 2])
def test_flux_divergence_integrates_to_zero(d):
    g = Grid(d, 32, 10.0)
    rng = np.random.default_rng(3)
    u = 1.0 + 0.3 * random_smooth_field(g, rng)
    u = np.clip(u, 0.1, None)
    assert abs(g.integrate(divergence(nonlocal_flux(u, g, 0.7, 0.3), g))) < 1e-10


def test_nonlocal_flux_rejects():
    g = Grid(1, 16, 1.0)
    with pytest.raises(ValueError):
        nonlocal_flux(np.full(16, -1.0), g, 1.0, 0.25)
    with pytest.raises(ValueError):
        nonlocal_flux(np.ones(16), g, 1.5, 0.25)


@pytest.mark.parametrize("s, d", [(0.5, 1), (0.6, 1), (1.0, 2), (0.0, 2)])
def test_check_order(s, d):
    with pytest.raises(ValueError, match="s must satisfy s < min"):
        check_order(s, d)
