"""Mobility (weight) functions and the convex functionals built from them.

A mobility ``m`` is positive, concave and nondecreasing on ``[0, inf)``.
Three families are supported:

* ``PorousBeta``:  ``m(z) = (z + delta)^beta``,  ``0 < beta <= 1``
* ``ExponentOne``: ``m(z) = (z + 1)^eps``,       ``0 < eps <= 1``
* ``Constant``:    ``m(z) = c``

Derived quantities, for ``g(z) = z^p``:

* ``U`` with ``U'' = 1/m`` and ``U(0) = U'(0) = 0``
* ``G(z) = int_0^z m g''``
* ``script_G(z) = int_0^z sqrt(m g'')``
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .spectral import Density, Grid, _values

__all__ = [
    "Mobility",
    "PorousBeta",
    "ExponentOne",
    "Constant",
    "porous_beta_for_step",
    "exponent_one_for_step",
    "m_eval",
    "u_functional",
    "u_by_quadrature",
    "g_p",
    "big_g",
    "script_g",
]

_QUAD_EPSABS = 1e-10


class Mobility:
    """Common interface; subclasses are frozen dataclasses."""

    def __call__(self, z):
        raise NotImplementedError

    def deriv(self, z):
        raise NotImplementedError

    def deriv2(self, z):
        raise NotImplementedError

    def U(self, z):
        raise NotImplementedError

    @property
    def inf(self) -> float:
        """``inf m`` on ``[0, inf)``, attained at zero."""
        return float(self(0.0))


@dataclass(frozen=True)
class _PowerShift(Mobility):
    """``m(z) = (z + shift)^power``."""

    shift: float
    power: float

    def _check(self, name: str) -> None:
        if not 0.0 < self.power <= 1.0:
            raise ValueError(f"{name} must lie in (0, 1] for a concave mobility, got {self.power}")
        if self.shift < 0.0:
            raise ValueError(f"shift must be nonnegative, got {self.shift}")

    def __call__(self, z):
        return (np.asarray(z, dtype=float) + self.shift) ** self.power

    def deriv(self, z):
        return self.power * (np.asarray(z, dtype=float) + self.shift) ** (self.power - 1.0)

    def deriv2(self, z):
        p = self.power
        return p * (p - 1.0) * (np.asarray(z, dtype=float) + self.shift) ** (p - 2.0)

    def U(self, z):
        z = np.asarray(z, dtype=float)
        a, p = self.shift, self.power
        if a == 0.0:
            raise ValueError("U diverges for a mobility vanishing at zero")
        if p == 1.0:
            return (z + a) * np.log1p(z / a) - z
        q = 1.0 - p
        if q < 1e-6:
            return u_by_quadrature(self, z)
        # (f(z+a) - f(a) - f'(a) z) / ((1-p)(2-p)) with f(x) = x^{2-p}
        return (((z + a) ** (2.0 - p) - a ** (2.0 - p)) / (2.0 - p) - a**q * z) / q


@dataclass(frozen=True)
class PorousBeta(_PowerShift):
    """``(z + delta)^beta``; pass ``delta`` explicitly or use :func:`porous_beta_for_step`."""

    def __init__(self, beta: float, delta: float):
        object.__setattr__(self, "shift", float(delta))
        object.__setattr__(self, "power", float(beta))
        self._check("beta")

    @property
    def beta(self) -> float:
        return self.power

    @property
    def delta(self) -> float:
        return self.shift

    def __repr__(self) -> str:
        return f"PorousBeta(beta={self.beta!r}, delta={self.delta!r})"


@dataclass(frozen=True)
class ExponentOne(_PowerShift):
    """``(z + 1)^eps``."""

    def __init__(self, epsilon: float):
        object.__setattr__(self, "shift", 1.0)
        object.__setattr__(self, "power", float(epsilon))
        self._check("epsilon")

    @property
    def epsilon(self) -> float:
        return self.power

    def __repr__(self) -> str:
        return f"ExponentOne(epsilon={self.epsilon!r})"


@dataclass(frozen=True)
class Constant(Mobility):
    c: float

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"constant mobility must be positive, got {self.c}")

    def __call__(self, z):
        return np.full_like(np.asarray(z, dtype=float), self.c)

    def deriv(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def deriv2(self, z):
        return np.zeros_like(np.asarray(z, dtype=float))

    def U(self, z):
        z = np.asarray(z, dtype=float)
        return z**2 / (2.0 * self.c)


def porous_beta_for_step(beta: float, tau: float, alpha: float) -> PorousBeta:
    """Mobility for the nonlinear equation: ``delta = tau^{alpha / (4 (2 - beta))}``."""
    return PorousBeta(beta, tau ** (alpha / (4.0 * (2.0 - beta))))


def exponent_one_for_step(tau: float, alpha: float) -> ExponentOne:
    """Mobility for the linear equation: ``eps = tau^{1 - alpha/4}``."""
    return ExponentOne(tau ** (1.0 - alpha / 4.0))


def m_eval(spec: Mobility, z):
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise ValueError("mobility is only defined for z >= 0")
    return spec(z_arr)


def u_by_quadrature(spec: Mobility, z):
    """``U(z) = int_0^z (z - t) / m(t) dt`` by adaptive quadrature."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    for i, zi in enumerate(z.flat):
        val, _ = integrate.quad(lambda t: (zi - t) / float(spec(t)), 0.0, zi,
                                epsabs=_QUAD_EPSABS, epsrel=1e-12, limit=200)
        out.flat[i] = val
    return out


def u_functional(spec: Mobility, u, grid: Grid) -> float:
    """``int U(u(x)) dx``."""
    v = np.clip(_values(u), 0.0, None)
    return grid.integrate(spec.U(v))


def g_p(u, grid: Grid, p: float) -> float:
    """``int u^p dx``."""
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return grid.integrate(np.clip(_values(u), 0.0, None) ** p)


def big_g(spec: Mobility, p: float, z):
    """``G(z) = p (p-1) int_0^z m(t) t^{p-2} dt``.

    Uses ``t = w^{1/(p-1)}`` so the integrand stays bounded for ``p < 2``.
    """
    z = np.asarray(z, dtype=float)
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    top = np.clip(z, 0.0, None) ** (p - 1.0)

    def integrand(x):
        w = x * top
        return p * spec(w ** (1.0 / (p - 1.0))) * top

    val, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=_QUAD_EPSABS)
    return val


def script_g(spec: Mobility, p: float, z):
    """``int_0^z sqrt(m(t) p (p-1) t^{p-2}) dt``, vectorized over ``z``.

    The substitution ``t = w^{2/p}`` absorbs the ``t^{(p-2)/2}`` factor, so
    the adaptive Gauss-Kronrod rule sees a smooth integrand for all ``p > 1``.
    """
    z = np.asarray(z, dtype=float)
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    if np.any(z < 0):
        raise ValueError("script_g is only defined for z >= 0")
    top = z ** (p / 2.0)
    c = (2.0 / p) * np.sqrt(p * (p - 1.0))

    def integrand(x):
        w = x * top
        return c * np.sqrt(spec(w ** (2.0 / p))) * top

    val, _ = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=_QUAD_EPSABS, epsrel=1e-12)
    return val
