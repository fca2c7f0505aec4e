"""Periodic-grid spectral calculus.

The whole space is replaced by a torus ``[0, L)^d`` sampled on a uniform
lattice.  Fourier coefficients are normalized so that Parseval's identity
reproduces the continuum integral ``int |u|^2 dx``; with that convention
every homogeneous Sobolev quantity below is independent of the resolution
for band-limited data.

All homogeneous operators drop the zero mode (``xi = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "Density",
    "SpectralField",
    "to_spectral",
    "from_spectral",
    "frac_laplacian",
    "sobolev_norm_sq",
    "sobolev_inner",
    "lp_norm",
    "gradient",
    "divergence",
    "nonlocal_flux",
    "check_order",
    "random_smooth_field",
    "sobolev_ratio",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice with ``n`` cells per axis on ``[0, L)^d``."""

    d: int
    n: int
    L: float

    def __post_init__(self) -> None:
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def spatial_axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    def coords(self) -> tuple[np.ndarray, ...]:
        """Cell-center coordinates, one broadcastable array per axis."""
        x = np.arange(self.n) * self.h
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        return tuple(np.meshgrid(*([k] * self.d), indexing="ij"))

    def xi_abs(self) -> np.ndarray:
        """``|xi|`` on the full DFT index set."""
        return np.sqrt(sum(k**2 for k in self.wavenumbers()))

    def xi_max(self) -> float:
        return np.pi * self.n / self.L * np.sqrt(self.d)

    def uniform(self) -> np.ndarray:
        return np.full(self.shape, 1.0 / self.L**self.d)

    def integrate(self, f: np.ndarray) -> float:
        return float(self.cell_volume * np.sum(f))


@dataclass(frozen=True)
class Density:
    """Nonnegative unit-mass field sampled at cell centers."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    MASS_TOL = 1e-10
    NEG_TOL = 1e-12

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if v.min() < -self.NEG_TOL:
            raise ValueError(f"density has negative values (min {v.min():.3e})")
        mass = self.grid.integrate(v)
        if abs(mass - 1.0) > self.MASS_TOL:
            raise ValueError(f"density mass is {mass!r}, expected 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, grid: Grid, values: np.ndarray) -> "Density":
        v = np.asarray(values, dtype=float)
        return cls(grid, v / grid.integrate(v))

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)


@dataclass(frozen=True)
class SpectralField:
    grid: Grid
    coeffs: np.ndarray = field(repr=False)

    @classmethod
    def from_real(cls, f: np.ndarray, grid: Grid) -> "SpectralField":
        return cls(grid, to_spectral(f, grid))

    def to_real(self) -> np.ndarray:
        return from_spectral(self.coeffs, self.grid)


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, Density) else np.asarray(u, dtype=float)


def to_spectral(f, grid: Grid) -> np.ndarray:
    """DFT scaled so that ``sum |c|^2 == int |f|^2 dx``."""
    return np.fft.fftn(_values(f), axes=grid.spatial_axes, norm="ortho") * np.sqrt(
        grid.cell_volume
    )


def from_spectral(c: np.ndarray, grid: Grid) -> np.ndarray:
    f = np.fft.ifftn(c / np.sqrt(grid.cell_volume), axes=grid.spatial_axes, norm="ortho")
    return f.real


def _multiplier(grid: Grid, r: float) -> np.ndarray:
    xi = grid.xi_abs()
    out = np.zeros_like(xi)
    nz = xi > 0
    out[nz] = xi[nz] ** (2.0 * r)
    return out


def frac_laplacian(f, grid: Grid, r: float) -> np.ndarray:
    """Apply ``(-Delta)^r`` as the Fourier multiplier ``|xi|^{2r}``.

    The zero mode is mapped to zero for every ``r``, so negative powers
    act on the mean-free part of ``f`` only.
    """
    c = to_spectral(f, grid) * _multiplier(grid, r)
    return from_spectral(c, grid)


def sobolev_inner(f, g, grid: Grid, r: float) -> float:
    """Homogeneous ``H^r`` scalar product ``sum_{xi != 0} |xi|^{2r} f^ conj(g^)``."""
    cf = to_spectral(f, grid)
    cg = to_spectral(g, grid)
    return float(np.sum(_multiplier(grid, r) * (cf * np.conj(cg)).real))


def sobolev_norm_sq(f, grid: Grid, r: float) -> float:
    c = to_spectral(f, grid)
    return float(np.sum(_multiplier(grid, r) * np.abs(c) ** 2))


def lp_norm(u, grid: Grid, p: float) -> float:
    """``(int |u|^p dx)^{1/p}``; ``p = inf`` gives the max norm."""
    v = np.abs(_values(u))
    if np.isinf(p):
        return float(v.max())
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float(grid.integrate(v**p) ** (1.0 / p))


def gradient(f, grid: Grid) -> np.ndarray:
    """Spectral gradient at cell centers, shape ``(d, *grid.shape)``.

    The Nyquist coefficient is dropped, as usual for collocated
    spectral derivatives of real data.
    """
    c = to_spectral(f, grid)
    nyq = _nyquist_mask(grid)
    return np.stack([from_spectral(np.where(nyq[a], 0.0, 1j * k * c), grid)
                     for a, k in enumerate(grid.wavenumbers())])


def divergence(F: np.ndarray, grid: Grid) -> np.ndarray:
    nyq = _nyquist_mask(grid)
    c = sum(np.where(nyq[a], 0.0, 1j * k * to_spectral(F[a], grid))
            for a, k in enumerate(grid.wavenumbers()))
    return from_spectral(c, grid)


def _nyquist_mask(grid: Grid) -> list[np.ndarray]:
    idx = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    masks = []
    for a in range(grid.d):
        m = np.abs(idx) == grid.n // 2
        masks.append(np.broadcast_to(m.reshape([-1 if b == a else 1 for b in range(grid.d)]),
                                     grid.shape))
    return masks


def check_order(s: float, d: int) -> None:
    if not 0.0 < s < min(1.0, d / 2.0):
        raise ValueError(f"s must satisfy s < min(1, d/2) and s > 0; got s={s}, d={d}")


def nonlocal_flux(u, grid: Grid, beta: float, s: float, *, neg_tol: float = 1e-8) -> np.ndarray:
    """Flux ``u^beta grad (-Delta)^{-s} u``, shape ``(d, *grid.shape)``.

    Its divergence is the right-hand side of the porous-medium equation
    with nonlocal pressure.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    check_order(s, grid.d)
    v = _values(u)
    if v.min() < -neg_tol:
        raise ValueError(f"negative density in flux evaluation (min {v.min():.3e})")
    pressure = frac_laplacian(v, grid, -s)
    return np.clip(v, 0.0, None) ** beta * gradient(pressure, grid)


def random_smooth_field(grid: Grid, rng: np.random.Generator, *, width: float | None = None,
                        mean_zero: bool = True) -> np.ndarray:
    """Random real field with Gaussian spectral decay.

    ``width`` is the spectral width in wavenumber units; it defaults to a
    quarter of the resolved band.
    """
    width = grid.xi_max() / 4.0 if width is None else width
    noise = rng.standard_normal(grid.shape)
    c = to_spectral(noise, grid) * np.exp(-0.5 * (grid.xi_abs() / width) ** 2)
    if mean_zero:
        c.flat[0] = 0.0
    return from_spectral(c, grid)


def sobolev_ratio(grid: Grid, r: float, rng: np.random.Generator, samples: int = 100,
                  fields: Sequence[np.ndarray] | None = None) -> float:
    """Largest observed ``||u||_{L^q} / ||u||_{H^r}`` over random mean-free fields.

    ``q = 2d/(d - 2r)`` when ``r < d/2``; otherwise the torus embedding
    into ``L^inf`` is used.
    """
    q = 2.0 * grid.d / (grid.d - 2.0 * r) if r < grid.d / 2.0 else np.inf
    if fields is None:
        fields = [random_smooth_field(grid, rng, width=w)
                  for w in np.geomspace(grid.xi_max() / 32, grid.xi_max() / 2, samples)]
    best = 0.0
    for f in fields:
        f = f - f.mean()
        hn = np.sqrt(sobolev_norm_sq(f, grid, r))
        if hn > 0:
            best = max(best, lp_norm(f, grid, q) / hn)
    return best
