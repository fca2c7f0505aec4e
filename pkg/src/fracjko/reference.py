"""Spectral reference steppers sharing the L1 history of the JKO scheme.

Each outer step solves::

    C_alpha tau^{-alpha} (u^k - ubar^{k-1}) = A(u^k)

For the linear operator ``A = -c (-Delta)^{1-s}`` this is diagonal in
Fourier space and solved exactly.  For the nonlocal porous-medium operator
the step is approximated by integrating ``du/dtheta = A(u)`` over the
pseudo-time ``h = tau^alpha / C_alpha`` from ``ubar``, with explicit
forward-Euler sub-steps.  Both routes are independent of the transport
solver.
"""

from __future__ import annotations

import logging
import math

import numpy as np

from .caputo import History, history_combination, l1_weights
from .spectral import (Density, Grid, check_order, divergence, from_spectral, nonlocal_flux,
                       to_spectral)

log = logging.getLogger(__name__)

__all__ = ["step_linear", "step_nonlinear", "linear_multiplier", "default_substeps"]

CFL = 0.2
MAX_SUBSTEPS = 1 << 16


def _ubar(history: History, alpha: float) -> Density:
    if len(history) == 0:
        raise ValueError("history is empty")
    return history_combination(history, l1_weights(len(history), alpha))


def linear_multiplier(grid: Grid, tau: float, alpha: float, s: float, c: float = 1.0) -> np.ndarray:
    """Per-mode factor ``1 / (1 + (tau^alpha c / C_alpha) |xi|^{2-2s})``."""
    c_alpha = 1.0 / math.gamma(2.0 - alpha)
    return 1.0 / (1.0 + tau**alpha * c / c_alpha * grid.xi_abs() ** (2.0 - 2.0 * s))


def step_linear(history: History, alpha: float, s: float, c: float = 1.0) -> Density:
    """Exact L1 step for ``d^alpha u = -c (-Delta)^{1-s} u``."""
    if not c > 0:
        raise ValueError(f"diffusivity must be positive, got {c}")
    ub = _ubar(history, alpha)
    grid = ub.grid
    check_order(s, grid.d)
    coeffs = to_spectral(ub, grid) * linear_multiplier(grid, history.tau, alpha, s, c)
    vals = from_spectral(coeffs, grid)
    # the zero mode is untouched; renormalize only the rounding residue
    return Density(grid, vals / grid.integrate(vals))


def _rate(u: np.ndarray, grid: Grid, beta: float, s: float) -> float:
    """Stiffness estimate ``max u^beta * xi_max^{2-2s}`` for the CFL test."""
    return float(np.clip(u, 0.0, None).max() ** beta * grid.xi_max() ** (2.0 - 2.0 * s))


def default_substeps(u: np.ndarray, grid: Grid, h: float, beta: float, s: float) -> int:
    """Smallest ``n`` with ``(h / n) * max u^beta * xi_max^{2-2s} <= CFL``."""
    return max(1, math.ceil(h * _rate(u, grid, beta, s) / CFL))


def step_nonlinear(history: History, alpha: float, beta: float, s: float,
                   n_substeps: int | None = None) -> Density:
    """One L1 step of ``d^alpha u = div(u^beta grad (-Delta)^{-s} u)``.

    Forward Euler on the flux form conserves mass exactly.  If the CFL
    bound is violated along the way (the maximum can grow locally), the
    sub-step count is doubled and the step restarted, up to
    ``MAX_SUBSTEPS``.  Spectral undershoot near vacuum is clipped and the
    result renormalized; the data should be strictly positive for this
    stepper to be a faithful oracle.
    """
    ub = _ubar(history, alpha)
    grid = ub.grid
    check_order(s, grid.d)
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if ub.values.min() < 0:
        raise ValueError("reference stepper needs nonnegative data")
    h = history.tau**alpha * math.gamma(2.0 - alpha)
    n = default_substeps(ub.values, grid, h, beta, s) if n_substeps is None else int(n_substeps)
    while n <= MAX_SUBSTEPS:
        dh = h / n
        u = ub.values.copy()
        ok = True
        for _ in range(n):
            if dh * _rate(u, grid, beta, s) > CFL * (1.0 + 1e-12):
                ok = False
                break
            u = u + dh * divergence(nonlocal_flux(u, grid, beta, s, neg_tol=np.inf), grid)
        if ok:
            break
        log.info("refining reference sub-steps: %d -> %d", n, 2 * n)
        n *= 2
    else:
        raise RuntimeError(f"reference step needs more than {MAX_SUBSTEPS} sub-steps")
    if u.min() < -1e-6 * u.max():
        log.warning("reference step undershoots to %.3e near vacuum", u.min())
    u = np.clip(u, 0.0, None)
    return Density(grid, u / grid.integrate(u))
