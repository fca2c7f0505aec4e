"""Weak-form residuals, discrete a priori estimates and refinement studies.

Weak residual
-------------
For a trajectory ``u^k`` (piecewise constant in time) and test functions
``phi(x) psi(t)`` with ``psi(T) = 0``::

    R = sum_k [ int_{I_k} D_{T-} psi dt <u^k, phi> + Psi_k <flux(u^k), grad phi> ]
        - <u_0, phi> / Gamma(1 - alpha) int_0^T t^{-alpha} psi dt

where ``D_{T-} psi(t) = -(1/Gamma(1-alpha)) int_t^T (r-t)^{-alpha} psi'(r) dr``
and ``Psi_k`` is the integral of ``psi`` over ``I_k``.  For the linear
equation the flux pairing becomes ``<(-Delta)^{1-s} phi, u^k>``.  ``psi``
is a polynomial, so every time integral is evaluated in closed form: in
the variable ``v = T - t`` both ``D_{T-}`` and the ``t^{-alpha}`` moment
act on monomials through Gamma-function ratios.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from .jko import RunConfig, Trajectory, interpolate, run
from .mobility import Mobility, g_p, script_g, u_functional
from .spectral import (Density, Grid, frac_laplacian, gradient, lp_norm, nonlocal_flux,
                       sobolev_norm_sq, sobolev_ratio)

log = logging.getLogger(__name__)

__all__ = [
    "bump_test_function",
    "time_polynomial",
    "weak_residual",
    "CheckResult",
    "EstimateReport",
    "check_estimates",
    "regularization_exponents",
    "regularization_bound",
    "convergence_study",
    "StudyRow",
]


# ---------------------------------------------------------------------------
# test functions


def bump_test_function(grid: Grid, center=None, radius: float | None = None) -> np.ndarray:
    """Compactly supported bump ``exp(-1/(1 - |x-x0|^2/r^2))``, band-limited.

    The raw bump is passed through one forward/inverse DFT round trip
    with the Nyquist modes dropped, so collocated derivatives are exact.
    """
    radius = grid.L / 4.0 if radius is None else radius
    center = (grid.L / 2.0,) * grid.d if center is None else tuple(np.broadcast_to(center, grid.d))
    r2 = sum((x - c) ** 2 for x, c in zip(grid.coords(), center)) / radius**2
    phi = np.zeros(grid.shape)
    inside = r2 < 1.0
    phi[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    c = np.fft.fftn(phi)
    for a in range(grid.d):
        idx = [slice(None)] * grid.d
        idx[a] = grid.n // 2
        c[tuple(idx)] = 0.0
    return np.fft.ifftn(c).real


def time_polynomial(m: int, T: float) -> Polynomial:
    """``(1 - t/T)^m`` as a polynomial in ``t``."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return Polynomial([1.0, -1.0 / T]) ** m


def _in_v(psi: Polynomial, T: float) -> np.ndarray:
    """Coefficients of ``psi(T - v)`` in powers of ``v``."""
    return psi(Polynomial([T, -1.0])).coef


def _caputo_cell_integrals(psi: Polynomial, alpha: float, tau: float, N: int, T: float):
    """``int_{I_k} D_{T-} psi dt`` for ``k = 1..N``.

    With ``psi(T - v) = sum_m p_m v^m`` the right derivative is
    ``sum_m p_m Gamma(m+1)/Gamma(m+1-alpha) v^{m-alpha}``.
    """
    p = _in_v(psi, T)
    k = np.arange(1, N + 1)
    v_hi = T - (k - 1) * tau
    v_lo = np.clip(T - k * tau, 0.0, None)
    out = np.zeros(N)
    for m, pm in enumerate(p):
        if m == 0 or pm == 0.0:
            continue
        e = m + 1.0 - alpha
        c = pm * math.gamma(m + 1.0) / math.gamma(m + 1.0 - alpha) / e
        out += c * (v_hi**e - v_lo**e)
    return out


def _gamma_term(psi: Polynomial, alpha: float, T: float) -> float:
    """``(1/Gamma(1-alpha)) int_0^T t^{-alpha} psi(t) dt`` in closed form."""
    q = psi.coef
    tot = sum(qj * T ** (j + 1.0 - alpha) / (j + 1.0 - alpha) for j, qj in enumerate(q))
    return tot / math.gamma(1.0 - alpha)


def weak_residual(traj: Trajectory, phi: np.ndarray, psi: Polynomial | int = 2,
                  equation: str | None = None, *, signed: bool = False) -> float:
    """Residual of the weak formulation on a computed trajectory.

    Parameters
    ----------
    traj : Trajectory
    phi : ndarray
        Spatial test function on the trajectory grid.
    psi : Polynomial or int
        Time test function; an integer ``m`` means ``(1 - t/T)^m``.
        Must vanish at ``T``.
    equation : {"nonlinear", "linear"}, optional
        Defaults to the equation of the run.
    signed : bool
        Return ``R`` instead of ``|R|`` (``R`` is linear in ``phi`` and ``psi``).
    """
    cfg = traj.config
    grid, T, tau, N = cfg.grid, cfg.T, cfg.tau, cfg.N
    psi = time_polynomial(psi, T) if isinstance(psi, int) else psi
    if abs(psi(T)) > 1e-12 * max(1.0, np.abs(psi.coef).max()):
        raise ValueError(f"psi(T) must vanish, got {psi(T)!r}")
    equation = cfg.equation if equation is None else equation
    if equation not in ("linear", "nonlinear"):
        raise ValueError(f"unknown equation {equation!r}")
    phi = np.asarray(phi, dtype=float)
    a = cfg.alpha
    cd = _caputo_cell_integrals(psi, a, tau, N, T)
    P = psi.integ()
    Psi = np.array([P(k * tau) - P((k - 1) * tau) for k in range(1, N + 1)])
    if equation == "linear":
        lphi = frac_laplacian(phi, grid, 1.0 - cfg.s)
    else:
        gphi = gradient(phi, grid)
        beta = 1.0 if cfg.beta is None else cfg.beta
    R = 0.0
    for k in range(1, N + 1):
        u = traj.states[k].values
        R += cd[k - 1] * grid.integrate(u * phi)
        if equation == "linear":
            R += Psi[k - 1] * grid.integrate(lphi * u)
        else:
            F = nonlocal_flux(u, grid, beta, cfg.s, neg_tol=np.inf)
            R += Psi[k - 1] * grid.integrate(np.sum(F * gphi, axis=0))
    R -= grid.integrate(traj.u0.values * phi) * _gamma_term(psi, a, T)
    return float(R) if signed else abs(float(R))


# ---------------------------------------------------------------------------
# a priori estimates


@dataclass
class CheckResult:
    name: str
    passed: bool
    lhs: float
    rhs: float
    slack: float = 0.0
    kind: str = "structural"
    note: str = ""

    @property
    def margin(self) -> float:
        return self.rhs + self.slack - self.lhs

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"{tag} {self.name}: lhs={self.lhs:.6g} rhs={self.rhs:.6g} "
                f"margin={self.margin:.3g} [{self.kind}]{' ' + self.note if self.note else ''}")


@dataclass
class EstimateReport:
    checks: list[CheckResult] = field(default_factory=list)
    sobolev_ratio: float = float("nan")
    extrapolated: bool = False

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def add(self, name, lhs, rhs, slack=0.0, note=""):
        ok = bool(lhs <= rhs + slack)
        kind = "structural"
        if not ok:
            kind = "structural violation"
        elif lhs > rhs:
            kind = "within solver tolerance"
        self.checks.append(CheckResult(name, ok, float(lhs), float(rhs), float(slack), kind, note))

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "sobolev_ratio": self.sobolev_ratio,
            "extrapolated": self.extrapolated,
            "checks": [dict(name=c.name, passed=c.passed, lhs=c.lhs, rhs=c.rhs, slack=c.slack,
                            margin=c.margin, kind=c.kind, note=c.note) for c in self.checks],
        }


def regularization_exponents(power: float, p: float, q: float, s: float, d: int):
    """``(eta_1, eta_2)`` for the Lp regularization bound.

    ``power`` is ``beta`` for the nonlinear equation and ``tau^{1-alpha/4}``
    for the linear one (which gives ``theta_1, theta_2``).
    """
    if not 1.0 <= q < p:
        raise ValueError("need 1 <= q < p")
    den = 1.0 / q - 1.0 / p
    e1 = ((power + p) / q - 1.0 + 2.0 * (1.0 - s) / d) / den
    e2 = (power / p + 2.0 * (1.0 - s) / d) / den
    return e1, e2


def regularization_bound(u0: Density, cfg: RunConfig, S: float, p: float = 2.0,
                         q: float = 1.0) -> float:
    """Right-hand side of the Lp regularization estimate for ``u^k``.

    Nonlinear equation::

        ((beta+p)^2 / (4p(p-1)) C_alpha S^2 tau^{-alpha} |u0|_q^{eta2} |u0|_p^p)^{1/eta1}

    The linear equation uses ``(p+1)^2`` and the ``theta`` exponents.
    """
    g = u0.grid
    if cfg.equation == "nonlinear":
        pref = (cfg.beta + p) ** 2
        e1, e2 = regularization_exponents(cfg.beta, p, q, cfg.s, g.d)
    else:
        pref = (p + 1.0) ** 2
        e1, e2 = regularization_exponents(cfg.tau ** (1.0 - cfg.alpha / 4.0), p, q, cfg.s, g.d)
    inner = (pref / (4.0 * p * (p - 1.0)) * cfg.c_alpha * S**2 * cfg.tau**-cfg.alpha
             * lp_norm(u0, g, q) ** e2 * lp_norm(u0, g, p) ** p)
    return inner ** (1.0 / e1)


def check_estimates(traj: Trajectory, *, S: float | None = None, samples: int = 100,
                    seed: int | None = None) -> EstimateReport:
    """Evaluate the discrete estimates on a trajectory.

    Per-step checks whose exact form only holds for exact minimizers are
    given a slack of ``10 * tol`` relative to the larger side.
    ``S`` is the discrete Sobolev ratio used in the regularization bound;
    it is measured on seeded random fields when not supplied.
    """
    cfg = traj.config
    g = cfg.grid
    spec: Mobility = cfg.mobility()
    seed = cfg.seed if seed is None else seed
    rep = EstimateReport(extrapolated=cfg.extrapolated)
    u0 = traj.u0
    tol = 10.0 * cfg.tol
    N, tau, a = cfg.N, cfg.tau, cfg.alpha
    dis = cfg.c_alpha / tau**a

    drift = max(abs(u.mass - 1.0) for u in traj.states)
    rep.add("mass drift", drift, 1e-8)

    for p in (2, 4, np.inf):
        ref = lp_norm(u0, g, p) * (1.0 + 1e-6)
        rep.add(f"Lp non-increase p={p}", max(lp_norm(u, g, p) for u in traj.states[1:]), ref)
        rep.add(f"ubar Lp bound p={p}", max(lp_norm(u, g, p) for u in traj.ubars), ref)

    F = lambda u: 0.5 * sobolev_norm_sq(u, g, -cfg.s)  # noqa: E731
    tele = sum(F(traj.ubars[k - 1]) - F(traj.states[k]) for k in range(1, N + 1))
    rep.add("telescoping (convex energy)", tele, N ** (1.0 - a) * F(u0) * (1.0 + 1e-3))

    budget = sum(tau * sobolev_norm_sq(u, g, 1.0 - cfg.s) for u in traj.states[1:])
    rep.add("energy budget", budget,
            cfg.c_alpha * cfg.T ** (1.0 - a) * u_functional(spec, u0, g) * (1.0 + 1e-3))

    if cfg.solver == "jko":
        worst_d = worst_g = None
        for k in range(1, N + 1):
            u, ub = traj.states[k], traj.ubars[k - 1]
            lhs = sobolev_norm_sq(u, g, 1.0 - cfg.s)
            rhs = dis * (u_functional(spec, ub, g) - u_functional(spec, u, g))
            m = rhs + tol * max(abs(lhs), abs(rhs)) - lhs
            if worst_d is None or m < worst_d[0]:
                worst_d = (m, lhs, rhs, tol * max(abs(lhs), abs(rhs)), k)
            lhs = sobolev_norm_sq(script_g(spec, 2.0, u.values), g, 1.0 - cfg.s)
            rhs = dis * (g_p(ub, g, 2.0) - g_p(u, g, 2.0))
            m = rhs + tol * max(abs(lhs), abs(rhs)) - lhs
            if worst_g is None or m < worst_g[0]:
                worst_g = (m, lhs, rhs, tol * max(abs(lhs), abs(rhs)), k)
        rep.add("dissipation (U)", *worst_d[1:4], note=f"worst step {worst_d[4]}")
        rep.add("dissipation (script G, p=2)", *worst_g[1:4], note=f"worst step {worst_g[4]}")

    if S is None:
        S = sobolev_ratio(g, 1.0 - cfg.s, np.random.default_rng(seed), samples=samples)
    rep.sobolev_ratio = S
    bound = regularization_bound(u0, cfg, S)
    note = "extrapolation (d=1)" if cfg.extrapolated else ""
    rep.add("regularization L2 (q=1)", max(lp_norm(u, g, 2) for u in traj.states[1:]), bound,
            note=note)
    return rep


# ---------------------------------------------------------------------------
# refinement studies


@dataclass
class StudyRow:
    tau: float
    n: int
    runtime_s: float
    residual: float
    cauchy_l1: float = float("nan")
    order: float = float("nan")
    gap_l1: float = float("nan")


def _restrict(u: np.ndarray, coarse: Grid) -> np.ndarray:
    """Sample a fine-grid field at the coarse nodes (nested lattices)."""
    f = u.shape[0] // coarse.n
    return u[(slice(None, None, f),) * coarse.d]


def convergence_study(base: RunConfig, refinements, u0, *, phi=None, psi: int = 2,
                      cross: bool = False) -> list[StudyRow]:
    """Run a sequence of configurations and tabulate self-convergence.

    Parameters
    ----------
    base : RunConfig
        Coarsest configuration.
    refinements : int or list of RunConfig
        An integer ``r`` halves ``tau`` ``r`` times at fixed grid; a list is
        used as given (it must refine ``tau`` and/or ``n`` by factors of two).
    u0 : callable
        ``grid -> Density``, so the initial data follows grid refinement.
    cross : bool
        Also run the reference stepper and record the L1 gap at ``T``.

    Each row holds ``|u_tau(T) - u_{tau/2}(T)|_{L1}`` against the next row,
    the weak residual, and the Richardson order estimate
    ``log2(d_i / d_{i+1})``.
    """
    if isinstance(refinements, int):
        configs = [base.with_(tau=base.tau / 2**i) for i in range(refinements + 1)]
    else:
        configs = [base, *refinements]
    rows, finals = [], []
    for cfg in configs:
        ic = u0(cfg.grid)
        t0 = time.perf_counter()
        traj = run(cfg, ic)
        dt = time.perf_counter() - t0
        if not traj.converged:
            raise RuntimeError(f"run with tau={cfg.tau} did not converge")
        ph = bump_test_function(cfg.grid) if phi is None else phi(cfg.grid)
        row = StudyRow(cfg.tau, cfg.grid.n, dt, weak_residual(traj, ph, psi))
        if cross:
            other = run(cfg.with_(solver="reference" if cfg.solver == "jko" else "jko"), ic)
            row.gap_l1 = lp_norm(interpolate(traj, cfg.T).values
                                 - interpolate(other, cfg.T).values, cfg.grid, 1)
        rows.append(row)
        finals.append((cfg.grid, interpolate(traj, cfg.T).values))
    for i in range(len(rows) - 1):
        (gc, uc), (_, uf) = finals[i], finals[i + 1]
        rows[i].cauchy_l1 = lp_norm(uc - _restrict(uf, gc), gc, 1)
    for i in range(len(rows) - 2):
        if rows[i + 1].cauchy_l1 > 0:
            rows[i].order = math.log2(rows[i].cauchy_l1 / rows[i + 1].cauchy_l1)
    return rows
