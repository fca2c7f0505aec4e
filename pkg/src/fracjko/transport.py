"""Mobility-weighted dynamic transport on a staggered space-time grid.

Discretization
--------------
Transport time ``[0, 1]`` is split into ``M`` intervals of length ``dt``.
Densities ``rho[j]`` live at time nodes and cell centers; momenta
``nu[j, a]`` live at time midpoints and on the faces ``x + h/2 e_a``.  The
discrete continuity equation is::

    rho[j+1] - rho[j] + dt * div nu[j] = 0

with ``div`` the staggered spectral derivative of symbol
``i xi_a exp(-i xi_a h / 2)``.  Its modulus is exactly ``|xi_a|``, so for
a constant mobility the discrete distance reproduces the ``H^{-1}``
formula mode by mode.  The action pairs each face momentum with the
space-time average of the four surrounding densities::

    A(rho, nu) = dt * h^d * sum_{j, a, x} nu[j, a]^2 / m(I_a rho[j])

Minimization is done with the Chambolle-Pock primal-dual iteration on
``min_x F(K x) + G(x)``: ``K x = (I rho, nu)``, ``F`` is the action
(proximal map computed pointwise), and ``G`` is the indicator of the
continuity constraint plus, for a JKO step, the ``H^{-s}`` energy of the
free endpoint.  The proximal map of ``G`` is one space-time elliptic
solve: a DFT in space and a tridiagonal solve in transport time for each
mode.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .caputo import gamma_fn
from .mobility import Mobility
from .spectral import Density, Grid, _values, check_order, sobolev_norm_sq

log = logging.getLogger(__name__)

__all__ = [
    "TransportPath",
    "PrimalDualState",
    "SolveInfo",
    "action_value",
    "continuity_residual",
    "project_continuity",
    "prox_action",
    "solve_distance",
    "jko_step",
    "jko_objective",
    "ProxConvergenceError",
]

FREE = None
_CHECK_EVERY = 10


class ProxConvergenceError(RuntimeError):
    pass


@dataclass
class TransportPath:
    grid: Grid
    M: int
    rho: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    action: float = float("nan")

    @property
    def dt(self) -> float:
        return 1.0 / self.M

    @classmethod
    def static(cls, start, grid: Grid, M: int) -> "TransportPath":
        """Constant-in-time path at ``start`` with zero momentum."""
        v = _values(start)
        rho = np.broadcast_to(v, (M + 1,) + grid.shape).copy()
        nu = np.zeros((M, grid.d) + grid.shape)
        return cls(grid, M, rho, nu, 0.0)

    def masses(self) -> np.ndarray:
        return self.grid.cell_volume * self.rho.reshape(self.M + 1, -1).sum(axis=1)


@dataclass
class SolveInfo:
    converged: bool
    iterations: int
    residual: float
    objective: float
    clipped_mass: float = 0.0


@dataclass
class PrimalDualState:
    """Iterate of the primal-dual loop; one instance per solve."""

    primal: TransportPath
    dual: tuple[np.ndarray, np.ndarray] = field(repr=False)
    sigma_p: float
    sigma_d: float
    theta: float = 1.0


# ---------------------------------------------------------------------------
# staggered operators


class _Ops:
    """Symbols and interpolation for one (grid, M) pair."""

    def __init__(self, grid: Grid, M: int):
        if M < 1:
            raise ValueError(f"M must be >= 1, got {M}")
        self.grid = grid
        self.M = M
        self.dt = 1.0 / M
        ks = grid.wavenumbers()
        self.D = np.stack([1j * k * np.exp(-0.5j * k * grid.h) for k in ks])
        self.xi2 = sum(k**2 for k in ks)
        self.axes = grid.spatial_axes

    def fft(self, f):
        return np.fft.fftn(f, axes=self.axes, norm="ortho")

    def ifft(self, c):
        return np.fft.ifftn(c, axes=self.axes, norm="ortho").real

    def div(self, nu):
        """Staggered divergence of ``nu`` with shape ``(..., d, *shape)``."""
        c = self.fft(nu)
        return self.ifft(np.sum(self.D * c, axis=-self.grid.d - 1))

    def interp(self, rho):
        """``(M+1, *shape) -> (M, d, *shape)`` face/midpoint averages."""
        mid = 0.5 * (rho[1:] + rho[:-1])
        return np.stack([0.5 * (mid + np.roll(mid, -1, axis=a)) for a in self.axes], axis=1)

    def interp_adjoint(self, R):
        d = self.grid.d
        back = sum(0.5 * (R[:, i] + np.roll(R[:, i], 1, axis=a))
                   for i, a in enumerate(self.axes[-d:]))
        out = np.zeros((self.M + 1,) + self.grid.shape)
        out[1:] += 0.5 * back
        out[:-1] += 0.5 * back
        return out

    def norm_K(self, iters: int = 20, seed: int = 0) -> float:
        """Operator norm of ``x -> (I rho, nu)`` by power iteration."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((self.M + 1,) + self.grid.shape)
        lam = 1.0
        for _ in range(iters):
            y = self.interp_adjoint(self.interp(x))
            lam = np.linalg.norm(y) / np.linalg.norm(x)
            x = y / np.linalg.norm(y)
        return max(1.0, float(np.sqrt(lam)))


class _Projector:
    """Orthogonal projection onto discrete continuity solutions.

    With ``end=None`` the endpoint is free and carries the quadratic
    penalty ``0.5 * kappa(xi) |rho_M^(xi)|^2`` per mode (``kappa = 0`` for a
    plain free end).  The tridiagonal factorization in transport time is
    computed once per mode and reused across iterations.
    """

    def __init__(self, ops: _Ops, free_end: bool, kappa: np.ndarray | None = None):
        self.ops = ops
        self.free_end = free_end
        M = ops.M
        shape = ops.grid.shape
        self.kappa = np.zeros(shape) if kappa is None else kappa
        self.zero = (slice(None),) + (0,) * ops.grid.d
        a = ops.dt**2 * ops.xi2
        diag = np.empty((M,) + shape)
        for j in range(M):
            cl = 1.0 if j >= 1 else 0.0
            if j + 1 <= M - 1:
                cr = 1.0
            elif free_end:
                cr = 1.0 / (1.0 + self.kappa)
            else:
                cr = 0.0
            diag[j] = -a - cl - cr
        # the zero mode is solved separately; keep its row nonsingular
        diag[self.zero] = -3.0
        # Thomas factorization with unit off-diagonals
        self.cp = np.empty_like(diag)
        self.den = np.empty_like(diag)
        self.den[0] = diag[0]
        self.cp[0] = 1.0 / diag[0]
        for j in range(1, M):
            self.den[j] = diag[j] - self.cp[j - 1]
            self.cp[j] = 1.0 / self.den[j]

    def _solve(self, rhs):
        M = self.ops.M
        y = np.empty_like(rhs)
        y[0] = rhs[0] / self.den[0]
        for j in range(1, M):
            y[j] = (rhs[j] - y[j - 1]) / self.den[j]
        for j in range(M - 2, -1, -1):
            y[j] -= self.cp[j] * y[j + 1]
        return y

    def __call__(self, rho_t, nu_t, start, end=None):
        ops = self.ops
        M, dt = ops.M, ops.dt
        R = ops.fft(rho_t)
        V = ops.fft(nu_t)
        a_hat = ops.fft(start)
        if self.free_end:
            end_hat = R[M] / (1.0 + self.kappa)
        else:
            end_hat = ops.fft(end)
        rstar = R.copy()
        rstar[0] = a_hat
        rstar[M] = end_hat
        divv = np.sum(ops.D * V, axis=1)
        r = rstar[1:] - rstar[:-1] + dt * divv
        phi = self._solve(-r)
        V_new = V - dt * np.conj(ops.D)[None] * phi[:, None]
        R_new = R.copy()
        R_new[1:M] = R[1:M] + phi[1:] - phi[:-1]
        R_new[0] = a_hat
        if self.free_end:
            R_new[M] = (R[M] - phi[M - 1]) / (1.0 + self.kappa)
        else:
            R_new[M] = end_hat
        z = (slice(None),) + (0,) * ops.grid.d
        R_new[z] = a_hat[(0,) * ops.grid.d]
        V_new[(slice(None), slice(None)) + (0,) * ops.grid.d] = V[(slice(None), slice(None)) + (0,) * ops.grid.d]
        return ops.ifft(R_new), ops.ifft(V_new)


def continuity_residual(path: TransportPath) -> float:
    """Max-norm of ``(rho[j+1] - rho[j]) / dt + div nu[j]``."""
    ops = _Ops(path.grid, path.M)
    res = (path.rho[1:] - path.rho[:-1]) / ops.dt + ops.div(path.nu)
    return float(np.abs(res).max())


def project_continuity(path: TransportPath, start, end=FREE) -> TransportPath:
    """L2-orthogonal projection of ``(rho, nu)`` onto continuity solutions.

    ``rho[0]`` is pinned to ``start``; ``rho[M]`` is pinned to ``end``
    unless ``end`` is :data:`FREE`.
    """
    if path.rho.shape[1:] != _values(start).shape:
        raise ValueError("start density does not match the path grid")
    ops = _Ops(path.grid, path.M)
    proj = _Projector(ops, free_end=end is FREE)
    rho, nu = proj(path.rho, path.nu, _values(start), None if end is FREE else _values(end))
    return TransportPath(path.grid, path.M, rho, nu)


# ---------------------------------------------------------------------------
# action and its proximal map


def _action_density(r, s, spec: Mobility):
    return s**2 / spec(np.clip(r, 0.0, None))


def action_value(path: TransportPath, spec: Mobility) -> float:
    """``int_0^1 int zeta(rho_t, nu_t) dx dt`` on the staggered grid."""
    ops = _Ops(path.grid, path.M)
    r = ops.interp(path.rho)
    val = path.dt * path.grid.cell_volume * np.sum(_action_density(r, path.nu, spec))
    return float(val)


def prox_action(rho_tilde, nu_tilde, sigma: float, spec: Mobility, *, tol: float = 1e-12,
                max_iter: int = 200):
    """Pointwise minimizer of ``(r-r~)^2/2 + (s-s~)^2/2 + sigma s^2/m(r)``, ``r >= 0``.

    ``s`` is eliminated as ``s~ / (1 + 2 sigma / m(r))``; the remaining
    monotone scalar equation in ``r`` is solved by Newton's method inside
    a shrinking bracket, falling back to bisection whenever a Newton step
    leaves it.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rt = np.asarray(rho_tilde, dtype=float)
    st = np.asarray(nu_tilde, dtype=float)
    rt, st = np.broadcast_arrays(rt, st)
    if getattr(spec, "power", None) is None:
        # constant mobility: r and s decouple
        m = float(spec(0.0))
        return np.clip(rt, 0.0, None), st / (1.0 + 2.0 * sigma / m)

    shape = rt.shape
    rt = rt.ravel()
    s2 = st.ravel() ** 2
    q0 = spec(0.0) + 2.0 * sigma
    lo = np.clip(rt, 0.0, None)
    hi = np.clip(rt + sigma * s2 * spec.deriv(0.0) / q0**2, 0.0, None)

    def g(r, idx):
        return r - rt[idx] - sigma * s2[idx] * spec.deriv(r) / (spec(r) + 2.0 * sigma) ** 2

    def dg(r, idx):
        q = spec(r) + 2.0 * sigma
        return 1.0 - sigma * s2[idx] * (spec.deriv2(r) / q**2 - 2.0 * spec.deriv(r) ** 2 / q**3)

    # g is increasing with g' >= 1; the root lies in [lo, hi]
    r = lo.copy()
    idx = np.flatnonzero(g(lo, slice(None)) < 0)
    for _ in range(max_iter):
        if idx.size == 0:
            break
        ra, la, ha = r[idx], lo[idx], hi[idx]
        ga = g(ra, idx)
        la = np.where(ga < 0, ra, la)
        ha = np.where(ga > 0, ra, ha)
        rn = ra - ga / dg(ra, idx)
        rn = np.where((rn <= la) | (rn >= ha), 0.5 * (la + ha), rn)
        scale = tol * (1.0 + np.abs(ra))
        done = (np.abs(rn - ra) <= scale) | (ha - la <= scale)
        r[idx], lo[idx], hi[idx] = rn, la, ha
        idx = idx[~done]
    if idx.size:
        raise ProxConvergenceError(f"prox_action did not converge for {idx.size} points")
    r = r.reshape(shape)
    s = st / (1.0 + 2.0 * sigma / spec(r))
    return r, s


# ---------------------------------------------------------------------------
# primal-dual driver


def _run_primal_dual(ops: _Ops, proj: _Projector, step: float, spec: Mobility, start, end,
                     path0: TransportPath, *, tol: float, max_iter: int,
                     endpoint_energy=None) -> tuple[PrimalDualState, SolveInfo]:
    """Chambolle-Pock on ``min dt * sum nu^2 / m(I rho) + G(rho, nu)``.

    ``endpoint_energy(rho_M)`` only enters the reported objective; the
    projector already carries it.  Every ``_CHECK_EVERY`` iterations the
    relative primal and dual updates and the relative objective change
    are compared with ``tol``.
    """
    rho, nu = path0.rho.copy(), path0.nu.copy()
    rho_bar, nu_bar = rho.copy(), nu.copy()
    yR = np.zeros((ops.M, ops.grid.d) + ops.grid.shape)
    yS = np.zeros_like(yR)
    pref = ops.dt

    def objective(rho_, nu_):
        val = pref * np.sum(_action_density(ops.interp(rho_), nu_, spec))
        if endpoint_energy is not None:
            val += endpoint_energy(rho_[-1])
        return float(val)

    def rel(new, old):
        num = sum(np.sum((a - b) ** 2) for a, b in zip(new, old))
        den = sum(np.sum(a**2) for a in new)
        return float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))

    obj_prev = objective(rho, nu)
    converged = False
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        # dual ascent: prox of F^* through the Moreau identity
        yR_old, yS_old = yR, yS
        zR = yR + step * ops.interp(rho_bar)
        zS = yS + step * nu_bar
        pr, ps = prox_action(zR / step, zS / step, pref / step, spec)
        yR = zR - step * pr
        yS = zS - step * ps
        # primal descent: prox of G is the constrained projection
        rho_old, nu_old = rho, nu
        rho, nu = proj(rho - step * ops.interp_adjoint(yR), nu - step * yS, start, end)
        rho_bar = 2.0 * rho - rho_old
        nu_bar = 2.0 * nu - nu_old
        if it % _CHECK_EVERY == 0 or it == max_iter:
            obj = objective(rho, nu)
            d_obj = abs(obj - obj_prev) / max(abs(obj), 1e-300)
            obj_prev = obj
            res = max(rel((rho, nu), (rho_old, nu_old)), rel((yR, yS), (yR_old, yS_old)), d_obj)
            if res < tol:
                converged = True
                break
    path = TransportPath(ops.grid, ops.M, rho, nu)
    path.action = action_value(path, spec)
    state = PrimalDualState(path, (yR, yS), step, step)
    info = SolveInfo(converged, it, float(res), objective(rho, nu))
    if not converged:
        log.warning("primal-dual stopped after %d iterations (residual %.3e)", it, res)
    return state, info


def solve_distance(gamma0, gamma1, spec: Mobility, grid: Grid, M: int = 16, tol: float = 1e-8,
                   max_iter: int = 20000) -> tuple[float, TransportPath, SolveInfo]:
    """Squared modified Wasserstein distance between two equal-mass densities."""
    g0, g1 = _values(gamma0), _values(gamma1)
    m0, m1 = grid.integrate(g0), grid.integrate(g1)
    if abs(m0 - m1) > 1e-10 * max(1.0, abs(m0)):
        raise ValueError(f"densities must have equal mass ({m0!r} vs {m1!r})")
    if not spec.inf > 0:
        raise ValueError("mobility must be bounded away from zero")
    ops = _Ops(grid, M)
    step = 0.99 / ops.norm_K()
    proj = _Projector(ops, free_end=False)
    t = np.linspace(0.0, 1.0, M + 1).reshape((-1,) + (1,) * grid.d)
    path0 = TransportPath(grid, M, (1 - t) * g0 + t * g1, np.zeros((M, grid.d) + grid.shape))
    path0.rho, path0.nu = proj(path0.rho, path0.nu, g0, g1)
    state, info = _run_primal_dual(ops, proj, step, spec, g0, g1, path0, tol=tol,
                                   max_iter=max_iter)
    return state.primal.action, state.primal, info


def jko_objective(u, u_bar, w2: float, grid: Grid, tau: float, alpha: float, s: float) -> float:
    """``C_alpha / (2 tau^alpha) W^2 + 0.5 ||u||^2_{H^{-s}}``."""
    c_alpha = 1.0 / gamma_fn(2.0 - alpha)
    return c_alpha / (2.0 * tau**alpha) * w2 + 0.5 * sobolev_norm_sq(u, grid, -s)


def jko_step(u_bar, spec: Mobility, grid: Grid, tau: float, alpha: float, s: float, M: int = 16,
             tol: float = 1e-8, max_iter: int = 20000) -> tuple[Density, TransportPath, SolveInfo]:
    """One minimizing-movement step from ``u_bar``.

    Minimizes ``W^2(u, u_bar) + lam ||u||^2_{H^{-s}}`` with
    ``lam = tau^alpha / C_alpha``, which has the same minimizer as the
    scheme's objective.  Returns the endpoint density (clipped at zero and
    renormalized; the clipped mass is recorded in the info), the path and
    solver info.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    check_order(s, grid.d)
    if not spec.inf > 0:
        raise ValueError("mobility must be bounded away from zero")
    ub = _values(u_bar)
    c_alpha = 1.0 / gamma_fn(2.0 - alpha)
    lam = tau**alpha / c_alpha
    ops = _Ops(grid, M)
    step = 0.99 / ops.norm_K()
    xi = grid.xi_abs()
    inv = np.zeros_like(xi)
    inv[xi > 0] = xi[xi > 0] ** (-2.0 * s)
    # the primal variables carry no cell-volume factor, so the endpoint
    # penalty is lam * ||.||^2_{H^-s} / h^d; its prox with step ``step``
    # shrinks each mode by 1 / (1 + kappa)
    kappa = 2.0 * step * lam * inv
    proj = _Projector(ops, free_end=True, kappa=kappa)

    def energy(rho_end):
        return lam * sobolev_norm_sq(rho_end, grid, -s) / grid.cell_volume

    path0 = TransportPath.static(ub, grid, M)
    state, info = _run_primal_dual(ops, proj, step, spec, ub, None, path0, tol=tol,
                                   max_iter=max_iter, endpoint_energy=energy)
    end = state.primal.rho[-1]
    clipped = float(grid.integrate(np.clip(-end, 0.0, None)))
    if end.min() < -1e-6:
        log.warning("JKO endpoint has negative values down to %.3e", end.min())
    end = np.clip(end, 0.0, None)
    info.clipped_mass = clipped
    return Density.normalized(grid, end), state.primal, info
