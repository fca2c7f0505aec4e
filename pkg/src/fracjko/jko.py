"""Outer time loop: L1 history, one minimizing-movement step per level.

At level ``k`` the history ``u^0 .. u^{k-1}`` is combined into ``ubar``
with the L1 weights, and ``u^k`` minimizes::

    C_alpha / (2 tau^alpha) W_m^2(u, ubar) + 0.5 ||u||^2_{H^{-s}}

The mobility is fixed by the run: ``(z + tau^{alpha/(4(2-beta))})^beta`` for
the nonlocal porous-medium equation and ``(z + 1)^{tau^{1-alpha/4}}`` for
the linear one.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .caputo import History, history_combination, l1_weights
from .mobility import (Mobility, exponent_one_for_step, porous_beta_for_step, u_functional)
from .reference import step_linear, step_nonlinear
from .spectral import Density, Grid, check_order, lp_norm, sobolev_norm_sq
from .transport import jko_objective, jko_step

log = logging.getLogger(__name__)

__all__ = ["RunConfig", "StepDiagnostics", "Trajectory", "run", "interpolate", "diagnostics",
           "bump"]

MASS_RENORM = 1e-10
MASS_ABORT = 1e-6


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one run.

    ``beta=None`` selects the linear equation and its ``ExponentOne``
    mobility.
    """

    alpha: float
    s: float
    tau: float
    T: float
    grid: Grid
    beta: float | None = 1.0
    M: int = 16
    tol: float = 1e-8
    max_iter: int = 20000
    solver: str = "jko"
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        check_order(self.s, self.grid.d)
        if self.beta is not None and not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not (self.tau > 0 and self.T > 0):
            raise ValueError("tau and T must be positive")
        n = self.T / self.tau
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise ValueError(f"T/tau must be a positive integer, got {n!r}")
        if self.solver not in ("jko", "reference"):
            raise ValueError(f"solver must be 'jko' or 'reference', got {self.solver!r}")
        if self.M < 1 or self.max_iter < 1 or not self.tol > 0:
            raise ValueError("transport settings must be positive")

    @property
    def N(self) -> int:
        return int(round(self.T / self.tau))

    @property
    def equation(self) -> str:
        return "linear" if self.beta is None else "nonlinear"

    @property
    def c_alpha(self) -> float:
        return 1.0 / math.gamma(2.0 - self.alpha)

    @property
    def extrapolated(self) -> bool:
        """True for the nonlinear equation in one dimension (outside the theory)."""
        return self.equation == "nonlinear" and self.grid.d == 1

    def mobility(self) -> Mobility:
        if self.beta is None:
            return exponent_one_for_step(self.tau, self.alpha)
        return porous_beta_for_step(self.beta, self.tau, self.alpha)

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


@dataclass
class StepDiagnostics:
    step: int
    time: float
    w2m: float
    energy_hms: float
    energy_h1ms: float
    lp1: float
    lp2: float
    lp4: float
    lpinf: float
    mass: float
    converged: bool
    wall_ms: float
    u_func: float = float("nan")
    iterations: int = 0
    clipped_mass: float = 0.0
    objective: float = float("nan")
    objective_start: float = float("nan")

    FIELDS = ("step", "time", "w2m", "energy_hms", "energy_h1ms", "lp1", "lp2", "lp4", "lpinf",
              "mass", "converged", "wall_ms")

    def record(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}


@dataclass
class Trajectory:
    config: RunConfig
    states: list[Density]
    ubars: list[Density] = field(default_factory=list)
    steps: list[StepDiagnostics] = field(default_factory=list)

    @property
    def u0(self) -> Density:
        return self.states[0]

    @property
    def converged(self) -> bool:
        return all(d.converged for d in self.steps)

    def times(self) -> np.ndarray:
        return np.arange(len(self.states)) * self.config.tau


def bump(grid: Grid, width: float | None = None, floor: float = 0.0,
         center: float | None = None) -> Density:
    """Normalized Gaussian bump centered in the box, plus an optional floor."""
    width = grid.L / 20.0 if width is None else width
    center = grid.L / 2.0 if center is None else center
    r2 = sum((x - center) ** 2 for x in grid.coords())
    v = np.exp(-r2 / (2.0 * width**2)) + floor
    return Density.normalized(grid, v)


def diagnostics(u: Density, cfg: RunConfig, step: int, spec: Mobility | None = None,
                **extra) -> StepDiagnostics:
    g = u.grid
    spec = cfg.mobility() if spec is None else spec
    return StepDiagnostics(
        step=step,
        time=step * cfg.tau,
        energy_hms=0.5 * sobolev_norm_sq(u, g, -cfg.s),
        energy_h1ms=sobolev_norm_sq(u, g, 1.0 - cfg.s),
        lp1=lp_norm(u, g, 1),
        lp2=lp_norm(u, g, 2),
        lp4=lp_norm(u, g, 4),
        lpinf=lp_norm(u, g, np.inf),
        mass=u.mass,
        u_func=u_functional(spec, u, g),
        **extra,
    )


def _renormalize(values: np.ndarray, grid: Grid, step: int) -> Density:
    mass = grid.integrate(values)
    drift = abs(mass - 1.0)
    if drift > MASS_ABORT:
        raise RuntimeError(f"step {step}: mass drifted by {drift:.3e}")
    if drift > MASS_RENORM:
        values = values / mass
    return Density(grid, values)


def run(config: RunConfig, u0: Density, *, progress=None) -> Trajectory:
    """Run the scheme (or the reference stepper) from ``u0`` up to ``T``.

    Each JKO step is checked against the feasible candidate ``u = ubar``;
    a step whose objective is worse means the transport solve diverged and
    the run is aborted.
    """
    if u0.grid != config.grid:
        raise ValueError("initial density lives on a different grid")
    cfg = config
    spec = cfg.mobility()
    hist = History([u0], cfg.tau)
    traj = Trajectory(cfg, [u0])
    traj.steps.append(diagnostics(u0, cfg, 0, spec, w2m=0.0, converged=True, wall_ms=0.0))
    for k in range(1, cfg.N + 1):
        t0 = time.perf_counter()
        ub = history_combination(hist, l1_weights(k, cfg.alpha))
        extra = {}
        if cfg.solver == "reference":
            if cfg.equation == "linear":
                u = step_linear(hist, cfg.alpha, cfg.s)
            else:
                u = step_nonlinear(hist, cfg.alpha, cfg.beta, cfg.s)
            w2, ok = float("nan"), True
        else:
            u, path, info = jko_step(ub, spec, cfg.grid, cfg.tau, cfg.alpha, cfg.s, M=cfg.M,
                                     tol=cfg.tol, max_iter=cfg.max_iter)
            if info.clipped_mass > MASS_ABORT:
                raise RuntimeError(f"step {k}: clipping removed {info.clipped_mass:.3e} mass")
            w2, ok = path.action, info.converged
            obj = jko_objective(u, ub, w2, cfg.grid, cfg.tau, cfg.alpha, cfg.s)
            start = 0.5 * sobolev_norm_sq(ub, cfg.grid, -cfg.s)
            if obj > start * (1.0 + 10.0 * cfg.tol) + 1e-14:
                raise RuntimeError(
                    f"step {k}: objective {obj!r} exceeds the feasible value {start!r}")
            extra = dict(iterations=info.iterations, clipped_mass=info.clipped_mass,
                         objective=obj, objective_start=start)
            if not ok:
                log.warning("step %d did not converge", k)
        u = _renormalize(u.values, cfg.grid, k)
        wall = 1e3 * (time.perf_counter() - t0)
        hist.append(u)
        traj.states.append(u)
        traj.ubars.append(ub)
        traj.steps.append(diagnostics(u, cfg, k, spec, w2m=w2, converged=ok, wall_ms=wall,
                                      **extra))
        if progress is not None:
            progress(traj.steps[-1])
    return traj


def interpolate(traj: Trajectory, t: float) -> Density:
    """Piecewise-constant interpolant: ``u^k`` on ``((k-1) tau, k tau]``."""
    cfg = traj.config
    if t < 0 or t > cfg.T * (1.0 + 1e-12):
        raise ValueError(f"t={t!r} outside [0, {cfg.T!r}]")
    x = t / cfg.tau
    k = math.ceil(x - 1e-14 * max(1.0, x))
    return traj.states[min(max(k, 0), cfg.N)]
