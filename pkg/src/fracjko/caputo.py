"""L1 discretization of the Caputo derivative.

On a uniform grid ``t_k = k tau`` the L1 rule replaces ``f'`` by its
piecewise-linear interpolant, which gives::

    d^alpha f(t_k) ~ C_alpha tau^{-alpha} (f_k - sum_{i<k} (-b^(k)_{k-i}) f_i)

with ``C_alpha = 1 / Gamma(2 - alpha)`` and the coefficient table built by
:func:`l1_weights`.  The history weights ``-b^(k)_{k-i}`` are nonnegative
and sum to one, so the history term is a convex combination of earlier
states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spectral import Density

__all__ = [
    "gamma_fn",
    "L1Weights",
    "History",
    "l1_weights",
    "interior_coefficients",
    "weight_sum_identity",
    "history_combination",
    "caputo_left",
    "caputo_right",
    "right_surrogate",
    "summation_by_parts",
    "power_moment",
]


def gamma_fn(x: float) -> float:
    return math.gamma(x)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def interior_coefficients(n: int, alpha: float) -> np.ndarray:
    """``(i+1)^{1-a} + (i-1)^{1-a} - 2 i^{1-a}`` for ``i = 0..n-1``.

    Entry 0 is replaced by 1 (the leading coefficient); these entries do
    not depend on the step index.
    """
    i = np.arange(n, dtype=float)
    e = 1.0 - alpha
    out = (i + 1.0) ** e + np.abs(i - 1.0) ** e - 2.0 * i**e
    if n:
        out[0] = 1.0
    return out


@dataclass(frozen=True)
class L1Weights:
    alpha: float
    k: int
    b: np.ndarray = field(repr=False)
    c_alpha: float

    def history_weights(self) -> np.ndarray:
        """``-b[k - i]`` for ``i = 0..k-1``; nonnegative, summing to one."""
        return -self.b[1:][::-1]


@dataclass
class History:
    steps: list[Density]
    tau: float

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.steps:
            g = self.steps[0].grid
            if any(u.grid != g for u in self.steps):
                raise ValueError("history entries must share one grid")

    def __len__(self) -> int:
        return len(self.steps)

    def append(self, u: Density) -> None:
        if self.steps and u.grid != self.steps[0].grid:
            raise ValueError("history entries must share one grid")
        self.steps.append(u)


def l1_weights(k: int, alpha: float) -> L1Weights:
    """Coefficient vector ``b^(k)_0 .. b^(k)_k`` of the L1 rule at step ``k``.

    Examples
    --------
    >>> l1_weights(1, 0.3).b
    array([ 1., -1.])
    >>> np.round(l1_weights(2, 0.5).b, 6)
    array([ 1.      , -0.585786, -0.414214])
    """
    _check_alpha(alpha)
    if int(k) != k or k < 1:
        raise ValueError(f"k must be an integer >= 1, got {k}")
    k = int(k)
    e = 1.0 - alpha
    b = np.empty(k + 1)
    b[:k] = interior_coefficients(k, alpha)
    b[k] = (k - 1.0) ** e - float(k) ** e
    return L1Weights(alpha, k, b, 1.0 / gamma_fn(2.0 - alpha))


def weight_sum_identity(weights: Sequence[L1Weights]) -> float:
    """``sum_i -b^(i)_i`` over steps ``1..k``; telescopes to ``k^{1-alpha}``."""
    if not weights:
        return 0.0
    alphas = {w.alpha for w in weights}
    if len(alphas) != 1:
        raise ValueError("weights must share one alpha")
    ks = [w.k for w in weights]
    if ks != list(range(1, len(weights) + 1)):
        raise ValueError("weights must cover steps 1..k in order")
    return float(math.fsum(-w.b[w.k] for w in weights))


def history_combination(history: History, weights: L1Weights) -> Density:
    """Convex combination ``sum_i (-b^(k)_{k-i}) u^i`` of the stored states."""
    if len(history) != weights.k:
        raise ValueError(f"history has {len(history)} entries, weights expect {weights.k}")
    grid = history.steps[0].grid
    w = weights.history_weights()
    stack = np.stack([u.values for u in history.steps])
    vals = np.tensordot(w, stack, axes=1)
    # the weights sum to one up to rounding; fold the residue back in
    return Density(grid, vals / grid.integrate(vals))


def caputo_left(samples, alpha: float, tau: float) -> np.ndarray:
    """L1 approximation of the left Caputo derivative at every node.

    Node 0 gets 0, the limit for data with bounded derivative.
    """
    _check_alpha(alpha)
    f = np.asarray(samples, dtype=float)
    if f.shape[0] < 2:
        raise ValueError("need at least two samples")
    out = np.zeros_like(f)
    c = tau**-alpha / gamma_fn(2.0 - alpha)
    for k in range(1, f.shape[0]):
        w = l1_weights(k, alpha).history_weights()
        out[k] = c * (f[k] - np.tensordot(w, f[:k], axes=1))
    return out


def right_surrogate(samples, alpha: float, tau: float) -> np.ndarray:
    """Discrete right Caputo derivative built from the L1 coefficients.

    At node ``k < N`` this is ``C_alpha tau^{-alpha} sum_j b^(N-k)_j f_{k+j}``;
    node ``N`` gets 0.  It is exact for affine data.
    """
    _check_alpha(alpha)
    f = np.asarray(samples, dtype=float)
    N = f.shape[0] - 1
    out = np.zeros_like(f)
    c = tau**-alpha / gamma_fn(2.0 - alpha)
    for k in range(N):
        b = l1_weights(N - k, alpha).b
        out[k] = c * np.tensordot(b, f[k:], axes=1)
    return out


def power_moment(a: float, b: float, t: float, e: float) -> float:
    """``int_a^b (s - t)^e ds`` for ``t <= a < b`` and ``e > -1``."""
    return ((b - t) ** (e + 1.0) - (a - t) ** (e + 1.0)) / (e + 1.0)


def caputo_right(samples, alpha: float, tau: float, T: float) -> tuple[np.ndarray, np.ndarray]:
    """Right Caputo derivative at the nodes, two ways.

    Returns ``(quad, surrogate)``.  ``quad`` evaluates
    ``-(1/Gamma(1-alpha)) int_t^T (s-t)^{-alpha} f'(s) ds`` with ``f'``
    taken from second-order differences and integrated as a piecewise
    linear function against the exact kernel moments.  ``surrogate`` is
    :func:`right_surrogate`.  The leading minus sign makes both positive
    for decreasing data.
    """
    _check_alpha(alpha)
    f = np.asarray(samples, dtype=float)
    N = f.shape[0] - 1
    if N < 2:
        raise ValueError("need at least three samples")
    if abs(N * tau - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"samples do not end at T: N*tau={N * tau!r}, T={T!r}")
    df = np.gradient(f, tau, edge_order=2)
    t = np.arange(N + 1) * tau
    quad = np.zeros_like(f)
    g = 1.0 / gamma_fn(1.0 - alpha)
    for k in range(N):
        acc = 0.0
        for j in range(k, N):
            # df linear on [t_j, t_j+1]: df = df_j + (df_j+1 - df_j)(s - t_j)/tau
            m0 = power_moment(t[j], t[j + 1], t[k], -alpha)
            m1 = power_moment(t[j], t[j + 1], t[k], 1.0 - alpha) + (t[k] - t[j]) * m0
            acc += df[j] * m0 + (df[j + 1] - df[j]) * m1 / tau
        quad[k] = -g * acc
    return quad, right_surrogate(f, alpha, tau)


def summation_by_parts(u, Psi, alpha: float) -> tuple[float, float]:
    """Both sides of the discrete summation-by-parts identity.

    ``u`` holds ``u^0..u^N`` and ``Psi`` holds ``Psi_1..Psi_N`` (for
    instance cell integrals of a test function).  Returns ``(lhs, rhs)``
    with::

        lhs = sum_k Psi_k (u^k - ubar^{k-1})
        rhs = sum_k u^k sum_j a_j Psi_{k+j} + u^0 sum_k b^(k)_k Psi_k

    where ``a`` is :func:`interior_coefficients`.
    """
    u = np.asarray(u, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    N = u.shape[0] - 1
    if Psi.shape[0] != N:
        raise ValueError("Psi must have one entry per step")
    lhs = 0.0
    for k in range(1, N + 1):
        w = l1_weights(k, alpha).history_weights()
        lhs += Psi[k - 1] * (u[k] - np.dot(w, u[:k]))
    a = interior_coefficients(N, alpha)
    rhs = 0.0
    for k in range(1, N + 1):
        rhs += u[k] * np.dot(a[: N - k + 1], Psi[k - 1:])
    rhs += u[0] * sum(l1_weights(k, alpha).b[k] * Psi[k - 1] for k in range(1, N + 1))
    return float(lhs), float(rhs)
