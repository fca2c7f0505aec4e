"""The L1 memory weights and what they do to a history of densities.

A fractional time derivative remembers the whole past.  The L1 rule turns
that memory into a convex combination ``ubar`` of earlier states, and the
implicit step is then taken from ``ubar`` instead of the last state.
"""

import math

import numpy as np

from fracjko.caputo import History, caputo_left, history_combination, l1_weights
from fracjko.jko import bump
from fracjko.spectral import Grid

# Weights at step k = 5 for three orders.  Small alpha spreads the weight
# over the past; alpha near one concentrates it on the newest state.
for alpha in (0.3, 0.5, 0.8):
    w = l1_weights(5, alpha)
    print(f"alpha={alpha}: history weights (u^0 .. u^4) =",
          np.array2string(w.history_weights(), precision=4))

# The rule is exact for affine data and first order plus a half for t^2.
print("\nL1 error for t^2 at t=1, alpha=0.5")
exact = math.gamma(3) / math.gamma(2.5)
prev = None
for N in (16, 32, 64, 128):
    t = np.linspace(0, 1, N + 1)
    err = abs(caputo_left(t**2, 0.5, 1 / N)[-1] - exact)
    rate = "" if prev is None else f"  order {math.log2(prev / err):.2f}"
    print(f"  N={N:4d}  error {err:.3e}{rate}")
    prev = err

# ubar for three shifted bumps stays inside their pointwise envelope.
g = Grid(1, 128, 10.0)
states = [bump(g, width=0.6, center=c) for c in (3.0, 5.0, 7.0)]
ub = history_combination(History(states, 0.1), l1_weights(3, 0.5))
x, = g.coords()
print(f"\nubar from bumps at 3, 5, 7: mass {ub.mass:.12f}, centroid {g.integrate(x * ub.values):.4f}")
