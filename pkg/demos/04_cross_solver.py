"""JKO against the direct solvers.

For the linear equation the reference is an exact per-mode L1 step.  The
JKO scheme uses the mobility ``(z+1)^eps`` with ``eps = tau^{1-alpha/4}``,
so the two agree up to a mobility error that shrinks like ``eps``.  The
printed ratios hover near ``2^{1-alpha/4}`` rather than 2.
"""

from fracjko.jko import RunConfig, bump, interpolate, run
from fracjko.spectral import Grid, lp_norm

g = Grid(1, 64, 10.0)
u0 = bump(g, width=1.0, floor=0.05)
prev = None
for tau in (1e-2, 5e-3, 2.5e-3):
    cfg = RunConfig(alpha=0.5, s=0.25, tau=tau, T=0.05, grid=g, beta=None)
    a = interpolate(run(cfg, u0), cfg.T)
    b = interpolate(run(cfg.with_(solver="reference"), u0), cfg.T)
    gap = lp_norm(a.values - b.values, g, 1)
    ratio = "" if prev is None else f"  ratio {prev / gap:.3f}"
    print(f"tau={tau:.4f}  eps={cfg.mobility().epsilon:.4f}  L1 gap {gap:.3e}{ratio}")
    prev = gap
print(f"expected ratio 2^(1-alpha/4) = {2 ** 0.875:.3f}")
