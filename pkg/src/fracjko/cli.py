"""Command-line front end.

::

    fracjko run CONFIG [CONFIG ...] [-o OUT] [--solver {jko,reference}] [--jobs K]
    fracjko check RUN_DIR
    fracjko compare RUN_DIR_A RUN_DIR_B [-o TABLE.csv]

Exit codes: 0 success (all steps converged / all checks passed), 2 for
non-converged steps or failed checks, 1 for errors.

Config files are flat ``key = value`` text with ``#`` comments.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .io import load_trajectory, write_trajectory
from .jko import RunConfig, bump, interpolate, run
from .spectral import Grid, lp_norm, sobolev_norm_sq
from .verify import bump_test_function, check_estimates, weak_residual

log = logging.getLogger("fracjko")

EXIT_OK, EXIT_ERROR, EXIT_NONCONVERGED = 0, 1, 2

_FLOAT_KEYS = ("alpha", "beta", "s", "L", "tau", "T", "transport.tol", "init.width", "init.floor")
_INT_KEYS = ("d", "n", "transport.M", "transport.max_iter", "seed")
_STR_KEYS = ("equation", "solver")
_REQUIRED = ("alpha", "s", "d", "n", "L", "tau", "T")


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict:
    """Parse ``key = value`` lines into typed values; unknown keys are errors."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        try:
            if key in _FLOAT_KEYS:
                out[key] = float(val)
            elif key in _INT_KEYS:
                out[key] = int(val)
            elif key in _STR_KEYS:
                out[key] = val
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value for {key!r}: {val!r}") from None
    missing = [k for k in _REQUIRED if k not in out]
    if missing:
        raise ConfigError(f"missing config key(s): {', '.join(missing)}")
    eq = out.get("equation", "nonlinear")
    if eq not in ("linear", "nonlinear"):
        raise ConfigError(f"bad value for 'equation': {eq!r}")
    if eq == "linear" and "beta" in out:
        raise ConfigError("'beta' and 'equation=linear' are mutually exclusive")
    if eq == "nonlinear" and "beta" not in out:
        raise ConfigError("missing config key 'beta' (or set equation=linear)")
    return out


def build_config(values: dict, solver: str | None = None) -> RunConfig:
    d, s = values["d"], values["s"]
    if not 0.0 < s < min(1.0, d / 2.0):
        raise ConfigError(f"s must satisfy s < min(1, d/2); got s={s}, d={d}")
    try:
        return RunConfig(
            alpha=values["alpha"], s=s, tau=values["tau"], T=values["T"],
            grid=Grid(d, values["n"], values["L"]),
            beta=None if values.get("equation") == "linear" else values["beta"],
            M=values.get("transport.M", 16), tol=values.get("transport.tol", 1e-8),
            max_iter=values.get("transport.max_iter", 20000),
            solver=solver or values.get("solver", "jko"), seed=values.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path, solver: str | None = None) -> tuple[RunConfig, dict]:
    values = parse_config(Path(path).read_text())
    return build_config(values, solver), values


def _run_one(args) -> int:
    path, out, solver = args
    cfg, values = load_config(path, solver)
    u0 = bump(cfg.grid, width=values.get("init.width"), floor=values.get("init.floor", 0.0))
    traj = run(cfg, u0, progress=lambda d: log.info("step %d  t=%.4g  w2m=%.4g  converged=%s",
                                                    d.step, d.time, d.w2m, d.converged))
    write_trajectory(traj, out)
    return EXIT_OK if traj.converged else EXIT_NONCONVERGED


def cmd_run(configs, out, solver=None, jobs: int = 1) -> int:
    configs = [Path(c) for c in configs]
    if len(configs) == 1:
        tasks = [(configs[0], Path(out), solver)]
    else:
        tasks = [(c, Path(out) / c.stem, solver) for c in configs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            codes = list(ex.map(_run_one, tasks))
    else:
        codes = [_run_one(t) for t in tasks]
    return max(codes)


def cmd_check(traj_dir, samples: int = 100) -> int:
    traj = load_trajectory(traj_dir)
    rep = check_estimates(traj, samples=samples)
    phi = bump_test_function(traj.config.grid)
    residuals = {f"psi_m{m}": weak_residual(traj, phi, m) for m in (1, 2, 3)}
    report = rep.as_dict()
    report["weak_residual"] = residuals
    Path(traj_dir, "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for c in rep.checks:
        print(c.line())
    for k, v in residuals.items():
        print(f"weak residual {k}: {v:.6e}")
    return EXIT_OK if rep.passed else EXIT_NONCONVERGED


def _matched(u, grid: Grid, target: Grid) -> np.ndarray:
    if grid == target:
        return u
    if grid.d != target.d or grid.L != target.L or grid.n % target.n:
        raise ValueError(f"grids {grid} and {target} are not nested")
    f = grid.n // target.n
    return u[(slice(None, None, f),) * grid.d]


def cmd_compare(dir_a, dir_b, out_csv=None) -> int:
    a, b = load_trajectory(dir_a), load_trajectory(dir_b)
    ga, gb = a.config.grid, b.config.grid
    g = ga if ga.n <= gb.n else gb
    T = min(a.config.T, b.config.T)
    times = sorted({round(t, 12) for t in np.concatenate([a.times(), b.times()]) if t <= T + 1e-12})
    s = a.config.s
    rows = []
    for t in times:
        ua = _matched(interpolate(a, min(t, a.config.T)).values, ga, g)
        ub = _matched(interpolate(b, min(t, b.config.T)).values, gb, g)
        diff = ua - ub
        rows.append({"time": t, "l1": lp_norm(diff, g, 1), "l2": lp_norm(diff, g, 2),
                     "hms": float(np.sqrt(sobolev_norm_sq(diff, g, -s)))})
    fh = open(out_csv, "w", newline="") if out_csv else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=["time", "l1", "l2", "hms"])
        w.writeheader()
        w.writerows(rows)
    finally:
        if out_csv:
            fh.close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracjko", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run the scheme and write snapshots")
    r.add_argument("configs", nargs="+")
    r.add_argument("-o", "--out", default="out")
    r.add_argument("--solver", choices=("jko", "reference"))
    r.add_argument("--jobs", type=int, default=1)
    c = sub.add_parser("check", help="evaluate the discrete estimates on a run")
    c.add_argument("run_dir")
    c.add_argument("--samples", type=int, default=100)
    m = sub.add_parser("compare", help="distance table between two runs")
    m.add_argument("dir_a")
    m.add_argument("dir_b")
    m.add_argument("-o", "--out")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "run":
            return cmd_run(args.configs, args.out, args.solver, args.jobs)
        if args.cmd == "check":
            return cmd_check(args.run_dir, args.samples)
        return cmd_compare(args.dir_a, args.dir_b, args.out)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
