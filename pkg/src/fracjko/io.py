"""Snapshots, run summaries and diagnostics tables.

Snapshot layout (little endian)::

    offset  size  field
    0       8     magic  b"FJKO0001"
    8       4     u32    d
    12      4     u32    n
    16      8     f64    L
    24      8     f64    time
    32      8*n^d f64    values, row-major
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .caputo import History, history_combination, l1_weights
from .jko import RunConfig, StepDiagnostics, Trajectory
from .spectral import Density, Grid

__all__ = [
    "MAGIC",
    "write_snapshot",
    "read_snapshot",
    "snapshot_name",
    "config_echo",
    "config_from_echo",
    "write_trajectory",
    "load_trajectory",
]

MAGIC = b"FJKO0001"
_HEADER = struct.Struct("<8sIIdd")
assert _HEADER.size == 32


def snapshot_name(k: int) -> str:
    return f"state_{k:05d}.fjko"


def write_snapshot(path, u: Density | np.ndarray, grid: Grid, time: float) -> None:
    vals = u.values if isinstance(u, Density) else np.asarray(u, dtype=float)
    if vals.shape != grid.shape:
        raise ValueError(f"values shape {vals.shape} does not match grid {grid.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, grid.d, grid.n, float(grid.L), float(time)))
        fh.write(np.ascontiguousarray(vals, dtype="<f8").tobytes(order="C"))


def read_snapshot(path) -> tuple[Grid, np.ndarray, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, d, n, L, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    grid = Grid(d, n, L)
    count = n**d
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise ValueError(f"{path}: expected {count} values, found {len(body) // 8}")
    vals = np.frombuffer(body, dtype="<f8").reshape(grid.shape).astype(float)
    return grid, vals, t


def config_echo(cfg: RunConfig) -> dict:
    return {
        "alpha": cfg.alpha,
        "beta": cfg.beta,
        "equation": cfg.equation,
        "s": cfg.s,
        "d": cfg.grid.d,
        "n": cfg.grid.n,
        "L": cfg.grid.L,
        "tau": cfg.tau,
        "T": cfg.T,
        "transport.M": cfg.M,
        "transport.tol": cfg.tol,
        "transport.max_iter": cfg.max_iter,
        "solver": cfg.solver,
        "seed": cfg.seed,
    }


def config_from_echo(e: dict) -> RunConfig:
    return RunConfig(alpha=e["alpha"], s=e["s"], tau=e["tau"], T=e["T"],
                     grid=Grid(e["d"], e["n"], e["L"]), beta=e["beta"], M=e["transport.M"],
                     tol=e["transport.tol"], max_iter=e["transport.max_iter"],
                     solver=e["solver"], seed=e["seed"])


def _clean(v):
    # JSON has no NaN; unavailable quantities become null
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return _clean(v.item())
    return v


def write_trajectory(traj: Trajectory, out_dir, extra: dict | None = None) -> Path:
    """Write snapshots, ``summary.json`` and ``diagnostics.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = traj.config.grid
    for k, u in enumerate(traj.states):
        write_snapshot(out / snapshot_name(k), u, g, k * traj.config.tau)
    rows = [{k: _clean(v) for k, v in d.record().items()} for d in traj.steps]
    summary = {
        "code_version": __version__,
        "config": config_echo(traj.config),
        "converged": traj.converged,
        "steps": rows,
    }
    if extra:
        summary.update(extra)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=StepDiagnostics.FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if v is None else v for k, v in r.items()})
    return out


def load_trajectory(out_dir) -> Trajectory:
    """Rebuild a trajectory from a run directory.

    States come from the snapshots; ``ubars`` are recomputed from the
    history with the L1 weights, so estimate checks work on loaded runs.
    """
    out = Path(out_dir)
    summary = json.loads((out / "summary.json").read_text())
    cfg = config_from_echo(summary["config"])
    states = []
    for k in range(cfg.N + 1):
        grid, vals, _ = read_snapshot(out / snapshot_name(k))
        if grid != cfg.grid:
            raise ValueError(f"snapshot {k} grid {grid} differs from config grid {cfg.grid}")
        states.append(Density(grid, vals))
    steps = []
    for r in summary["steps"]:
        r = {k: (float("nan") if v is None else v) for k, v in r.items()}
        steps.append(StepDiagnostics(**r))
    hist = History([], cfg.tau)
    ubars = []
    for k, u in enumerate(states):
        if k:
            ubars.append(history_combination(hist, l1_weights(k, cfg.alpha)))
        hist.append(u)
    return Trajectory(cfg, states, ubars, steps)
