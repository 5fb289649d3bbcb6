"""CSV serialization of solver artifacts.

Schemas (header rows are normative; stages are 1-based in files):

- atlas.csv:          t, z_index, z_0..z_{n-1}, x, a, prob
- values.csv:         t, z_index, x, v
- diagnostics.csv:    t, z_index, converged, iters, residual, last_change, stop_reason
- exploitability.csv: t, z_index, x, gap
- trajectory.csv:     t, kind{stat|emp}, z_0..z_{n-1}
- compare csv:        t, atlas_tv, value_max_diff

Floats are printed with 17 significant digits so a write/read round trip
is exact.
"""

from __future__ import annotations

import csv
from math import comb

import numpy as np

from .core import PolicyAtlas, StageTables, build_grid


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


class SchemaError(ValueError):
    """A CSV file does not match the documented artifact schema."""


def _check_header(got: list[str], expected: list[str], path) -> None:
    if got != expected:
        raise SchemaError(f"{path}: expected header {','.join(expected)!r}, "
                          f"found {','.join(got)!r}")


def _z_columns(n_types: int) -> list[str]:
    return [f"z_{i}" for i in range(n_types)]


def _count_z_columns(header: list[str]) -> int:
    return sum(1 for c in header if c.startswith("z_") and c[2:].isdigit())


def write_atlas_csv(path, atlas: PolicyAtlas) -> None:
    grid = atlas.grid
    header = ["t", "z_index", *_z_columns(grid.n_types), "x", "a", "prob"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(atlas.horizon):
            for g in range(grid.n_points):
                zcols = [_fmt(v) for v in grid.points[g]]
                for x in range(atlas.n_types):
                    for a in range(atlas.n_actions):
                        w.writerow([t + 1, g, *zcols, x, a,
                                    _fmt(atlas.probs[t, g, x, a])])


def _infer_resolution(points: np.ndarray) -> int:
    n_points, n_types = points.shape
    for m in range(1, 100_001):
        scaled = points * m
        if np.max(np.abs(scaled - np.rint(scaled))) < 1e-9:
            if comb(m + n_types - 1, n_types - 1) == n_points:
                return m
    raise SchemaError("could not infer a grid resolution from z columns")


def read_atlas_csv(path) -> PolicyAtlas:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        n_types = _count_z_columns(header)
        _check_header(header,
                      ["t", "z_index", *_z_columns(n_types), "x", "a", "prob"],
                      path)
        rows = [row for row in r]
    t_vals = np.array([int(row[0]) for row in rows])
    g_vals = np.array([int(row[1]) for row in rows])
    x_vals = np.array([int(row[2 + n_types]) for row in rows])
    a_vals = np.array([int(row[3 + n_types]) for row in rows])
    probs = np.array([float(row[4 + n_types]) for row in rows])

    horizon = int(t_vals.max())
    n_points = int(g_vals.max()) + 1
    n_x = int(x_vals.max()) + 1
    n_a = int(a_vals.max()) + 1

    points = np.zeros((n_points, n_types))
    for row in rows:
        points[int(row[1])] = [float(v) for v in row[2:2 + n_types]]
    grid = build_grid(n_types, _infer_resolution(points))
    if not np.allclose(grid.points, points, atol=1e-12):
        raise SchemaError(f"{path}: z columns are not a canonical grid")

    table = np.zeros((horizon, n_points, n_x, n_a))
    table[t_vals - 1, g_vals, x_vals, a_vals] = probs
    return PolicyAtlas(grid=grid, probs=table)


def write_values_csv(path, tables: list[StageTables]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "z_index", "x", "v"])
        for t, tab in enumerate(tables):
            n_g, n_x = tab.v.shape
            for g in range(n_g):
                for x in range(n_x):
                    w.writerow([t + 1, g, x, _fmt(tab.v[g, x])])


def read_values_csv(path) -> np.ndarray:
    """Values as an array of shape (horizon, n_points, n_types)."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        _check_header(next(r), ["t", "z_index", "x", "v"], path)
        rows = [(int(t), int(g), int(x), float(v)) for t, g, x, v in r]
    horizon = max(t for t, _, _, _ in rows)
    n_g = max(g for _, g, _, _ in rows) + 1
    n_x = max(x for _, _, x, _ in rows) + 1
    out = np.zeros((horizon, n_g, n_x))
    for t, g, x, v in rows:
        out[t - 1, g, x] = v
    return out


def write_diagnostics_csv(path, rows) -> None:
    """Rows are exact-solver or RL stage diagnostics; missing fields are
    filled with their natural defaults so both share one schema."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "z_index", "converged", "iters", "residual",
                    "last_change", "stop_reason", "alt_fixed_points"])
        for d in rows:
            w.writerow([
                d.stage + 1,
                d.z_index,
                int(getattr(d, "converged", True)),
                getattr(d, "iters", ""),
                _fmt(d.residual),
                _fmt(getattr(d, "last_change", 0.0)),
                getattr(d, "stop_reason", ""),
                getattr(d, "alt_fixed_points", 0),
            ])


def write_exploitability_csv(path, report) -> None:
    horizon, n_g, n_x = report.gaps.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "z_index", "x", "gap"])
        for t in range(horizon):
            for g in range(n_g):
                for x in range(n_x):
                    w.writerow([t + 1, g, x, _fmt(report.gaps[t, g, x])])


def write_trajectory_csv(path, statistical: np.ndarray | None,
                         empirical: np.ndarray | None) -> None:
    if statistical is None and empirical is None:
        raise ValueError("nothing to write")
    some = statistical if statistical is not None else empirical
    n_types = some.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "kind", *_z_columns(n_types)])
        for kind, traj in (("stat", statistical), ("emp", empirical)):
            if traj is None:
                continue
            for t in range(traj.shape[0]):
                w.writerow([t + 1, kind, *(_fmt(v) for v in traj[t])])


def read_trajectory_csv(path):
    """Returns ``(statistical, empirical)``; either may be None."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        n_types = _count_z_columns(header)
        _check_header(header, ["t", "kind", *_z_columns(n_types)], path)
        stat_rows, emp_rows = {}, {}
        for row in r:
            dest = stat_rows if row[1] == "stat" else emp_rows
            dest[int(row[0])] = [float(v) for v in row[2:]]

    def build(rows):
        if not rows:
            return None
        horizon = max(rows)
        out = np.zeros((horizon, n_types))
        for t, z in rows.items():
            out[t - 1] = z
        return out

    return build(stat_rows), build(emp_rows)


def write_compare_csv(path, atlas_tv: np.ndarray,
                      value_max_diff: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "atlas_tv", "value_max_diff"])
        for t in range(len(atlas_tv)):
            w.writerow([t + 1, _fmt(atlas_tv[t]), _fmt(value_max_diff[t])])
