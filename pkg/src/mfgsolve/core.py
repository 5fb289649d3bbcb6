"""Shared mean-field machinery.

Conventions used throughout the package:

- A *mean-field state* is a 1-D float64 probability vector over the type
  space (entries >= 0, summing to 1 within ``SUM_ATOL``).
- A *prescription* is a row-stochastic ``(n_types, n_actions)`` matrix:
  row ``x`` is the action distribution prescribed to agents of type ``x``.
- A *simplex grid* enumerates every lattice point ``c / M`` of the simplex
  (``c`` an integer composition of ``M``) in descending lexicographic order
  of the compositions, so tables built on a grid serialize deterministically.
- Stage indices are 0-based in code; the CSV artifacts use 1-based stages.

All containers are immutable after construction (arrays are marked
read-only), so every operation here is a pure function that is safe to call
concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

SUM_ATOL = 1e-12

# Entries of a propagated mean field may round just below zero; deficits
# smaller than this are clamped, larger ones are treated as errors.
NEG_CLAMP = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


def mean_field(probs, *, atol: float = SUM_ATOL) -> np.ndarray:
    """Validate and freeze a probability vector over types."""
    z = np.asarray(probs, dtype=np.float64)
    if z.ndim != 1 or z.size < 2:
        raise ValueError("mean-field state must be a vector with >= 2 entries")
    if np.any(z < 0.0):
        raise ValueError(f"mean-field state has negative entries: {z}")
    total = float(z.sum())
    if abs(total - 1.0) > atol:
        raise ValueError(f"mean-field state sums to {total!r}, not 1")
    return _frozen(z)


def prescription(probs, *, atol: float = SUM_ATOL) -> np.ndarray:
    """Validate and freeze a row-stochastic (type, action) matrix."""
    g = np.asarray(probs, dtype=np.float64)
    if g.ndim != 2:
        raise ValueError("prescription must be a (n_types, n_actions) matrix")
    if np.any(g < 0.0) or np.any(g > 1.0):
        raise ValueError("prescription entries must lie in [0, 1]")
    sums = g.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > atol):
        raise ValueError(f"prescription rows must sum to 1, got {sums}")
    return _frozen(g)


def _compositions(total: int, parts: int):
    """All integer compositions of ``total`` into ``parts`` nonnegative
    parts, in descending lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head, *tail)


@dataclass(frozen=True)
class SimplexGrid:
    """Lattice discretization of the probability simplex at resolution M."""

    n_types: int
    resolution: int
    compositions: np.ndarray  # (n_points, n_types) int64, rows sum to M
    points: np.ndarray        # (n_points, n_types) float64, rows sum to 1
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lookup = {tuple(int(c) for c in row): i
                  for i, row in enumerate(self.compositions)}
        object.__setattr__(self, "_index", lookup)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def index_of(self, composition) -> int:
        """Grid index of an integer composition; KeyError if off-lattice."""
        return self._index[tuple(int(c) for c in composition)]


def build_grid(n_types: int, resolution: int) -> SimplexGrid:
    """Enumerate all C(M + n - 1, n - 1) simplex lattice points.

    Points appear in descending lexicographic order of their integer
    compositions, e.g. (2, 2) -> (1, 0), (0.5, 0.5), (0, 1).
    """
    if n_types < 2:
        raise ValueError(f"n_types must be >= 2, got {n_types}")
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    comps = np.array(list(_compositions(resolution, n_types)), dtype=np.int64)
    assert comps.shape[0] == comb(resolution + n_types - 1, n_types - 1)
    points = comps.astype(np.float64) / float(resolution)
    return SimplexGrid(n_types=n_types, resolution=resolution,
                       compositions=_frozen_int(comps), points=_frozen(points))


def _frozen_int(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.int64)
    arr.flags.writeable = False
    return arr


def propagate_mean_field(z: np.ndarray, gamma: np.ndarray,
                         kernel: np.ndarray) -> np.ndarray:
    """One deterministic forward step of the population distribution.

    ``kernel[x, a, y]`` is the probability that type ``x`` taking action
    ``a`` lands on type ``y`` (it may already incorporate the current mean
    field).  Returns z'(y) = sum_x sum_a z(x) gamma(a|x) kernel(x, a, y).
    """
    z = np.asarray(z, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    row_sums = kernel.sum(axis=2)
    if np.any(np.abs(row_sums - 1.0) > 1e-9):
        worst = float(np.abs(row_sums - 1.0).max())
        raise ValueError(f"kernel rows must sum to 1 (max deviation {worst:g})")
    out = np.einsum("x,xa,xay->y", z, gamma, kernel)
    if np.any(out < 0.0):
        deficit = -float(out.min())
        if deficit > NEG_CLAMP:
            raise ValueError(f"propagated mean field has entry {-deficit:g}")
        out = np.clip(out, 0.0, None)
        out = out / out.sum()
    return _frozen(out)


def _grid_snap(z: np.ndarray, grid: SimplexGrid):
    """Index of the grid point equal to z up to lattice rounding, or None."""
    scaled = z * grid.resolution
    comp = np.rint(scaled)
    if np.max(np.abs(scaled - comp)) > 5e-12:
        return None
    if int(comp.sum()) != grid.resolution:
        return None
    try:
        return grid.index_of(comp)
    except KeyError:
        return None


def interpolation_weights(z: np.ndarray, grid: SimplexGrid):
    """Barycentric weights of z in the simplicial (Freudenthal) subdivision
    of the grid lattice.

    Returns ``(indices, weights)`` with nonnegative weights summing to 1
    whose weighted combination of grid points reproduces z exactly.  For two
    types this is linear interpolation between the bracketing grid points.
    """
    z = np.asarray(z, dtype=np.float64)
    snap = _grid_snap(z, grid)
    if snap is not None:
        return (np.array([snap], dtype=np.int64),
                np.array([1.0], dtype=np.float64))

    m = grid.resolution
    n = grid.n_types
    # Staircase coordinates u[j] = M * sum(z[j+1:]) are nonincreasing; the
    # cube-lattice Freudenthal cell containing u maps back to a lattice
    # simplex containing z.
    u = m * np.cumsum(z[::-1])[::-1]
    u = np.clip(u[1:], 0.0, float(m))
    base = np.floor(u)
    frac = u - base
    order = np.argsort(-frac, kind="stable")  # ties resolved by lower index

    d = n - 1
    raw_w = np.empty(d + 1)
    sorted_frac = frac[order]
    raw_w[0] = 1.0 - sorted_frac[0]
    raw_w[1:d] = sorted_frac[:-1] - sorted_frac[1:]
    raw_w[d] = sorted_frac[-1]

    indices = []
    weights = []
    vertex = base.astype(np.int64)
    for rank in range(d + 1):
        if rank > 0:
            vertex = vertex.copy()
            vertex[order[rank - 1]] += 1
        w = float(raw_w[rank])
        if w <= 0.0:
            continue
        comp = np.empty(n, dtype=np.int64)
        comp[0] = m - vertex[0]
        comp[1:n - 1] = vertex[:-1] - vertex[1:]
        comp[n - 1] = vertex[-1]
        indices.append(grid.index_of(comp))
        weights.append(w)
    return np.array(indices, dtype=np.int64), np.array(weights, dtype=np.float64)


def interpolate_value(v_table: np.ndarray, z: np.ndarray, x: int,
                      grid: SimplexGrid) -> float:
    """Piecewise-linear estimate of v(z, x) from a (grid, type) table."""
    idx, w = interpolation_weights(z, grid)
    return float(w @ v_table[idx, x])


def interpolate_values(v_table: np.ndarray, z: np.ndarray,
                       grid: SimplexGrid) -> np.ndarray:
    """Vector version of :func:`interpolate_value` over all types."""
    idx, w = interpolation_weights(z, grid)
    return w @ v_table[idx, :]


def softmax_prescription(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a (type, action) logit matrix.

    Invariant under adding a per-row constant; rows of the result sum to 1.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    shifted = logits - logits.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    return prescription(expd / expd.sum(axis=1, keepdims=True))


@dataclass(frozen=True)
class PolicyAtlas:
    """Time-indexed policy table: one prescription per (stage, grid point).

    ``probs`` has shape (horizon, n_points, n_types, n_actions); each
    ``probs[t, g]`` is row-stochastic.
    """

    grid: SimplexGrid
    probs: np.ndarray

    def __post_init__(self):
        p = np.ascontiguousarray(self.probs, dtype=np.float64)
        if p.ndim != 4 or p.shape[1] != self.grid.n_points:
            raise ValueError(f"atlas shape {p.shape} does not match grid")
        sums = p.sum(axis=3)
        if np.any(p < -SUM_ATOL) or np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("atlas prescriptions must be row-stochastic")
        object.__setattr__(self, "probs", _frozen(p))

    @property
    def horizon(self) -> int:
        return self.probs.shape[0]

    @property
    def n_types(self) -> int:
        return self.probs.shape[2]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[3]

    def stage(self, t: int) -> np.ndarray:
        """All grid prescriptions for 0-based stage t."""
        return self.probs[t]

    def prescription_at(self, t: int, z: np.ndarray) -> np.ndarray:
        """Policy at an arbitrary mean-field state: the weight-interpolated
        blend of neighboring grid prescriptions, rows renormalized."""
        idx, w = interpolation_weights(z, grid=self.grid)
        mixed = np.einsum("g,gxa->xa", w, self.probs[t, idx])
        return prescription(mixed / mixed.sum(axis=1, keepdims=True))


@dataclass(frozen=True)
class StageTables:
    """Finalized per-stage action values q[g, x, a] and values v[g, x]."""

    q: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen(self.q))
        object.__setattr__(self, "v", _frozen(self.v))
        if self.q.shape[:2] != self.v.shape:
            raise ValueError("q and v tables disagree on (grid, type) shape")
