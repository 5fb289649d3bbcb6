"""Ground-truth solver: backward recursion with a per-stage fixed point.

For each stage t (from the last to the first) and each grid mean-field
state z, the stage equilibrium prescription solves

    gamma(.|x) in argmax over action distributions of E[Q(z, x, A, gamma)],

where Q is the one-stage reward plus the discounted interpolated
continuation value at z' = phi(z, gamma).  The objective is linear in each
row of gamma, so strict maximizers sit at vertices and interior (mixed)
rows occur exactly at indifference.  The solver runs damped best-response
iteration with a per-row step size that halves whenever that row's best
response flips (turning the oscillation around an indifference point into
a bisection), then polishes any still-mixed rows by direct bisection on
the indifference condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (PolicyAtlas, SimplexGrid, StageTables,
                   interpolate_values)
from .envs import EnvModel
from . import rng as rngmod

_BETA_MIN = 2.0 ** -60
_QUIET_ITERS_TO_REGROW = 3
# Once the damped iteration settles this far, the bisection polish pins the
# remaining gap to machine precision far faster than further damping would.
_POLISH_HANDOFF = 1e-3
_POLISH_SWEEPS = 12
_BISECT_ITERS = 64


@dataclass(frozen=True)
class FixedPointConfig:
    """Stopping rules for the per-stage fixed-point iteration."""

    max_iters: int = 500
    tol: float = 1e-8
    damping: float = 1.0
    tie_tolerance: float = 1e-9
    multi_start: int = 0  # extra random restarts probing for other equilibria

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0.0:
            raise ValueError("tol must be > 0")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError(f"damping must be in (0, 1], got {self.damping}")
        if self.tie_tolerance < 0.0:
            raise ValueError("tie_tolerance must be >= 0")
        if self.multi_start < 0:
            raise ValueError("multi_start must be >= 0")


class StageSolveError(RuntimeError):
    """A stage computation failed; carries (stage, grid index) context."""


class _StageEvaluator:
    """Q(., ., gamma) at a fixed (stage, z): precomputes everything that
    does not depend on gamma.  The fixed-point loop calls this thousands of
    times per grid point, so the two-type case gets an inlined linear
    interpolation instead of the general barycentric path."""

    def __init__(self, z, v_next, grid, env):
        z = np.asarray(z, dtype=np.float64)
        self.kernel = env.kernel_tensor(z)
        row_sums = self.kernel.sum(axis=2)
        if np.any(np.abs(row_sums - 1.0) > 1e-9):
            worst = float(np.abs(row_sums - 1.0).max())
            raise ValueError(
                f"kernel rows must sum to 1 (max deviation {worst:g})")
        self.reward = env.reward_matrix(z)
        self.flow = z[:, None, None] * self.kernel  # z(x) * tau(y|x,a,z)
        self.discount = env.discount
        self.v_next = np.asarray(v_next, dtype=np.float64)
        self.grid = grid
        # On a two-type grid the canonical order makes index g the point
        # with z(1) = g / M, so interpolation reduces to a 1-D lookup.
        self.two_types = grid.n_types == 2

    def z_next(self, gamma: np.ndarray) -> np.ndarray:
        return np.tensordot(gamma, self.flow, axes=([0, 1], [0, 1]))

    def value_at(self, z_next: np.ndarray) -> np.ndarray:
        if self.two_types:
            m = self.grid.resolution
            u = min(max(m * z_next[1], 0.0), float(m))
            i = min(int(u), m - 1)
            frac = u - i
            return (1.0 - frac) * self.v_next[i] + frac * self.v_next[i + 1]
        return interpolate_values(self.v_next, z_next, self.grid)

    def q_of(self, gamma: np.ndarray) -> np.ndarray:
        v_bar = self.value_at(self.z_next(gamma))
        return self.reward + self.discount * (self.kernel @ v_bar)


def stage_q(z: np.ndarray, gamma: np.ndarray, v_next: np.ndarray,
            grid: SimplexGrid, env: EnvModel) -> np.ndarray:
    """One-stage action values against the flow induced by gamma.

    Q[x, a] = R(x, a, z) + discount * sum_y kernel(y|x, a, z) * v'(z', y)
    with z' = phi(z, gamma) and v' interpolated from the finalized
    next-stage grid table ``v_next``.
    """
    return _StageEvaluator(z, v_next, grid, env).q_of(np.asarray(gamma, float))


def best_response(q_slice: np.ndarray, tie_tolerance: float) -> np.ndarray:
    """Pure argmax per type; mass split uniformly over actions within
    ``tie_tolerance`` of the row maximum."""
    q = np.asarray(q_slice, dtype=np.float64)
    top = q.max(axis=1, keepdims=True)
    support = q >= top - tie_tolerance
    return support / support.sum(axis=1, keepdims=True)


def eq_residual(q_slice: np.ndarray, gamma: np.ndarray) -> float:
    """How far gamma is from best-responding to q: the largest per-type gap
    max_a q[x, a] - E_{gamma(.|x)} q[x, .]."""
    q = np.asarray(q_slice, dtype=np.float64)
    return float((q.max(axis=1) - (gamma * q).sum(axis=1)).max())


@dataclass(frozen=True)
class StageFixedPoint:
    gamma: np.ndarray
    q: np.ndarray
    converged: bool
    iters: int
    residual: float
    stop_reason: str  # "tol", "handoff" or "max_iters"
    last_change: float = 0.0
    alt_fixed_points: int = 0


def _br_iteration(ev: _StageEvaluator, cfg, gamma0):
    """Damped best-response loop with per-row adaptive step size.

    A row whose best response flips gets its step halved; a row that has
    flipped only transiently regrows its step after a few quiet
    iterations.  Rows that keep flipping are oscillating around an
    indifference point, so their step decays monotonically and the
    iteration bisects onto it.
    """
    gamma = np.array(gamma0, dtype=np.float64, copy=True)
    n_types = gamma.shape[0]
    beta = np.full(n_types, cfg.damping)
    quiet = np.zeros(n_types, dtype=np.int64)
    flips = np.zeros(n_types, dtype=np.int64)
    prev_br = None
    stop_reason = "max_iters"
    iters = cfg.max_iters
    change = np.inf
    handoff = max(cfg.tol, _POLISH_HANDOFF)
    for it in range(1, cfg.max_iters + 1):
        q = ev.q_of(gamma)
        br = best_response(q, cfg.tie_tolerance)
        if prev_br is not None:
            flipped = np.any(br != prev_br, axis=1)
            flips[flipped] += 1
            beta[flipped] = np.maximum(beta[flipped] * 0.5, _BETA_MIN)
            quiet[flipped] = 0
            quiet[~flipped] += 1
            regrow = (quiet >= _QUIET_ITERS_TO_REGROW) & (flips <= 2)
            beta[regrow] = np.minimum(beta[regrow] * 2.0, cfg.damping)
        new_gamma = gamma + beta[:, None] * (br - gamma)
        change = float(np.abs(new_gamma - gamma).max())
        gamma = new_gamma
        prev_br = br
        if change < handoff:
            stop_reason = "tol" if change < cfg.tol else "handoff"
            iters = it
            break
    return gamma, iters, stop_reason, change


def _polish(ev: _StageEvaluator, gamma, cfg):
    """Drive each row's best-response gap below tol.

    Rows with a strict argmax are snapped to it; rows that are indifferent
    between their top two actions are bisected on the mixing weight, which
    pins the indifference point the damped loop can only hover around.
    """
    gamma = np.array(gamma, dtype=np.float64, copy=True)

    def row_gap(g, x, a_hi, a_lo):
        q = ev.q_of(g)
        return q[x, a_hi] - q[x, a_lo]

    for _ in range(_POLISH_SWEEPS):
        q = ev.q_of(gamma)
        gaps = q.max(axis=1) - (gamma * q).sum(axis=1)
        if gaps.max() <= cfg.tol:
            break
        x = int(np.argmax(gaps))
        order = np.argsort(q[x])
        a_hi, a_lo = int(order[-1]), int(order[-2])

        def with_weight(w):
            g = gamma.copy()
            g[x] = 0.0
            g[x, a_hi] = w
            g[x, a_lo] = 1.0 - w
            return g

        if row_gap(with_weight(1.0), x, a_hi, a_lo) >= 0.0:
            gamma = with_weight(1.0)  # a_hi stays best even when all play it
        elif row_gap(with_weight(0.0), x, a_hi, a_lo) <= 0.0:
            gamma = with_weight(0.0)
        else:
            lo, hi = 0.0, 1.0  # gap > 0 at lo, < 0 at hi
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                if row_gap(with_weight(mid), x, a_hi, a_lo) > 0.0:
                    lo = mid
                else:
                    hi = mid
            gamma = with_weight(0.5 * (lo + hi))
    return gamma


def solve_stage_fixed_point(z: np.ndarray, v_next: np.ndarray,
                            grid: SimplexGrid, env: EnvModel,
                            cfg: FixedPointConfig,
                            seed: int = 0, stage: int = 0,
                            grid_index: int = 0) -> StageFixedPoint:
    """Equilibrium prescription at one (stage, grid point).

    Starts from the uniform prescription.  Non-convergence is not an
    error: the returned flag and residual report solution quality, and
    ``backward_solve`` surfaces them in its diagnostics.
    """
    n_x, n_a = env.n_types, env.n_actions
    ev = _StageEvaluator(z, v_next, grid, env)
    uniform = np.full((n_x, n_a), 1.0 / n_a)
    gamma, iters, stop_reason, change = _br_iteration(ev, cfg, uniform)

    q = ev.q_of(gamma)
    residual = eq_residual(q, gamma)
    if residual > cfg.tol:
        gamma = _polish(ev, gamma, cfg)
        q = ev.q_of(gamma)
        residual = eq_residual(q, gamma)

    alt = 0
    if cfg.multi_start > 0:
        stream = rngmod.stream(seed, rngmod.MULTISTART, stage, grid_index)
        for _ in range(cfg.multi_start):
            raw = stream.random((n_x, n_a)) + 1e-3
            g0 = raw / raw.sum(axis=1, keepdims=True)
            other, _, _, _ = _br_iteration(ev, cfg, g0)
            other = _polish(ev, other, cfg)
            if np.abs(other - gamma).max() > 100.0 * cfg.tol:
                alt += 1

    return StageFixedPoint(
        gamma=gamma, q=q,
        converged=bool(residual <= 10.0 * cfg.tol),
        iters=iters, residual=residual, stop_reason=stop_reason,
        last_change=change, alt_fixed_points=alt,
    )


@dataclass(frozen=True)
class StageDiagnostic:
    stage: int
    z_index: int
    converged: bool
    iters: int
    residual: float
    stop_reason: str
    last_change: float = 0.0
    alt_fixed_points: int = 0


@dataclass(frozen=True)
class SolveDiagnostics:
    rows: list[StageDiagnostic] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return all(r.converged for r in self.rows)

    @property
    def worst_residual(self) -> float:
        return max((r.residual for r in self.rows), default=0.0)

    def non_converged(self) -> list[StageDiagnostic]:
        return [r for r in self.rows if not r.converged]


def backward_solve(env: EnvModel, grid: SimplexGrid, cfg: FixedPointConfig,
                   seed: int = 0, threads: int = 1):
    """Solve all stages from the horizon backward.

    Returns ``(atlas, tables, diagnostics)`` where ``tables[t]`` holds the
    finalized Q and V grids of stage t and ``atlas`` the equilibrium
    prescriptions.  The terminal continuation value is identically zero.
    Stages run sequentially; within a stage, grid points are independent
    and solved across ``threads`` workers (the result does not depend on
    the thread count).
    """
    n_g, n_x, n_a, horizon = grid.n_points, env.n_types, env.n_actions, env.horizon
    atlas_probs = np.empty((horizon, n_g, n_x, n_a))
    tables: list[StageTables | None] = [None] * horizon
    diag_rows: list[StageDiagnostic] = []

    v_next = np.zeros((n_g, n_x))
    for t in range(horizon - 1, -1, -1):
        def solve_point(g, t=t, v_next=v_next):
            try:
                return solve_stage_fixed_point(
                    grid.points[g], v_next, grid, env, cfg,
                    seed=seed, stage=t, grid_index=g)
            except Exception as exc:
                raise StageSolveError(
                    f"stage {t}, grid point {g}: {exc}") from exc

        results = _map_grid(solve_point, n_g, threads)
        q_t = np.empty((n_g, n_x, n_a))
        v_t = np.empty((n_g, n_x))
        for g, res in enumerate(results):
            atlas_probs[t, g] = res.gamma
            q_t[g] = res.q
            v_t[g] = (res.gamma * res.q).sum(axis=1)
            diag_rows.append(StageDiagnostic(
                stage=t, z_index=g, converged=res.converged,
                iters=res.iters, residual=res.residual,
                stop_reason=res.stop_reason, last_change=res.last_change,
                alt_fixed_points=res.alt_fixed_points))
        tables[t] = StageTables(q=q_t, v=v_t)
        v_next = tables[t].v

    atlas = PolicyAtlas(grid=grid, probs=atlas_probs)
    return atlas, tables, SolveDiagnostics(rows=diag_rows)


def _map_grid(fn, n_points: int, threads: int) -> list:
    """Apply fn to every grid index, optionally on a thread pool; results
    come back in grid order either way."""
    if threads <= 1 or n_points <= 1:
        return [fn(g) for g in range(n_points)]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_points)))
