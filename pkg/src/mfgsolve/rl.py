"""Model-free solver: batched Expected Sarsa plus softmax policy gradient.

Mirrors the exact solver's backward recursion, but each stage/grid-point
fixed point is found without the kernel: action values are estimated from
sampled transitions with the running average

    Q[x, a] <- (1 - alpha) * Q[x, a] + alpha * (r + discount * v'(z', x')),

and the prescription is updated by gradient ascent on the expected value
of Q under a softmax policy.  The next mean-field state z' inside a stage
uses the exact kernel when the environment has one, otherwise an empirical
one-step pushforward estimated from samples.

Random streams are keyed by (seed, stage, grid index, iteration, pair), so
grid points can be solved concurrently and in any order with bit-identical
results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from . import rng as rngmod
from .core import (PolicyAtlas, SimplexGrid, StageTables, interpolate_values,
                   propagate_mean_field, softmax_prescription)
from .envs import EnvModel


@dataclass(frozen=True)
class RlConfig:
    batch_size: int = 2000     # Sarsa sweeps per policy iteration
    policy_iters: int = 50     # fixed-point iterations per (stage, z)
    sarsa_alpha: float = 0.1
    pg_steps: int = 100        # gradient steps per policy-gradient call
    pg_lr: float = 0.5
    seed: int = 0
    q_init: float = 0.0
    # Read the Q estimate as the mean of the iterates over the second half
    # of the batch instead of the last iterate; same fixed point, far less
    # sampling noise.  The recursion itself is unchanged.
    tail_average: bool = True
    flow_samples: int = 10_000  # per-pair draws for the kernel-free flow estimate
    change_tol: float = 0.05   # last-iteration policy movement counted as settled
    check_ascent: bool = False  # assert J never decreases inside PG calls

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.policy_iters < 1:
            raise ValueError("policy_iters must be >= 1")
        if not 0.0 < self.sarsa_alpha <= 1.0:
            raise ValueError(f"sarsa_alpha must be in (0, 1], "
                             f"got {self.sarsa_alpha}")
        if self.pg_lr <= 0.0:
            raise ValueError("pg_lr must be > 0")
        if self.pg_steps < 0:
            raise ValueError("pg_steps must be >= 0")
        if self.flow_samples < 1:
            raise ValueError("flow_samples must be >= 1")
        if self.change_tol <= 0.0:
            raise ValueError("change_tol must be > 0")


def pg_objective(logits: np.ndarray, q_slice: np.ndarray) -> float:
    """J(logits): expected q under the row-softmax policy, summed over types."""
    p = softmax_prescription(logits)
    return float((p * q_slice).sum())


def pg_gradient(logits: np.ndarray, q_slice: np.ndarray) -> np.ndarray:
    """Exact gradient of :func:`pg_objective` in the logits.

    dJ/dlogits[x, a] = p[x, a] * (q[x, a] - sum_a' p[x, a'] q[x, a']).
    """
    p = softmax_prescription(logits)
    row_value = (p * q_slice).sum(axis=1, keepdims=True)
    return p * (q_slice - row_value)


def policy_gradient(q_slice: np.ndarray, logits_in: np.ndarray,
                    cfg: RlConfig,
                    row_scale: np.ndarray | None = None) -> np.ndarray:
    """Run ``cfg.pg_steps`` ascent steps on the softmax objective, with q
    held fixed.  Returns the updated logits.

    ``row_scale`` multiplies the step size per type row (entries in
    (0, 1]); the stage solver uses it to damp rows whose update direction
    oscillates around an indifference point.
    """
    q = np.ascontiguousarray(q_slice, dtype=np.float64)
    logits = np.ascontiguousarray(logits_in, dtype=np.float64)
    lr = np.full(logits.shape[0], cfg.pg_lr)
    if row_scale is not None:
        lr = lr * np.asarray(row_scale, dtype=np.float64)
    if not cfg.check_ascent:
        return kernels.pg_ascent(logits, q, lr, cfg.pg_steps)
    out = logits
    j_prev = pg_objective(out, q)
    for _ in range(cfg.pg_steps):
        out = kernels.pg_ascent(out, q, lr, 1)
        j_new = pg_objective(out, q)
        assert j_new >= j_prev - 1e-12, "policy-gradient step decreased J"
        j_prev = j_new
    return out


def expected_sarsa_batch(z: np.ndarray, gamma: np.ndarray,
                         v_next: np.ndarray, env: EnvModel,
                         q_in: np.ndarray, cfg: RlConfig,
                         rng: np.random.Generator, *, grid: SimplexGrid,
                         z_next: np.ndarray | None = None) -> np.ndarray:
    """One batch of Expected-Sarsa sweeps over every (type, action) pair.

    Each sweep draws one transition per pair and folds the target
    r + discount * v'(z', x') into the running average.  ``z_next`` may be
    passed in precomputed; otherwise it is the kernel pushforward of z
    under gamma.  Each pair consumes its own child stream of ``rng``, so
    the result does not depend on pair iteration order.
    """
    if z_next is None:
        z_next = propagate_mean_field(z, gamma, env.kernel_tensor(z))
    v_bar = interpolate_values(v_next, z_next, grid)
    reward = env.reward_matrix(z)
    n_x, n_a = env.n_types, env.n_actions
    n_sweeps = cfg.batch_size

    pair_streams = rng.spawn(n_x * n_a)
    targets = np.empty((n_x * n_a, n_sweeps))
    for x in range(n_x):
        for a in range(n_a):
            p = x * n_a + a
            nxt = env.sample_many(x, a, z, n_sweeps, pair_streams[p])
            targets[p] = reward[x, a] + env.discount * v_bar[nxt]

    tail_from = n_sweeps // 2 if cfg.tail_average else n_sweeps
    q0 = np.ascontiguousarray(q_in, dtype=np.float64).reshape(-1)
    q_final, q_tail = kernels.sarsa_scan(q0, targets, cfg.sarsa_alpha,
                                         tail_from)
    picked = q_tail if cfg.tail_average else q_final
    return picked.reshape(n_x, n_a)


def estimate_mean_field_step(env: EnvModel, z: np.ndarray, gamma: np.ndarray,
                             n_samples: int,
                             rng: np.random.Generator) -> np.ndarray:
    """Sample-based substitute for the kernel pushforward, for environments
    that only expose a sampler."""
    n_x, n_a = env.n_types, env.n_actions
    emp = np.empty((n_x, n_a, n_x))
    pair_streams = rng.spawn(n_x * n_a)
    for x in range(n_x):
        for a in range(n_a):
            draws = env.sample_many(x, a, z, n_samples,
                                    pair_streams[x * n_a + a])
            emp[x, a] = np.bincount(draws, minlength=n_x) / n_samples
    return propagate_mean_field(z, gamma, emp)


@dataclass(frozen=True)
class RlStageResult:
    gamma: np.ndarray
    q: np.ndarray
    # sup-norm prescription change at each policy iteration; the last entry
    # is the convergence diagnostic reported per (stage, grid point)
    changes: np.ndarray

    @property
    def last_change(self) -> float:
        return float(self.changes[-1])


def solve_stage_rl(z: np.ndarray, v_next: np.ndarray, grid: SimplexGrid,
                   env: EnvModel, cfg: RlConfig,
                   rng: np.random.Generator) -> RlStageResult:
    """Fixed-point loop at one (stage, grid point): re-estimate Q under the
    current prescription, step the policy along the exact softmax gradient,
    repeat.  Starts uniform with Q = q_init; Q warm-starts across
    iterations so the running average keeps accumulating evidence.

    Q feeds back into itself through the induced next mean field, so a
    fixed PG gain can orbit an interior equilibrium instead of settling on
    it.  Each row therefore carries a step-size multiplier that halves
    whenever the row's logit update reverses direction, which collapses any
    orbit onto the indifference point.
    """
    n_x, n_a = env.n_types, env.n_actions
    logits = np.zeros((n_x, n_a))
    gamma = softmax_prescription(logits)
    q = np.full((n_x, n_a), float(cfg.q_init))
    changes = np.zeros(cfg.policy_iters)
    gain = np.ones(n_x)
    prev_delta = np.zeros((n_x, n_a))

    iter_streams = rng.spawn(cfg.policy_iters)
    for n in range(cfg.policy_iters):
        flow_stream, sarsa_stream = iter_streams[n].spawn(2)
        if env.has_kernel:
            z_next = propagate_mean_field(z, gamma, env.kernel_tensor(z))
        else:
            z_next = estimate_mean_field_step(env, z, gamma,
                                              cfg.flow_samples, flow_stream)
        q = expected_sarsa_batch(z, gamma, v_next, env, q, cfg, sarsa_stream,
                                 grid=grid, z_next=z_next)
        new_logits = policy_gradient(q, logits, cfg, row_scale=gain)
        delta = new_logits - logits
        direction = (delta * prev_delta).sum(axis=1)
        flipped = direction < 0.0
        steady = direction > 0.0
        gain[flipped] = np.maximum(gain[flipped] * 0.5, 2.0 ** -40)
        gain[steady] = np.minimum(gain[steady] * 1.3, 1.0)
        prev_delta = delta
        logits = new_logits
        new_gamma = softmax_prescription(logits)
        changes[n] = np.abs(new_gamma - gamma).max()
        gamma = new_gamma
    return RlStageResult(gamma=gamma, q=q, changes=changes)


@dataclass(frozen=True)
class RlStageDiagnostic:
    stage: int
    z_index: int
    last_change: float
    residual: float  # best-response gap of gamma against its estimated Q
    converged: bool = True
    iters: int = 0
    stop_reason: str = "policy_iters"


@dataclass(frozen=True)
class RlDiagnostics:
    rows: list[RlStageDiagnostic] = field(default_factory=list)

    @property
    def worst_residual(self) -> float:
        return max((r.residual for r in self.rows), default=0.0)

    @property
    def worst_last_change(self) -> float:
        return max((r.last_change for r in self.rows), default=0.0)


def rl_backward_solve(env: EnvModel, grid: SimplexGrid, cfg: RlConfig,
                      threads: int = 1):
    """Backward recursion over all stages with the model-free stage solver.

    Returns ``(atlas, tables, diagnostics)`` with the same shapes and
    conventions as the exact solver, so the two are directly comparable.
    Grid points within a stage run across ``threads`` workers; the keyed
    streams make the result identical for any thread count.
    """
    from .exact import _map_grid

    n_g, n_x, n_a, horizon = grid.n_points, env.n_types, env.n_actions, env.horizon
    atlas_probs = np.empty((horizon, n_g, n_x, n_a))
    tables: list[StageTables | None] = [None] * horizon
    diag_rows: list[RlStageDiagnostic] = []

    v_next = np.zeros((n_g, n_x))
    for t in range(horizon - 1, -1, -1):
        def solve_point(g, t=t, v_next=v_next):
            stream = rngmod.stream(cfg.seed, rngmod.SARSA, t, g)
            return solve_stage_rl(grid.points[g], v_next, grid, env, cfg,
                                  stream)

        results = _map_grid(solve_point, n_g, threads)
        q_t = np.empty((n_g, n_x, n_a))
        v_t = np.empty((n_g, n_x))
        for g, res in enumerate(results):
            atlas_probs[t, g] = res.gamma
            q_t[g] = res.q
            v_t[g] = (res.gamma * res.q).sum(axis=1)
            gap = float((res.q.max(axis=1)
                         - (res.gamma * res.q).sum(axis=1)).max())
            diag_rows.append(RlStageDiagnostic(
                stage=t, z_index=g, last_change=res.last_change,
                residual=gap,
                converged=bool(res.last_change <= cfg.change_tol),
                iters=cfg.policy_iters))
        tables[t] = StageTables(q=q_t, v=v_t)
        v_next = tables[t].v

    atlas = PolicyAtlas(grid=grid, probs=atlas_probs)
    return atlas, tables, RlDiagnostics(rows=diag_rows)
