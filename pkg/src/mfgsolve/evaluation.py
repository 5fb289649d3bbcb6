"""Equilibrium verification: induced flows, finite-population simulation,
single-agent deviation gaps (exploitability), and atlas comparison.

The certificate logic: freeze the mean-field flow an atlas generates from
a start state, then let a single deviating agent best-respond to that flow
by plain backward induction.  At an exact mean-field equilibrium the
deviator gains nothing, so the largest gap measures how far the atlas is
from equilibrium (for the exact solver, only grid-interpolation error
remains).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PolicyAtlas, SimplexGrid, propagate_mean_field
from .envs import EnvModel

_CI99 = 2.5758293035489004  # two-sided 99% normal quantile


def statistical_trajectory(z1: np.ndarray, atlas: PolicyAtlas,
                           env: EnvModel) -> np.ndarray:
    """Deterministic flow z_1..z_T induced by the atlas from z1.

    Off-grid states use the interpolated prescription.  Requires the exact
    kernel.
    """
    horizon = atlas.horizon
    out = np.empty((horizon, env.n_types))
    z = np.asarray(z1, dtype=np.float64)
    for t in range(horizon):
        out[t] = z
        if t + 1 < horizon:
            gamma = atlas.prescription_at(t, z)
            z = propagate_mean_field(z, gamma, env.kernel_tensor(z))
    return out


def _initial_counts(z1: np.ndarray, n_agents: int) -> np.ndarray:
    """Deterministic largest-remainder allocation of n_agents across types,
    so the simulated population starts exactly at (the rounding of) z1."""
    raw = np.asarray(z1, float) * n_agents
    counts = np.floor(raw).astype(np.int64)
    short = n_agents - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def _sample_rows(prob_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of a row-stochastic matrix."""
    cdf = np.cumsum(prob_rows, axis=1)
    u = rng.random(prob_rows.shape[0])
    picks = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(picks, prob_rows.shape[1] - 1)


@dataclass(frozen=True)
class TrajectoryReport:
    statistical_z: np.ndarray | None  # (T, n_types); None without a kernel
    empirical_z: np.ndarray           # (T, n_types), exact count fractions
    n_agents: int
    mean_return: float
    return_ci99: float


def rollout_population(n_agents: int, z1: np.ndarray, atlas: PolicyAtlas,
                       env: EnvModel, rng: np.random.Generator,
                       condition_on: str = "empirical") -> TrajectoryReport:
    """Simulate n_agents with independent noise under the atlas policy.

    Each stage, agents sample actions from the prescription at the current
    empirical distribution (or at the statistical flow when
    ``condition_on="statistical"``), collect rewards at the realized
    empirical mean field, and transition independently.
    """
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    if condition_on not in ("empirical", "statistical"):
        raise ValueError(f"unknown conditioning {condition_on!r}")

    horizon, n_x = atlas.horizon, env.n_types
    stat = statistical_trajectory(z1, atlas, env) if env.has_kernel else None
    if condition_on == "statistical" and stat is None:
        raise ValueError("statistical conditioning needs the exact kernel")

    counts = _initial_counts(z1, n_agents)
    states = np.repeat(np.arange(n_x), counts)
    returns = np.zeros(n_agents)
    empirical = np.empty((horizon, n_x))
    disc = 1.0
    for t in range(horizon):
        z_emp = np.bincount(states, minlength=n_x) / n_agents
        empirical[t] = z_emp
        z_cond = stat[t] if condition_on == "statistical" else z_emp
        gamma = atlas.prescription_at(t, z_cond)
        reward = env.reward_matrix(z_emp)
        actions = _sample_rows(gamma[states], rng)
        returns += disc * reward[states, actions]
        disc *= env.discount
        nxt = np.empty_like(states)
        for x in range(n_x):
            for a in range(env.n_actions):
                sel = (states == x) & (actions == a)
                n_sel = int(sel.sum())
                if n_sel:
                    nxt[sel] = env.sample_many(x, a, z_emp, n_sel, rng)
        states = nxt

    mean = float(returns.mean())
    ci = _CI99 * float(returns.std(ddof=1)) / np.sqrt(n_agents) \
        if n_agents > 1 else 0.0
    return TrajectoryReport(statistical_z=stat, empirical_z=empirical,
                            n_agents=n_agents, mean_return=mean,
                            return_ci99=ci)


def rollout_tagged_agent(env: EnvModel, atlas: PolicyAtlas, z1: np.ndarray,
                         x1: int, n_episodes: int,
                         rng: np.random.Generator):
    """Monte-Carlo return of one agent following the atlas policy against
    the frozen statistical flow from z1.

    Returns ``(mean, ci99)``; the mean estimates the stage-1 value
    V_1(z1, x1).  Episodes are vectorized and share the flow.
    """
    flow = statistical_trajectory(z1, atlas, env)
    states = np.full(n_episodes, x1, dtype=np.int64)
    returns = np.zeros(n_episodes)
    disc = 1.0
    for t in range(atlas.horizon):
        gamma = atlas.prescription_at(t, flow[t])
        reward = env.reward_matrix(flow[t])
        actions = _sample_rows(gamma[states], rng)
        returns += disc * reward[states, actions]
        disc *= env.discount
        nxt = np.empty_like(states)
        for x in range(env.n_types):
            for a in range(env.n_actions):
                sel = (states == x) & (actions == a)
                n_sel = int(sel.sum())
                if n_sel:
                    nxt[sel] = env.sample_many(x, a, flow[t], n_sel, rng)
        states = nxt
    mean = float(returns.mean())
    ci = _CI99 * float(returns.std(ddof=1)) / np.sqrt(n_episodes) \
        if n_episodes > 1 else 0.0
    return mean, ci


@dataclass(frozen=True)
class ExploitabilityReport:
    """Deviation gaps per (stage, starting grid point, type).

    ``gaps[t, g, x]`` is the best-response continuation value minus the
    policy continuation value at stage t on the flow started from grid
    point g, clipped below at zero.
    """

    gaps: np.ndarray
    max_gap: float
    grid: SimplexGrid


def exploitability(atlas: PolicyAtlas, env: EnvModel,
                   grid: SimplexGrid) -> ExploitabilityReport:
    """Single-deviator best-response gaps against each frozen flow."""
    horizon, n_x = atlas.horizon, env.n_types
    gaps = np.empty((horizon, grid.n_points, n_x))
    for g in range(grid.n_points):
        flow = statistical_trajectory(grid.points[g], atlas, env)
        v_pol = np.zeros(n_x)
        v_br = np.zeros(n_x)
        for t in range(horizon - 1, -1, -1):
            z = flow[t]
            reward = env.reward_matrix(z)
            kernel = env.kernel_tensor(z)
            gamma = atlas.prescription_at(t, z)
            q_pol = reward + env.discount * (kernel @ v_pol)
            q_br = reward + env.discount * (kernel @ v_br)
            v_pol = (gamma * q_pol).sum(axis=1)
            v_br = q_br.max(axis=1)
            gaps[t, g] = np.clip(v_br - v_pol, 0.0, None)
    return ExploitabilityReport(gaps=gaps, max_gap=float(gaps.max()),
                                grid=grid)


def atlas_distance(a: PolicyAtlas, b: PolicyAtlas, t: int) -> float:
    """Worst total-variation distance between the two atlases' stage-t
    prescriptions, over all grid points and types."""
    if a.probs.shape != b.probs.shape:
        raise ValueError(f"atlas shapes differ: {a.probs.shape} "
                         f"vs {b.probs.shape}")
    tv = 0.5 * np.abs(a.probs[t] - b.probs[t]).sum(axis=2)
    return float(tv.max())
