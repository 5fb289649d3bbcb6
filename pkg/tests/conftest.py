"""Shared fixtures.

The full-size malware solves are expensive, so they are session-scoped and
shared between the acceptance criteria and the heavier unit tests.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

import mfgsolve as m

BENCH_SEED = 1


@pytest.fixture(scope="session")
def malware():
    return m.malware_env()  # shipped benchmark parameters, horizon 60


@pytest.fixture(scope="session")
def grid_m50(malware):
    return m.build_grid(malware.n_types, 50)


@pytest.fixture(scope="session")
def grid_m25(malware):
    return m.build_grid(malware.n_types, 25)


@pytest.fixture(scope="session")
def grid_m100(malware):
    return m.build_grid(malware.n_types, 100)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def exact_m50(malware, grid_m50):
    (atlas, tables, diag), elapsed = _timed(
        lambda: m.backward_solve(malware, grid_m50, m.FixedPointConfig(),
                                 seed=BENCH_SEED))
    return {"atlas": atlas, "tables": tables, "diag": diag,
            "elapsed": elapsed}


@pytest.fixture(scope="session")
def exact_m25(malware, grid_m25):
    atlas, tables, diag = m.backward_solve(malware, grid_m25,
                                           m.FixedPointConfig(),
                                           seed=BENCH_SEED)
    return {"atlas": atlas, "tables": tables, "diag": diag}


@pytest.fixture(scope="session")
def exact_m100(malware, grid_m100):
    atlas, tables, diag = m.backward_solve(malware, grid_m100,
                                           m.FixedPointConfig(),
                                           seed=BENCH_SEED)
    return {"atlas": atlas, "tables": tables, "diag": diag}


@pytest.fixture(scope="session")
def rl_m50(malware, grid_m50):
    (atlas, tables, diag), elapsed = _timed(
        lambda: m.rl_backward_solve(malware, grid_m50,
                                    m.RlConfig(seed=BENCH_SEED)))
    return {"atlas": atlas, "tables": tables, "diag": diag,
            "elapsed": elapsed}


def constant_atlas(grid, horizon: int, row_probs) -> m.PolicyAtlas:
    """Atlas prescribing the same action distribution everywhere."""
    rows = np.asarray(row_probs, dtype=np.float64)
    probs = np.broadcast_to(
        rows, (horizon, grid.n_points, *rows.shape)).copy()
    return m.PolicyAtlas(grid=grid, probs=probs)
