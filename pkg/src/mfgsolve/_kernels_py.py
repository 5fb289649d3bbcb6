"""Pure-Python reference kernels.

Semantically identical to the compiled versions in ``_kernels_c.pyx``; the
loop over sweeps / steps stays in Python but is vectorized across pairs or
rows, so per-element arithmetic matches the compiled code operation for
operation.
"""

from __future__ import annotations

import numpy as np


def sarsa_scan(q0: np.ndarray, targets: np.ndarray, alpha: float,
               tail_from: int):
    """Run q <- (1 - alpha) * q + alpha * g over the sweep axis.

    ``targets`` has shape (n_pairs, n_sweeps).  Returns ``(final, tail)``
    where ``tail`` is the mean of the post-update iterates with sweep index
    >= tail_from (the final iterate when no sweep qualifies).
    """
    q = np.array(q0, dtype=np.float64, copy=True)
    targets = np.asarray(targets, dtype=np.float64)
    n_sweeps = targets.shape[1]
    acc = np.zeros_like(q)
    count = 0
    for l in range(n_sweeps):
        q = (1.0 - alpha) * q + alpha * targets[:, l]
        if l >= tail_from:
            acc += q
            count += 1
    tail = acc / count if count > 0 else q.copy()
    return q, tail


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def pg_ascent(logits: np.ndarray, q: np.ndarray, lr: np.ndarray,
              steps: int) -> np.ndarray:
    """Exact-gradient ascent on J(logits) = sum_x sum_a p[x,a] q[x,a]
    with p = row-softmax(logits); q is held fixed.  ``lr`` is a per-row
    step size."""
    th = np.array(logits, dtype=np.float64, copy=True)
    q = np.asarray(q, dtype=np.float64)
    lr_col = np.asarray(lr, dtype=np.float64)[:, None]
    for _ in range(steps):
        p = _softmax_rows(th)
        row_value = (p * q).sum(axis=1, keepdims=True)
        th += lr_col * (p * (q - row_value))
    return th
