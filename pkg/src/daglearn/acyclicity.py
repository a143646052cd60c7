"""Trace-exponential acyclicity functional and discrete DAG checks.

For a weighted adjacency ``W`` (``W[k, j]`` is the strength of edge k -> j),

    h(W) = tr(exp(W * W)) - d

is zero exactly when the support of ``W`` has no directed cycle, and its
gradient is ``exp(W * W).T * 2W``.
"""

from collections import deque

import numpy as np

from .errors import DimensionError, DomainError
from .numkernel import expm

DEFAULT_H_TOL = 1e-8


def _check(W):
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise DomainError("adjacency has non-finite entries")
    return W


def h_value(W):
    W = _check(W)
    return float(np.trace(expm(W * W)) - W.shape[0])


def h_grad(W):
    W = _check(W)
    return expm(W * W).T * (2.0 * W)


def h_value_and_grad(W):
    """Both h and its gradient from a single matrix exponential."""
    W = _check(W)
    E = expm(W * W)
    return float(np.trace(E) - W.shape[0]), E.T * (2.0 * W)


def topological_order(B):
    """Kahn's algorithm on the support of ``B``; None if a cycle exists."""
    B = np.asarray(B)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {B.shape}")
    support = B != 0
    d = support.shape[0]
    indeg = support.sum(axis=0)
    queue = deque(int(i) for i in np.flatnonzero(indeg == 0))
    order = []
    while queue:
        k = queue.popleft()
        order.append(k)
        for j in np.flatnonzero(support[k]):
            indeg[j] -= 1
            if indeg[j] == 0:
                queue.append(int(j))
    return order if len(order) == d else None


def is_dag(B):
    return topological_order(B) is not None
