"""Random ground-truth DAGs and nonlinear SEM data.

Randomness is drawn from ``numpy.random.default_rng`` seeded with
``SeedSequence(seed, spawn_key=(stream, node))``: every (purpose, node) pair
gets its own stream, so a node's column depends only on the seed, its index,
and its parents' columns.
"""

from dataclasses import dataclass, field

import numpy as np

from .acyclicity import topological_order
from .errors import DomainError
from .numkernel import cholesky_psd, rbf_kernel
from .semmodel import sigmoid

GRAPH_KINDS = ("ER", "SF")
MECHANISMS = ("additive-gp", "index", "mlp", "gp")

_STREAM_GRAPH = 0
_STREAM_NOISE = 1
_STREAM_MECH = 2


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class GraphSpec:
    d: int
    kind: str
    s0: int
    seed: int = 0

    def __post_init__(self):
        if self.kind not in GRAPH_KINDS:
            raise ValueError(f"graph kind must be one of {GRAPH_KINDS}")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not 0 <= self.s0 <= self.d * (self.d - 1) // 2:
            raise ValueError("s0 must lie in [0, d(d-1)/2]")


@dataclass(frozen=True)
class SemSpec:
    mechanism: str
    gp_length_scale: float = 1.0
    gp_jitter: float = 1e-10
    index_terms: int = 3
    mlp_hidden: int = 100
    weight_range: tuple = (0.5, 2.0)

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"mechanism must be one of {MECHANISMS}")


@dataclass
class Dataset:
    X: np.ndarray
    column_means: np.ndarray
    B_true: np.ndarray
    n: int
    seed: int
    sem: SemSpec = None
    graph: GraphSpec = None
    meta: dict = field(default_factory=dict)


def parse_graph(name, d, seed=0):
    """``'er2'`` -> GraphSpec(d, 'ER', 2d).  Expected edges are capped at d(d-1)/2."""
    name = name.lower()
    kind, k = name[:2].upper(), int(name[2:])
    return GraphSpec(d=d, kind=kind, s0=min(k * d, d * (d - 1) // 2), seed=seed)


def _permute(B, rng):
    P = rng.permutation(B.shape[0])
    return B[np.ix_(P, P)]


def sample_er_dag(spec):
    """Erdős–Rényi skeleton oriented along a uniformly random node order."""
    d = spec.d
    rng = _rng(spec.seed, _STREAM_GRAPH)
    n_pairs = d * (d - 1) // 2
    p = spec.s0 / n_pairs
    upper = np.triu(rng.random((d, d)) < p, k=1).astype(int)
    return _permute(upper, rng)


def sample_sf_dag(spec):
    """Barabási–Albert graph with k = s0 // d edges per arriving node.

    The first k nodes form a complete DAG; every later node attaches to k
    distinct existing nodes with probability proportional to their degree,
    edges pointing from the new node to the existing ones.  Labels are then
    permuted at random.
    """
    d = spec.d
    k = max(1, spec.s0 // d) if spec.s0 > 0 else 0
    if k == 0:
        return np.zeros((d, d), dtype=int)
    if k >= d:
        raise ValueError(f"SF graph needs k < d (k={k}, d={d})")
    rng = _rng(spec.seed, _STREAM_GRAPH)
    B = np.zeros((d, d), dtype=int)
    for i in range(1, k):
        B[i, :i] = 1
    degree = B.sum(axis=0) + B.sum(axis=1)
    for new in range(k, d):
        weights = degree[:new].astype(float)
        if weights.sum() == 0:
            weights = np.ones(new)
        targets = rng.choice(new, size=k, replace=False, p=weights / weights.sum())
        B[new, targets] = 1
        degree[targets] += 1
        degree[new] += k
    return _permute(B, rng)


def sample_dag(spec):
    return sample_er_dag(spec) if spec.kind == "ER" else sample_sf_dag(spec)


def _uniform_signed(rng, size, lo, hi):
    mag = rng.uniform(lo, hi, size=size)
    return mag * rng.choice([-1.0, 1.0], size=size)


def _gp_draw(inputs, rng, sem):
    K = rbf_kernel(inputs, length_scale=sem.gp_length_scale)
    L = cholesky_psd(K, sem.gp_jitter)
    return L @ rng.standard_normal(inputs.shape[0])


def _mechanism(sem, Xpa, rng):
    n, p = Xpa.shape
    lo, hi = sem.weight_range
    if sem.mechanism == "additive-gp":
        return sum(_gp_draw(Xpa[:, i], rng, sem) for i in range(p))
    if sem.mechanism == "gp":
        return _gp_draw(Xpa, rng, sem)
    if sem.mechanism == "index":
        theta = _uniform_signed(rng, (sem.index_terms, p), lo, hi)
        links = (np.tanh, np.cos, np.sin)
        return sum(links[m % 3](Xpa @ theta[m]) for m in range(sem.index_terms))
    W1 = _uniform_signed(rng, (p, sem.mlp_hidden), lo, hi)
    W2 = _uniform_signed(rng, sem.mlp_hidden, lo, hi)
    return sigmoid(Xpa @ W1) @ W2


def simulate_sem(B, sem, n, seed=0, center=True):
    """Draw n samples of ``X_j = f_j(X_pa(j)) + z_j`` in topological order."""
    B = np.asarray(B)
    if n < 1:
        raise ValueError("n must be positive")
    order = topological_order(B)
    if order is None:
        raise DomainError("graph is not acyclic")
    d = B.shape[0]
    X = np.zeros((n, d))
    for j in order:
        parents = np.flatnonzero(B[:, j])
        z = _rng(seed, _STREAM_NOISE, j).standard_normal(n)
        if len(parents):
            X[:, j] = _mechanism(sem, X[:, parents], _rng(seed, _STREAM_MECH, j)) + z
        else:
            X[:, j] = z
    means = X.mean(axis=0)
    if center:
        X = X - means
    return Dataset(X=X, column_means=means, B_true=B.astype(int), n=n, seed=seed, sem=sem)


def simulate(graph, sem, n, seed=0):
    """Graph plus data from a single seed; the graph uses ``graph.seed`` if set by caller."""
    B = sample_dag(graph)
    ds = simulate_sem(B, sem, n, seed)
    ds.graph = graph
    return ds
