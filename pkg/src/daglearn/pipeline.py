"""End-to-end helpers shared by the CLI, the benchmark grid and the scripts."""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .metrics import count_accuracy
from .semmodel import MlpSem, SobolevSem
from .simulate import SemSpec, parse_graph, sample_dag, simulate_sem
from .solver import InnerOptions, LearnConfig, augmented_lagrangian_learn

MODELS = ("mlp", "sobolev")


def build_model(name, d, hidden=(10,), n_basis=10, lambda1=0.0, forbidden=None, ridge=0.0):
    if name == "mlp":
        return MlpSem(d, hidden=hidden, forbidden=forbidden, ridge=ridge)
    if name == "sobolev":
        return SobolevSem(d, n_basis=n_basis, lambda1=lambda1, forbidden=forbidden)
    raise ValueError(f"unknown model {name!r}; expected one of {MODELS}")


def center(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InputError(f"data must be a 2-D matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise InputError("need at least 2 samples")
    means = X.mean(axis=0)
    return X - means, means


def learn(X, model="mlp", cfg=None, hidden=(10,), n_basis=10, lambda1=0.0, forbidden=None,
          ridge=0.0):
    """Center ``X``, build the estimator and run the augmented Lagrangian.

    Returns ``(result, model, column_means)``.
    """
    Xc, means = center(X)
    est = build_model(model, Xc.shape[1], hidden=hidden, n_basis=n_basis,
                      lambda1=lambda1, forbidden=forbidden, ridge=ridge)
    result = augmented_lagrangian_learn(est, Xc, cfg or LearnConfig())
    return result, est, means


@dataclass
class Cell:
    """One benchmark configuration; ``seed`` drives graph, data and init."""

    graph: str = "er2"
    d: int = 20
    n: int = 1000
    sem: str = "mlp"
    model: str = "mlp"
    lam: float = 0.01
    threshold: float = 0.3
    hidden: tuple = (10,)
    basis_r: int = 10
    lambda1: float = 0.0
    ridge: float = 0.0
    solver: dict = field(default_factory=dict)

    def key(self):
        hidden = "-".join(str(h) for h in self.hidden) or "0"
        return dict(graph=self.graph, d=self.d, n=self.n, sem=self.sem, model=self.model,
                    lam=self.lam, threshold=self.threshold, hidden=hidden,
                    basis_r=self.basis_r, lambda1=self.lambda1, ridge=self.ridge)


def simulate_cell(cell, seed):
    spec = parse_graph(cell.graph, cell.d, seed)
    B = sample_dag(spec)
    ds = simulate_sem(B, SemSpec(cell.sem), cell.n, seed)
    ds.graph = spec
    return ds


def run_cell(cell, seed):
    """Simulate, learn and score one (cell, seed); returns a flat result dict."""
    t0 = time.perf_counter()
    ds = simulate_cell(cell, seed)
    solver = dict(cell.solver)
    inner = InnerOptions(**solver.pop("inner", {}))
    cfg = LearnConfig(lam=cell.lam, threshold=cell.threshold, seed=seed, inner=inner, **solver)
    result, _, _ = learn(ds.X, cell.model, cfg, hidden=cell.hidden, n_basis=cell.basis_r,
                         lambda1=cell.lambda1, ridge=cell.ridge)
    report = count_accuracy(ds.B_true, result.B_est, result.effective_threshold)
    row = dict(cell.key(), seed=seed, status="ok", error="")
    row.update(report.to_dict())
    row.update(converged=result.converged, h_final=result.h_final,
               n_true=int(ds.B_true.sum()), wall_time=time.perf_counter() - t0,
               learn_time=result.wall_time)
    return row
