"""Augmented-Lagrangian DAG learning with an l1 box split.

Each outer step minimizes

    F(theta) + lam * ||theta_S||_1,
    F(theta) = L(theta) + (rho / 2) h(W(theta))^2 + alpha h(W(theta)),

over the penalized index set S by writing ``theta_S = pos - neg`` with
``pos, neg >= 0`` and handing the smooth, bound-constrained problem to
L-BFGS-B.  ``rho`` grows 10x whenever h fails to shrink by
``progress_ratio``; the dual ``alpha`` is then updated by ``rho * h``.
"""

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.optimize as sopt

from .acyclicity import DEFAULT_H_TOL, h_value_and_grad, is_dag
from .errors import DivergedError, InputError

log = logging.getLogger(__name__)


@dataclass
class InnerOptions:
    memory: int = 10
    pg_tol: float = 1e-5
    max_iters: int = 1000
    ftol: float = 2.220446049250313e-09


@dataclass
class LearnConfig:
    lam: float = 0.01
    rho_init: float = 1.0
    rho_max: float = 1e16
    alpha_init: float = 0.0
    h_tol: float = DEFAULT_H_TOL
    max_dual_iters: int = 100
    progress_ratio: float = 0.25
    inner: InnerOptions = field(default_factory=InnerOptions)
    threshold: float = 0.3
    seed: int = 0
    # False: a single inner solve with rho = alpha = 0 (no acyclicity pressure)
    enforce_dag: bool = True

    def __post_init__(self):
        if isinstance(self.inner, dict):
            self.inner = InnerOptions(**self.inner)
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if not 0 < self.progress_ratio < 1:
            raise ValueError("progress_ratio must lie in (0, 1)")
        if self.rho_init > self.rho_max:
            raise ValueError("rho_init must not exceed rho_max")
        if self.threshold < 0:
            raise ValueError("threshold must be nonnegative")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    loss: float
    h: float
    rho: float
    alpha: float


@dataclass(frozen=True)
class LearnResult:
    theta: np.ndarray
    W_est: np.ndarray
    B_est: np.ndarray
    h_final: float
    converged: bool
    effective_threshold: float
    trace: tuple
    wall_time: float


def bounded_qn_minimize(fun, x0, bounds, opts=None):
    """Minimize a smooth ``fun(x) -> (f, grad)`` over a box with L-BFGS-B.

    Returns the final iterate (never outside ``bounds``).  A non-finite value
    at ``x0`` raises InputError; non-finite values met during the line search
    are reported back as ``+inf`` so the search backtracks, and if no finite
    iterate better than ``x0`` survives a DivergedError is raised.
    """
    opts = opts or InnerOptions()
    x0 = np.asarray(x0, dtype=np.float64)
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds])
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds])
    x0 = np.clip(x0, lo, hi)
    f0, g0 = fun(x0)
    if not np.isfinite(f0) or not np.all(np.isfinite(g0)):
        raise InputError("objective is non-finite at the starting point")

    state = {"bad": 0}

    def wrapped(x):
        try:
            f, g = fun(x)
        except (DivergedError, FloatingPointError):
            f, g = np.inf, None
        if not np.isfinite(f) or g is None or not np.all(np.isfinite(g)):
            state["bad"] += 1
            return np.inf, np.zeros_like(x)
        return f, g

    res = sopt.minimize(
        wrapped, x0, jac=True, method="L-BFGS-B", bounds=list(zip(lo, hi)),
        options={"maxcor": opts.memory, "gtol": opts.pg_tol,
                 "maxiter": opts.max_iters, "ftol": opts.ftol},
    )
    x = np.clip(res.x, lo, hi)
    if not np.isfinite(res.fun):
        raise DivergedError(f"inner solve diverged ({state['bad']} non-finite evaluations)")
    return x


class SplitObjective:
    """Smooth objective over ``z = [pos, neg, rest]`` for fixed (lam, rho, alpha).

    ``pos``/``neg`` cover ``model.l1_index``; ``rest`` covers the remaining
    theta entries, which are unpenalized and unbounded unless masked.
    """

    def __init__(self, model, X, lam, rho, alpha):
        self.model = model
        self.X = X
        self.lam = float(lam)
        self.rho = float(rho)
        self.alpha = float(alpha)
        self.l1_idx = np.asarray(model.l1_index)
        keep = np.ones(model.param_count, dtype=bool)
        keep[self.l1_idx] = False
        self.rest_idx = np.flatnonzero(keep)
        self.n_l1 = len(self.l1_idx)
        self.size = 2 * self.n_l1 + len(self.rest_idx)
        self.last = {}

    def theta(self, z):
        theta = np.zeros(self.model.param_count)
        p = self.n_l1
        theta[self.l1_idx] = z[:p] - z[p:2 * p]
        theta[self.rest_idx] = z[2 * p:]
        return theta

    def split(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        t = theta[self.l1_idx]
        return np.concatenate([np.maximum(t, 0.0), np.maximum(-t, 0.0),
                               theta[self.rest_idx]])

    def bounds(self):
        rest_mask = self.model.mask[self.rest_idx]
        nonneg = [(0.0, None)] * (2 * self.n_l1)
        rest = [(0.0, 0.0) if m else (None, None) for m in rest_mask]
        return nonneg + rest

    def __call__(self, z):
        p = self.n_l1
        theta = self.theta(z)
        loss, g_theta = self.model.loss_and_grad(theta, self.X)
        W = self.model.adjacency(theta)
        h, g_h = h_value_and_grad(W)
        obj = loss + 0.5 * self.rho * h * h + self.alpha * h
        if self.rho != 0.0 or self.alpha != 0.0:
            g_theta = g_theta + self.model.adjacency_jacobian_apply(
                theta, (self.rho * h + self.alpha) * g_h)
        l1 = z[:2 * p].sum()
        obj += self.lam * l1
        g_l1 = g_theta[self.l1_idx]
        grad = np.concatenate([g_l1 + self.lam, -g_l1 + self.lam, g_theta[self.rest_idx]])
        self.last = {"loss": loss, "h": h}
        return obj, grad


def split_box_objective(model, X, lam, rho, alpha):
    """Return ``(objective, bounds, split)`` for one augmented-Lagrangian subproblem.

    ``objective(z) -> (value, grad)``; ``split(theta)`` maps a parameter vector
    to its nonnegative-split coordinates, and ``objective.theta(z)`` maps back.
    """
    obj = SplitObjective(model, X, lam, rho, alpha)
    return obj, obj.bounds(), obj.split


def threshold_to_dag(W, threshold):
    """Binarize ``W > threshold``; if cyclic, drop weakest edges until acyclic.

    Returns ``(B, effective_threshold)`` where ``B == (W > effective_threshold)``.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    W = np.asarray(W, dtype=np.float64)
    eff = float(threshold)
    B = (W > eff).astype(int)
    if is_dag(B):
        return B, eff
    for w in np.unique(W[B == 1]):
        B = (W > w).astype(int)
        if is_dag(B):
            return B, float(w)
    raise AssertionError("unreachable: empty graph is acyclic")


def augmented_lagrangian_learn(model, X, cfg=None, theta0=None):
    """Fit ``model`` to centered data ``X`` under the acyclicity constraint."""
    cfg = cfg or LearnConfig()
    X = np.asarray(X, dtype=np.float64)
    t_start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    theta = model.init_params(rng) if theta0 is None else np.array(theta0, dtype=np.float64)
    theta[model.mask] = 0.0
    trace = []
    converged = False

    def solve(rho, alpha, theta_start):
        obj, bounds, split = split_box_objective(model, X, cfg.lam, rho, alpha)
        try:
            z = bounded_qn_minimize(obj, split(theta_start), bounds, cfg.inner)
        except DivergedError as exc:
            raise DivergedError(str(exc), trace) from exc
        th = obj.theta(z)
        loss, _ = model.loss_and_grad(th, X)
        h, _ = h_value_and_grad(model.adjacency(th))
        return th, loss, h

    if not cfg.enforce_dag:
        theta, loss, h = solve(0.0, 0.0, theta)
        trace.append(TraceRecord(0, loss, h, 0.0, 0.0))
        converged = True
    else:
        rho, alpha, h = cfg.rho_init, cfg.alpha_init, np.inf
        for it in range(cfg.max_dual_iters):
            while True:
                theta, loss, h_new = solve(rho, alpha, theta)
                log.debug("iter %d rho %.1e h %.3e loss %.5f", it, rho, h_new, loss)
                if h_new > cfg.progress_ratio * h and rho < cfg.rho_max:
                    rho *= 10.0
                else:
                    break
            h = h_new
            alpha += rho * h
            trace.append(TraceRecord(it, loss, h, rho, alpha))
            if h <= cfg.h_tol:
                converged = True
                break
            if rho >= cfg.rho_max:
                break

    W = model.adjacency(theta)
    h_final, _ = h_value_and_grad(W)
    if cfg.enforce_dag:
        converged = converged and h_final <= cfg.h_tol
    B, eff = threshold_to_dag(W, cfg.threshold)
    return LearnResult(theta=theta, W_est=W, B_est=B, h_final=h_final,
                       converged=bool(converged), effective_threshold=eff,
                       trace=tuple(trace), wall_time=time.perf_counter() - t_start)
