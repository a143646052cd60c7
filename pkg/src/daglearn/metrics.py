"""Structure-recovery metrics for an estimated DAG against the truth."""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class MetricsReport:
    fdr: float
    tpr: float
    fpr: float
    shd: int
    nnz: int
    effective_threshold: float = None

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def count_accuracy(B_true, B_est, effective_threshold=None):
    """FDR/TPR/FPR/SHD of ``B_est`` versus ``B_true``.

    A predicted edge whose reverse is a true edge counts as a false discovery
    and adds 1 to SHD.  FPR is normalized by the number of unordered non-edges
    of the true graph.  SHD counts unordered pairs that are extra, missing, or
    present with the wrong orientation.
    """
    B_true = np.asarray(B_true) != 0
    B_est = np.asarray(B_est) != 0
    if B_true.shape != B_est.shape or B_true.ndim != 2 or B_true.shape[0] != B_true.shape[1]:
        raise DimensionError(f"shape mismatch: {B_true.shape} vs {B_est.shape}")
    d = B_true.shape[0]
    pred = B_est
    true_rev = B_true.T
    tp = pred & B_true
    reverse = pred & ~B_true & true_rev
    false_pos = pred & ~B_true & ~true_rev
    n_pred = int(pred.sum())
    n_true = int(B_true.sum())
    n_true_neg = d * (d - 1) / 2 - n_true
    wrong = int(reverse.sum() + false_pos.sum())

    skel_pred = np.tril(pred | pred.T, k=-1)
    skel_true = np.tril(B_true | B_true.T, k=-1)
    extra = int((skel_pred & ~skel_true).sum())
    missing = int((skel_true & ~skel_pred).sum())
    shd = extra + missing + int(reverse.sum())
    return MetricsReport(
        fdr=wrong / max(n_pred, 1),
        tpr=int(tp.sum()) / max(n_true, 1),
        fpr=wrong / max(n_true_neg, 1),
        shd=shd,
        nnz=n_pred,
        effective_threshold=None if effective_threshold is None else float(effective_threshold),
    )
