"""Cluster-to-class alignment and accuracy metrics.

The assignment solver wraps :func:`scipy.optimize.linear_sum_assignment` but
adds rectangular padding, a max/min sense switch, and a deterministic
tie-break: among equal-total assignments it returns the one whose
row-to-column mapping is lexicographically smallest (unmatched rows sort
after every real column).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment


def _optimal_total(m: np.ndarray) -> float:
    """Minimum total of a matching of min(R, C) pairs (rectangles padded with 0)."""
    r, c = m.shape
    n = max(r, c)
    padded = np.zeros((n, n))
    padded[:r, :c] = m
    rows, cols = linear_sum_assignment(padded)
    real = (rows < r) & (cols < c)
    return float(m[rows[real], cols[real]].sum())


def hungarian(cost: np.ndarray, sense: str = "min") -> list[tuple[int, int]]:
    """Optimal one-to-one matching of min(R, C) row/column pairs.

    Returns (row, column) pairs sorted by row.  Ties between equally good
    assignments are broken toward the lexicographically smallest mapping, so
    the output is a deterministic function of the cost matrix.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] < 1 or cost.shape[1] < 1:
        raise ValueError("cost must be a non-empty 2-D matrix")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    m = cost if sense == "min" else -cost
    r, c = m.shape
    tol = 1e-9 * max(1.0, float(np.abs(m).max()) * min(r, c))

    pairs: list[tuple[int, int]] = []
    rows_left = list(range(r))
    cols_left = list(range(c))
    target = _optimal_total(m)
    for i in range(r):
        need = min(r, c) - len(pairs)
        if need == 0:
            break
        rows_left.remove(i)
        chosen = None
        for j in cols_left:
            rest_cols = [x for x in cols_left if x != j]
            sub = m[i, j] + (_optimal_total(m[np.ix_(rows_left, rest_cols)]) if rows_left and rest_cols else 0.0)
            if abs(sub - target) <= tol:
                chosen = j
                break
        if chosen is not None:
            pairs.append((i, chosen))
            cols_left.remove(chosen)
            target -= m[i, chosen]
        elif len(rows_left) < need:
            raise AssertionError("assignment refinement lost feasibility")
    return pairs


@dataclass
class EvalReport:
    """Hungarian-aligned accuracy figures plus optional class-count estimate."""

    acc_all: float
    acc_old: float
    acc_new: float
    labeled_acc: float | None = None
    k_hat: int | None = None
    err: float | None = None
    assignment: list[tuple[int, int]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "acc_all": self.acc_all,
            "acc_old": self.acc_old,
            "acc_new": self.acc_new,
            "labeled_acc": self.labeled_acc,
            "k_hat": self.k_hat,
            "err": self.err,
            "assignment": [list(p) for p in self.assignment],
        }


def _contingency(rows: np.ndarray, cols: np.ndarray, n_rows: int, n_cols: int) -> np.ndarray:
    table = np.zeros((n_rows, n_cols), dtype=np.int64)
    np.add.at(table, (rows, cols), 1)
    return table


def acc_partition(pred_clusters: np.ndarray, truth: np.ndarray, k_old: int) -> EvalReport:
    """Accuracy after one joint cluster-to-class alignment over all clusters.

    ``acc_old``/``acc_new`` restrict the matched fraction to rows whose true
    class is below/at-or-above ``k_old``.
    """
    pred = np.asarray(pred_clusters, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError("prediction and truth vectors must be equal-length and non-empty")
    if pred.min() < 0 or truth.min() < 0:
        raise ValueError("cluster and class ids must be non-negative")
    k = int(max(pred.max(), truth.max())) + 1
    table = _contingency(pred, truth, k, k)
    pairs = hungarian(table, sense="max")
    mapping = np.full(k, -1, dtype=np.int64)
    for cluster, cls in pairs:
        mapping[cluster] = cls
    correct = mapping[pred] == truth
    old = truth < k_old
    new = ~old
    acc_all = float(correct.mean())
    acc_old = float(correct[old].mean()) if old.any() else 0.0
    acc_new = float(correct[new].mean()) if new.any() else 0.0
    return EvalReport(acc_all=acc_all, acc_old=acc_old, acc_new=acc_new, assignment=pairs)


def labeled_acc(pred_clusters: np.ndarray, labels: np.ndarray, k: int | None = None) -> float:
    """Matched fraction after aligning the most consistent ``k_old`` of the
    ``k`` clusters with the known classes (rectangular matching)."""
    pred = np.asarray(pred_clusters, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if pred.shape != labels.shape or pred.size == 0:
        raise ValueError("prediction and label vectors must be equal-length and non-empty")
    k_old = int(labels.max()) + 1
    n_clusters = max(int(pred.max()) + 1, k_old if k is None else int(k))
    table = _contingency(pred, labels, n_clusters, k_old)
    pairs = hungarian(table, sense="max")
    matched = sum(int(table[i, j]) for i, j in pairs)
    return matched / pred.size


def class_count_error(k_hat: int, k: int) -> float:
    """Relative class-count error ``|k_hat - k| / k``."""
    if k < 1:
        raise ValueError("true class count must be >= 1")
    return abs(int(k_hat) - int(k)) / k
