"""Training objectives: entropy terms, label penalty, and analytic gradients.

All quantities are in nats and the library minimizes.  The constrained
objective combines three ingredients computed from the softmax predictions:

* a cluster-balance term ``sum_k pi_k ln pi_k`` (negated marginal entropy),
  whose minimization pushes the soft cluster proportions toward uniform;
* a cross-entropy penalty on the labeled rows, enforcing the supervision
  constraints;
* a confidence term ``-(lam/|U|) sum_{i in U} sum_k p_ik ln p_ik`` (scaled
  conditional entropy over the unlabeled rows), whose minimization sharpens
  predictions.  ``lam`` in (0, 1] trades confidence against balance.

The unconstrained variant used during the weight search and the class-count
search drops the penalty and averages both entropy terms over every row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import PartitionModel, forward_softmax
from .dataset import FeatureSet

EPS_LOG = 1e-12

MARGINAL_SCOPES = ("full_z", "zu_only", "off")
CONSTRAINTS = ("ce_on_labeled", "off")


@dataclass(frozen=True)
class AblationFlags:
    """Which loss terms are active.

    ``marginal_scope`` picks the rows the cluster-balance term averages over
    ("full_z", "zu_only") or disables it ("off"); ``constraint`` toggles the
    labeled cross-entropy penalty.  The default is the full objective.
    """

    marginal_scope: str = "full_z"
    constraint: str = "ce_on_labeled"

    def __post_init__(self):
        if self.marginal_scope not in MARGINAL_SCOPES:
            raise ValueError(f"marginal_scope must be one of {MARGINAL_SCOPES}")
        if self.constraint not in CONSTRAINTS:
            raise ValueError(f"constraint must be one of {CONSTRAINTS}")


@dataclass
class LossBreakdown:
    """Diagnostic decomposition of one objective evaluation (nats).

    The entropy fields are the non-negative quantities; ``total`` is the
    signed minimization target assembled from the active terms.
    """

    marginal_entropy: float
    conditional_entropy: float
    cross_entropy: float
    total: float

    def as_dict(self) -> dict:
        return {
            "marginal_entropy": self.marginal_entropy,
            "conditional_entropy": self.conditional_entropy,
            "cross_entropy": self.cross_entropy,
            "total": self.total,
        }


def _clog(x: np.ndarray) -> np.ndarray:
    # clamp inside the log only; linear factors keep their exact values
    return np.log(np.maximum(x, EPS_LOG))


def _scope_rows(n: int, scope) -> np.ndarray:
    if scope is None:
        return np.arange(n)
    scope = np.asarray(scope)
    idx = np.flatnonzero(scope) if scope.dtype == bool else scope.astype(np.int64)
    if idx.size == 0:
        raise ValueError("scope selects no rows")
    return idx


def soft_marginals(probs: np.ndarray, scope=None) -> np.ndarray:
    """Mean prediction per cluster over the scoped rows (a point on the simplex)."""
    probs = np.asarray(probs, dtype=np.float64)
    idx = _scope_rows(probs.shape[0], scope)
    return probs[idx].mean(axis=0)


def marginal_entropy(pi: np.ndarray) -> float:
    pi = np.asarray(pi, dtype=np.float64)
    return float(-np.sum(pi * _clog(pi)))


def conditional_entropy(probs: np.ndarray, scope=None) -> float:
    """Mean per-row prediction entropy over the scoped rows."""
    probs = np.asarray(probs, dtype=np.float64)
    idx = _scope_rows(probs.shape[0], scope)
    p = probs[idx]
    return float(-np.sum(p * _clog(p)) / idx.size)


def cross_entropy_labeled(probs: np.ndarray, labels: np.ndarray, scope) -> float:
    """Mean negative log-probability of the true class over the scoped rows."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    idx = _scope_rows(probs.shape[0], scope)
    y = labels[idx]
    if np.any(y < 0) or np.any(y >= probs.shape[1]):
        raise ValueError("scoped rows carry labels outside [0, K)")
    return float(-np.mean(_clog(probs[idx, y])))


def objective_f(probs: np.ndarray, fs: FeatureSet, lam: float, flags: AblationFlags = AblationFlags()) -> LossBreakdown:
    """Constrained minimization target over a full dataset's predictions.

    ``total = -H(marginal scope) + CE(labeled) + lam * H_cond(unlabeled)``
    with terms dropped according to ``flags``.  When the balance term is
    disabled its diagnostic entropy is still reported over all rows.
    """
    _check_lambda(lam)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[0] != fs.n_total:
        raise ValueError("predictions must cover every row of the dataset")
    labeled = fs.labeled_mask
    unlabeled = ~labeled
    if flags.marginal_scope == "zu_only":
        h_marg = marginal_entropy(soft_marginals(probs, unlabeled))
    else:
        h_marg = marginal_entropy(soft_marginals(probs))
    h_cond = conditional_entropy(probs, unlabeled)
    ce = cross_entropy_labeled(probs, fs.labels, labeled)
    total = lam * h_cond
    if flags.marginal_scope != "off":
        total -= h_marg
    if flags.constraint == "ce_on_labeled":
        total += ce
    return LossBreakdown(h_marg, h_cond, ce, float(total))


def objective_g(probs: np.ndarray, lam: float) -> float:
    """Unconstrained minimization target: ``-H(pi) + lam * H_cond`` over all rows."""
    _check_lambda(lam)
    probs = np.asarray(probs, dtype=np.float64)
    return float(-marginal_entropy(soft_marginals(probs)) + lam * conditional_entropy(probs))


def neg_mutual_information(probs: np.ndarray) -> float:
    """Negated mutual-information estimate ``-H(pi) + H_cond`` over all rows."""
    probs = np.asarray(probs, dtype=np.float64)
    return float(-marginal_entropy(soft_marginals(probs)) + conditional_entropy(probs))


def neg_mutual_information_substituted(
    probs: np.ndarray, labels: np.ndarray, labeled_mask: np.ndarray
) -> float:
    """Negated MI with labeled rows' predictions replaced by their one-hot labels
    inside the sample-average term.  Equals :func:`neg_mutual_information` whenever
    the labeled predictions already are those one-hot vectors.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    n = probs.shape[0]
    logp = _clog(probs)
    lab = np.flatnonzero(labeled_mask)
    unl = np.flatnonzero(~labeled_mask)
    joint = logp[lab, labels[lab]].sum() + float(np.sum(probs[unl] * logp[unl]))
    pi = soft_marginals(probs)
    return float(np.sum(pi * _clog(pi)) - joint / n)


def _check_lambda(lam: float) -> None:
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")


# --- analytic gradients ------------------------------------------------------


def _marginal_grad_p(probs: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """d/dp of ``sum_k pi_k ln pi_k`` with pi averaged over rows ``idx``."""
    pi = probs[idx].mean(axis=0)
    u = _clog(pi) + (pi > EPS_LOG)
    grad = np.zeros_like(probs)
    grad[idx] = u[None, :] / idx.size
    return grad


def _confidence_grad_p(probs: np.ndarray, idx: np.ndarray, weight: float) -> np.ndarray:
    """d/dp of ``-(weight/|idx|) sum sum p ln p`` over rows ``idx``."""
    p = probs[idx]
    grad = np.zeros_like(probs)
    grad[idx] = -(weight / idx.size) * (_clog(p) + (p > EPS_LOG))
    return grad


def _ce_grad_p(probs: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """d/dp of the mean negative true-class log-probability over rows ``idx``."""
    y = labels[idx]
    grad = np.zeros_like(probs)
    py = probs[idx, y]
    grad[idx, y] = np.where(py > EPS_LOG, -1.0 / np.maximum(py, EPS_LOG), 0.0) / idx.size
    return grad


def _backprop_to_weights(
    model: PartitionModel,
    features: np.ndarray,
    probs: np.ndarray,
    grad_p: np.ndarray,
    score: str,
    temperature: float,
) -> np.ndarray:
    inner = np.sum(grad_p * probs, axis=1, keepdims=True)
    grad_s = probs * (grad_p - inner) / temperature
    if score == "dot":
        return grad_s.T @ features
    if score == "neg_sqdist":
        col = grad_s.sum(axis=0)
        return 2.0 * (grad_s.T @ features - col[:, None] * model.prototypes)
    raise ValueError(f"unknown score kind {score!r}")


def grad_f(
    model: PartitionModel,
    fs: FeatureSet,
    lam: float,
    flags: AblationFlags = AblationFlags(),
    score: str = "dot",
    temperature: float = 1.0,
) -> np.ndarray:
    """Gradient of the constrained minimization target with respect to W."""
    _, grad = f_loss_and_grad(model, fs, lam, flags, score, temperature)
    return grad


def grad_g(
    model: PartitionModel,
    features,
    lam: float,
    score: str = "dot",
    temperature: float = 1.0,
) -> np.ndarray:
    """Gradient of the unconstrained minimization target with respect to W."""
    _, grad = g_loss_and_grad(model, features, lam, score, temperature)
    return grad


def f_loss_and_grad(
    model: PartitionModel,
    fs: FeatureSet,
    lam: float,
    flags: AblationFlags = AblationFlags(),
    score: str = "dot",
    temperature: float = 1.0,
) -> tuple[LossBreakdown, np.ndarray]:
    """One forward pass shared between the loss value and its gradient."""
    _check_lambda(lam)
    probs = forward_softmax(model, fs.features, temperature, score)
    breakdown = objective_f(probs, fs, lam, flags)
    labeled = np.flatnonzero(fs.labeled_mask)
    unlabeled = np.flatnonzero(~fs.labeled_mask)
    grad_p = _confidence_grad_p(probs, unlabeled, lam)
    if flags.marginal_scope == "full_z":
        grad_p += _marginal_grad_p(probs, np.arange(fs.n_total))
    elif flags.marginal_scope == "zu_only":
        grad_p += _marginal_grad_p(probs, unlabeled)
    if flags.constraint == "ce_on_labeled":
        grad_p += _ce_grad_p(probs, fs.labels, labeled)
    grad = _backprop_to_weights(model, fs.features, probs, grad_p, score, temperature)
    return breakdown, grad


def g_loss_and_grad(
    model: PartitionModel,
    features,
    lam: float,
    score: str = "dot",
    temperature: float = 1.0,
) -> tuple[float, np.ndarray]:
    _check_lambda(lam)
    mat = features.features if isinstance(features, FeatureSet) else np.asarray(features, dtype=np.float64)
    probs = forward_softmax(model, mat, temperature, score)
    total = objective_g(probs, lam)
    everything = np.arange(mat.shape[0])
    grad_p = _marginal_grad_p(probs, everything) + _confidence_grad_p(probs, everything, lam)
    grad = _backprop_to_weights(model, mat, probs, grad_p, score, temperature)
    return total, grad
