"""Prototype initialization: labeled centroids, k-means++ seeding, and the
pinned-label variant of k-means used to warm-start the partitioner.

In the pinned variant every labeled row is permanently assigned to its own
class's cluster; only the unlabeled rows move between clusters.  Its reported
objective is the sum of unsquared Euclidean distances from each row to its
cluster centroid (labeled rows counted toward their true class).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import FeatureSet

logger = logging.getLogger(__name__)

INIT_STRATEGIES = ("ssrdm", "sskmpp", "sskm")


def known_class_centroids(fs: FeatureSet) -> np.ndarray:
    """Mean labeled feature vector of each known class (k_old x D)."""
    out = np.empty((fs.k_old, fs.dim))
    for c in range(fs.k_old):
        rows = fs.features[fs.labeled_mask & (fs.labels == c)]
        if rows.shape[0] == 0:
            raise ValueError(f"known class {c} has no labeled samples")
        out[c] = rows.mean(axis=0)
    return out


def kmeanspp_seed(
    points: np.ndarray,
    k_new: int,
    fixed: np.ndarray | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Sequential distance-squared-weighted seeding against existing centers.

    Each new seed is drawn from ``points`` with probability proportional to
    its squared distance to the nearest center among ``fixed`` and the seeds
    already chosen.  With no centers yet, the first seed is uniform.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("candidate pool must be a non-empty 2-D matrix")
    if k_new < 1:
        raise ValueError("k_new must be >= 1")
    if np.unique(points, axis=0).shape[0] < k_new:
        raise ValueError(f"pool has fewer than {k_new} distinct points")
    rng = np.random.default_rng(seed)
    n = points.shape[0]
    seeds = np.empty((k_new, points.shape[1]))
    if fixed is not None and len(fixed) > 0:
        d2 = cdist(points, np.asarray(fixed, dtype=np.float64), "sqeuclidean").min(axis=1)
        start = 0
    else:
        first = int(rng.integers(n))
        seeds[0] = points[first]
        d2 = cdist(points, seeds[:1], "sqeuclidean")[:, 0]
        start = 1
    for j in range(start, k_new):
        total = d2.sum()
        if total <= 0:
            raise ValueError("every candidate coincides with an existing center")
        idx = int(rng.choice(n, p=d2 / total))
        seeds[j] = points[idx]
        d2 = np.minimum(d2, cdist(points, seeds[j : j + 1], "sqeuclidean")[:, 0])
    return seeds


@dataclass
class SskmState:
    """Result of a pinned-label k-means run.

    ``objective_trace`` holds the objective after every half-step
    (assignment update, then centroid update), so monotonicity can be
    checked update by update.
    """

    centroids: np.ndarray
    assignments: np.ndarray
    objective: float
    objective_trace: list[float] = field(default_factory=list)
    n_iters: int = 0
    converged: bool = False


def pinned_kmeans_objective(fs: FeatureSet, centroids: np.ndarray, assignments: np.ndarray) -> float:
    """Sum of unsquared distances of every row to its cluster centroid."""
    d = np.linalg.norm(fs.features - centroids[assignments], axis=1)
    return float(d.sum())


def sskm_fit(fs: FeatureSet, k_total: int, max_iters: int = 100, seed: int = 0) -> SskmState:
    """Alternate nearest-centroid assignment (unlabeled rows only) and
    per-cluster means until assignments stop changing or ``max_iters``.

    Known-class centroids initialize the first ``k_old`` clusters; the
    remaining clusters are seeded by :func:`kmeanspp_seed` over the
    unlabeled rows.  Empty clusters are reseeded deterministically to the
    point farthest from its own cluster's centroid.
    """
    if k_total < fs.k_old + 1:
        raise ValueError("k_total must exceed k_old")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    unlabeled = np.flatnonzero(~fs.labeled_mask)
    w = np.empty((k_total, fs.dim))
    w[: fs.k_old] = known_class_centroids(fs)
    w[fs.k_old :] = kmeanspp_seed(fs.features[unlabeled], k_total - fs.k_old, fixed=w[: fs.k_old], seed=seed)

    assignments = fs.labels.copy()
    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        # assignment update: unlabeled rows move to their nearest centroid
        d2 = cdist(fs.features[unlabeled], w, "sqeuclidean")
        new_u = np.argmin(d2, axis=1)
        changed = it == 1 or bool(np.any(assignments[unlabeled] != new_u))
        assignments[unlabeled] = new_u
        trace.append(pinned_kmeans_objective(fs, w, assignments))
        if not changed:
            converged = True
            break
        # centroid update: per-cluster means, labeled rows pinned to their class
        empties = []
        for k in range(k_total):
            members = fs.features[assignments == k]
            if members.shape[0] == 0:
                empties.append(k)
            else:
                w[k] = members.mean(axis=0)
        if empties:
            _reseed_empty(fs, w, assignments, empties, unlabeled)
        trace.append(pinned_kmeans_objective(fs, w, assignments))
    return SskmState(
        centroids=w,
        assignments=assignments,
        objective=trace[-1],
        objective_trace=trace,
        n_iters=it,
        converged=converged,
    )


def _reseed_empty(fs, w, assignments, empties, unlabeled) -> None:
    # move each empty centroid onto the unlabeled point farthest from its own
    # cluster's centroid; no point is assigned there yet, so the objective is
    # unchanged and the next assignment update can only lower it
    logger.debug("reseeding %d empty cluster(s): %s", len(empties), empties)
    dist_own = np.linalg.norm(fs.features[unlabeled] - w[assignments[unlabeled]], axis=1)
    order = list(np.argsort(-dist_own, kind="stable"))
    for k in empties:
        if not order:
            logger.debug("no unlabeled point left to reseed cluster %d; leaving it", k)
            break
        w[k] = fs.features[unlabeled[order.pop(0)]]


def init_prototypes(fs: FeatureSet, k_total: int, strategy: str = "sskm", seed: int = 0) -> np.ndarray:
    """Build the initial K x D prototype matrix.

    "ssrdm": known-class centroids plus uniformly drawn unlabeled rows.
    "sskmpp": known-class centroids plus k-means++ seeds.
    "sskm": centroids of a full pinned-label k-means run (the default).
    """
    if strategy not in INIT_STRATEGIES:
        raise ValueError(f"strategy must be one of {INIT_STRATEGIES}")
    if k_total < fs.k_old + 1:
        raise ValueError("k_total must exceed k_old")
    if strategy == "sskm":
        return sskm_fit(fs, k_total, seed=seed).centroids
    w = np.empty((k_total, fs.dim))
    w[: fs.k_old] = known_class_centroids(fs)
    pool = fs.features[~fs.labeled_mask]
    k_new = k_total - fs.k_old
    if strategy == "ssrdm":
        rng = np.random.default_rng(seed)
        picks = rng.choice(pool.shape[0], size=k_new, replace=False)
        w[fs.k_old :] = pool[picks]
    else:
        w[fs.k_old :] = kmeanspp_seed(pool, k_new, fixed=w[: fs.k_old], seed=seed)
    return w
