import numpy as np
import pytest

from pim import FeatureSet, SynthSpec, generate_synthetic


@pytest.fixture
def tiny_fs():
    """Hand-built 6-row dataset: 3 labeled rows over 2 known classes."""
    rng = np.random.default_rng(42)
    feats = rng.standard_normal((6, 4))
    feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    mask = np.array([True, True, True, False, False, False])
    labels = np.array([0, 1, 0, -1, -1, -1])
    return FeatureSet(feats, mask, labels, k_old=2)


@pytest.fixture
def blob_fs():
    """Well-separated seeded synthetic instance plus its ground truth."""
    spec = SynthSpec(k_total=4, k_old=2, dim=6, samples_per_class_base=40,
                     separation=6.0, noise_sigma=1.0, seed=11)
    return generate_synthetic(spec)


def random_feature_set(rng, n=20, d=3, k_old=2, n_labeled=8):
    feats = rng.standard_normal((n, d))
    feats /= np.linalg.norm(feats, axis=1, keepdims=True)
    mask = np.zeros(n, bool)
    mask[rng.choice(n, size=n_labeled, replace=False)] = True
    labels = np.full(n, -1)
    labels[mask] = rng.integers(0, k_old, mask.sum())
    # make sure every known class has a labeled row
    lab_idx = np.flatnonzero(mask)
    for c in range(k_old):
        if not np.any(labels[lab_idx] == c):
            labels[lab_idx[c % len(lab_idx)]] = c
    return FeatureSet(feats, mask, labels, k_old=k_old)
