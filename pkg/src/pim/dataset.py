"""Embedded datasets with partial labels: file formats, synthetic benchmarks, splits.

A dataset is a fixed matrix of feature vectors in which only a subset of rows
carries a class label.  Labeled rows belong to the "known" classes
``0..k_old-1``; unlabeled rows may belong to known or novel classes.  Two file
formats are supported: a human-readable CSV and a compact binary format
(``fmat``) whose write/read cycle is bit-exact.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass

import numpy as np

UNLABELED = -1

_NORM_TOL = 1e-6
_FMAT_MAGIC = b"FMAT"
_FMAT_VERSION = 1
_FMAT_HEADER = struct.Struct("<4sHQQQ")


class ParseError(ValueError):
    """A feature file violated its format or a data invariant."""


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def l2_normalize(features: np.ndarray) -> np.ndarray:
    """Project rows onto the unit sphere.

    Idempotent: rows whose norm is already within 1e-9 of one are returned
    bit-unchanged, so normalized data survives a write/read cycle exactly.
    """
    features = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(features, axis=1)
    if not np.all(np.isfinite(norms)):
        raise ValueError("cannot normalize rows with non-finite entries")
    if np.any(norms == 0.0):
        raise ValueError("cannot normalize zero rows")
    out = features.copy()
    stale = np.abs(norms - 1.0) > 1e-9
    out[stale] /= norms[stale, None]
    return out


@dataclass(frozen=True)
class FeatureSet:
    """An embedded dataset of ``n_total`` rows, partially labeled.

    ``labels[i]`` is valid only where ``labeled_mask[i]`` is true; unlabeled
    rows carry the sentinel ``UNLABELED`` and must never be read as classes.
    Instances are immutable (arrays are frozen) and safe to share.
    """

    features: np.ndarray
    labeled_mask: np.ndarray
    labels: np.ndarray
    k_old: int
    normalized: bool = True

    def __post_init__(self):
        # copies: the arrays get frozen, which must not leak to caller data
        features = np.array(self.features, dtype=np.float64)
        mask = np.array(self.labeled_mask, dtype=bool)
        labels = np.array(self.labels, dtype=np.int64)
        if features.ndim != 2 or features.shape[0] == 0 or features.shape[1] == 0:
            raise ValueError("features must be a non-empty 2-D matrix")
        n = features.shape[0]
        if mask.shape != (n,) or labels.shape != (n,):
            raise ValueError("labeled_mask and labels must have one entry per row")
        if not np.all(np.isfinite(features)):
            raise ValueError("features contain non-finite entries")
        if self.k_old < 1:
            raise ValueError("k_old must be a positive integer")
        n_labeled = int(mask.sum())
        if n_labeled < 1 or n_labeled == n:
            raise ValueError("need at least one labeled and one unlabeled row")
        lab = labels[mask]
        if lab.size and (lab.min() < 0 or lab.max() >= self.k_old):
            raise ValueError(f"labeled rows must have labels in [0, {self.k_old})")
        labels[~mask] = UNLABELED
        if self.normalized:
            norms = np.linalg.norm(features, axis=1)
            if np.any(np.abs(norms - 1.0) > _NORM_TOL):
                raise ValueError("normalized=True but some rows are not unit-norm")
        for arr in (features, mask, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labeled_mask", mask)
        object.__setattr__(self, "labels", labels)

    @property
    def n_total(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def n_labeled(self) -> int:
        return int(self.labeled_mask.sum())

    @property
    def n_unlabeled(self) -> int:
        return self.n_total - self.n_labeled

    @property
    def labeled_labels(self) -> np.ndarray:
        return self.labels[self.labeled_mask]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for a synthetic Gaussian-blob benchmark.

    ``tail`` selects the class-size profile: "uniform" gives every class
    ``samples_per_class_base`` rows, "power" gives class c (1-indexed) a count
    proportional to ``c**-alpha``.
    """

    k_total: int
    k_old: int
    dim: int
    samples_per_class_base: int = 100
    tail: str = "uniform"
    alpha: float = 1.0
    separation: float = 6.0
    noise_sigma: float = 1.0
    center_offset: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.k_old < 1 or self.k_old >= self.k_total:
            raise ValueError("need 1 <= k_old < k_total")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.tail not in ("uniform", "power"):
            raise ValueError(f"unknown tail profile {self.tail!r}")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.separation <= 0 or self.noise_sigma <= 0:
            raise ValueError("separation and noise_sigma must be positive")
        if self.center_offset < 0:
            raise ValueError("center_offset must be >= 0")
        if self.samples_per_class_base < 2:
            raise ValueError("samples_per_class_base must be >= 2")


def class_counts(spec: SynthSpec) -> np.ndarray:
    """Per-class sample counts implied by the tail profile."""
    if spec.tail == "uniform":
        counts = np.full(spec.k_total, spec.samples_per_class_base, dtype=np.int64)
    else:
        weights = (np.arange(1, spec.k_total + 1, dtype=np.float64)) ** (-spec.alpha)
        counts = np.array(
            [round_half_up(spec.samples_per_class_base * w) for w in weights],
            dtype=np.int64,
        )
    if counts.min() < 2:
        raise ValueError(
            "tail profile assigns fewer than 2 samples to some class; "
            "increase samples_per_class_base or reduce alpha"
        )
    return counts


def _class_means(k: int, dim: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    """Class means on a sphere of radius ``separation`` (greedy farthest-point
    sampling over random unit vectors), scaled up further only if needed to
    keep every pairwise distance at least ``separation``."""
    n_pool = max(256, 32 * k)
    pool = rng.standard_normal((n_pool, dim))
    pool /= np.linalg.norm(pool, axis=1, keepdims=True)
    chosen = [0]
    dist = np.linalg.norm(pool - pool[0], axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(pool - pool[nxt], axis=1))
    means = pool[chosen]
    diffs = means[:, None, :] - means[None, :, :]
    pair = np.linalg.norm(diffs, axis=2)
    d_min = pair[np.triu_indices(k, 1)].min()
    if d_min <= 0:
        raise ValueError(f"dim={dim} is too small to place {k} distinct class means")
    return means * (separation / min(d_min, 1.0))


def generate_synthetic(
    spec: SynthSpec,
    labeled_fraction: float = 0.5,
    normalize: bool = True,
) -> tuple[FeatureSet, np.ndarray]:
    """Draw a seeded synthetic benchmark and its labeled/unlabeled split.

    Returns the split ``FeatureSet`` (labels exposed only on the labeled rows)
    together with the full ground-truth class vector.  Deterministic given the
    spec: identical seeds give bit-identical outputs.
    """
    counts = class_counts(spec)
    ss = np.random.SeedSequence(spec.seed)
    s_means, s_noise, s_split = ss.spawn(3)
    rng_means = np.random.default_rng(s_means)
    means = _class_means(spec.k_total, spec.dim, spec.separation, rng_means)
    if spec.center_offset > 0:
        # displace the whole cloud from the origin, as embeddings with a
        # dominant mean direction are; the classes then share a cone
        direction = rng_means.standard_normal(spec.dim)
        direction /= np.linalg.norm(direction)
        means = means + spec.center_offset * spec.separation * direction
    rng_noise = np.random.default_rng(s_noise)
    blocks = []
    truth = []
    for c in range(spec.k_total):
        blocks.append(means[c] + spec.noise_sigma * rng_noise.standard_normal((counts[c], spec.dim)))
        truth.extend([c] * int(counts[c]))
    features = np.vstack(blocks)
    ground_truth = np.asarray(truth, dtype=np.int64)
    split_seed = int(s_split.generate_state(1)[0])
    fs = gcd_split(features, ground_truth, spec.k_old, labeled_fraction, split_seed, normalize=normalize)
    return fs, ground_truth


def gcd_split(
    features: np.ndarray,
    ground_truth: np.ndarray,
    k_old: int,
    labeled_fraction: float = 0.5,
    seed: int = 0,
    normalize: bool = True,
) -> FeatureSet:
    """Split a fully labeled matrix into labeled/unlabeled subsets.

    For every known class ``c < k_old`` exactly ``round(labeled_fraction *
    count_c)`` rows (rounded half-up) become labeled; every other row,
    including all rows of classes ``>= k_old``, stays unlabeled.
    """
    features = np.asarray(features, dtype=np.float64)
    ground_truth = np.asarray(ground_truth, dtype=np.int64)
    if not 0.0 < labeled_fraction < 1.0:
        raise ValueError("labeled_fraction must lie strictly between 0 and 1")
    if np.unique(ground_truth).size < k_old:
        raise ValueError("ground truth covers fewer distinct classes than k_old")
    if normalize:
        features = l2_normalize(features)
    rng = np.random.default_rng(seed)
    mask = np.zeros(features.shape[0], dtype=bool)
    labels = np.full(features.shape[0], UNLABELED, dtype=np.int64)
    for c in range(k_old):
        rows = np.flatnonzero(ground_truth == c)
        if rows.size < 2:
            raise ValueError(f"known class {c} has {rows.size} samples; cannot split")
        n_lab = round_half_up(labeled_fraction * rows.size)
        picked = rng.choice(rows, size=n_lab, replace=False)
        mask[picked] = True
        labels[picked] = c
    return FeatureSet(features, mask, labels, k_old, normalized=normalize)


# --- CSV format -------------------------------------------------------------
#
# Header line:  d=<D>,k_old=<K_old>
# Data lines:   f_1,...,f_D,<label or _>        (UTF-8, LF)

_CSV_HEADER_RE = re.compile(r"^d=(\d+),k_old=(\d+)$")


def save_csv(fs: FeatureSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"d={fs.dim},k_old={fs.k_old}\n")
        for i in range(fs.n_total):
            row = ",".join(repr(float(v)) for v in fs.features[i])
            tag = str(int(fs.labels[i])) if fs.labeled_mask[i] else "_"
            fh.write(f"{row},{tag}\n")


def load_csv(path, normalize: bool = True) -> FeatureSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        m = _CSV_HEADER_RE.match(header)
        if not m:
            raise ParseError(f"malformed header {header!r}; expected 'd=<D>,k_old=<K_old>'")
        dim, k_old = int(m.group(1)), int(m.group(2))
        rows, mask, labels = [], [], []
        for idx, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != dim + 1:
                raise ParseError(f"row {idx}: expected {dim + 1} fields, found {len(parts)}")
            try:
                values = [float(p) for p in parts[:dim]]
            except ValueError as exc:
                raise ParseError(f"row {idx}: {exc}") from exc
            if not all(np.isfinite(values)):
                raise ParseError(f"row {idx}: non-finite feature value")
            tag = parts[dim]
            if tag == "_":
                mask.append(False)
                labels.append(UNLABELED)
            else:
                try:
                    label = int(tag)
                except ValueError as exc:
                    raise ParseError(f"row {idx}: bad label field {tag!r}") from exc
                if not 0 <= label < k_old:
                    raise ParseError(f"row {idx}: label {label} outside [0, {k_old})")
                mask.append(True)
                labels.append(label)
            rows.append(values)
    if not rows:
        raise ParseError("file contains no data rows")
    features = np.asarray(rows, dtype=np.float64)
    if normalize:
        features = l2_normalize(features)
    try:
        return FeatureSet(features, np.asarray(mask), np.asarray(labels), k_old, normalized=normalize)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


# --- fmat binary format -----------------------------------------------------
#
# FMAT | u16 version=1 | u64 n | u64 d | u64 k_old |
# n*d little-endian f64 row-major | n i64 labels (-1 = unlabeled)


def save_fmat(fs: FeatureSet, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_FMAT_HEADER.pack(_FMAT_MAGIC, _FMAT_VERSION, fs.n_total, fs.dim, fs.k_old))
        fh.write(np.ascontiguousarray(fs.features, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(fs.labels, dtype="<i8").tobytes())


def load_fmat(path, normalize: bool = True) -> FeatureSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _FMAT_HEADER.size:
        raise ParseError("file too short for fmat header")
    magic, version, n, dim, k_old = _FMAT_HEADER.unpack_from(blob)
    if magic != _FMAT_MAGIC:
        raise ParseError(f"bad magic {magic!r}; not an fmat file")
    if version != _FMAT_VERSION:
        raise ParseError(f"unsupported fmat version {version}")
    need = _FMAT_HEADER.size + 8 * n * dim + 8 * n
    if len(blob) != need:
        raise ParseError(f"fmat payload size mismatch: expected {need} bytes, found {len(blob)}")
    off = _FMAT_HEADER.size
    features = np.frombuffer(blob, dtype="<f8", count=n * dim, offset=off).reshape(n, dim).copy()
    labels = np.frombuffer(blob, dtype="<i8", count=n, offset=off + 8 * n * dim).copy()
    if not np.all(np.isfinite(features)):
        bad = int(np.flatnonzero(~np.isfinite(features).all(axis=1))[0])
        raise ParseError(f"row {bad}: non-finite feature value")
    mask = labels != UNLABELED
    if np.any(labels[mask] >= k_old) or np.any(labels[mask] < 0):
        bad = int(np.flatnonzero(mask & ((labels >= k_old) | (labels < 0)))[0])
        raise ParseError(f"row {bad}: label {labels[bad]} outside [0, {k_old})")
    if normalize:
        features = l2_normalize(features)
    try:
        return FeatureSet(features, mask, labels, int(k_old), normalized=normalize)
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def load_features(path, format: str | None = None, normalize: bool = True) -> FeatureSet:
    """Load a feature file, inferring the format from the extension if not given."""
    fmt = format
    if fmt is None:
        name = str(path).lower()
        fmt = "csv" if name.endswith(".csv") else "fmat"
    if fmt == "csv":
        return load_csv(path, normalize=normalize)
    if fmt == "fmat":
        return load_fmat(path, normalize=normalize)
    raise ValueError(f"unknown feature format {fmt!r}")
