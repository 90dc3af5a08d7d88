"""Soft partitioning model: softmax over linear prototype scores."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_PMOD_MAGIC = b"PMOD"
_PMOD_VERSION = 1
_PMOD_HEADER = struct.Struct("<4sHQQ")

SCORE_KINDS = ("dot", "neg_sqdist")


@dataclass(frozen=True)
class PartitionModel:
    """Prototype matrix W (one row per cluster) defining the soft partitioner."""

    prototypes: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.prototypes, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 2:
            raise ValueError("prototypes must be a K x D matrix with K >= 2")
        if not np.all(np.isfinite(w)):
            raise ValueError("prototypes contain non-finite entries")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "prototypes", w)

    @property
    def k(self) -> int:
        return self.prototypes.shape[0]

    @property
    def dim(self) -> int:
        return self.prototypes.shape[1]


def scores(model: PartitionModel, features: np.ndarray, score: str = "dot") -> np.ndarray:
    """Raw cluster scores, one row per sample."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.dim:
        raise ValueError(
            f"feature dimension {features.shape[1] if features.ndim == 2 else '?'} "
            f"does not match model dimension {model.dim}"
        )
    if score == "dot":
        return features @ model.prototypes.T
    if score == "neg_sqdist":
        z2 = np.sum(features**2, axis=1, keepdims=True)
        w2 = np.sum(model.prototypes**2, axis=1)
        return -(z2 + w2[None, :] - 2.0 * features @ model.prototypes.T)
    raise ValueError(f"unknown score kind {score!r}")


def softmax_rows(s: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction; finite for any finite input."""
    s = np.asarray(s, dtype=np.float64)
    shifted = s - s.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def forward_softmax(
    model: PartitionModel,
    features: np.ndarray,
    temperature: float = 1.0,
    score: str = "dot",
) -> np.ndarray:
    """Softmax prediction matrix; every row lies on the probability simplex."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return softmax_rows(scores(model, features, score) / temperature)


def save_model(model: PartitionModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_PMOD_HEADER.pack(_PMOD_MAGIC, _PMOD_VERSION, model.k, model.dim))
        fh.write(np.ascontiguousarray(model.prototypes, dtype="<f8").tobytes())


def load_model(path) -> PartitionModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _PMOD_HEADER.size:
        raise ValueError("file too short for a model checkpoint")
    magic, version, k, dim = _PMOD_HEADER.unpack_from(blob)
    if magic != _PMOD_MAGIC:
        raise ValueError(f"bad magic {magic!r}; not a model checkpoint")
    if version != _PMOD_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    if len(blob) != _PMOD_HEADER.size + 8 * k * dim:
        raise ValueError("checkpoint payload size mismatch")
    w = np.frombuffer(blob, dtype="<f8", offset=_PMOD_HEADER.size).reshape(k, dim).copy()
    return PartitionModel(w)
