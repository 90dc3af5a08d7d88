"""Full-batch Adam loop over the prototype matrix."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .classifier import PartitionModel
from .dataset import FeatureSet
from .objective import AblationFlags, f_loss_and_grad, g_loss_and_grad


class NumericalError(RuntimeError):
    """A run produced a non-finite gradient or loss and was aborted."""


@dataclass(frozen=True)
class AdamState:
    """Moment estimates plus hyperparameters for one optimized matrix.

    Weight decay is coupled by default (added to the gradient before the
    moment updates); set ``decoupled_wd`` to subtract it from the weights
    directly instead.
    """

    m: np.ndarray
    v: np.ndarray
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-2
    decoupled_wd: bool = False

    @classmethod
    def for_shape(cls, shape: tuple[int, int], **hyper) -> "AdamState":
        return cls(m=np.zeros(shape), v=np.zeros(shape), **hyper)


def adam_step(state: AdamState, model: PartitionModel, grad: np.ndarray) -> tuple[PartitionModel, AdamState]:
    """One bias-corrected Adam update; returns the new model and state."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != model.prototypes.shape:
        raise ValueError("gradient shape does not match the prototype matrix")
    if not np.all(np.isfinite(grad)):
        raise NumericalError(
            f"non-finite gradient at step {state.step_count + 1} "
            f"(|grad|_max={np.abs(grad[np.isfinite(grad)]).max() if np.isfinite(grad).any() else 'n/a'})"
        )
    w = model.prototypes
    if state.weight_decay > 0 and not state.decoupled_wd:
        grad = grad + state.weight_decay * w
    t = state.step_count + 1
    m = state.beta1 * state.m + (1 - state.beta1) * grad
    v = state.beta2 * state.v + (1 - state.beta2) * grad**2
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_w = w - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    if state.weight_decay > 0 and state.decoupled_wd:
        new_w = new_w - state.lr * state.weight_decay * w
    return PartitionModel(new_w), replace(state, m=m, v=v, step_count=t)


def fit(
    fs: FeatureSet,
    init_w: np.ndarray,
    lam: float,
    flags: AblationFlags = AblationFlags(),
    epochs: int = 1000,
    seed: int | None = None,
    objective: str = "F",
    score: str = "dot",
    temperature: float = 1.0,
    lr: float = 1e-3,
    weight_decay: float = 1e-2,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    decoupled_wd: bool = False,
) -> tuple[PartitionModel, np.ndarray]:
    """Run ``epochs`` full-batch steps of the selected objective.

    ``objective`` is "F" (constrained, honoring ``flags``) or "G"
    (unconstrained).  Returns the final model and the loss trace: entry ``e``
    is the total before step ``e``, the last entry is the final total, so the
    trace has ``epochs + 1`` values.  Fully deterministic; ``seed`` is
    accepted for interface stability but the loop draws no randomness.
    """
    del seed
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if objective not in ("F", "G"):
        raise ValueError(f"objective must be 'F' or 'G', got {objective!r}")
    model = PartitionModel(init_w)
    state = AdamState.for_shape(
        model.prototypes.shape,
        lr=lr, weight_decay=weight_decay, beta1=beta1, beta2=beta2, eps=eps,
        decoupled_wd=decoupled_wd,
    )

    def eval_loss_grad(mod):
        if objective == "F":
            breakdown, grad = f_loss_and_grad(mod, fs, lam, flags, score, temperature)
            return breakdown.total, grad
        return g_loss_and_grad(mod, fs.features, lam, score, temperature)

    trace = np.empty(epochs + 1)
    for e in range(epochs):
        total, grad = eval_loss_grad(model)
        if not np.isfinite(total):
            raise NumericalError(f"non-finite loss at epoch {e}")
        trace[e] = total
        model, state = adam_step(state, model, grad)
    final_total, _ = eval_loss_grad(model)
    if not np.isfinite(final_total):
        raise NumericalError(f"non-finite loss at epoch {epochs}")
    trace[epochs] = final_total
    return model, trace
