"""Bi-level driver: entropy-weight grid search, final constrained fit, and
class-count estimation.

The weight ``lam`` of the confidence term is selected from a grid by an outer
loop: for each candidate the unconstrained objective is optimized and scored
by clustering accuracy on the labeled rows; the best candidate (ties toward
the smallest value) then parameterizes the final constrained fit.  All grid
trials share one prototype initialization so they differ only in ``lam``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classifier import PartitionModel, forward_softmax
from .dataset import FeatureSet
from .evaluation import EvalReport, acc_partition, labeled_acc
from .objective import AblationFlags, LossBreakdown, objective_f
from .optimizer import fit
from .prototypes import INIT_STRATEGIES, init_prototypes

DEFAULT_LAMBDA_GRID: tuple[float, ...] = tuple(float(x) for x in np.linspace(0.05, 1.0, 19))


@dataclass(frozen=True)
class PimConfig:
    """Resolved knobs for one run; everything that affects the output."""

    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    epochs_partition: int = 1000
    epochs_ksearch: int = 500
    init_strategy: str = "sskm"
    flags: AblationFlags = AblationFlags()
    k_max: int | None = None
    seed: int = 0
    score: str = "dot"
    temperature: float = 1.0
    lr: float = 1e-3
    weight_decay: float = 1e-2
    threads: int = 1

    def __post_init__(self):
        grid = tuple(float(x) for x in self.lambda_grid)
        if len(grid) == 0:
            raise ValueError("lambda grid must not be empty")
        if any(not 0.0 < x <= 1.0 for x in grid):
            raise ValueError("lambda grid values must lie in (0, 1]")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda grid must be strictly increasing")
        if self.epochs_partition < 1 or self.epochs_ksearch < 1:
            raise ValueError("epoch counts must be >= 1")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        object.__setattr__(self, "lambda_grid", grid)

    def as_dict(self) -> dict:
        return {
            "lambda_grid": list(self.lambda_grid),
            "epochs_partition": self.epochs_partition,
            "epochs_ksearch": self.epochs_ksearch,
            "init_strategy": self.init_strategy,
            "flags": {"marginal_scope": self.flags.marginal_scope, "constraint": self.flags.constraint},
            "k_max": self.k_max,
            "seed": self.seed,
            "score": self.score,
            "temperature": self.temperature,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "threads": self.threads,
        }


@dataclass(frozen=True)
class LambdaTrial:
    lam: float
    labeled_acc: float
    final_g: float


@dataclass
class LambdaSearchResult:
    trials: list[LambdaTrial]
    lambda_opt: float

    def as_dict(self) -> dict:
        return {
            "per_lambda": [
                {"lambda": t.lam, "labeled_acc": t.labeled_acc, "final_g": t.final_g}
                for t in self.trials
            ],
            "lambda_opt": self.lambda_opt,
        }


@dataclass
class KSearchResult:
    k_hat: int
    trace: list[tuple[int, float]]

    def as_dict(self) -> dict:
        return {"k_hat": self.k_hat, "trace": [[k, a] for k, a in self.trace]}


@dataclass
class PartitionResult:
    model: PartitionModel
    labels: np.ndarray
    lambda_result: LambdaSearchResult
    breakdown: LossBreakdown
    loss_trace: np.ndarray
    eval_report: EvalReport | None = None


def _hard_labels(model: PartitionModel, fs: FeatureSet, config: PimConfig) -> np.ndarray:
    probs = forward_softmax(model, fs.features, config.temperature, config.score)
    return np.argmax(probs, axis=1)


def _fit_kwargs(config: PimConfig) -> dict:
    return {
        "score": config.score,
        "temperature": config.temperature,
        "lr": config.lr,
        "weight_decay": config.weight_decay,
    }


def lambda_search(
    fs: FeatureSet,
    k: int,
    config: PimConfig,
    init_w: np.ndarray | None = None,
) -> LambdaSearchResult:
    """Score every grid value by labeled-row accuracy of the unconstrained fit.

    All trials start from the same initialization.  The winner is the grid
    value with the highest labeled accuracy; ties go to the smallest value.
    """
    if k < fs.k_old + 1:
        raise ValueError("k must exceed k_old")
    if init_w is None:
        init_w = init_prototypes(fs, k, config.init_strategy, config.seed)
    lab = fs.labeled_mask

    def trial(lam: float) -> LambdaTrial:
        model, trace = fit(
            fs, init_w, lam,
            epochs=config.epochs_partition, objective="G", **_fit_kwargs(config),
        )
        pred = _hard_labels(model, fs, config)
        a_l = labeled_acc(pred[lab], fs.labels[lab], k=k)
        return LambdaTrial(lam=lam, labeled_acc=a_l, final_g=float(trace[-1]))

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            trials = list(pool.map(trial, config.lambda_grid))
    else:
        trials = [trial(lam) for lam in config.lambda_grid]
    best = max(range(len(trials)), key=lambda i: trials[i].labeled_acc)
    # max() keeps the first (smallest-lambda) index on ties because the grid
    # is strictly increasing
    return LambdaSearchResult(trials=trials, lambda_opt=trials[best].lam)


def partition(
    fs: FeatureSet,
    k: int,
    config: PimConfig,
    ground_truth: np.ndarray | None = None,
) -> PartitionResult:
    """Full pipeline: weight search, constrained fit, hard labels, metrics.

    The final fit restarts from the same initialization the search used.
    When ``ground_truth`` is given, accuracy is scored on the unlabeled rows
    (the labeled rows get their own ``labeled_acc`` figure).
    """
    init_w = init_prototypes(fs, k, config.init_strategy, config.seed)
    search = lambda_search(fs, k, config, init_w=init_w)
    model, trace = fit(
        fs, init_w, search.lambda_opt, flags=config.flags,
        epochs=config.epochs_partition, objective="F", **_fit_kwargs(config),
    )
    probs = forward_softmax(model, fs.features, config.temperature, config.score)
    labels = np.argmax(probs, axis=1)
    breakdown = objective_f(probs, fs, search.lambda_opt, config.flags)
    report = None
    if ground_truth is not None:
        ground_truth = np.asarray(ground_truth, dtype=np.int64)
        if ground_truth.shape[0] != fs.n_total:
            raise ValueError("ground truth must cover every row")
        unl = ~fs.labeled_mask
        report = acc_partition(labels[unl], ground_truth[unl], fs.k_old)
        report.labeled_acc = labeled_acc(labels[fs.labeled_mask], fs.labeled_labels, k=k)
    return PartitionResult(
        model=model,
        labels=labels,
        lambda_result=search,
        breakdown=breakdown,
        loss_trace=trace,
        eval_report=report,
    )


def estimate_k(fs: FeatureSet, config: PimConfig) -> KSearchResult:
    """Estimate the total class count by maximizing labeled-row accuracy of
    unconstrained fits (weight fixed at 1) over candidate cluster counts.

    Candidates live in ``[k_old + 1, k_max]``.  Small domains are scanned
    exhaustively; larger ones use a coarse bracketing pass followed by a
    golden-section refinement on the integer grid, with every candidate
    evaluated at most once.
    """
    k_max = config.k_max if config.k_max is not None else 4 * fs.k_old
    if k_max <= fs.k_old + 1:
        raise ValueError("k_max must exceed k_old + 1")
    lab = fs.labeled_mask

    def accuracy_at(k: int) -> float:
        init_w = init_prototypes(fs, k, config.init_strategy, config.seed)
        model, _ = fit(
            fs, init_w, 1.0,
            epochs=config.epochs_ksearch, objective="G", **_fit_kwargs(config),
        )
        pred = _hard_labels(model, fs, config)
        return labeled_acc(pred[lab], fs.labels[lab], k=k)

    k_hat, trace = _argmax_over_ints(accuracy_at, fs.k_old + 1, k_max)
    return KSearchResult(k_hat=k_hat, trace=trace)


_EXHAUSTIVE_LIMIT = 12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def _argmax_over_ints(f, lo: int, hi: int) -> tuple[int, list[tuple[int, float]]]:
    """Memoized maximizer on the integer range [lo, hi].

    Exhaustive below `_EXHAUSTIVE_LIMIT` points; otherwise evaluates a coarse
    evenly spaced probe set to bracket the maximum, then shrinks the bracket
    by golden-section steps on rounded probes.  Returns the argmax over every
    evaluated point (ties toward the smaller integer) plus the evaluation
    trace in call order.
    """
    evals: dict[int, float] = {}
    order: list[int] = []

    def g(x: float) -> float:
        k = int(min(max(round(x), lo), hi))
        if k not in evals:
            evals[k] = f(k)
            order.append(k)
        return evals[k]

    if hi - lo + 1 <= _EXHAUSTIVE_LIMIT:
        for k in range(lo, hi + 1):
            g(k)
    else:
        probes = np.unique(np.round(np.linspace(lo, hi, 7)).astype(int))
        for k in probes:
            g(k)
        best = min(k for k in evals if evals[k] == max(evals.values()))
        left = max((p for p in probes if p < best), default=lo)
        right = min((p for p in probes if p > best), default=hi)
        a, b = float(left), float(right)
        while b - a > 1.0:
            c = b - _INVPHI * (b - a)
            d = a + _INVPHI * (b - a)
            if g(c) >= g(d):
                b = d
            else:
                a = c
    peak = max(evals.values())
    k_hat = min(k for k, val in evals.items() if val == peak)
    return k_hat, [(k, evals[k]) for k in order]
