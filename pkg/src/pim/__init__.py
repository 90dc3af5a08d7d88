"""Library and batch CLI for partitioning embedded datasets into known and
novel classes by constrained, weighted information maximization."""

__version__ = "0.1.0"

from .classifier import PartitionModel, forward_softmax, load_model, save_model
from .dataset import (
    FeatureSet,
    ParseError,
    SynthSpec,
    gcd_split,
    generate_synthetic,
    load_features,
    save_csv,
    save_fmat,
)
from .driver import (
    DEFAULT_LAMBDA_GRID,
    KSearchResult,
    LambdaSearchResult,
    PartitionResult,
    PimConfig,
    estimate_k,
    lambda_search,
    partition,
)
from .evaluation import EvalReport, acc_partition, class_count_error, hungarian, labeled_acc
from .objective import (
    AblationFlags,
    LossBreakdown,
    conditional_entropy,
    cross_entropy_labeled,
    grad_f,
    grad_g,
    marginal_entropy,
    objective_f,
    objective_g,
    soft_marginals,
)
from .optimizer import AdamState, NumericalError, adam_step, fit
from .prototypes import SskmState, init_prototypes, kmeanspp_seed, known_class_centroids, sskm_fit

__all__ = [
    "AblationFlags",
    "AdamState",
    "DEFAULT_LAMBDA_GRID",
    "EvalReport",
    "FeatureSet",
    "KSearchResult",
    "LambdaSearchResult",
    "LossBreakdown",
    "NumericalError",
    "ParseError",
    "PartitionModel",
    "PartitionResult",
    "PimConfig",
    "SskmState",
    "SynthSpec",
    "acc_partition",
    "adam_step",
    "class_count_error",
    "conditional_entropy",
    "cross_entropy_labeled",
    "estimate_k",
    "fit",
    "forward_softmax",
    "gcd_split",
    "generate_synthetic",
    "grad_f",
    "grad_g",
    "hungarian",
    "init_prototypes",
    "kmeanspp_seed",
    "known_class_centroids",
    "labeled_acc",
    "lambda_search",
    "load_features",
    "load_model",
    "marginal_entropy",
    "objective_f",
    "objective_g",
    "partition",
    "save_csv",
    "save_fmat",
    "save_model",
    "sskm_fit",
    "soft_marginals",
]
