"""Label-error detection with confident learning and MCD uncertainty.

Detects mislabeled samples from out-of-sample predicted probabilities,
injects class-dependent synthetic label noise, and evaluates both
detection quality and the accuracy effect of cleaning.
"""

from .confident import (
    class_thresholds,
    confident_joint,
    detect_errors,
    estimate_joint,
    prune_by_noise_rate,
)
from .ensembles import (
    AlgorithmId,
    EnsembleConfig,
    detect,
    detect_mcd_ensemble,
    majority_vote,
)
from .metrics import (
    CorrelationReport,
    DetectionMetrics,
    correlation_report,
    detection_metrics,
    p_two_sided,
    pearson_r,
    t_statistic,
)
from .model import (
    DropoutSoftmaxModel,
    TrainConfig,
    accuracy,
    predict_probabilities,
)
from .noise import (
    FlipProfile,
    TransitionMatrix,
    build_transition,
    check_asymmetric,
    flip_profile,
    inject_noise,
    profile_from_json,
    profile_to_json,
    similarity_scores,
)
from .synthlab import (
    ExperimentConfig,
    ExperimentReport,
    SynthDataset,
    make_blobs,
    oos_probabilities,
    run_pipeline,
    train_dropout_softmax,
)
from .tensors import (
    CorruptionMask,
    DimensionMismatchError,
    FlagSet,
    LabelVector,
    MalformedHeaderError,
    McdStack,
    NonFiniteValueError,
    ProbMatrix,
    TensorIOError,
    read_tensor,
    validate_prob_matrix,
    write_tensor,
)
from .uncertainty import (
    confident_joint_entropy,
    entropy_thresholds,
    mcd_classify,
    mcd_mean,
    row_entropy,
)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmId",
    "CorrelationReport",
    "CorruptionMask",
    "DetectionMetrics",
    "DimensionMismatchError",
    "DropoutSoftmaxModel",
    "EnsembleConfig",
    "ExperimentConfig",
    "ExperimentReport",
    "FlagSet",
    "FlipProfile",
    "LabelVector",
    "MalformedHeaderError",
    "McdStack",
    "NonFiniteValueError",
    "ProbMatrix",
    "SynthDataset",
    "TensorIOError",
    "TrainConfig",
    "TransitionMatrix",
    "accuracy",
    "build_transition",
    "check_asymmetric",
    "class_thresholds",
    "confident_joint",
    "confident_joint_entropy",
    "correlation_report",
    "detect",
    "detect_errors",
    "detect_mcd_ensemble",
    "detection_metrics",
    "entropy_thresholds",
    "estimate_joint",
    "flip_profile",
    "inject_noise",
    "majority_vote",
    "make_blobs",
    "mcd_classify",
    "mcd_mean",
    "oos_probabilities",
    "p_two_sided",
    "pearson_r",
    "predict_probabilities",
    "profile_from_json",
    "profile_to_json",
    "prune_by_noise_rate",
    "read_tensor",
    "row_entropy",
    "run_pipeline",
    "similarity_scores",
    "t_statistic",
    "train_dropout_softmax",
    "validate_prob_matrix",
    "write_tensor",
]
