"""Monte-Carlo-dropout aggregation, predictive entropy, and entropy gating.

The stack of F stochastic forward passes is reduced to a mean
probability matrix; per-sample entropy of that mean feeds per-class
entropy thresholds te_j, which gate the confident-joint counting.
Entropy uses the natural log throughout, so values live in [0, ln c].
"""

from __future__ import annotations

import numpy as np

from .confident import _check_pair
from .tensors import LabelVector, McdStack, ProbMatrix

__all__ = [
    "mcd_mean",
    "mcd_classify",
    "row_entropy",
    "entropy_thresholds",
    "confident_joint_entropy",
]


def mcd_mean(stack: McdStack) -> ProbMatrix:
    """Elementwise mean over the F forward passes."""
    return ProbMatrix(stack.values.mean(axis=0))


def mcd_classify(probs: ProbMatrix) -> LabelVector:
    """Per-row argmax; probability ties resolve to the lowest class index."""
    return LabelVector(probs.values.argmax(axis=1), num_classes=probs.c)


def row_entropy(probs: ProbMatrix) -> np.ndarray:
    """Natural-log entropy per row, with 0 * ln 0 := 0."""
    p = probs.values
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p), 0.0)
    return -terms.sum(axis=1)


def entropy_thresholds(entropies: np.ndarray, labels: LabelVector) -> np.ndarray:
    """te_j = mean entropy over samples whose GIVEN label is j."""
    entropies = np.asarray(entropies, dtype=np.float64)
    if entropies.shape != (labels.n,):
        raise ValueError("one entropy per sample required")
    counts = labels.class_counts()
    if (counts == 0).any():
        empty = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"classes {empty} have no samples; thresholds undefined")
    c = labels.num_classes
    te = np.empty(c)
    for j in range(c):
        te[j] = entropies[labels.labels == j].mean()
    return te


def confident_joint_entropy(
    probs: ProbMatrix,
    labels: LabelVector,
    thresholds: np.ndarray,
    entropy_limits: np.ndarray,
) -> np.ndarray:
    """Confident joint where counting additionally requires low entropy.

    A sample with given label j participates only when the entropy of
    its (MCD-mean) probability row satisfies H <= te_j. The gate is
    per sample: it controls whether the sample is counted at all, not
    which class it is counted toward.
    """
    _check_pair(probs, labels)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    entropy_limits = np.asarray(entropy_limits, dtype=np.float64)
    c = probs.c
    if thresholds.shape != (c,) or entropy_limits.shape != (c,):
        raise ValueError("need one probability and one entropy threshold per class")

    h = row_entropy(probs)
    passes_gate = h <= entropy_limits[labels.labels]

    values = probs.values
    qualifies = values >= thresholds[np.newaxis, :]
    masked = np.where(qualifies, values, -np.inf)
    best = masked.argmax(axis=1)
    counted = qualifies.any(axis=1) & passes_gate

    C = np.zeros((c, c), dtype=np.int64)
    np.add.at(C, (labels.labels[counted], best[counted]), 1)
    return C
