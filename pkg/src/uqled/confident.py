"""Confident-learning core: joint estimation and noise-rate pruning.

Everything here operates on out-of-sample predicted probabilities and
the given (possibly wrong) labels. The chain is

    class_thresholds -> confident_joint -> estimate_joint
                                        -> prune_by_noise_rate

and the counting rules are deliberately strict about ties and empty
candidate sets so that two runs over the same data agree sample for
sample.
"""

from __future__ import annotations

import numpy as np

from ._util import round_half_away
from .tensors import FlagSet, LabelVector, ProbMatrix

__all__ = [
    "class_thresholds",
    "confident_joint",
    "estimate_joint",
    "prune_by_noise_rate",
    "detect_errors",
]


def _check_pair(probs: ProbMatrix, labels: LabelVector) -> None:
    if probs.n != labels.n:
        raise ValueError(f"probs has {probs.n} rows, labels has {labels.n}")
    if probs.c != labels.num_classes:
        raise ValueError(
            f"probs has {probs.c} columns, labels declare {labels.num_classes} classes"
        )


def class_thresholds(probs: ProbMatrix, labels: LabelVector) -> np.ndarray:
    """Per-class self-confidence: t_j = mean of p(j) over samples labeled j."""
    _check_pair(probs, labels)
    counts = labels.class_counts()
    if (counts == 0).any():
        empty = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"classes {empty} have no samples; thresholds undefined")
    c = probs.c
    t = np.empty(c)
    for j in range(c):
        mask = labels.labels == j
        t[j] = probs.values[mask, j].mean()
    return t


def confident_joint(
    probs: ProbMatrix,
    labels: LabelVector,
    thresholds: np.ndarray | None = None,
) -> np.ndarray:
    """Count matrix C where C[i, j] = #{samples labeled i confidently counted as j}.

    A sample with given label i and probability row p counts toward
    column argmax_j {p_j : p_j >= t_j}; ties break toward the lowest
    class index, and a sample whose row clears no threshold is skipped.
    """
    _check_pair(probs, labels)
    if thresholds is None:
        thresholds = class_thresholds(probs, labels)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if thresholds.shape != (probs.c,):
        raise ValueError("thresholds must have one entry per class")

    values = probs.values
    qualifies = values >= thresholds[np.newaxis, :]
    # argmax over qualifying entries only; argmax picks the lowest index on ties
    masked = np.where(qualifies, values, -np.inf)
    best = masked.argmax(axis=1)
    counted = qualifies.any(axis=1)

    c = probs.c
    C = np.zeros((c, c), dtype=np.int64)
    np.add.at(C, (labels.labels[counted], best[counted]), 1)
    return C


def estimate_joint(C: np.ndarray, labels: LabelVector) -> np.ndarray:
    """Calibrated joint distribution Q over (given label, true label).

    Each row of the confident joint is rescaled to the observed count of
    that given label (rows with no confident counts stay zero), then the
    whole matrix is normalized to sum to 1.
    """
    C = np.asarray(C, dtype=np.float64)
    c = labels.num_classes
    if C.shape != (c, c):
        raise ValueError(f"confident joint must be {c}x{c}, got {C.shape}")
    total_counts = C.sum()
    if total_counts <= 0:
        raise ValueError("confident joint is all zero; cannot calibrate")
    row_sums = C.sum(axis=1)
    label_counts = labels.class_counts().astype(np.float64)
    scale = np.divide(
        label_counts, row_sums, out=np.zeros_like(row_sums), where=row_sums > 0
    )
    calibrated = C * scale[:, np.newaxis]
    return calibrated / calibrated.sum()


def prune_by_noise_rate(
    probs: ProbMatrix,
    labels: LabelVector,
    joint: np.ndarray,
) -> FlagSet:
    """Flag likely label errors by per-cell noise-rate pruning.

    For each off-diagonal cell (i, j) of the joint, flag the
    round(n * Q[i, j]) samples with given label i whose margin
    p(j) - p(i) is largest, capped at the number of label-i samples.
    Flags are unioned over all cells.
    """
    _check_pair(probs, labels)
    joint = np.asarray(joint, dtype=np.float64)
    c = probs.c
    if joint.shape != (c, c):
        raise ValueError(f"joint must be {c}x{c}, got {joint.shape}")

    n = probs.n
    values = probs.values
    given = labels.labels
    flagged: set[int] = set()
    for i in range(c):
        rows_i = np.flatnonzero(given == i)
        if rows_i.size == 0:
            continue
        for j in range(c):
            if i == j:
                continue
            k = round_half_away(n * joint[i, j])
            if k <= 0:
                continue
            k = min(k, rows_i.size)
            margin = values[rows_i, j] - values[rows_i, i]
            # k largest margins; stable sort makes ties resolve by sample index
            top = np.argsort(-margin, kind="stable")[:k]
            flagged.update(rows_i[top].tolist())
    return FlagSet.from_iterable(flagged, n=n)


def detect_errors(probs: ProbMatrix, labels: LabelVector) -> FlagSet:
    """Full baseline pipeline: thresholds, joint, calibration, pruning."""
    t = class_thresholds(probs, labels)
    C = confident_joint(probs, labels, t)
    Q = estimate_joint(C, labels)
    return prune_by_noise_rate(probs, labels, Q)
