"""Majority-vote detector combination and the unified detect() dispatcher.

Two ensembles are built from the same vote primitive: the homogeneous
one runs the baseline pipeline once per MCD forward pass, and the
heterogeneous one combines the four fixed detectors (baseline on
softmax, mean-MCD, entropy-gated, per-pass ensemble) at agreement
m = 2 or m = 3. Members always execute in a fixed order but the vote
itself is order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .confident import (
    class_thresholds,
    confident_joint,
    detect_errors,
    estimate_joint,
    prune_by_noise_rate,
)
from .tensors import FlagSet, LabelVector, McdStack, ProbMatrix
from .uncertainty import (
    confident_joint_entropy,
    entropy_thresholds,
    mcd_mean,
    row_entropy,
)

__all__ = [
    "AlgorithmId",
    "EnsembleConfig",
    "majority_vote",
    "detect_mcd_ensemble",
    "detect",
]


class AlgorithmId(str, Enum):
    """The six evaluated detectors, keyed by their CLI/config names."""

    CL_PBNR = "cl-pbnr"
    CL_MCD = "cl-mcd"
    CL_MCD_E = "cl-mcd-e"
    CL_MCD_ENSEMBLE = "cl-mcd-ens"
    ALG_ENSEMBLE_2 = "alg-ens-2"
    ALG_ENSEMBLE_3 = "alg-ens-3"

    @classmethod
    def parse(cls, name: str) -> "AlgorithmId":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(a.value for a in cls)
            raise ValueError(f"unknown algorithm {name!r}; expected one of: {valid}")


def strict_majority(member_count: int) -> int:
    """Smallest m with m/member_count > 1/2."""
    return math.ceil((member_count + 1) / 2)


@dataclass(frozen=True)
class EnsembleConfig:
    """Vote threshold m over member_count detectors."""

    m: int
    member_count: int

    def __post_init__(self):
        if not 1 <= self.m <= self.member_count:
            raise ValueError(
                f"need 1 <= m <= member_count, got m={self.m}, "
                f"member_count={self.member_count}"
            )

    @classmethod
    def majority(cls, member_count: int) -> "EnsembleConfig":
        return cls(m=strict_majority(member_count), member_count=member_count)


def majority_vote(flag_sets: Sequence[FlagSet], m: int) -> FlagSet:
    """Indices appearing in at least m of the input sets."""
    if not 1 <= m <= len(flag_sets):
        raise ValueError(f"need 1 <= m <= {len(flag_sets)}, got m={m}")
    all_indices = np.concatenate([fs.indices for fs in flag_sets])
    if all_indices.size == 0:
        return FlagSet()
    uniq, counts = np.unique(all_indices, return_counts=True)
    return FlagSet(uniq[counts >= m])


def detect_mcd_ensemble(
    stack: McdStack, labels: LabelVector, m: int | None = None
) -> FlagSet:
    """Run the baseline pipeline on each forward pass, then vote."""
    F = stack.num_passes
    if m is None:
        m = strict_majority(F)
    if not 1 <= m <= F:
        raise ValueError(f"need 1 <= m <= F={F}, got m={m}")
    member_flags = [detect_errors(stack[f], labels) for f in range(F)]
    return majority_vote(member_flags, m)


def _detect_entropy_gated(mean_probs: ProbMatrix, labels: LabelVector) -> FlagSet:
    t = class_thresholds(mean_probs, labels)
    h = row_entropy(mean_probs)
    te = entropy_thresholds(h, labels)
    C = confident_joint_entropy(mean_probs, labels, t, te)
    Q = estimate_joint(C, labels)
    return prune_by_noise_rate(mean_probs, labels, Q)


def detect(
    algorithm: AlgorithmId,
    probs: ProbMatrix | None = None,
    stack: McdStack | None = None,
    labels: LabelVector | None = None,
    cfg: EnsembleConfig | None = None,
) -> FlagSet:
    """Dispatch to the selected detector.

    `probs` is the dropout-off softmax matrix (needed by cl-pbnr and
    the heterogeneous ensembles); `stack` holds the MCD passes (needed
    by every other detector). `cfg` overrides the vote threshold for
    cl-mcd-ens; the heterogeneous ensembles fix m by name.
    """
    if isinstance(algorithm, str) and not isinstance(algorithm, AlgorithmId):
        algorithm = AlgorithmId.parse(algorithm)
    if labels is None:
        raise ValueError("labels are required")

    def need_probs() -> ProbMatrix:
        if probs is None:
            raise ValueError(f"{algorithm.value} requires the softmax matrix")
        return probs

    def need_stack() -> McdStack:
        if stack is None:
            raise ValueError(f"{algorithm.value} requires the MCD stack")
        return stack

    if algorithm is AlgorithmId.CL_PBNR:
        return detect_errors(need_probs(), labels)
    if algorithm is AlgorithmId.CL_MCD:
        return detect_errors(mcd_mean(need_stack()), labels)
    if algorithm is AlgorithmId.CL_MCD_E:
        return _detect_entropy_gated(mcd_mean(need_stack()), labels)
    if algorithm is AlgorithmId.CL_MCD_ENSEMBLE:
        m = cfg.m if cfg is not None else None
        return detect_mcd_ensemble(need_stack(), labels, m)

    # heterogeneous ensemble over the four fixed members
    members = [
        detect_errors(need_probs(), labels),
        detect_errors(mcd_mean(need_stack()), labels),
        _detect_entropy_gated(mcd_mean(need_stack()), labels),
        detect_mcd_ensemble(need_stack(), labels),
    ]
    m = 2 if algorithm is AlgorithmId.ALG_ENSEMBLE_2 else 3
    return majority_vote(members, m)
