"""Synthetic class-dependent label noise.

The generator turns a trained model's confusion structure into noise:
per-class similarity scores (mean predicted probability of every other
class), a threshold at mean + population std selecting the "similar"
group, softmax flipping probabilities over that group, and a seeded
flip process that corrupts exactly round(tau * n) labels. Symmetric
(uniform) transition matrices are supported for comparison.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._util import round_half_away, softmax
from .tensors import CorruptionMask, LabelVector, ProbMatrix

__all__ = [
    "FlipProfile",
    "TransitionMatrix",
    "similarity_scores",
    "flip_profile",
    "build_transition",
    "check_asymmetric",
    "inject_noise",
    "profile_to_json",
    "profile_from_json",
]

_ROW_TOL = 1e-9


@dataclass(frozen=True)
class FlipProfile:
    """Per-class flip targets: threshold ts_k, group G_k, probabilities FP_k.

    `fp` is a c x c matrix whose row k is FP_k: a distribution over the
    similarity group of class k, zero everywhere else (in particular
    fp[k, k] = 0 always, so a flip never reproduces the original label).
    """

    ts: np.ndarray
    groups: tuple[tuple[int, ...], ...]
    fp: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=np.float64)
        fp = np.asarray(self.fp, dtype=np.float64)
        c = ts.shape[0]
        if fp.shape != (c, c) or len(self.groups) != c:
            raise ValueError("ts, groups and fp must agree on the class count")
        for k, group in enumerate(self.groups):
            if k in group:
                raise ValueError(f"class {k} cannot be in its own similarity group")
            if not group:
                raise ValueError(f"class {k} has an empty similarity group")
            row = fp[k]
            if abs(row.sum() - 1.0) > _ROW_TOL:
                raise ValueError(f"FP row {k} does not sum to 1")
            outside = np.setdiff1d(np.arange(c), np.asarray(group, dtype=np.int64))
            if row[outside].any():
                raise ValueError(f"FP row {k} has mass outside its group")
        object.__setattr__(self, "ts", ts)
        object.__setattr__(self, "fp", fp)
        object.__setattr__(
            self, "groups", tuple(tuple(sorted(int(l) for l in g)) for g in self.groups)
        )

    @property
    def num_classes(self) -> int:
        return self.ts.shape[0]


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic noise matrix T with T[k, k] = 1 - tau."""

    t: np.ndarray
    tau: float

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError("transition matrix must be square")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must be in [0, 1], got {self.tau}")
        rows = t.sum(axis=1)
        if np.abs(rows - 1.0).max() > _ROW_TOL:
            raise ValueError("transition rows must sum to 1")
        if np.abs(np.diag(t) - (1.0 - self.tau)).max() > _ROW_TOL:
            raise ValueError("diagonal must equal 1 - tau")
        object.__setattr__(self, "t", t)

    @property
    def c(self) -> int:
        return self.t.shape[0]


def similarity_scores(probs: ProbMatrix, labels: LabelVector) -> np.ndarray:
    """S[k, l] = mean predicted probability of class l over samples labeled k.

    Defined for l != k; the diagonal is stored as 0. Computed on
    held-out predictions of a model trained on clean data.
    """
    if probs.n != labels.n or probs.c != labels.num_classes:
        raise ValueError("probs and labels must agree on (n, c)")
    counts = labels.class_counts()
    if (counts == 0).any():
        empty = np.flatnonzero(counts == 0).tolist()
        raise ValueError(f"classes {empty} have no test samples")
    c = probs.c
    S = np.zeros((c, c))
    for k in range(c):
        S[k] = probs.values[labels.labels == k].mean(axis=0)
    np.fill_diagonal(S, 0.0)
    return S


def flip_profile(S: np.ndarray) -> FlipProfile:
    """Threshold each class's similarity row and softmax the survivors.

    ts_k is the mean plus population standard deviation of the c - 1
    off-diagonal scores. The group G_k keeps classes scoring at or
    above ts_k; if none do, the single highest-scoring class is used so
    every class stays flippable. FP_k is the softmax of the raw scores
    restricted to G_k.
    """
    S = np.asarray(S, dtype=np.float64)
    c = S.shape[0]
    if S.ndim != 2 or S.shape != (c, c) or c < 2:
        raise ValueError("similarity matrix must be square with c >= 2")

    ts = np.empty(c)
    groups = []
    fp = np.zeros((c, c))
    others = np.arange(c)
    for k in range(c):
        idx = others[others != k]
        scores = S[k, idx]
        ts[k] = scores.mean() + scores.std()
        group = idx[scores >= ts[k]]
        if group.size == 0:
            group = idx[[scores.argmax()]]
        fp[k, group] = softmax(S[k, group])
        groups.append(tuple(int(l) for l in group))
    return FlipProfile(ts=ts, groups=tuple(groups), fp=fp)


def build_transition(
    profile: FlipProfile | None, tau: float, c: int | None = None
) -> TransitionMatrix:
    """Analytic transition matrix for the given noise rate.

    With a profile: T[k, k] = 1 - tau and T[k, j] = tau * FP_k[j]
    (asymmetric). Without one: 1 - tau on the diagonal and
    tau / (c - 1) everywhere else (symmetric).
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    if profile is not None:
        c = profile.num_classes
        T = tau * profile.fp
    else:
        if c is None or c < 2:
            raise ValueError("symmetric transition needs an explicit c >= 2")
        T = np.full((c, c), tau / (c - 1))
        np.fill_diagonal(T, 0.0)
    np.fill_diagonal(T, 1.0 - tau)
    return TransitionMatrix(t=T, tau=tau)


def check_asymmetric(T: TransitionMatrix, tau: float) -> bool:
    """True iff T has the stated noise rate and class-dependent structure.

    Requires every diagonal entry to equal 1 - tau (within 1e-9) and at
    least one row to contain two off-diagonal entries with a strict
    inequality between them (some wrong class is preferred over another).
    """
    t = T.t
    c = t.shape[0]
    if np.abs(np.diag(t) - (1.0 - tau)).max() > _ROW_TOL:
        return False
    for i in range(c):
        off = np.delete(t[i], i)
        if off.size >= 2 and off.max() > off.min():
            return True
    return False


def inject_noise(
    labels: LabelVector, profile: FlipProfile, tau: float, seed: int
) -> tuple[LabelVector, CorruptionMask]:
    """Flip exactly round(tau * n) labels according to the profile.

    Victim indices are the first round(tau * n) entries of a seeded
    Fisher-Yates permutation of 0..n-1; each victim with label k gets a
    replacement drawn from FP_k by inverse-CDF. Deterministic for a
    fixed (labels, profile, tau, seed) tuple.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    if profile.num_classes != labels.num_classes:
        raise ValueError("profile and labels disagree on the class count")

    n = labels.n
    k = round_half_away(tau * n)
    rng = np.random.default_rng(seed)
    victims = rng.permutation(n)[:k]
    draws = rng.random(k)

    cum = np.cumsum(profile.fp, axis=1)
    new_labels = labels.labels.copy()
    for pos, z in enumerate(victims):
        orig = int(labels.labels[z])
        target = int(np.searchsorted(cum[orig], draws[pos], side="right"))
        # float-edge guard: a draw at or above the last cumsum lands on
        # the final group member instead of running off the row
        if target >= labels.num_classes or profile.fp[orig, target] == 0.0:
            target = profile.groups[orig][-1]
        new_labels[z] = target

    flipped = np.zeros(n, dtype=bool)
    flipped[victims] = True
    noisy = LabelVector(new_labels, num_classes=labels.num_classes)
    return noisy, CorruptionMask(flipped=flipped, original_labels=labels)


# --- JSON ------------------------------------------------------------------

def profile_to_json(profile: FlipProfile, tau: float | None = None) -> str:
    payload = {
        "tau": tau,
        "classes": profile.num_classes,
        "profiles": [
            {
                "ts": float(profile.ts[k]),
                "group": list(profile.groups[k]),
                "fp": [float(v) for v in profile.fp[k]],
            }
            for k in range(profile.num_classes)
        ],
    }
    return json.dumps(payload, indent=2)


def profile_from_json(text: str) -> tuple[FlipProfile, float | None]:
    payload = json.loads(text)
    c = int(payload["classes"])
    entries = payload["profiles"]
    if len(entries) != c:
        raise ValueError(f"expected {c} per-class profiles, got {len(entries)}")
    ts = np.array([e["ts"] for e in entries], dtype=np.float64)
    groups = tuple(tuple(int(l) for l in e["group"]) for e in entries)
    fp = np.array([e["fp"] for e in entries], dtype=np.float64)
    tau = payload.get("tau")
    return FlipProfile(ts=ts, groups=groups, fp=fp), (None if tau is None else float(tau))
