"""Desk-scale end-to-end benchmark.

Synthetic Gaussian blob data stands in for image datasets and a dropout
softmax classifier stands in for the deep nets; everything else (noise
injection from model similarity scores, out-of-fold predictions,
detection, cleaning, retraining) runs the real pipeline. One experiment
is a pure function of its config, including every seed: all branch
randomness is split off a per-seed root stream up front.

Phases per (seed, tau): corrupt labels, predict out-of-sample, detect
with each algorithm, score the flags against the corruption mask, train
on the noisy set, retrain per algorithm on the cleaned set, and report
both accuracies side by side.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .ensembles import AlgorithmId, detect
from .metrics import detection_metrics
from .model import (
    DropoutSoftmaxModel,
    TrainConfig,
    accuracy,
    predict_probabilities,
    train_on_arrays,
)
from .noise import flip_profile, inject_noise, similarity_scores
from .tensors import LabelVector, McdStack, ProbMatrix

__all__ = [
    "SynthDataset",
    "ExperimentConfig",
    "ExperimentReport",
    "make_blobs",
    "train_dropout_softmax",
    "oos_probabilities",
    "run_pipeline",
]

_DEFAULT_ALGORITHMS = tuple(AlgorithmId)


@dataclass(frozen=True, eq=False)
class SynthDataset:
    features: np.ndarray
    labels: LabelVector
    centers: np.ndarray
    seed: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != self.labels.n:
            raise ValueError("features must be n x d aligned with labels")
        if not np.isfinite(features).all():
            raise ValueError("features must be finite")
        object.__setattr__(self, "features", features)
        object.__setattr__(
            self, "centers", np.asarray(self.centers, dtype=np.float64)
        )

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


def make_blobs(n: int, c: int, d: int, separation: float, seed: int) -> SynthDataset:
    """Isotropic unit-variance Gaussian clusters, near-balanced classes.

    Class centers sit at `separation` times random unit directions, so
    pairwise class confusability varies by seed; that variation is what
    gives the similarity scores a class-dependent structure to find.
    """
    if c < 2 or n < c or d < 2:
        raise ValueError(f"infeasible parameters n={n}, c={c}, d={d}")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((c, d))
    centers = separation * directions / np.linalg.norm(directions, axis=1, keepdims=True)

    counts = np.full(c, n // c)
    counts[: n % c] += 1
    labels = np.repeat(np.arange(c), counts)
    rng.shuffle(labels)
    features = centers[labels] + rng.standard_normal((n, d))
    return SynthDataset(
        features=features, labels=LabelVector(labels, c), centers=centers, seed=seed
    )


def train_dropout_softmax(data: SynthDataset, cfg: TrainConfig) -> DropoutSoftmaxModel:
    """Train the dropout softmax classifier on a dataset."""
    return train_on_arrays(data.features, data.labels, cfg)


def _stratified_fold_ids(labels: LabelVector, k: int, seed: int) -> np.ndarray:
    """Assign each sample a fold in 0..k-1, class proportions within +-1.

    Per-class shuffled indices are laid out class after class and folds
    assigned cyclically, continuing the cycle across classes; that keeps
    both per-class and overall fold sizes within one sample of even, and
    degenerates to leave-one-out at k = n.
    """
    if not 2 <= k <= labels.n:
        raise ValueError(f"need 2 <= k <= n={labels.n}, got k={k}")
    rng = np.random.default_rng(seed)
    fold = np.empty(labels.n, dtype=np.int64)
    offset = 0
    for cls in range(labels.num_classes):
        idx = np.flatnonzero(labels.labels == cls)
        rng.shuffle(idx)
        fold[idx] = (offset + np.arange(idx.size)) % k
        offset += idx.size
    return fold


def oos_probabilities(
    data: SynthDataset,
    noisy_labels: LabelVector,
    k: int = 4,
    cfg: TrainConfig = TrainConfig(),
    passes: int = 5,
) -> tuple[ProbMatrix, McdStack]:
    """Out-of-sample predictions by stratified k-fold cross-validation.

    Every sample's probabilities come from the fold model that never saw
    it; softmax and MCD outputs share the same fold models. Stratification
    uses the (noisy) training labels. Fold seeds are split off cfg.seed.
    """
    if noisy_labels.n != data.n:
        raise ValueError("noisy labels must align with the dataset")
    root = np.random.SeedSequence(cfg.seed)
    states = root.generate_state(1 + 2 * k, dtype=np.uint64)
    fold = _stratified_fold_ids(noisy_labels, k, int(states[0]))

    n, c = data.n, noisy_labels.num_classes
    P = np.empty((n, c))
    stack = np.empty((passes, n, c))
    for f in range(k):
        holdout = fold == f
        if not holdout.any():
            continue
        train_cfg = replace(cfg, seed=int(states[1 + 2 * f]))
        fold_model = train_on_arrays(
            data.features[~holdout],
            LabelVector(noisy_labels.labels[~holdout], c),
            train_cfg,
        )
        P[holdout] = predict_probabilities(
            fold_model, data.features[holdout], "softmax"
        ).values
        stack[:, holdout] = predict_probabilities(
            fold_model,
            data.features[holdout],
            "mcd",
            passes=passes,
            seed=int(states[2 + 2 * f]),
        ).values
    return ProbMatrix(P), McdStack(stack)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 2000
    c: int = 5
    d: int = 10
    separation: float = 3.0
    tau_list: tuple = (0.05, 0.1, 0.2)
    algorithms: tuple = _DEFAULT_ALGORITHMS
    passes: int = 5
    k_folds: int = 4
    seeds: tuple = (0,)
    n_test: int | None = None
    training: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")
        if any(not 0.0 <= t <= 1.0 for t in self.tau_list):
            raise ValueError("every tau must be in [0, 1]")
        if self.passes < 1 or self.k_folds < 2:
            raise ValueError("need passes >= 1 and k_folds >= 2")
        algorithms = tuple(
            a if isinstance(a, AlgorithmId) else AlgorithmId.parse(a)
            for a in self.algorithms
        )
        object.__setattr__(self, "algorithms", algorithms)
        object.__setattr__(self, "tau_list", tuple(float(t) for t in self.tau_list))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    @property
    def test_size(self) -> int:
        return self.n_test if self.n_test is not None else max(self.c, self.n // 4)

    @classmethod
    def from_dict(cls, payload: dict) -> "ExperimentConfig":
        kwargs = {}
        for key in ("n", "c", "d", "k_folds", "n_test"):
            if key in payload:
                kwargs[key] = payload[key]
        if "separation" in payload:
            kwargs["separation"] = float(payload["separation"])
        if "tau_list" in payload:
            kwargs["tau_list"] = tuple(payload["tau_list"])
        if "algorithms" in payload:
            kwargs["algorithms"] = tuple(payload["algorithms"])
        if "F" in payload:
            kwargs["passes"] = int(payload["F"])
        if "seeds" in payload:
            kwargs["seeds"] = tuple(payload["seeds"])
        if "training" in payload:
            kwargs["training"] = TrainConfig(**payload["training"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "c": self.c,
            "d": self.d,
            "separation": self.separation,
            "tau_list": list(self.tau_list),
            "algorithms": [a.value for a in self.algorithms],
            "F": self.passes,
            "k_folds": self.k_folds,
            "seeds": list(self.seeds),
        }
        if self.n_test is not None:
            out["n_test"] = self.n_test
        out["training"] = {
            "epochs": self.training.epochs,
            "learning_rate": self.training.learning_rate,
            "batch_size": self.training.batch_size,
            "dropout_rate": self.training.dropout_rate,
            "seed": self.training.seed,
        }
        return out


@dataclass(frozen=True)
class ExperimentReport:
    config: ExperimentConfig
    runs: tuple
    aggregates: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "runs": list(self.runs),
            "aggregates": self.aggregates,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _stratified_split(labels: LabelVector, n_test: int, seed: int) -> np.ndarray:
    """Boolean test mask with per-class quotas by largest remainder."""
    n = labels.n
    if not 0 < n_test < n:
        raise ValueError(f"need 0 < n_test < n={n}, got {n_test}")
    counts = labels.class_counts()
    exact = counts * (n_test / n)
    quota = np.floor(exact).astype(np.int64)
    remainder_order = np.argsort(-(exact - quota), kind="stable")
    short = n_test - int(quota.sum())
    quota[remainder_order[:short]] += 1

    rng = np.random.default_rng(seed)
    mask = np.zeros(n, dtype=bool)
    for cls in range(labels.num_classes):
        idx = np.flatnonzero(labels.labels == cls)
        rng.shuffle(idx)
        mask[idx[: quota[cls]]] = True
    return mask


def _run_one_seed(cfg: ExperimentConfig, master_seed: int) -> dict:
    taus = cfg.tau_list
    algs = cfg.algorithms
    per_tau = 3 + len(algs)
    root = np.random.SeedSequence(master_seed)
    states = [int(v) for v in root.generate_state(3 + len(taus) * per_tau, dtype=np.uint64)]
    s_blob, s_split, s_model0 = states[:3]

    n_total = cfg.n + cfg.test_size
    data = make_blobs(n_total, cfg.c, cfg.d, cfg.separation, seed=s_blob)
    test_mask = _stratified_split(data.labels, cfg.test_size, seed=s_split)
    train_x = data.features[~test_mask]
    train_y = LabelVector(data.labels.labels[~test_mask], cfg.c)
    test_x = data.features[test_mask]
    test_y = LabelVector(data.labels.labels[test_mask], cfg.c)
    train_data = SynthDataset(train_x, train_y, data.centers, seed=s_blob)

    # phase 1 groundwork: clean model provides similarity scores and the
    # initial (clean-data) accuracy
    model0 = train_dropout_softmax(train_data, replace(cfg.training, seed=s_model0))
    initial_acc = accuracy(model0, test_x, test_y)
    profile = flip_profile(
        similarity_scores(predict_probabilities(model0, test_x, "softmax"), test_y)
    )

    tau_entries = []
    for ti, tau in enumerate(taus):
        base = 3 + ti * per_tau
        s_inject, s_oos, s_noisy = states[base : base + 3]
        noisy_y, mask = inject_noise(train_y, profile, tau, seed=s_inject)
        P_oos, stack = oos_probabilities(
            train_data, noisy_y, cfg.k_folds, replace(cfg.training, seed=s_oos), cfg.passes
        )
        noisy_model = train_on_arrays(
            train_x, noisy_y, replace(cfg.training, seed=s_noisy)
        )
        noisy_acc = accuracy(noisy_model, test_x, test_y)

        alg_entries = {}
        for ai, alg in enumerate(algs):
            flags = detect(alg, P_oos, stack, noisy_y)
            scored = detection_metrics(flags, mask)
            keep = np.setdiff1d(np.arange(train_y.n), flags.indices)
            clean_model = train_on_arrays(
                train_x[keep],
                LabelVector(noisy_y.labels[keep], cfg.c),
                replace(cfg.training, seed=states[base + 3 + ai]),
            )
            alg_entries[alg.value] = {
                **scored.to_dict(),
                "removed": len(flags),
                "clean_accuracy": accuracy(clean_model, test_x, test_y),
            }
        tau_entries.append(
            {"tau": tau, "noisy_accuracy": noisy_acc, "algorithms": alg_entries}
        )

    return {
        "seed": master_seed,
        "initial_accuracy": initial_acc,
        "taus": tau_entries,
    }


def _aggregate(cfg: ExperimentConfig, runs: list[dict]) -> dict:
    fields = ("precision", "recall", "f1", "removed", "clean_accuracy")
    by_tau = []
    for ti, tau in enumerate(cfg.tau_list):
        algs = {}
        for alg in cfg.algorithms:
            rows = [run["taus"][ti]["algorithms"][alg.value] for run in runs]
            algs[alg.value] = {
                f"{name}_mean": float(np.mean([r[name] for r in rows]))
                for name in fields
            }
        by_tau.append(
            {
                "tau": tau,
                "noisy_accuracy_mean": float(
                    np.mean([run["taus"][ti]["noisy_accuracy"] for run in runs])
                ),
                "algorithms": algs,
            }
        )

    aggregates = {
        "initial_accuracy_mean": float(
            np.mean([run["initial_accuracy"] for run in runs])
        ),
        "by_tau": by_tau,
    }

    # correlation-test inputs mirroring the sensitivity analyses: per-seed
    # (initial accuracy, F1) pairs and per-algorithm (F1, clean accuracy)
    # means, both at the largest noise rate
    ti_max = int(np.argmax(cfg.tau_list))
    first_alg = cfg.algorithms[0].value
    aggregates["sensitivity"] = {
        "accuracy_vs_f1": {
            "tau": cfg.tau_list[ti_max],
            "algorithm": first_alg,
            "pairs": [
                [
                    run["initial_accuracy"],
                    run["taus"][ti_max]["algorithms"][first_alg]["f1"],
                ]
                for run in runs
            ],
        },
        "f1_vs_clean_accuracy": {
            "tau": cfg.tau_list[ti_max],
            "pairs": [
                [
                    by_tau[ti_max]["algorithms"][alg.value]["f1_mean"],
                    by_tau[ti_max]["algorithms"][alg.value]["clean_accuracy_mean"],
                ]
                for alg in cfg.algorithms
            ],
        },
    }
    return aggregates


def _thread_cap() -> int:
    raw = os.environ.get("UQLED_THREADS", "").strip()
    if raw:
        return max(1, int(raw))
    return min(8, os.cpu_count() or 1)


def run_pipeline(cfg: ExperimentConfig) -> ExperimentReport:
    """Run the full experiment for every configured seed and aggregate."""
    workers = min(_thread_cap(), len(cfg.seeds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(lambda s: _run_one_seed(cfg, s), cfg.seeds))
    else:
        runs = [_run_one_seed(cfg, s) for s in cfg.seeds]
    return ExperimentReport(
        config=cfg, runs=tuple(runs), aggregates=_aggregate(cfg, runs)
    )
