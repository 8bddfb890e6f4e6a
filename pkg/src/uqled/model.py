"""Dropout-capable multinomial softmax classifier.

This is the probability provider for the synthetic benchmark: a linear
softmax model trained by mini-batch SGD with per-step Bernoulli feature
dropout (inverted scaling, so inference needs no rescale). Keeping
dropout active at prediction time yields genuine Monte-Carlo-dropout
stochasticity; switching it off gives the deterministic softmax pass.

Parameters start at zero, so a zero-epoch "training" returns the
uniform predictor unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import sgd_epoch
from .tensors import LabelVector, McdStack, ProbMatrix

__all__ = [
    "TrainConfig",
    "DropoutSoftmaxModel",
    "train_on_arrays",
    "predict_probabilities",
    "accuracy",
]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 0.1
    batch_size: int = 32
    dropout_rate: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("invalid training configuration")


@dataclass(frozen=True, eq=False)
class DropoutSoftmaxModel:
    weights: np.ndarray
    bias: np.ndarray
    dropout_rate: float
    config: TrainConfig

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[1],):
            raise ValueError("weights must be d x c with a length-c bias")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValueError("model parameters must be finite")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    @property
    def c(self) -> int:
        return self.weights.shape[1]


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_on_arrays(
    features: np.ndarray, labels: LabelVector, cfg: TrainConfig
) -> DropoutSoftmaxModel:
    """Mini-batch SGD on cross-entropy with per-step feature dropout.

    Each epoch visits a fresh seeded permutation of the samples and
    drops the final partial batch. Dropout masks are Bernoulli per
    sample and feature, pre-scaled by 1/(1-rate). Raises on divergence
    (non-finite loss).
    """
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != labels.n:
        raise ValueError("features must be n x d aligned with labels")
    n, d = x.shape
    c = labels.num_classes
    y = np.ascontiguousarray(labels.labels, dtype=np.int64)

    w = np.zeros((d, c))
    b = np.zeros(c)
    rate = cfg.dropout_rate
    keep = 1.0 - rate
    rng = np.random.default_rng(cfg.seed)
    batch = cfg.batch_size
    n_proc = (n // batch) * batch

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)[:n_proc]
        if n_proc == 0:
            continue
        if rate > 0.0:
            xmask = (rng.random((n_proc, d)) >= rate) / keep
        else:
            xmask = np.ones((n_proc, d))
        loss = sgd_epoch(w, b, x, y, perm, xmask, cfg.learning_rate, batch)
        if not np.isfinite(loss):
            raise ArithmeticError(f"training diverged at epoch {epoch}")

    return DropoutSoftmaxModel(
        weights=w, bias=b, dropout_rate=rate, config=cfg
    )


def predict_probabilities(
    model: DropoutSoftmaxModel,
    features: np.ndarray,
    mode: str = "softmax",
    passes: int = 5,
    seed: int = 0,
):
    """Predicted probabilities, deterministic or Monte-Carlo dropout.

    mode "softmax": one dropout-off forward pass -> ProbMatrix.
    mode "mcd": `passes` stochastic passes with fresh dropout masks
    drawn from `seed` -> McdStack.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.d:
        raise ValueError(f"features must be n x {model.d}")
    if mode == "softmax":
        return ProbMatrix(_softmax_rows(x @ model.weights + model.bias))
    if mode == "mcd":
        if passes < 1:
            raise ValueError("need at least one forward pass")
        rate = model.dropout_rate
        keep = 1.0 - rate
        rng = np.random.default_rng(seed)
        stack = np.empty((passes, x.shape[0], model.c))
        for f in range(passes):
            mask = (rng.random(x.shape) >= rate) / keep
            stack[f] = _softmax_rows((x * mask) @ model.weights + model.bias)
        return McdStack(stack)
    raise ValueError(f"unknown mode {mode!r}; expected 'softmax' or 'mcd'")


def accuracy(model: DropoutSoftmaxModel, features: np.ndarray, labels: LabelVector) -> float:
    """Dropout-off top-1 accuracy."""
    x = np.asarray(features, dtype=np.float64)
    pred = (x @ model.weights + model.bias).argmax(axis=1)
    return float((pred == labels.labels).mean())
