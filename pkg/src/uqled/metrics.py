"""Detection-quality metrics and correlation significance tests.

Precision, recall and F1 are computed against the corruption mask from
noise injection; zero-denominator cases report 0 and set a degenerate
flag so downstream tables never see NaN. The sensitivity-analysis side
implements the Pearson coefficient, the t statistic
t = r * sqrt(n - 2) / sqrt(1 - r^2), and two-sided p-values from the
Student t CDF (closed forms for df 1 and 2, a regularized incomplete
beta continued fraction above that).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .tensors import CorruptionMask, FlagSet

__all__ = [
    "DetectionMetrics",
    "CorrelationReport",
    "detection_metrics",
    "pearson_r",
    "t_statistic",
    "p_two_sided",
    "correlation_report",
]


@dataclass(frozen=True)
class DetectionMetrics:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "degenerate": self.degenerate,
        }


@dataclass(frozen=True)
class CorrelationReport:
    r: float
    n: int
    df: int
    t: float
    p: float
    alpha: float
    reject_null: bool

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "n": self.n,
            "df": self.df,
            "t": self.t,
            "p": self.p,
            "alpha": self.alpha,
            "reject_null": self.reject_null,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def detection_metrics(flags: FlagSet, mask: CorruptionMask) -> DetectionMetrics:
    """Score flagged indices against the known corrupted set."""
    n = mask.n
    if len(flags) and flags.indices[-1] >= n:
        raise ValueError(f"flag index {flags.indices[-1]} out of range for n={n}")
    flagged = flags.to_mask(n)
    flipped = mask.flipped
    tp = int((flagged & flipped).sum())
    fp = int((flagged & ~flipped).sum())
    fn = int((~flagged & flipped).sum())

    degenerate = False
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision, degenerate = 0.0, True
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall, degenerate = 0.0, True
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1, degenerate = 0.0, True
    return DetectionMetrics(tp, fp, fn, precision, recall, f1, degenerate)


def pearson_r(xs, ys) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 1 or xs.shape != ys.shape:
        raise ValueError("sequences must be 1-D and of equal length")
    if xs.size < 3:
        raise ValueError("need at least 3 pairs")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise ValueError("degenerate: a sequence has zero variance")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def t_statistic(r: float, n: int) -> float:
    if n < 3:
        raise ValueError("need n >= 3")
    if not -1.0 < r < 1.0:
        raise ValueError(f"need |r| < 1, got r={r}")
    return r * math.sqrt(n - 2) / math.sqrt(1.0 - r * r)


# Regularized incomplete beta via the Lentz continued fraction; accurate
# to ~1e-15, far inside the 1e-8 contract for p_two_sided.

_FPMIN = 1e-300
_CF_EPS = 1e-15


def _betacf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _betainc_reg(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log(1.0 - x)
    )
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def p_two_sided(t: float, df: int) -> float:
    """P(|T| >= |t|) for T Student-t distributed with df degrees of freedom."""
    if df < 1:
        raise ValueError("need df >= 1")
    at = abs(float(t))
    if df == 1:
        return 1.0 - (2.0 / math.pi) * math.atan(at)
    if df == 2:
        return 1.0 - at / math.sqrt(at * at + 2.0)
    x = df / (df + at * at)
    return _betainc_reg(df / 2.0, 0.5, x)


def correlation_report(xs, ys, alpha: float = 0.05) -> CorrelationReport:
    """Pearson r plus a two-sided significance test at level alpha."""
    r = pearson_r(xs, ys)
    n = len(np.asarray(xs))
    t = t_statistic(r, n)
    p = p_two_sided(t, n - 2)
    return CorrelationReport(
        r=r, n=n, df=n - 2, t=t, p=p, alpha=alpha, reject_null=bool(p < alpha)
    )
