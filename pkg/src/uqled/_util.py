"""Small numeric helpers shared across modules."""

import numpy as np

__all__ = ["round_half_away", "softmax"]


def round_half_away(x: float) -> int:
    """Round to nearest integer with halves going away from zero.

    ``round()`` banker-rounds (0.5 -> 0), which silently drops one flip
    whenever tau*n lands exactly on .5, so counts use this instead.
    """
    if x >= 0.0:
        return int(np.floor(x + 0.5))
    return int(np.ceil(x - 0.5))


def softmax(scores: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over a 1-D score vector."""
    scores = np.asarray(scores, dtype=np.float64)
    e = np.exp(scores - scores.max())
    return e / e.sum()
