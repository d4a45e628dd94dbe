"""Probability utilities and frame-to-clip aggregation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import EmptyInput


def softmax(logits) -> np.ndarray:
    """Max-subtracted softmax along the last axis (float64)."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def frame_vote(probs: Sequence) -> np.ndarray:
    """Mean of per-frame probability vectors, renormalised to sum to 1."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.size == 0 or len(arr) == 0:
        raise EmptyInput("frame_vote needs at least one frame")
    if arr.ndim == 1:
        arr = arr[None]
    mean = arr.mean(axis=0)
    return mean / mean.sum()


def argmax_label_index(probs) -> int:
    """Index of the largest probability; ties go to the lowest index."""
    return int(np.argmax(np.asarray(probs)))
