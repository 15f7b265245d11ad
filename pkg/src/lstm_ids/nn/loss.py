"""Softmax decision function and sparse categorical cross-entropy.

The loss gradient folds the softmax in (``softmax(z) − one_hot(y)``), so
the dense head emits raw logits and never saturates its own softmax.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from lstm_ids.exceptions import DataError, ShapeError


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax (a 1-D input is one row), shifted by the row max."""
    z = np.asarray(logits, dtype=np.float64)
    if z.size == 0:
        raise ShapeError("softmax needs at least one logit")
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def check_labels(labels, num_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or (y.size and not np.issubdtype(y.dtype, np.integer)):
        raise DataError(f"Labels must be a 1-D integer array, got {y.dtype} {y.shape}")
    bad = (y < 0) | (y >= num_classes)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise DataError(
            f"Label {int(y[first])} at position {first} is outside [0, {num_classes})")
    return y.astype(np.int64)


def sparse_cce(logits: np.ndarray, labels) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 1 or z.shape[1] < 1:
        raise ShapeError(f"logits must be (batch, classes), got shape {z.shape}")
    y = check_labels(labels, z.shape[1])
    if y.shape[0] != z.shape[0]:
        raise ShapeError(
            f"{y.shape[0]} labels for a batch of {z.shape[0]} logit rows")
    batch = z.shape[0]
    rows = np.arange(batch)
    loss = float(-log_softmax(z)[rows, y].mean())
    dlogits = softmax(z)
    dlogits[rows, y] -= 1.0
    dlogits /= batch
    return loss, dlogits
