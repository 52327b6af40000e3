"""Multi-dimensional classification losses."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from gbnc.errors import LengthMismatch


def _pair(y: Sequence[int], y_hat: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y).reshape(-1)
    b = np.asarray(y_hat).reshape(-1)
    if a.shape != b.shape:
        raise LengthMismatch(f"vectors of length {a.size} and {b.size}")
    return a, b


def hamming_loss(y: Sequence[int], y_hat: Sequence[int]) -> float:
    """Fraction of class variables predicted wrongly."""
    a, b = _pair(y, y_hat)
    if a.size == 0:
        raise LengthMismatch("empty class vectors")
    return float(np.mean(a != b))


def subset_loss(y: Sequence[int], y_hat: Sequence[int]) -> float:
    """1 unless the whole class vector is right."""
    a, b = _pair(y, y_hat)
    return float(np.any(a != b))


def mean_hamming(Y: np.ndarray, Y_hat: np.ndarray) -> float:
    Y, Y_hat = np.asarray(Y), np.asarray(Y_hat)
    if Y.shape != Y_hat.shape:
        raise LengthMismatch(f"label matrices of shape {Y.shape} and {Y_hat.shape}")
    return float(np.mean(Y != Y_hat))


def mean_subset(Y: np.ndarray, Y_hat: np.ndarray) -> float:
    Y, Y_hat = np.asarray(Y), np.asarray(Y_hat)
    if Y.shape != Y_hat.shape:
        raise LengthMismatch(f"label matrices of shape {Y.shape} and {Y_hat.shape}")
    return float(np.mean(np.any(Y != Y_hat, axis=1)))
