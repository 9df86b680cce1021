"""Thresholded per-attribute accuracy, averaged unweighted over attributes."""

from __future__ import annotations

import numpy as np


def mean_accuracy(
    y_p: np.ndarray, y: np.ndarray, threshold: float = 0.5
) -> tuple[float, np.ndarray]:
    """Mean over attributes of per-attribute thresholded accuracy.

    A prediction counts as positive when ``y_p >= threshold`` (ties go to
    positive). Returns the unweighted mean over attributes together with the
    per-attribute accuracy vector.
    """
    y_p = np.asarray(y_p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y_p.ndim != 2 or y.shape != y_p.shape:
        raise ValueError(f"shape mismatch: predictions {y_p.shape} vs labels {y.shape}")
    if y.shape[0] == 0:
        raise ValueError("empty input")
    predicted = y_p >= threshold
    actual = y >= 0.5
    per_attribute = np.mean(predicted == actual, axis=0)
    return float(np.mean(per_attribute)), per_attribute
