"""Baseline regularizers: random label flipping and five-crop geometric augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labelspace import validate_categorical


@dataclass(frozen=True)
class DisturbConfig:
    """Per-bit label flip probability; the caller owns the generator."""

    flip_rate: float

    def __post_init__(self):
        if not 0.0 <= self.flip_rate < 1.0:
            raise ValueError(f"flip_rate must be in [0, 1), got {self.flip_rate}")


def disturb_labels(
    y: np.ndarray, cfg: DisturbConfig, rng: np.random.Generator
) -> np.ndarray:
    """Return a copy of ``y`` with each bit independently flipped at flip_rate."""
    y = validate_categorical(y)
    flips = rng.random(y.shape[0]) < cfg.flip_rate
    return np.where(flips, 1.0 - y, y)


# Crop anchors in draw order: four corners, then centre.
_CROP_LOCATIONS = ("top_left", "top_right", "bottom_left", "bottom_right", "centre")


def _crop_offsets(h: int, w: int, crop_h: int, crop_w: int) -> list[tuple[int, int]]:
    # Centre offsets round down on odd margins.
    return [
        (0, 0),
        (0, w - crop_w),
        (h - crop_h, 0),
        (h - crop_h, w - crop_w),
        ((h - crop_h) // 2, (w - crop_w) // 2),
    ]


def _check_crop(x: np.ndarray, crop_h: int, crop_w: int) -> tuple[int, int]:
    if x.ndim != 2:
        raise ValueError(f"grid input must be 2-D, got shape {x.shape}")
    h, w = x.shape
    if not (1 <= crop_h <= h and 1 <= crop_w <= w):
        raise ValueError(
            f"crop {crop_h}x{crop_w} does not fit inside grid {h}x{w}"
        )
    return h, w


def five_crop_flip(
    x: np.ndarray, crop_h: int, crop_w: int, rng: np.random.Generator
) -> np.ndarray:
    """Crop at one of five windows (4 corners + centre), then maybe mirror.

    The window is chosen uniformly, then the crop is mirrored horizontally
    with probability 0.5. Two draws are consumed from ``rng`` per call, in
    that order, so results are deterministic given the generator state.
    """
    h, w = _check_crop(x, crop_h, crop_w)
    offsets = _crop_offsets(h, w, crop_h, crop_w)
    r, c = offsets[int(rng.integers(5))]
    window = x[r : r + crop_h, c : c + crop_w].copy()
    if rng.random() < 0.5:
        window = window[:, ::-1].copy()
    return window


def centre_crop(x: np.ndarray, crop_h: int, crop_w: int) -> np.ndarray:
    """Deterministic centre crop; offsets round down on odd margins."""
    h, w = _check_crop(x, crop_h, crop_w)
    r, c = (h - crop_h) // 2, (w - crop_w) // 2
    return x[r : r + crop_h, c : c + crop_w].copy()
