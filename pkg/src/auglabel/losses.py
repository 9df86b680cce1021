"""Binary cross-entropy, squared-error, and joint loss with analytic gradients.

The joint objective over a batch of N examples is

    J = alpha * (1/N) * sum_i BCE_i + (1 - alpha) * (1/N) * sum_i MSE_i

where BCE_i sums the per-category cross entropies of example i and MSE_i is
the unaveraged squared L2 distance between the continuous label and the
continuous head output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

DEFAULT_EPSILON = 1e-7


@dataclass(frozen=True)
class JointLossConfig:
    """Weighting and clamping for the joint objective.

    Attributes:
        alpha: Convex weight in [0, 1]; 1 is pure categorical loss.
        epsilon: Probability clamp, keeps log terms finite at saturation.
    """

    alpha: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.epsilon < 1e-3:
            raise ValueError(f"epsilon must be in (0, 1e-3), got {self.epsilon}")


@dataclass
class Prediction:
    """Network outputs: sigmoid probabilities y_p and continuous head z_p."""

    y_p: np.ndarray
    z_p: np.ndarray


@dataclass
class LossGradients:
    """Joint-loss gradients at the heads, per example.

    Attributes:
        d_logits: (N, m) gradient with respect to pre-sigmoid logits.
        d_z_p: (N, d) gradient with respect to the continuous head output.
    """

    d_logits: np.ndarray
    d_z_p: np.ndarray


def bce_loss(y: np.ndarray, y_p: np.ndarray, epsilon: float = DEFAULT_EPSILON) -> float:
    """Sum over categories of -y*log(p) - (1-y)*log(1-p) for one example.

    Probabilities are clamped to [epsilon, 1-epsilon] before the logs, so the
    loss is finite even for y_p entries of exactly 0 or 1.
    """
    y = np.asarray(y, dtype=np.float64)
    y_p = np.asarray(y_p, dtype=np.float64)
    if y.shape != y_p.shape or y.ndim != 1:
        raise ValueError(f"shape mismatch: y {y.shape} vs y_p {y_p.shape}")
    if np.isnan(y).any() or np.isnan(y_p).any():
        raise ValueError("NaN input to bce_loss")
    p = np.clip(y_p, epsilon, 1.0 - epsilon)
    return float(np.sum(-y * np.log(p) - (1.0 - y) * np.log(1.0 - p)))


def mse_loss(z: np.ndarray, z_p: np.ndarray) -> float:
    """Squared Euclidean norm of (z - z_p), not averaged over dimensions."""
    z = np.asarray(z, dtype=np.float64)
    z_p = np.asarray(z_p, dtype=np.float64)
    if z.shape != z_p.shape or z.ndim != 1:
        raise ValueError(f"shape mismatch: z {z.shape} vs z_p {z_p.shape}")
    return float(np.sum((z - z_p) ** 2))


def _check_batch(cfg, y, z, pred):
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    y_p = np.asarray(pred.y_p, dtype=np.float64)
    z_p = np.asarray(pred.z_p, dtype=np.float64)
    if y.ndim != 2 or z.ndim != 2 or y_p.ndim != 2 or z_p.ndim != 2:
        raise ValueError("batch arrays must be 2-D (N, m) and (N, d)")
    n = y.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    if y_p.shape != y.shape:
        raise ValueError(f"shape mismatch: y {y.shape} vs y_p {y_p.shape}")
    if z_p.shape != z.shape:
        raise ValueError(f"shape mismatch: z {z.shape} vs z_p {z_p.shape}")
    if z.shape[0] != n:
        raise ValueError("y and z batch sizes differ")
    if np.isnan(y).any() or np.isnan(y_p).any():
        raise ValueError("NaN input to joint loss")
    return y, z, y_p, z_p


def joint_loss(cfg: JointLossConfig, y: np.ndarray, z: np.ndarray, pred: Prediction) -> float:
    """alpha * mean per-example BCE + (1 - alpha) * mean per-example MSE.

    ``y`` is (N, m), ``z`` is (N, d); the prediction holds matching batch
    arrays. The per-example terms reduce exactly as :func:`bce_loss` and
    :func:`mse_loss` do, so alpha=1 equals the mean BCE and alpha=0 the mean
    MSE bit for bit.
    """
    y, z, y_p, z_p = _check_batch(cfg, y, z, pred)
    p = np.clip(y_p, cfg.epsilon, 1.0 - cfg.epsilon)
    bce_terms = np.sum(-y * np.log(p) - (1.0 - y) * np.log(1.0 - p), axis=1)
    mse_terms = np.sum((z - z_p) ** 2, axis=1)
    return cfg.alpha * float(np.mean(bce_terms)) + (1.0 - cfg.alpha) * float(
        np.mean(mse_terms)
    )


def joint_loss_grad(
    cfg: JointLossConfig, y: np.ndarray, z: np.ndarray, pred: Prediction
) -> LossGradients:
    """Analytic joint-loss gradients at the two heads.

    Uses the fused sigmoid+BCE form for the categorical head:
    dJ/dlogit = alpha/N * (y_p - y), and dJ/dz_p = (1-alpha)/N * 2*(z_p - z).
    """
    y, z, y_p, z_p = _check_batch(cfg, y, z, pred)
    n = y.shape[0]
    d_logits = (cfg.alpha / n) * (y_p - y)
    d_z_p = ((1.0 - cfg.alpha) / n) * 2.0 * (z_p - z)
    return LossGradients(d_logits=d_logits, d_z_p=d_z_p)


def finite_difference_check(
    f: Callable[[np.ndarray], float],
    point: np.ndarray,
    analytic_grad: np.ndarray,
    step: float = 1e-5,
) -> float:
    """Maximum relative error between central differences of f and a gradient.

    The relative error per coordinate uses max(|fd|, |analytic|, 1e-12) as the
    denominator.

    Raises:
        ValueError: If step is outside [1e-7, 1e-3], or f returns a
            non-finite value at a perturbed point.
    """
    if not 1e-7 <= step <= 1e-3:
        raise ValueError(f"step must be in [1e-7, 1e-3], got {step}")
    point = np.asarray(point, dtype=np.float64)
    analytic_grad = np.asarray(analytic_grad, dtype=np.float64)
    if point.shape != analytic_grad.shape or point.ndim != 1:
        raise ValueError("point and analytic_grad must be 1-D with equal shapes")
    worst = 0.0
    for i in range(point.size):
        plus = point.copy()
        minus = point.copy()
        plus[i] += step
        minus[i] -= step
        f_plus = float(f(plus))
        f_minus = float(f(minus))
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError(f"non-finite loss at perturbed coordinate {i}")
        fd = (f_plus - f_minus) / (2.0 * step)
        denom = max(abs(fd), abs(analytic_grad[i]), 1e-12)
        worst = max(worst, abs(fd - analytic_grad[i]) / denom)
    return worst
