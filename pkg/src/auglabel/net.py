"""Trunk-plus-two-heads feedforward network with manual backprop and SGD.

The trunk is a stack of tanh layers shared by both heads: a sigmoid head with
one output per attribute and a linear head matching the continuous-label
dimension. Dropout (inverted, applied to trunk activations) is active only
when masks are supplied, i.e. during training.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Split
from .losses import (
    JointLossConfig,
    LossGradients,
    Prediction,
    finite_difference_check,
    joint_loss,
    joint_loss_grad,
)
from .metrics import mean_accuracy
from .regularizers import DisturbConfig, centre_crop, disturb_labels, five_crop_flip

CHECKPOINT_FORMAT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Raised when training hits a non-finite loss or gradient."""

    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass(frozen=True)
class NetworkShape:
    input_size: int
    hidden_sizes: tuple[int, ...]
    m: int
    d: int
    dropout_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(self.hidden_sizes))
        if self.input_size < 1:
            raise ValueError(f"input_size must be >= 1, got {self.input_size}")
        if not self.hidden_sizes:
            raise ValueError("at least one hidden layer required")
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError(f"hidden sizes must be >= 1, got {self.hidden_sizes}")
        if self.m < 1 or self.d < 1:
            raise ValueError(f"head widths must be >= 1, got m={self.m}, d={self.d}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class ModelParams:
    shape: NetworkShape
    trunk_w: list[np.ndarray]
    trunk_b: list[np.ndarray]
    cat_w: np.ndarray
    cat_b: np.ndarray
    cont_w: np.ndarray
    cont_b: np.ndarray
    seed: int | None = None

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (weights then bias per layer)."""
        out: list[np.ndarray] = []
        for w, b in zip(self.trunk_w, self.trunk_b):
            out.extend((w, b))
        out.extend((self.cat_w, self.cat_b, self.cont_w, self.cont_b))
        return out


@dataclass
class Gradients:
    trunk_w: list[np.ndarray]
    trunk_b: list[np.ndarray]
    cat_w: np.ndarray
    cat_b: np.ndarray
    cont_w: np.ndarray
    cont_b: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.trunk_w, self.trunk_b):
            out.extend((w, b))
        out.extend((self.cat_w, self.cat_b, self.cont_w, self.cont_b))
        return out


@dataclass(frozen=True)
class SgdConfig:
    learning_rate: float
    epochs: int
    batch_size: int
    seed: int

    def __post_init__(self):
        if not self.learning_rate >= 0.0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class TrainOptions:
    """Regularizer switches for one training run.

    ``crop`` is the square window side cut from each input grid: a random
    five-crop-plus-flip when geo_aug is on, the deterministic centre crop
    otherwise (evaluation always centre-crops). None feeds the full grid.
    """

    geo_aug: bool = False
    dropout: bool = False
    disturb: DisturbConfig | None = None
    crop: int | None = None


@dataclass
class TrainTrace:
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)


@dataclass
class ForwardCache:
    x: np.ndarray
    activations: list[np.ndarray]
    dropped: list[np.ndarray]
    masks: list[np.ndarray] | None
    squeeze: bool
    signature: tuple


def _sigmoid(t: np.ndarray) -> np.ndarray:
    # Branch on sign to avoid overflow in exp for large |t|.
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _shape_signature(params: ModelParams) -> tuple:
    return tuple(a.shape for a in params.arrays())


def init_params(shape: NetworkShape, seed: int) -> ModelParams:
    """Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases."""
    rng = np.random.default_rng(seed)
    trunk_w, trunk_b = [], []
    fan_in = shape.input_size
    for width in shape.hidden_sizes:
        bound = 1.0 / np.sqrt(fan_in)
        trunk_w.append(rng.uniform(-bound, bound, size=(width, fan_in)))
        trunk_b.append(np.zeros(width))
        fan_in = width
    bound = 1.0 / np.sqrt(fan_in)
    cat_w = rng.uniform(-bound, bound, size=(shape.m, fan_in))
    cont_w = rng.uniform(-bound, bound, size=(shape.d, fan_in))
    return ModelParams(
        shape=shape,
        trunk_w=trunk_w,
        trunk_b=trunk_b,
        cat_w=cat_w,
        cat_b=np.zeros(shape.m),
        cont_w=cont_w,
        cont_b=np.zeros(shape.d),
        seed=seed,
    )


def _promote_masks(
    masks: Sequence[np.ndarray], shape: NetworkShape, n: int
) -> list[np.ndarray]:
    if len(masks) != len(shape.hidden_sizes):
        raise ValueError(
            f"expected {len(shape.hidden_sizes)} dropout masks, got {len(masks)}"
        )
    promoted = []
    for width, mask in zip(shape.hidden_sizes, masks):
        mask = np.asarray(mask, dtype=np.float64)
        if mask.ndim == 1:
            mask = mask[None, :]
        if mask.shape != (n, width):
            raise ValueError(f"mask shape {mask.shape} != ({n}, {width})")
        promoted.append(mask)
    return promoted


def forward(
    params: ModelParams,
    x: np.ndarray,
    dropout_masks: Sequence[np.ndarray] | None = None,
) -> tuple[Prediction, ForwardCache]:
    """Run the network on a single input vector or a (n, input_size) batch.

    Supplying ``dropout_masks`` (one {0,1} array per hidden layer) switches on
    inverted dropout: masked activations become zero and survivors are scaled
    by 1/(1 - dropout_rate).
    """
    shape = params.shape
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    x2d = x[None, :] if squeeze else x
    if x2d.ndim != 2 or x2d.shape[1] != shape.input_size:
        raise ValueError(f"input shape {x.shape} incompatible with {shape.input_size}")
    n = x2d.shape[0]
    masks = None
    if dropout_masks is not None:
        masks = _promote_masks(dropout_masks, shape, n)
    keep_scale = 1.0 / (1.0 - shape.dropout_rate)
    a = x2d
    activations, dropped = [], []
    for layer, (w, b) in enumerate(zip(params.trunk_w, params.trunk_b)):
        act = np.tanh(a @ w.T + b)
        activations.append(act)
        if masks is not None:
            act = act * masks[layer] * keep_scale
        dropped.append(act)
        a = act
    logits = a @ params.cat_w.T + params.cat_b
    y_p = _sigmoid(logits)
    z_p = a @ params.cont_w.T + params.cont_b
    cache = ForwardCache(
        x=x2d,
        activations=activations,
        dropped=dropped,
        masks=masks,
        squeeze=squeeze,
        signature=_shape_signature(params),
    )
    if squeeze:
        return Prediction(y_p=y_p[0], z_p=z_p[0]), cache
    return Prediction(y_p=y_p, z_p=z_p), cache


def backward(
    params: ModelParams, cache: ForwardCache, head_grads: LossGradients
) -> Gradients:
    """Backpropagate head gradients to every parameter.

    The trunk receives the sum of the two heads' signals. Raises if the cache
    does not match the current parameter shapes.
    """
    shape = params.shape
    if cache.signature != _shape_signature(params):
        raise ValueError("stale forward cache: parameter shapes changed")
    d_logits = np.asarray(head_grads.d_logits, dtype=np.float64)
    d_z_p = np.asarray(head_grads.d_z_p, dtype=np.float64)
    if d_logits.ndim == 1:
        d_logits = d_logits[None, :]
    if d_z_p.ndim == 1:
        d_z_p = d_z_p[None, :]
    n = cache.x.shape[0]
    if d_logits.shape != (n, shape.m) or d_z_p.shape != (n, shape.d):
        raise ValueError(
            f"head gradient shapes {d_logits.shape}, {d_z_p.shape} do not match "
            f"cache batch {n} with m={shape.m}, d={shape.d}"
        )
    h_last = cache.dropped[-1]
    cat_w_g = d_logits.T @ h_last
    cat_b_g = d_logits.sum(axis=0)
    cont_w_g = d_z_p.T @ h_last
    cont_b_g = d_z_p.sum(axis=0)
    g = d_logits @ params.cat_w + d_z_p @ params.cont_w
    keep_scale = 1.0 / (1.0 - shape.dropout_rate)
    trunk_w_g: list[np.ndarray] = [None] * len(params.trunk_w)  # type: ignore[list-item]
    trunk_b_g: list[np.ndarray] = [None] * len(params.trunk_b)  # type: ignore[list-item]
    for layer in reversed(range(len(params.trunk_w))):
        if cache.masks is not None:
            g = g * cache.masks[layer] * keep_scale
        g = g * (1.0 - cache.activations[layer] ** 2)
        layer_input = cache.dropped[layer - 1] if layer > 0 else cache.x
        trunk_w_g[layer] = g.T @ layer_input
        trunk_b_g[layer] = g.sum(axis=0)
        if layer > 0:
            g = g @ params.trunk_w[layer]
    return Gradients(
        trunk_w=trunk_w_g,
        trunk_b=trunk_b_g,
        cat_w=cat_w_g,
        cat_b=cat_b_g,
        cont_w=cont_w_g,
        cont_b=cont_b_g,
    )


def sgd_step(params: ModelParams, grads: Gradients, learning_rate: float) -> ModelParams:
    """In-place p <- p - lr * g for every parameter; no momentum.

    Raises:
        ValueError: If any gradient entry is non-finite.
    """
    grad_arrays = grads.arrays()
    for g in grad_arrays:
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite gradient; aborting update")
    for p, g in zip(params.arrays(), grad_arrays):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        p -= learning_rate * g
    return params


def params_to_vector(params: ModelParams) -> np.ndarray:
    return np.concatenate([a.ravel() for a in params.arrays()])


def grads_to_vector(grads: Gradients) -> np.ndarray:
    return np.concatenate([a.ravel() for a in grads.arrays()])


def set_params_from_vector(params: ModelParams, vec: np.ndarray) -> None:
    offset = 0
    for a in params.arrays():
        a[...] = vec[offset : offset + a.size].reshape(a.shape)
        offset += a.size
    if offset != vec.size:
        raise ValueError(f"vector length {vec.size} != parameter count {offset}")


def _flatten_split(x: np.ndarray, crop: int | None) -> np.ndarray:
    """Centre-crop grids (if requested) and flatten to (n, features)."""
    if crop is None:
        return x.reshape(x.shape[0], -1)
    h, w = x.shape[1], x.shape[2]
    r, c = (h - crop) // 2, (w - crop) // 2
    return x[:, r : r + crop, c : c + crop].reshape(x.shape[0], -1)


def evaluate(
    params: ModelParams, split: Split, crop: int | None = None
) -> tuple[float, np.ndarray]:
    """Mean accuracy of the categorical head on a split (centre-cropped)."""
    pred, _ = forward(params, _flatten_split(split.x, crop))
    return mean_accuracy(pred.y_p, split.y)


def train(
    params: ModelParams,
    train_split: Split,
    val_split: Split,
    loss_cfg: JointLossConfig,
    sgd_cfg: SgdConfig,
    options: TrainOptions | None = None,
) -> tuple[ModelParams, TrainTrace]:
    """Mini-batch SGD on the joint objective; deterministic given the seed.

    One generator (seeded from ``sgd_cfg.seed``) drives, in order per batch:
    the epoch permutation, geometric-crop draws, label disturbance, and
    dropout masks. The trace records the mean train loss and the validation
    mean accuracy per epoch.

    Raises:
        TrainingDiverged: On a non-finite loss or gradient, with the epoch.
    """
    options = options or TrainOptions()
    shape = params.shape
    n = train_split.n
    if n == 0:
        raise ValueError("empty train split")
    expected = options.crop * options.crop if options.crop else train_split.x[0].size
    if expected != shape.input_size:
        raise ValueError(
            f"network input_size {shape.input_size} != {expected} features "
            f"(grids {train_split.x.shape[1:]} with crop {options.crop})"
        )
    if train_split.z is None:
        if loss_cfg.alpha < 1.0:
            raise ValueError("alpha < 1 requires continuous labels on the train split")
        z_all = np.zeros((n, shape.d))
    else:
        z_all = np.asarray(train_split.z, dtype=np.float64)
        if z_all.shape != (n, shape.d):
            raise ValueError(f"z shape {z_all.shape} != ({n}, {shape.d})")
    y_all = np.asarray(train_split.y, dtype=np.float64)
    if y_all.shape != (n, shape.m):
        raise ValueError(f"y shape {y_all.shape} != ({n}, {shape.m})")

    rng = np.random.default_rng(sgd_cfg.seed)
    use_dropout = options.dropout and shape.dropout_rate > 0.0
    trace = TrainTrace()
    for epoch in range(sgd_cfg.epochs):
        perm = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, sgd_cfg.batch_size):
            idx = perm[start : start + sgd_cfg.batch_size]
            if options.crop and options.geo_aug:
                xb = np.stack(
                    [
                        five_crop_flip(train_split.x[i], options.crop, options.crop, rng).ravel()
                        for i in idx
                    ]
                )
            else:
                xb = _flatten_split(train_split.x[idx], options.crop)
            if options.disturb is not None:
                yb = np.stack(
                    [disturb_labels(y_all[i], options.disturb, rng) for i in idx]
                )
            else:
                yb = y_all[idx]
            zb = z_all[idx]
            masks = None
            if use_dropout:
                masks = [
                    (rng.random((len(idx), width)) >= shape.dropout_rate).astype(np.float64)
                    for width in shape.hidden_sizes
                ]
            pred, cache = forward(params, xb, masks)
            loss = joint_loss(loss_cfg, yb, zb, pred)
            if not np.isfinite(loss):
                raise TrainingDiverged(epoch, f"non-finite loss {loss}")
            head_grads = joint_loss_grad(loss_cfg, yb, zb, pred)
            grads = backward(params, cache, head_grads)
            try:
                sgd_step(params, grads, sgd_cfg.learning_rate)
            except ValueError as exc:
                raise TrainingDiverged(epoch, str(exc)) from exc
            batch_losses.append(loss)
        trace.train_loss.append(float(np.mean(batch_losses)))
        val_acc, _ = evaluate(params, val_split, options.crop)
        trace.val_accuracy.append(val_acc)
    return params, trace


def save_checkpoint(params: ModelParams, path: str | Path) -> None:
    """Write shape, init seed, and all parameters as JSON with exact floats."""
    shape = params.shape
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "seed": params.seed,
        "shape": {
            "input_size": shape.input_size,
            "hidden_sizes": list(shape.hidden_sizes),
            "m": shape.m,
            "d": shape.d,
            "dropout_rate": shape.dropout_rate,
        },
        "params": {
            "trunk_w": [w.tolist() for w in params.trunk_w],
            "trunk_b": [b.tolist() for b in params.trunk_b],
            "cat_w": params.cat_w.tolist(),
            "cat_b": params.cat_b.tolist(),
            "cont_w": params.cont_w.tolist(),
            "cont_b": params.cont_b.tolist(),
        },
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def load_checkpoint(path: str | Path) -> ModelParams:
    """Load a checkpoint; forward outputs reproduce the saved model exactly."""
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    shape = NetworkShape(
        input_size=payload["shape"]["input_size"],
        hidden_sizes=tuple(payload["shape"]["hidden_sizes"]),
        m=payload["shape"]["m"],
        d=payload["shape"]["d"],
        dropout_rate=payload["shape"]["dropout_rate"],
    )
    raw = payload["params"]
    return ModelParams(
        shape=shape,
        trunk_w=[np.array(w, dtype=np.float64) for w in raw["trunk_w"]],
        trunk_b=[np.array(b, dtype=np.float64) for b in raw["trunk_b"]],
        cat_w=np.array(raw["cat_w"], dtype=np.float64),
        cat_b=np.array(raw["cat_b"], dtype=np.float64),
        cont_w=np.array(raw["cont_w"], dtype=np.float64),
        cont_b=np.array(raw["cont_b"], dtype=np.float64),
        seed=payload.get("seed"),
    )


def parameter_gradient_error(
    params: ModelParams,
    x: np.ndarray,
    y: np.ndarray,
    z: np.ndarray,
    loss_cfg: JointLossConfig,
    step: float = 1e-5,
) -> float:
    """Max relative error of analytic parameter gradients vs central differences."""
    pred, cache = forward(params, x)
    head_grads = joint_loss_grad(loss_cfg, y, z, pred)
    analytic = grads_to_vector(backward(params, cache, head_grads))
    scratch = copy.deepcopy(params)

    def f(vec: np.ndarray) -> float:
        set_params_from_vector(scratch, vec)
        p, _ = forward(scratch, x)
        return joint_loss(loss_cfg, y, z, p)

    return finite_difference_check(f, params_to_vector(params), analytic, step)


def gradient_check_suite(
    n_shapes: int = 20, points_per_shape: int = 5, seed: int = 0, tol: float = 1e-4
) -> list[dict]:
    """Finite-difference verification across random shapes and points.

    Returns one record per check with the shape, the measured maximum
    relative error, the tolerance, and a pass flag.
    """
    rng = np.random.default_rng(seed)
    results = []
    for shape_index in range(n_shapes):
        input_size = int(rng.integers(2, 9))
        n_hidden = int(rng.integers(1, 3))
        hidden = tuple(int(rng.integers(2, 17)) for _ in range(n_hidden))
        m = int(rng.integers(1, 7))
        d = int(rng.integers(1, 9))
        shape = NetworkShape(input_size=input_size, hidden_sizes=hidden, m=m, d=d)
        worst = 0.0
        for _ in range(points_per_shape):
            params = init_params(shape, int(rng.integers(0, 2**32)))
            batch = int(rng.integers(1, 4))
            x = rng.normal(size=(batch, input_size))
            y = rng.integers(0, 2, size=(batch, m)).astype(np.float64)
            z = rng.normal(size=(batch, d))
            alpha = float(rng.uniform(0.0, 1.0))
            err = parameter_gradient_error(
                params, x, y, z, JointLossConfig(alpha=alpha)
            )
            worst = max(worst, err)
        results.append(
            {
                "check": f"shape {shape_index}: in={input_size} hidden={hidden} "
                f"m={m} d={d} ({points_per_shape} points)",
                "max_relative_error": worst,
                "tolerance": tol,
                "passed": worst < tol,
            }
        )
    return results
