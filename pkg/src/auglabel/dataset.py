"""Synthetic correlated-attribute datasets and annotation-file ingestion.

Synthetic examples draw one latent bit per attribute group, so attributes in
the same group co-occur (and declared exclusive pairs never do); the input
grid is an affine projection of the attribute signs plus Gaussian noise, which
gives the classifier a learnable signal and the crop augmentation spatial
structure to act on.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

DATASET_FORMAT_VERSION = 1


class AnnotationParseError(ValueError):
    """Raised when an annotation stream violates the header+rows layout."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass
class Split:
    """One dataset partition.

    Attributes:
        x: (n, g, g) float64 input grids.
        y: (n, m) float64 categorical labels in {0, 1}.
        z: (n, d) float64 continuous labels, or None until synthesized.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def take(self, indices: np.ndarray) -> "Split":
        return Split(
            x=self.x[indices],
            y=self.y[indices],
            z=None if self.z is None else self.z[indices],
        )


@dataclass
class DatasetSplits:
    train: Split
    val: Split
    test: Split


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator settings for a synthetic multi-attribute dataset.

    Attributes:
        m: Attribute count.
        groups: Partition of {0..m-1}; attributes in a group share a latent.
        exclusive_pairs: (a, b) pairs where b is forced to the complement of
            a; both must belong to the same group.
        n_train, n_val, n_test: Split sizes.
        input_size: Total pixels per example; must be a perfect square so the
            input reshapes to a square grid.
        noise_std: Standard deviation of the additive Gaussian pixel noise.
        seed: Drives the affine map, the latents, and the noise.
    """

    m: int
    groups: tuple[tuple[int, ...], ...]
    n_train: int
    n_val: int
    n_test: int
    input_size: int
    noise_std: float
    seed: int
    exclusive_pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        covered: list[int] = []
        for group in self.groups:
            if not group:
                raise ValueError("empty attribute group")
            covered.extend(group)
        if sorted(covered) != list(range(self.m)):
            raise ValueError(
                f"groups {self.groups} do not partition attributes 0..{self.m - 1}"
            )
        for n, label in ((self.n_train, "n_train"), (self.n_val, "n_val"), (self.n_test, "n_test")):
            if n < 1:
                raise ValueError(f"{label} must be >= 1, got {n}")
        side = math.isqrt(self.input_size)
        if side * side != self.input_size:
            raise ValueError(f"input_size {self.input_size} is not a perfect square")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")
        group_of = {j: gi for gi, group in enumerate(self.groups) for j in group}
        paired: set[int] = set()
        for a, b in self.exclusive_pairs:
            if a == b or not (0 <= a < self.m and 0 <= b < self.m):
                raise ValueError(f"invalid exclusive pair ({a}, {b})")
            if group_of[a] != group_of[b]:
                raise ValueError(
                    f"exclusive pair ({a}, {b}) spans two groups; members must share one"
                )
            if a in paired or b in paired:
                raise ValueError(f"attribute reused across exclusive pairs: ({a}, {b})")
            paired.update((a, b))

    @property
    def grid_side(self) -> int:
        return math.isqrt(self.input_size)


def _affine_features(
    rng: np.random.Generator, signs: np.ndarray, input_size: int, noise_std: float
) -> np.ndarray:
    """Project sign vectors through a random affine map and add pixel noise."""
    n, m = signs.shape
    a = rng.normal(size=(input_size, m)) / np.sqrt(m)
    b = rng.normal(size=input_size) * 0.1
    noise = rng.normal(0.0, noise_std, size=(n, input_size)) if noise_std > 0 else 0.0
    flat = signs @ a.T + b + noise
    side = math.isqrt(input_size)
    return flat.reshape(n, side, side)


def generate_synthetic(spec: SyntheticSpec) -> DatasetSplits:
    """Draw train/val/test splits per the spec; deterministic given its seed.

    Labels are exact within groups (noise perturbs only the inputs), so
    declared exclusive pairs always hold: y[b] == 1 - y[a].
    """
    rng = np.random.default_rng(spec.seed)
    n_total = spec.n_train + spec.n_val + spec.n_test
    latents = rng.integers(0, 2, size=(n_total, len(spec.groups)))
    y = np.zeros((n_total, spec.m), dtype=np.float64)
    for gi, group in enumerate(spec.groups):
        for j in group:
            y[:, j] = latents[:, gi]
    for a, b in spec.exclusive_pairs:
        y[:, b] = 1.0 - y[:, a]
    x = _affine_features(rng, 2.0 * y - 1.0, spec.input_size, spec.noise_std)
    bounds = (spec.n_train, spec.n_train + spec.n_val, n_total)
    train = Split(x=x[: bounds[0]], y=y[: bounds[0]])
    val = Split(x=x[bounds[0] : bounds[1]], y=y[bounds[0] : bounds[1]])
    test = Split(x=x[bounds[1] :], y=y[bounds[1] :])
    return DatasetSplits(train=train, val=val, test=test)


def features_from_labels(
    y: np.ndarray, input_size: int, noise_std: float, seed: int
) -> np.ndarray:
    """Synthesize input grids for externally supplied labels.

    Reuses the synthetic generator's affine-plus-noise recipe so annotation
    files (which carry no images) can still drive end-to-end experiments.
    """
    y = np.asarray(y, dtype=np.float64)
    side = math.isqrt(input_size)
    if side * side != input_size:
        raise ValueError(f"input_size {input_size} is not a perfect square")
    rng = np.random.default_rng(seed)
    return _affine_features(rng, 2.0 * y - 1.0, input_size, noise_std)


@dataclass(frozen=True)
class AnnotationData:
    """Parsed annotation file: attribute names, row ids, {0,1} label matrix."""

    names: tuple[str, ...]
    ids: tuple[str, ...]
    y: np.ndarray = field(repr=False)


_CONVENTIONS = {
    "pm1": {-1: 0.0, 1: 1.0},
    "01": {0: 0.0, 1: 1.0},
}


def parse_annotations(source: Iterable[str], convention: str = "pm1") -> AnnotationData:
    """Parse a header-plus-rows annotation stream.

    The first non-blank line lists the attribute names; each following row is
    ``<id> <v1> ... <vm>``. Values follow ``convention``: "pm1" maps -1 to 0
    and keeps 1, "01" keeps values as they are.

    Raises:
        AnnotationParseError: On missing header, row arity mismatch, a value
            outside the convention, or a duplicate id.
    """
    if convention not in _CONVENTIONS:
        raise ValueError(f"unknown value convention {convention!r}")
    mapping = _CONVENTIONS[convention]
    names: tuple[str, ...] | None = None
    ids: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(source, start=1):
        parts = raw.split()
        if not parts:
            continue
        if names is None:
            names = tuple(parts)
            continue
        row_id, values = parts[0], parts[1:]
        if len(values) != len(names):
            raise AnnotationParseError(
                f"row has {len(values)} values, expected {len(names)}", line_no
            )
        if row_id in seen:
            raise AnnotationParseError(f"duplicate id {row_id!r}", line_no)
        seen.add(row_id)
        converted = []
        for v in values:
            try:
                key = int(v)
            except ValueError:
                key = None
            if key is None or key not in mapping:
                raise AnnotationParseError(
                    f"value {v!r} outside the {convention!r} convention", line_no
                )
            converted.append(mapping[key])
        ids.append(row_id)
        rows.append(converted)
    if names is None:
        raise AnnotationParseError("missing header line")
    y = (
        np.array(rows, dtype=np.float64)
        if rows
        else np.zeros((0, len(names)), dtype=np.float64)
    )
    return AnnotationData(names=names, ids=tuple(ids), y=y)


def load_annotation_file(path: str | Path, convention: str = "pm1") -> AnnotationData:
    with open(path, encoding="utf-8") as handle:
        return parse_annotations(handle, convention)


def serialize_annotations(data: AnnotationData, convention: str = "pm1") -> str:
    """Render annotations back to header-plus-rows text."""
    if convention not in _CONVENTIONS:
        raise ValueError(f"unknown value convention {convention!r}")
    back = {v: k for k, v in _CONVENTIONS[convention].items()}
    lines = [" ".join(data.names)]
    for row_id, row in zip(data.ids, data.y):
        lines.append(row_id + " " + " ".join(str(back[v]) for v in row))
    return "\n".join(lines) + "\n"


def subsample_fraction(split: Split, fraction: float, seed: int) -> Split:
    """Uniform sample without replacement of round(fraction * n) examples."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    size = int(round(fraction * split.n))
    if size < 1:
        raise ValueError(f"fraction {fraction} of {split.n} examples selects nothing")
    rng = np.random.default_rng(seed)
    indices = rng.choice(split.n, size=size, replace=False)
    return split.take(indices)


def _split_to_dict(split: Split) -> dict:
    return {
        "x": split.x.tolist(),
        "y": split.y.tolist(),
        "z": None if split.z is None else split.z.tolist(),
    }


def _split_from_dict(payload: dict) -> Split:
    return Split(
        x=np.array(payload["x"], dtype=np.float64),
        y=np.array(payload["y"], dtype=np.float64),
        z=None if payload["z"] is None else np.array(payload["z"], dtype=np.float64),
    )


def save_dataset(splits: DatasetSplits, path: str | Path) -> None:
    """Write all three splits to JSON; floats round-trip exactly."""
    payload = {
        "format_version": DATASET_FORMAT_VERSION,
        "splits": {
            "train": _split_to_dict(splits.train),
            "val": _split_to_dict(splits.val),
            "test": _split_to_dict(splits.test),
        },
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)


def load_dataset(path: str | Path) -> DatasetSplits:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    version = payload.get("format_version")
    if version != DATASET_FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format version {version!r}")
    splits = payload["splits"]
    return DatasetSplits(
        train=_split_from_dict(splits["train"]),
        val=_split_from_dict(splits["val"]),
        test=_split_from_dict(splits["test"]),
    )
