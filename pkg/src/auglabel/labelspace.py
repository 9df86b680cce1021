"""Attribute matrix construction and continuous-label synthesis.

Categorical presence/absence labels are converted to signs (0 -> -1, 1 -> +1)
and used to scale the per-attribute word vectors, which are then summed into
a single continuous label vector per example.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingTable, OutOfVocabularyError, attribute_vector


@dataclass(frozen=True)
class AttributeSpace:
    """Ordered attribute names plus their stacked word vectors.

    Attributes:
        names: m attribute names, order defines label/column order.
        w: (d, m) float64 matrix; column j is the vector for ``names[j]``.
    """

    names: tuple[str, ...]
    w: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.names) < 1:
            raise ValueError("at least one attribute name required")
        if self.w.ndim != 2 or self.w.shape[1] != len(self.names):
            raise ValueError(
                f"matrix shape {self.w.shape} inconsistent with "
                f"{len(self.names)} attribute names"
            )
        self.w.flags.writeable = False

    @property
    def m(self) -> int:
        return len(self.names)

    @property
    def d(self) -> int:
        return self.w.shape[0]


def build_attribute_space(
    table: EmbeddingTable, names: Sequence[str]
) -> AttributeSpace:
    """Stack the attribute vectors for ``names`` into a (d, m) matrix.

    Raises:
        ValueError: On empty or duplicated names.
        OutOfVocabularyError: Carrying the offending attribute name.
    """
    if not names:
        raise ValueError("names must be non-empty")
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise ValueError(f"duplicate attribute name {name!r}")
        seen.add(name)
    columns = []
    for name in names:
        try:
            columns.append(attribute_vector(table, name))
        except OutOfVocabularyError as exc:
            raise OutOfVocabularyError(exc.tokens, attribute=name) from exc
    w = np.column_stack(columns)
    return AttributeSpace(names=tuple(names), w=w)


def validate_categorical(y: np.ndarray, m: int | None = None) -> np.ndarray:
    """Check that ``y`` is a 1-D {0,1} vector, optionally of length m."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError(f"categorical label must be 1-D, got shape {y.shape}")
    if m is not None and y.shape[0] != m:
        raise ValueError(f"label length {y.shape[0]} does not match m={m}")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("categorical label entries must be 0 or 1")
    return y


def sign_labels(y: np.ndarray) -> np.ndarray:
    """Map a {0,1} label vector to {-1,+1}: s_j = 2*y_j - 1."""
    y = validate_categorical(y)
    return 2.0 * y - 1.0


def synthesize_continuous_label(space: AttributeSpace, y: np.ndarray) -> np.ndarray:
    """Signed sum of attribute vectors: z = sum_j s_j * w[:, j], s = 2y - 1.

    Accumulates column by column in attribute order, so the result is
    bit-identical to a sequential scalar accumulation. The sum is not
    normalized by m and z is not rescaled.
    """
    y = validate_categorical(y, space.m)
    s = 2.0 * y - 1.0
    z = np.zeros(space.d, dtype=np.float64)
    for j in range(space.m):
        z += s[j] * space.w[:, j]
    return z


def synthesize_batch(
    space: AttributeSpace, labels: Iterable[np.ndarray]
) -> list[np.ndarray]:
    """Element-wise :func:`synthesize_continuous_label`, order preserved."""
    out = []
    for index, y in enumerate(labels):
        try:
            out.append(synthesize_continuous_label(space, y))
        except ValueError as exc:
            raise ValueError(f"label at index {index}: {exc}") from exc
    return out


def write_continuous_csv(labels: Iterable[np.ndarray], stream: IO[str]) -> None:
    """Write continuous labels as CSV, one row per example, d columns.

    Floats use 17 significant digits so the file reproduces the vectors
    exactly on re-read.
    """
    for z in labels:
        stream.write(",".join(format(float(v), ".17g") for v in z))
        stream.write("\n")


def format_continuous_csv(labels: Iterable[np.ndarray]) -> str:
    import io

    buf = io.StringIO()
    write_continuous_csv(labels, buf)
    return buf.getvalue()
