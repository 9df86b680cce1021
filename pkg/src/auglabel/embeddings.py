"""GloVe-format embedding tables and attribute-name vector lookup."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

_TOKEN_SPLIT = re.compile(r"[\s_]+")


class EmbeddingParseError(ValueError):
    """Raised when an embedding stream violates the one-record-per-line format."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OutOfVocabularyError(LookupError):
    """Raised when a token (or a component word of an attribute name) has no vector."""

    def __init__(self, tokens: Iterable[str], attribute: str | None = None):
        self.tokens = tuple(tokens)
        self.attribute = attribute
        message = "out-of-vocabulary token(s): " + ", ".join(self.tokens)
        if attribute is not None:
            message += f" (while resolving attribute {attribute!r})"
        super().__init__(message)


@dataclass(frozen=True)
class EmbeddingTable:
    """Immutable token -> vector map with a fixed dimension.

    Attributes:
        dimension: Length of every stored vector.
        entries: Lowercase token -> float64 vector of length ``dimension``.
            Vectors are stored read-only; ``lookup`` hands out copies.
    """

    dimension: int
    entries: dict[str, np.ndarray] = field(repr=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        for token, vec in self.entries.items():
            if not token:
                raise ValueError("empty token in embedding table")
            if vec.shape != (self.dimension,):
                raise ValueError(
                    f"vector for {token!r} has shape {vec.shape}, "
                    f"expected ({self.dimension},)"
                )
            vec.flags.writeable = False

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.entries


def parse_embedding_file(source: Iterable[str]) -> EmbeddingTable:
    """Parse a GloVe-format text stream into an :class:`EmbeddingTable`.

    Format: one record per line, ``<token> <f1> ... <fd>``, whitespace
    separated, no header. The first data line fixes the dimension d.
    Tokens are lowercased; blank lines are skipped.

    Raises:
        EmbeddingParseError: On a vector length differing from d, a
            non-numeric component, a duplicate token, or an empty stream.
    """
    entries: dict[str, np.ndarray] = {}
    dimension: int | None = None
    for line_no, raw in enumerate(source, start=1):
        parts = raw.split()
        if not parts:
            continue
        token = parts[0].lower()
        values = parts[1:]
        if dimension is None:
            if not values:
                raise EmbeddingParseError("record has no vector components", line_no)
            dimension = len(values)
        if len(values) != dimension:
            raise EmbeddingParseError(
                f"dimension mismatch: expected {dimension} components, "
                f"got {len(values)}",
                line_no,
            )
        try:
            vec = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise EmbeddingParseError(f"non-numeric component: {exc}", line_no) from exc
        if token in entries:
            raise EmbeddingParseError(f"duplicate token {token!r}", line_no)
        entries[token] = vec
    if dimension is None:
        raise EmbeddingParseError("empty embedding stream")
    return EmbeddingTable(dimension=dimension, entries=entries)


def load_embedding_file(path: str | Path) -> EmbeddingTable:
    """Parse a GloVe-format file from disk (UTF-8)."""
    with open(path, encoding="utf-8") as handle:
        return parse_embedding_file(handle)


def serialize_table(table: EmbeddingTable) -> str:
    """Render a table back to GloVe text, one line per token, sorted by token.

    Floats are written with ``repr`` so that parsing the output reproduces
    the table bit for bit.
    """
    lines = []
    for token in sorted(table.entries):
        vec = table.entries[token]
        lines.append(token + " " + " ".join(repr(float(v)) for v in vec))
    return "\n".join(lines) + "\n"


def lookup(table: EmbeddingTable, token: str) -> np.ndarray:
    """Return a copy of the vector for ``token`` (lowercased before lookup).

    Raises:
        OutOfVocabularyError: If the token is not in the table.
    """
    key = token.lower()
    vec = table.entries.get(key)
    if vec is None:
        raise OutOfVocabularyError([key])
    return vec.copy()


def tokenize_attribute(attribute_name: str) -> list[str]:
    """Split an attribute name on whitespace and underscores, lowercased.

    ``"Pointy_Nose"`` becomes ``["pointy", "nose"]``.
    """
    return [t for t in _TOKEN_SPLIT.split(attribute_name.lower()) if t]


def attribute_vector(table: EmbeddingTable, attribute_name: str) -> np.ndarray:
    """Map an attribute name to a single vector.

    Multi-word names are averaged component-wise over their token vectors;
    single-token names return the token's vector unchanged.

    Raises:
        ValueError: If the name contains no tokens.
        OutOfVocabularyError: Listing every missing component token.
    """
    tokens = tokenize_attribute(attribute_name)
    if not tokens:
        raise ValueError(f"attribute name {attribute_name!r} has no tokens")
    missing = [t for t in tokens if t not in table.entries]
    if missing:
        raise OutOfVocabularyError(missing, attribute=attribute_name)
    total = table.entries[tokens[0]].copy()
    for token in tokens[1:]:
        total += table.entries[token]
    return total / len(tokens)


def synthetic_table(
    attribute_names: Iterable[str],
    dimension: int,
    seed: int,
    scale: float | None = None,
) -> EmbeddingTable:
    """Build a random embedding table covering every token of the given names.

    Vectors are drawn i.i.d. normal with standard deviation ``scale``
    (default 1/sqrt(dimension), giving roughly unit-norm vectors), in
    sorted token order so the result is deterministic per seed.
    """
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    if scale is None:
        scale = 1.0 / np.sqrt(dimension)
    tokens: set[str] = set()
    for name in attribute_names:
        parts = tokenize_attribute(name)
        if not parts:
            raise ValueError(f"attribute name {name!r} has no tokens")
        tokens.update(parts)
    rng = np.random.default_rng(seed)
    entries = {
        token: rng.normal(0.0, scale, size=dimension) for token in sorted(tokens)
    }
    return EmbeddingTable(dimension=dimension, entries=entries)
