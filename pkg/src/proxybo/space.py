"""Discrete cell-style search spaces.

An architecture is a fixed-length vector of categorical choices, one per edge
of a cell. Every encoding also has a mixed-radix integer index (first edge most
significant), so lexicographic order and index order coincide. The index form
is what the search loops use internally.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .exceptions import InvalidSpaceError, SpaceTooLargeError

ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class SearchSpaceSpec:
    """A space of ``ops_per_edge ** edge_count`` categorical encodings."""

    edge_count: int
    ops_per_edge: int
    name: str = "cell"

    def __post_init__(self):
        if int(self.edge_count) != self.edge_count or self.edge_count < 1:
            raise InvalidSpaceError(f"edge_count must be a positive integer, got {self.edge_count!r}")
        if int(self.ops_per_edge) != self.ops_per_edge or self.ops_per_edge < 2:
            raise InvalidSpaceError(
                f"ops_per_edge must be an integer >= 2 for a mutable space, got {self.ops_per_edge!r}"
            )

    @property
    def size(self) -> int:
        return self.ops_per_edge**self.edge_count

    @property
    def radix(self) -> np.ndarray:
        """Place values of each edge in the mixed-radix index."""
        return self.ops_per_edge ** np.arange(self.edge_count - 1, -1, -1, dtype=np.int64)

    def validate(self, x: Sequence[int]) -> ArchEncoding:
        values = tuple(int(v) for v in x)
        if len(values) != self.edge_count:
            raise InvalidSpaceError(f"encoding has {len(values)} entries, space expects {self.edge_count}")
        for i, v in enumerate(values):
            if not 0 <= v < self.ops_per_edge:
                raise InvalidSpaceError(f"entry {i} = {v} outside [0, {self.ops_per_edge})")
        return ArchEncoding(values)

    def contains(self, x: Sequence[int]) -> bool:
        try:
            self.validate(x)
        except InvalidSpaceError:
            return False
        return True


class ArchEncoding(tuple):
    """Immutable categorical vector. Text form is ``"3,0,4,1,1,2"``."""

    __slots__ = ()

    def __new__(cls, values=()):
        return super().__new__(cls, (int(v) for v in values))

    def __str__(self):
        return ",".join(str(v) for v in self)

    def __repr__(self):
        return f"ArchEncoding({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> ArchEncoding:
        text = text.strip()
        if not text:
            raise InvalidSpaceError("empty encoding text")
        try:
            return cls(int(tok) for tok in text.split(","))
        except ValueError as exc:
            raise InvalidSpaceError(f"malformed encoding {text!r}") from exc


def serialize(x: Sequence[int]) -> str:
    return ",".join(str(int(v)) for v in x)


def deserialize(text: str, spec: SearchSpaceSpec | None = None) -> ArchEncoding:
    x = ArchEncoding.parse(text)
    return spec.validate(x) if spec is not None else x


def to_index(spec: SearchSpaceSpec, X) -> np.ndarray | int:
    """Mixed-radix index of one encoding (returns int) or of rows of a matrix."""
    arr = np.asarray(X, dtype=np.int64)
    if arr.ndim == 1:
        return int(arr @ spec.radix)
    return arr @ spec.radix


def from_index(spec: SearchSpaceSpec, idx) -> np.ndarray:
    """Inverse of :func:`to_index`; a scalar gives a vector, an array gives rows."""
    idx = np.asarray(idx, dtype=np.int64)
    return (idx[..., None] // spec.radix) % spec.ops_per_edge


def sample_uniform(spec: SearchSpaceSpec, rng: np.random.Generator) -> ArchEncoding:
    """Draw each edge independently and uniformly."""
    return ArchEncoding(rng.integers(0, spec.ops_per_edge, size=spec.edge_count))


def mutate_one_edge(x: Sequence[int], spec: SearchSpaceSpec, rng: np.random.Generator) -> ArchEncoding:
    """Change exactly one edge to a different operation, uniformly over all neighbours."""
    if spec.ops_per_edge < 2:
        raise InvalidSpaceError("no legal mutation when ops_per_edge < 2")
    x = spec.validate(x)
    values = list(x)
    edge = int(rng.integers(spec.edge_count))
    shift = int(rng.integers(1, spec.ops_per_edge))
    values[edge] = (values[edge] + shift) % spec.ops_per_edge
    return ArchEncoding(values)


def mutate_rows(X: np.ndarray, spec: SearchSpaceSpec, rng: np.random.Generator) -> np.ndarray:
    """Vectorised :func:`mutate_one_edge` over the rows of ``X``."""
    X = np.array(X, dtype=np.int64, copy=True)
    n = X.shape[0]
    edges = rng.integers(spec.edge_count, size=n)
    shifts = rng.integers(1, spec.ops_per_edge, size=n)
    rows = np.arange(n)
    X[rows, edges] = (X[rows, edges] + shifts) % spec.ops_per_edge
    return X


def neighbours(x: Sequence[int], spec: SearchSpaceSpec) -> list[ArchEncoding]:
    """All encodings at Hamming distance one from ``x``."""
    x = spec.validate(x)
    out = []
    for edge in range(spec.edge_count):
        for op in range(spec.ops_per_edge):
            if op != x[edge]:
                out.append(ArchEncoding(x[:edge] + (op,) + x[edge + 1 :]))
    return out


def enumerate_space(spec: SearchSpaceSpec, cap: int = ENUMERATION_CAP) -> Iterator[ArchEncoding]:
    """Yield every encoding once, in lexicographic order.

    Raises
    ------
    SpaceTooLargeError
        If the space holds more than ``cap`` encodings.
    """
    if spec.size > cap:
        raise SpaceTooLargeError(spec.size, cap)
    for idx in range(spec.size):
        yield ArchEncoding(from_index(spec, idx))


def all_rows(spec: SearchSpaceSpec, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """The whole space as an integer matrix, row ``i`` having index ``i``."""
    if spec.size > cap:
        raise SpaceTooLargeError(spec.size, cap)
    return from_index(spec, np.arange(spec.size, dtype=np.int64))
