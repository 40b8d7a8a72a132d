"""Gridded observations and the moving-window block partition.

Locations are indexed row-major: location ``i`` sits at row ``i // cols``
and column ``i % cols``.  An offset ``(dx, dy)`` shifts the block lattice so
that block boundaries fall on columns ``c`` with ``(c - dx) % k == 0`` and
rows ``r`` with ``(r - dy) % k == 0``.  Blocks cut by the domain edge are kept
as partial blocks, so every location is covered exactly once per offset and
exactly ``k**2`` times over all offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property
from typing import List, NamedTuple

import numpy as np

from .errors import InvalidArgumentError, InvariantViolation

__all__ = [
    "SpatialField",
    "Offset",
    "Block",
    "BlockPartition",
    "partition",
    "all_offsets",
    "block_labels",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpatialField:
    """A ``rows x cols`` grid of finite real observations."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InvalidArgumentError(
                f"field values must be a non-empty 2-D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("field values must be finite (no NaN/Inf)")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_flat(cls, rows: int, cols: int, values) -> "SpatialField":
        flat = np.asarray(values, dtype=float).ravel()
        if flat.size != rows * cols:
            raise InvalidArgumentError(
                f"expected {rows * cols} values for a {rows}x{cols} field, got {flat.size}")
        return cls(flat.reshape(rows, cols))

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def negated(self) -> "SpatialField":
        return SpatialField(-self.values)


class Offset(NamedTuple):
    dx: int
    dy: int


@dataclass(frozen=True, eq=False)
class Block:
    id: int
    members: np.ndarray

    @property
    def n_i(self) -> int:
        return int(self.members.size)


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """One tiling of the grid into (at most) ``k x k`` blocks.

    ``labels[i]`` is the block id of location ``i``; ``counts[j]`` is the
    member count of block ``j``.  ``order`` lists location indices grouped by
    block (ascending block id, ascending location within a block) and
    ``starts[j]`` is where block ``j`` begins in ``order``.
    """

    k: int
    offset: Offset
    rows: int
    cols: int
    labels: np.ndarray
    counts: np.ndarray
    order: np.ndarray = dc_field(repr=False)
    starts: np.ndarray = dc_field(repr=False)

    @property
    def b(self) -> int:
        return int(self.counts.size)

    @property
    def covered(self) -> int:
        return int(self.counts.sum())

    @cached_property
    def blocks(self) -> List[Block]:
        return [
            Block(j, _frozen(self.order[s:s + n]))
            for j, (s, n) in enumerate(zip(self.starts, self.counts))
        ]


def _check_k(k: int, rows: int, cols: int) -> None:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise InvalidArgumentError(f"neighbor size must be an integer, got {k!r}")
    if not 1 <= k <= min(rows, cols):
        raise InvalidArgumentError(
            f"neighbor size k={k} outside [1, {min(rows, cols)}] for a {rows}x{cols} field")


def block_labels(rows: int, cols: int, k: int, offset: Offset) -> np.ndarray:
    """Row-major block id of every location for one lattice offset."""
    dx, dy = offset
    # (c - dx) // k shifted so that the leading partial block (if any) is index 0
    col_idx = (np.arange(cols) + (k - dx) % k) // k
    row_idx = (np.arange(rows) + (k - dy) % k) // k
    n_col_blocks = int(col_idx[-1]) + 1
    return (row_idx[:, None] * n_col_blocks + col_idx[None, :]).ravel()


def partition(field: SpatialField, k: int, offset=(0, 0)) -> BlockPartition:
    """Divide ``field`` into non-overlapping blocks of side ``k``.

    Interior blocks are exactly ``k x k``; blocks clipped by the domain
    boundary are retained as-is.

    Raises
    ------
    InvalidArgumentError
        If ``k`` is outside ``[1, min(rows, cols)]`` or the offset is not in
        ``[0, k)**2``.
    """
    rows, cols = field.shape
    _check_k(k, rows, cols)
    offset = Offset(*(int(v) for v in offset))
    if not (0 <= offset.dx < k and 0 <= offset.dy < k):
        raise InvalidArgumentError(f"offset {tuple(offset)} invalid for k={k}")

    labels = block_labels(rows, cols, k, offset)
    counts = np.bincount(labels)
    order = np.argsort(labels, kind="stable")
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))

    if counts.sum() != rows * cols or np.any(counts < 1):
        raise InvariantViolation("block partition does not tile the grid")
    return BlockPartition(
        k=int(k), offset=offset, rows=rows, cols=cols,
        labels=_frozen(labels), counts=_frozen(counts),
        order=_frozen(order), starts=_frozen(starts),
    )


def all_offsets(k: int) -> List[Offset]:
    """All ``k**2`` lattice shifts, in row-major ``(dx, dy)`` order."""
    if k < 1:
        raise InvalidArgumentError(f"neighbor size must be >= 1, got {k}")
    return [Offset(dx, dy) for dx in range(k) for dy in range(k)]
