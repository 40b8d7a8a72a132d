"""Signal-weight estimation by moving-window CUSUM cut-off.

For every lattice offset the grid is split into blocks.  Each block gives a
randomly sampled representative ``gamma`` and a leave-one-out ("pseudo")
block mean ``mu_tilde`` that is independent of it.  Representatives are
ordered by decreasing pseudo mean, the absolute CUSUM of that sequence is
maximised, and every location in the first ``t`` ordered blocks counts as one
detection.  A location's weight is its detection frequency over all
``m * k**2`` (repeat, offset) runs.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, InvariantViolation
from .field import Block, SpatialField, all_offsets, partition

__all__ = [
    "BlockSummary",
    "OrderedSequence",
    "WeightMap",
    "TheoryInstance",
    "summarize_block",
    "order_summaries",
    "cusum_transform",
    "cutoff_index",
    "signal_weights",
    "neighbor_size",
    "resolve_workers",
    "substream",
]


@dataclass(frozen=True)
class BlockSummary:
    gamma: float
    mu_tilde: float
    block_id: int


@dataclass(frozen=True)
class OrderedSequence:
    entries: tuple

    @property
    def b(self) -> int:
        return len(self.entries)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([e.gamma for e in self.entries], dtype=float)


@dataclass(frozen=True, eq=False)
class WeightMap:
    """Per-location signal weights in ``[0, 1]``.

    ``detections`` holds the integer hit counts; ``weights`` is
    ``detections / (m * k**2)``.
    """

    detections: np.ndarray
    k: int
    m: int

    @property
    def runs(self) -> int:
        return self.m * self.k * self.k

    @property
    def weights(self) -> np.ndarray:
        return self.detections / self.runs

    @property
    def rows(self) -> int:
        return self.detections.shape[0]

    @property
    def cols(self) -> int:
        return self.detections.shape[1]


@dataclass(frozen=True)
class TheoryInstance:
    """Idealised ordered sequence with a single mean shift.

    The first ``l1`` entries carry mean ``delta``, entries ``l1..l2`` ramp
    linearly from ``delta`` down to 0 and the rest have mean 0.  Used to test
    where the CUSUM cut-off lands.
    """

    b: int
    l1: int
    l2: int
    theta: float
    delta: float

    def __post_init__(self):
        if not 0 <= self.l1 <= self.l2 <= self.b:
            raise InvalidArgumentError(f"need 0 <= l1 <= l2 <= b, got {self}")

    @classmethod
    def step(cls, b: int, theta: float, delta: float) -> "TheoryInstance":
        l = int(round(theta * b))
        return cls(b=b, l1=l, l2=l, theta=theta, delta=delta)

    def means(self) -> np.ndarray:
        mu = np.zeros(self.b)
        mu[: self.l1] = self.delta
        if self.l2 > self.l1:
            ramp = np.arange(1, self.l2 - self.l1 + 1) / (self.l2 - self.l1 + 1)
            mu[self.l1: self.l2] = self.delta * (1.0 - ramp)
        return mu

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.means() + rng.standard_normal(self.b)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one task, keyed by integers under ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count: explicit value, else ``SCUSUM_THREADS``; 0 means all cores."""
    if workers is None:
        raw = os.environ.get("SCUSUM_THREADS", "0").strip() or "0"
        try:
            workers = int(raw)
        except ValueError:
            raise InvalidArgumentError(f"SCUSUM_THREADS must be an integer, got {raw!r}")
    if workers < 0:
        raise InvalidArgumentError(f"worker count must be >= 0, got {workers}")
    return workers or (os.cpu_count() or 1)


def summarize_block(field: SpatialField, block: Block, rng: np.random.Generator) -> BlockSummary:
    """Sample a representative and compute the leave-one-out block mean.

    One uniform draw from ``rng`` selects the representative, so summarising
    blocks one by one consumes the stream exactly like the vectorised path in
    :func:`signal_weights`.  A single-member block has no leave-one-out mean;
    its pseudo mean falls back to the representative itself.
    """
    n = block.n_i
    if n < 1:
        raise InvariantViolation(f"block {block.id} is empty")
    values = field.flat[block.members]
    j = min(int(rng.random() * n), n - 1)
    gamma = float(values[j])
    if n == 1:
        return BlockSummary(gamma, gamma, block.id)
    return BlockSummary(gamma, (float(values.sum()) - gamma) / (n - 1), block.id)


def order_summaries(summaries: Sequence[BlockSummary]) -> OrderedSequence:
    """Sort by pseudo mean, descending; ties by ascending block id."""
    return OrderedSequence(tuple(sorted(summaries, key=lambda s: (-s.mu_tilde, s.block_id))))


def cusum_transform(seq) -> np.ndarray:
    """Absolute CUSUM ``|S_r - (r/b) S_b|`` for ``r = 1..b`` via prefix sums."""
    x = np.asarray(seq, dtype=float).ravel()
    if x.size == 0:
        raise InvalidArgumentError("CUSUM of an empty sequence")
    # CUSUM is shift invariant; centring on x[0] makes constant input exactly 0
    s = np.cumsum(x - x[0])
    b = x.size
    out = np.abs(s - (np.arange(1, b + 1) / b) * s[-1])
    out[-1] = 0.0
    return out


def cutoff_index(cusum) -> int:
    """1-based position of the first maximum."""
    return int(np.argmax(np.asarray(cusum))) + 1


def _order_and_cut(gamma: np.ndarray, mu_tilde: np.ndarray) -> np.ndarray:
    # stable sort on the negated key keeps ascending block id among ties
    order = np.argsort(-mu_tilde, kind="stable")
    t = cutoff_index(cusum_transform(gamma[order]))
    return order[:t]


class _OffsetGeometry:
    __slots__ = ("labels", "counts", "order", "starts", "sums", "single")

    def __init__(self, field: SpatialField, k: int, offset):
        p = partition(field, k, offset)
        self.labels = p.labels
        self.counts = p.counts
        self.order = p.order
        self.starts = p.starts
        self.sums = np.bincount(p.labels, weights=field.flat, minlength=p.b)
        self.single = p.counts == 1

    def run(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Detected block ids for one sampled set of representatives."""
        u = rng.random(self.counts.size)
        pick = np.minimum((u * self.counts).astype(np.int64), self.counts - 1)
        gamma = x[self.order[self.starts + pick]]
        denom = np.where(self.single, 1, self.counts - 1)
        mu_tilde = np.where(self.single, gamma, (self.sums - gamma) / denom)
        return _order_and_cut(gamma, mu_tilde)


def signal_weights(field: SpatialField, k: int, m: int = 1, seed: int = 0,
                   workers: Optional[int] = None) -> WeightMap:
    """Detection frequency of every location over ``m`` repeats of all offsets.

    Run ``(repeat, offset_index)`` draws from its own substream of ``seed``,
    so results are bit-identical for any ``workers`` setting.

    Parameters
    ----------
    field : SpatialField
        Observations; high-mean regions are treated as signal.
    k : int
        Neighbor (block side) size.
    m : int
        Number of repeats over the ``k**2`` offsets.
    seed : int
        Root seed.
    workers : int, optional
        Thread count; defaults to ``SCUSUM_THREADS`` (0 or unset: all cores).
    """
    if m < 1:
        raise InvalidArgumentError(f"repeat count must be >= 1, got {m}")
    offsets = all_offsets(k)
    geoms = [_OffsetGeometry(field, k, off) for off in offsets]
    x = field.flat

    def one_repeat(rep: int) -> List[np.ndarray]:
        hits = []
        for oi, g in enumerate(geoms):
            h = np.zeros(g.counts.size, dtype=np.int64)
            h[g.run(x, substream(seed, rep, oi))] = 1
            hits.append(h)
        return hits

    n_workers = min(resolve_workers(workers), m)
    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            per_rep = list(pool.map(one_repeat, range(m)))
    else:
        per_rep = [one_repeat(rep) for rep in range(m)]

    detections = np.zeros(x.size, dtype=np.int64)
    for oi, g in enumerate(geoms):
        block_hits = sum(hits[oi] for hits in per_rep)
        detections += block_hits[g.labels]
    return WeightMap(detections=detections.reshape(field.shape), k=int(k), m=int(m))


def neighbor_size(n: int, c1: float = 1.0, max_k: Optional[int] = None) -> int:
    """Neighbor size balancing block count against block size, ``(c1 n)**(1/4)``.

    The result is rounded and clamped to ``[1, max_k]``; ``max_k`` defaults
    to ``floor(sqrt(n))`` (the side of a square grid with ``n`` cells).
    """
    if n < 1 or c1 <= 0:
        raise InvalidArgumentError(f"need n >= 1 and c1 > 0, got n={n}, c1={c1}")
    if max_k is None:
        max_k = math.isqrt(int(n))
    k = int(round((c1 * n) ** 0.25))
    return max(1, min(k, max_k))
