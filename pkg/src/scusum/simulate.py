"""Synthetic fields with a known signal region.

The canonical ground truth is an "L" glyph on the left and an "H" glyph on
the right of a 100x100 grid, strokes 8 pixels wide, 1288 signal pixels in
total.  Other grid sizes scale the glyph layout proportionally; the stroke
width scales too unless fixed explicitly.

Noise is either i.i.d. N(0, 1) or a zero-mean Gaussian random field with
exponential covariance ``exp(-d / r)``, ``d`` the Euclidean distance in
pixels.  The random field is drawn through a dense Cholesky factor, which
limits it to 10_000 cells (the covariance matrix alone is 800 MB at that
size).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from .errors import InvalidArgumentError, UnsupportedSizeError
from .field import SpatialField

__all__ = [
    "GroundTruthMask",
    "SimConfig",
    "lh_mask",
    "gen_iid",
    "gen_expcov",
    "generate",
    "exp_covariance",
    "MAX_EXPCOV_CELLS",
]

MAX_EXPCOV_CELLS = 10_000
STROKE = 8

# glyph layout as fractions of the grid, canonical 100x100 values in comments
_TOP, _BOTTOM = 0.30, 0.70        # rows 30..69
_L_LEFT, _L_RIGHT = 0.10, 0.40    # L stem from col 10, foot to col 39
_H_LEFT, _H_RIGHT = 0.52, 0.87    # H spans cols 52..86


@dataclass(frozen=True, eq=False)
class GroundTruthMask:
    signal: np.ndarray

    @property
    def rows(self) -> int:
        return self.signal.shape[0]

    @property
    def cols(self) -> int:
        return self.signal.shape[1]

    @property
    def count(self) -> int:
        return int(self.signal.sum())


@dataclass(frozen=True)
class SimConfig:
    rows: int = 100
    cols: int = 100
    mu0: float = 0.0
    mu1: float = 1.0
    noise: str = "iid"
    scale: Optional[float] = None
    seed: int = 0
    stroke: Optional[int] = None

    def __post_init__(self):
        if self.noise not in ("iid", "expcov"):
            raise InvalidArgumentError(f"noise must be 'iid' or 'expcov', got {self.noise!r}")
        if self.mu1 < self.mu0:
            raise InvalidArgumentError("signal mean mu1 must be >= background mean mu0")
        if self.noise == "expcov" and not (self.scale is not None and self.scale > 0):
            raise InvalidArgumentError("expcov noise needs a positive scale r")


def lh_mask(rows: int = 100, cols: int = 100, stroke: Optional[int] = None) -> GroundTruthMask:
    """The L/H ground-truth region on a ``rows x cols`` grid.

    Glyph positions scale with the grid.  ``stroke`` is the stroke width in
    pixels; by default it scales too (8 px at 100x100).  At 100x100 the mask
    has exactly 1288 signal pixels.
    """
    if rows < 20 or cols < 20:
        raise InvalidArgumentError(f"grid {rows}x{cols} too small for the L/H mask (min 20x20)")
    if stroke is None:
        stroke = max(1, int(round(STROKE * min(rows, cols) / 100.0)))
    elif stroke < 1:
        raise InvalidArgumentError(f"stroke width must be >= 1, got {stroke}")

    def at(frac: float, n: int) -> int:
        return int(round(frac * n))

    top, bottom = at(_TOP, rows), at(_BOTTOM, rows)
    mid = (top + bottom) // 2
    l0, l1 = at(_L_LEFT, cols), at(_L_RIGHT, cols)
    h0, h1 = at(_H_LEFT, cols), at(_H_RIGHT, cols)
    if bottom - top < 2 * stroke or h1 - h0 < 2 * stroke or l1 - l0 < stroke:
        raise InvalidArgumentError(f"stroke {stroke} too wide for a {rows}x{cols} L/H mask")

    sig = np.zeros((rows, cols), dtype=bool)
    sig[top:bottom, l0:l0 + stroke] = True                          # L stem
    sig[bottom - stroke:bottom, l0:l1] = True                       # L foot
    sig[top:bottom, h0:h0 + stroke] = True                          # H left stem
    sig[top:bottom, h1 - stroke:h1] = True                          # H right stem
    sig[mid - stroke // 2:mid - stroke // 2 + stroke, h0:h1] = True  # H crossbar
    sig.setflags(write=False)
    return GroundTruthMask(sig)


def exp_covariance(distance, r: float):
    return np.exp(-np.asarray(distance, dtype=float) / r)


_FACTOR_LOCK = threading.Lock()


def _expcov_factor(rows: int, cols: int, r: float) -> np.ndarray:
    """Cached lower Cholesky factor; the lock stops concurrent replicates from
    building the same (possibly 800 MB) matrix twice."""
    with _FACTOR_LOCK:
        return _build_factor(rows, cols, r)


@lru_cache(maxsize=3)
def _build_factor(rows: int, cols: int, r: float) -> np.ndarray:
    rr, cc = np.divmod(np.arange(rows * cols), cols)
    d = np.hypot(rr[:, None] - rr[None, :], cc[:, None] - cc[None, :])
    cov = exp_covariance(d, r)
    del d
    try:
        low = scipy.linalg.cholesky(cov, lower=True, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError:
        cov = exp_covariance(np.hypot(rr[:, None] - rr[None, :], cc[:, None] - cc[None, :]), r)
        cov[np.diag_indices_from(cov)] += 1e-10
        low = scipy.linalg.cholesky(cov, lower=True, overwrite_a=True, check_finite=False)
    low.setflags(write=False)
    return low


def _mean_surface(config: SimConfig, mask: GroundTruthMask) -> np.ndarray:
    return config.mu0 + (config.mu1 - config.mu0) * mask.signal


def gen_iid(config: SimConfig) -> Tuple[SpatialField, GroundTruthMask]:
    mask = lh_mask(config.rows, config.cols, config.stroke)
    rng = np.random.default_rng(config.seed)
    eps = rng.standard_normal((config.rows, config.cols))
    return SpatialField(_mean_surface(config, mask) + eps), mask


def gen_expcov(config: SimConfig) -> Tuple[SpatialField, GroundTruthMask]:
    """Field with exponential-covariance Gaussian noise (unit marginal variance).

    Raises
    ------
    UnsupportedSizeError
        If the grid has more than ``MAX_EXPCOV_CELLS`` cells.
    """
    n = config.rows * config.cols
    if n > MAX_EXPCOV_CELLS:
        raise UnsupportedSizeError(
            f"expcov noise supports at most {MAX_EXPCOV_CELLS} cells, got {n}")
    if config.scale is None or config.scale <= 0:
        raise InvalidArgumentError("expcov noise needs a positive scale r")
    mask = lh_mask(config.rows, config.cols, config.stroke)
    low = _expcov_factor(config.rows, config.cols, float(config.scale))
    rng = np.random.default_rng(config.seed)
    eps = (low @ rng.standard_normal(n)).reshape(config.rows, config.cols)
    return SpatialField(_mean_surface(config, mask) + eps), mask


def generate(config: SimConfig) -> Tuple[SpatialField, GroundTruthMask]:
    return gen_iid(config) if config.noise == "iid" else gen_expcov(config)
