"""Per-pixel FDR baselines: Benjamini-Hochberg and an FDR_L-style variant.

Both work on one-sided p-values ``p(s) = 1 - Phi(x(s))`` from a standard
normal test at every pixel.  The FDR_L-style detector first replaces each
p-value by the median over its ``(2h+1) x (2h+1)`` neighbourhood (clipped at
the grid edge) and then runs the BH step-up on the aggregated values.  It
approximates, and does not reproduce, the original FDR_L procedure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import ndtr

from .errors import InvalidArgumentError
from .field import SpatialField
from .threshold import DetectionResult

__all__ = ["PValueField", "to_pvalues", "bh_fdr", "bh_reject", "window_median", "fdr_l"]


@dataclass(frozen=True, eq=False)
class PValueField:
    pvalues: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pvalues, dtype=float)
        if p.ndim != 2:
            raise InvalidArgumentError(f"p-values must form a 2-D grid, got shape {p.shape}")
        if np.any(~(p >= 0) | ~(p <= 1)):
            raise InvalidArgumentError("p-values must lie in [0, 1]")
        object.__setattr__(self, "pvalues", p)

    @property
    def rows(self) -> int:
        return self.pvalues.shape[0]

    @property
    def cols(self) -> int:
        return self.pvalues.shape[1]


def to_pvalues(field: SpatialField) -> PValueField:
    """Upper-tail normal p-values; the field is assumed to hold z-scores."""
    # ndtr(-x) avoids the cancellation in 1 - ndtr(x) for large x
    return PValueField(ndtr(-field.values))


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")


def bh_reject(p: np.ndarray, alpha: float) -> np.ndarray:
    """Boolean rejections of the BH step-up procedure, same shape as ``p``."""
    _check_alpha(alpha)
    flat = np.asarray(p, dtype=float).ravel()
    n = flat.size
    reject = np.zeros(n, dtype=bool)
    if n == 0:
        return reject.reshape(np.shape(p))
    order = np.argsort(flat, kind="stable")
    below = flat[order] <= alpha * np.arange(1, n + 1) / n
    if below.any():
        j = np.flatnonzero(below)[-1]
        reject = flat <= flat[order[j]]
    return reject.reshape(np.shape(p))


def bh_fdr(p: PValueField, alpha: float = 0.05) -> DetectionResult:
    mask = bh_reject(p.pvalues, alpha)
    cut = float(p.pvalues[mask].max()) if mask.any() else None
    return DetectionResult(mask=mask, alpha=float(alpha), threshold=cut, method="bh",
                           reason=None if mask.any() else "no p-value passes the step-up bound")


def window_median(p: np.ndarray, h: int) -> np.ndarray:
    """Median over the ``(2h+1)**2`` window around each cell, clipped at the edges."""
    p = np.asarray(p, dtype=float)
    if h < 0:
        raise InvalidArgumentError(f"neighbourhood half-width must be >= 0, got {h}")
    if h == 0:
        return p.copy()
    padded = np.pad(p, h, mode="constant", constant_values=np.nan)
    windows = sliding_window_view(padded, (2 * h + 1, 2 * h + 1))
    return np.nanmedian(windows.reshape(p.shape + (-1,)), axis=-1)


def fdr_l(p: PValueField, alpha: float = 0.05, neighborhood: int = 1) -> DetectionResult:
    """FDR_L-style detection: neighbourhood-median p-values, then BH."""
    agg = window_median(p.pvalues, neighborhood)
    mask = bh_reject(agg, alpha)
    cut = float(agg[mask].max()) if mask.any() else None
    return DetectionResult(mask=mask, alpha=float(alpha), threshold=cut, method="fdr_l",
                           reason=None if mask.any() else "no aggregated p-value passes the step-up bound",
                           diagnostics={"neighborhood": int(neighborhood)})
