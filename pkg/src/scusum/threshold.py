"""Weight-density decomposition and mFDR threshold selection.

The weight density ``f`` on ``[0, 1]`` is estimated with a reflection
boundary Gaussian KDE.  A null part is carved out of it by keeping ``f`` up
to the valley ``t*`` and replacing it by a straight line from ``(t*, f(t*))``
to ``(1, 0)`` beyond; the threshold ``c`` is the point past the valley from
which the estimated false discovery ratio stays at or below ``alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace
from typing import Optional

import numpy as np

from .core import WeightMap, signal_weights
from .errors import DegenerateSampleError, InvalidArgumentError, StateError
from .field import SpatialField

__all__ = [
    "DensityModel",
    "ThresholdDecision",
    "DetectionResult",
    "silverman_bandwidth",
    "estimate_density",
    "find_valley",
    "null_interpolate",
    "mfdr_curve",
    "pick_threshold",
    "detect",
    "detect_from_weights",
]

DEFAULT_GRID_SIZE = 512
MIN_BANDWIDTH = 0.01
_TINY = 1e-12


@dataclass(frozen=True, eq=False)
class DensityModel:
    grid: np.ndarray
    f: np.ndarray
    bandwidth: float
    f_h0: Optional[np.ndarray] = None
    valley: Optional[float] = None

    @property
    def f_h1(self) -> Optional[np.ndarray]:
        if self.f_h0 is None:
            return None
        return self.f - self.f_h0


@dataclass(frozen=True, eq=False)
class ThresholdDecision:
    alpha: float
    c: Optional[float]
    mfdr_curve: np.ndarray
    rule: str = "tail"


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Binary detection mask with the quantities that produced it."""

    mask: np.ndarray
    alpha: float
    threshold: Optional[float] = None
    weights: Optional[WeightMap] = None
    density: Optional[DensityModel] = None
    decision: Optional[ThresholdDecision] = None
    reason: Optional[str] = None
    method: str = "scusum"
    diagnostics: dict = dc_field(default_factory=dict)

    @property
    def n_detected(self) -> int:
        return int(self.mask.sum())


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if spread <= 0:
        spread = sd
    return 0.9 * spread * x.size ** (-0.2)


def estimate_density(weights, grid_size: int = DEFAULT_GRID_SIZE,
                     bandwidth: Optional[float] = None) -> DensityModel:
    """Reflection-corrected Gaussian KDE of the weights on ``[0, 1]``.

    The sample is mirrored about 0 and 1, the kernel estimate of the tripled
    sample is restricted to the unit interval and renormalised to integrate
    to one (trapezoid rule).  The bandwidth defaults to Silverman's rule on
    the raw weights, floored at 0.01.

    Raises
    ------
    DegenerateSampleError
        If all weights are identical.
    """
    w = weights.weights if isinstance(weights, WeightMap) else weights
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 0:
        raise InvalidArgumentError("no weights to estimate a density from")
    if np.ptp(w) == 0:
        raise DegenerateSampleError("all weights are identical; no density structure")
    if grid_size < 2:
        raise InvalidArgumentError(f"grid_size must be >= 2, got {grid_size}")
    h = max(silverman_bandwidth(w), MIN_BANDWIDTH) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {h}")

    # weights are quantised, so kernels are summed per distinct value
    vals, cnt = np.unique(w, return_counts=True)
    centres = np.concatenate([vals, -vals, 2.0 - vals])
    mass = np.tile(cnt, 3).astype(float)
    grid = np.linspace(0.0, 1.0, grid_size)
    z = (grid[:, None] - centres[None, :]) / h
    f = (np.exp(-0.5 * z * z) @ mass) / (w.size * h * np.sqrt(2 * np.pi))
    f /= np.trapezoid(f, grid)
    return DensityModel(grid=grid, f=f, bandwidth=h)


def _local_maxima(f: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima, endpoints included (plateaus count once)."""
    n = f.size
    idx = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and f[j + 1] == f[i]:
            j += 1
        left_ok = i == 0 or f[i - 1] < f[i]
        right_ok = j == n - 1 or f[j + 1] < f[j]
        if left_ok and right_ok and not (i == 0 and j == n - 1):
            idx.append((i + j) // 2)
        i = j + 1
    return np.array(idx, dtype=int)


def find_valley(model: DensityModel, margin: float = 0.1) -> Optional[float]:
    """Grid point in ``[margin, 1 - margin]`` minimising ``f``.

    Returns ``None`` unless ``f`` has a local maximum strictly to the left and
    strictly to the right of that point.
    """
    grid, f = model.grid, model.f
    inside = np.flatnonzero((grid >= margin) & (grid <= 1.0 - margin))
    if inside.size == 0:
        return None
    i = inside[np.argmin(f[inside])]
    peaks = _local_maxima(f)
    if np.any(peaks < i) and np.any(peaks > i):
        return float(grid[i])
    return None


def null_interpolate(model: DensityModel, t_star: float) -> DensityModel:
    """Attach the null density: ``f`` up to ``t_star``, then linear to 0 at 1.

    ``f(t_star)`` is taken from the grid, interpolating linearly between grid
    points when ``t_star`` is off-grid.
    """
    if not 0.0 < t_star < 1.0:
        raise InvalidArgumentError(f"valley must lie in (0, 1), got {t_star}")
    grid, f = model.grid, model.f
    f_t = float(np.interp(t_star, grid, f))
    f_h0 = np.where(grid <= t_star, f, f_t * (1.0 - (grid - t_star) / (1.0 - t_star)))
    return replace(model, f_h0=f_h0, valley=float(t_star))


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.empty_like(den)
    small = den < _TINY
    out[~small] = num[~small] / den[~small]
    out[small] = np.where(num[small] < _TINY, 0.0, np.inf)
    return out


def _upper_tail(grid: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Trapezoid integral of ``y`` from each grid point up to the last one."""
    panels = np.diff(grid) * 0.5 * (y[1:] + y[:-1])
    return np.append(np.cumsum(panels[::-1])[::-1], 0.0)


def mfdr_curve(model: DensityModel, rule: str = "tail") -> np.ndarray:
    """False-discovery ratio of rejecting every weight above each grid point.

    ``rule="tail"`` gives the marginal FDR of the rejection set
    ``{w > x}``, ``int_x^1 f_h0 / int_x^1 f`` (trapezoid rule); at ``x = 1``
    it takes its limit ``f_h0(1) / f(1)``.  ``rule="local"`` gives the
    pointwise ratio ``f_h0(x) / f(x)``.
    """
    if model.f_h0 is None:
        raise StateError("density model has no null interpolation")
    if rule == "local":
        return _ratio(model.f_h0, model.f)
    if rule != "tail":
        raise InvalidArgumentError(f"unknown threshold rule {rule!r}")
    out = _ratio(_upper_tail(model.grid, model.f_h0), _upper_tail(model.grid, model.f))
    out[-1] = _ratio(model.f_h0[-1:], model.f[-1:])[0]
    return out


def pick_threshold(model: DensityModel, alpha: float, rule: str = "tail") -> ThresholdDecision:
    """Smallest grid point past the valley from which the FDR ratio stays at
    or below ``alpha`` for every larger grid point.

    The suffix criterion keeps the ratio controlled for every weight above
    ``c`` even when the curve is not monotone.  See :func:`mfdr_curve` for
    the two ratio rules.
    """
    if model.f_h0 is None or model.valley is None:
        raise StateError("density model has no null interpolation")
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    ratio = mfdr_curve(model, rule)
    ok = ratio <= alpha
    # suffix_ok[i]: ok at every grid index >= i
    suffix_ok = np.flip(np.logical_and.accumulate(np.flip(ok)))
    candidates = np.flatnonzero(suffix_ok & (model.grid > model.valley))
    c = float(model.grid[candidates[0]]) if candidates.size else None
    return ThresholdDecision(alpha=float(alpha), c=c, mfdr_curve=ratio, rule=rule)


def detect_from_weights(weights: WeightMap, alpha: float = 0.05, margin: float = 0.1,
                        grid_size: int = DEFAULT_GRID_SIZE,
                        bandwidth: Optional[float] = None, rule: str = "tail") -> DetectionResult:
    """Threshold a weight map; an empty mask carries the reason in ``reason``."""
    if not 0.0 < alpha < 1.0:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    empty = np.zeros(weights.detections.shape, dtype=bool)
    try:
        model = estimate_density(weights, grid_size=grid_size, bandwidth=bandwidth)
    except DegenerateSampleError as exc:
        return DetectionResult(empty, alpha, weights=weights, reason=f"degenerate density: {exc}")
    t_star = find_valley(model, margin=margin)
    if t_star is None:
        return DetectionResult(empty, alpha, weights=weights, density=model,
                               reason="no valley between two density peaks")
    model = null_interpolate(model, t_star)
    decision = pick_threshold(model, alpha, rule=rule)
    if decision.c is None:
        return DetectionResult(empty, alpha, weights=weights, density=model,
                               decision=decision,
                               reason="no threshold meets the mFDR level")
    mask = weights.weights > decision.c
    return DetectionResult(mask, alpha, threshold=decision.c, weights=weights,
                           density=model, decision=decision)


def detect(field: SpatialField, k: int, m: int = 10, alpha: float = 0.05, seed: int = 0,
           negate: bool = False, workers: Optional[int] = None, **kwargs) -> DetectionResult:
    """Full SCUSUM pipeline: signal weights, density, valley, null fit, threshold.

    ``negate=True`` flips the sign of the field to detect low-mean regions.
    Extra keyword arguments go to :func:`detect_from_weights`.
    """
    if negate:
        field = field.negated()
    weights = signal_weights(field, k, m, seed=seed, workers=workers)
    result = detect_from_weights(weights, alpha=alpha, **kwargs)
    result.diagnostics.update(k=int(k), m=int(m), seed=int(seed), negate=bool(negate))
    return result
