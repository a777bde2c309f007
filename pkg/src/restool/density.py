"""Gaussian kernel density estimation of score-distribution dynamics.

Three observation modes feed the estimators:

unconditional    x = own score in year t, y = own score in year t + delta;
spatial_static   x = neighbours' average score in year t, y = own score, same t;
spatial_dynamic  x = neighbours' average score in year t, y = own score in t + delta.

The neighbour average is the row-standardized spatial lag, so regions with
an all-zero weight row (islands) are dropped from the spatial modes. Joint
surfaces use a product Gaussian kernel; conditional surfaces divide by the
marginal in x evaluated with the same bandwidth. Kernel sums accumulate in
a fixed order, so results are independent of any parallel schedule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateError
from .indexing import ScoreSeries
from .panel import SpatialWeights

MODES = ("unconditional", "spatial_static", "spatial_dynamic")

_SQRT_2PI = math.sqrt(2.0 * math.pi)

#: Conditional columns whose marginal falls at or below this fraction of the
#: peak are emitted as flagged-empty rather than divided through.
_SUPPORT_EPS = 1e-12


@dataclass
class ObservationPairs:
    """(x, y) observations of one mode, with per-pair provenance."""

    mode: str
    x: np.ndarray
    y: np.ndarray
    delta: int | None = None
    regions: list[str] = field(default_factory=list)
    years: list[int] = field(default_factory=list)

    @property
    def n_obs(self) -> int:
        return int(self.x.size)


@dataclass
class DensityGrid:
    """Evaluated density values over a rectangular grid.

    ``values`` has shape (len(x_grid),) for 1-d output, else
    (len(x_grid), len(y_grid)) with one row per x point; for conditional
    surfaces each supported row integrates to ~1 over y and unsupported
    rows are zeroed and listed in ``empty_columns``.
    """

    mode: str
    kind: str  # "marginal" | "joint" | "conditional"
    x_grid: np.ndarray
    values: np.ndarray
    h_x: float
    n_obs: int
    y_grid: np.ndarray | None = None
    h_y: float | None = None
    delta: int | None = None
    empty_columns: list[int] = field(default_factory=list)


def silverman_bandwidth(samples) -> float:
    """Silverman's rule of thumb: 0.9 * min(sd, IQR/1.34) * N^(-1/5).

    Uses the sample standard deviation (ddof=1); a zero IQR falls back to
    the sd alone so any dispersed sample yields h > 0.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise DegenerateError(f"bandwidth needs >= 2 samples, got {x.size}")
    sd = float(np.std(x, ddof=1))
    if sd <= 0:
        raise DegenerateError("samples have zero dispersion; bandwidth undefined")
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * x.size ** (-0.2)


def default_grid(samples, h: float, points: int = 256, pad: float = 3.0) -> np.ndarray:
    """Evaluation grid spanning [min - pad*h, max + pad*h]."""
    x = np.asarray(samples, dtype=float)
    return np.linspace(x.min() - pad * h, x.max() + pad * h, points)


def _kernel_matrix(samples: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    """(N, m) matrix of standard-normal kernel values phi((X_i - g)/h)."""
    u = (samples[:, None] - grid[None, :]) / h
    return np.exp(-0.5 * u * u) / _SQRT_2PI


def kde_1d(samples, h: float, grid, *, mode: str = "unconditional") -> DensityGrid:
    """Univariate Gaussian KDE: f(g) = (1/(N h)) sum_i phi((X_i - g)/h)."""
    x = np.asarray(samples, dtype=float)
    g = np.asarray(grid, dtype=float)
    if x.size == 0:
        raise DataError("kde_1d: empty sample")
    if h <= 0:
        raise DataError(f"bandwidth must be positive, got {h}")
    if g.size < 2 or np.any(np.diff(g) <= 0):
        raise DataError("grid must be strictly increasing with >= 2 points")
    values = np.add.reduce(_kernel_matrix(x, g, h), axis=0) / (x.size * h)
    return DensityGrid(mode=mode, kind="marginal", x_grid=g, values=values,
                       h_x=h, n_obs=int(x.size))


def kde_2d(pairs: ObservationPairs, h_x: float, h_y: float,
           x_grid, y_grid) -> DensityGrid:
    """Joint density with a product Gaussian kernel on a tensor grid.

    f(gx, gy) = (1/(N h_x h_y)) sum_i phi((X_i - gx)/h_x) phi((Y_i - gy)/h_y).
    """
    if pairs.n_obs == 0:
        raise DataError("kde_2d: empty pair set")
    if h_x <= 0 or h_y <= 0:
        raise DataError("bandwidths must be positive")
    gx = np.asarray(x_grid, dtype=float)
    gy = np.asarray(y_grid, dtype=float)
    kx = _kernel_matrix(np.asarray(pairs.x, dtype=float), gx, h_x)
    ky = _kernel_matrix(np.asarray(pairs.y, dtype=float), gy, h_y)
    # Contraction over observations in fixed order (no BLAS dispatch).
    values = np.einsum("im,in->mn", kx, ky, optimize=False)
    values /= pairs.n_obs * h_x * h_y
    return DensityGrid(mode=pairs.mode, kind="joint", x_grid=gx, y_grid=gy,
                       values=values, h_x=h_x, h_y=h_y, n_obs=pairs.n_obs,
                       delta=pairs.delta)


def conditional_density(pairs: ObservationPairs, h_x: float, h_y: float,
                        x_grid, y_grid) -> DensityGrid:
    """Conditional density g(y|x) = f(x, y) / f(x) on a tensor grid.

    The marginal uses the same h_x as the joint. Rows of the grid where the
    marginal has essentially no support (<= 1e-12 of its peak) are zeroed
    and reported in ``empty_columns`` instead of being divided through.
    """
    joint = kde_2d(pairs, h_x, h_y, x_grid, y_grid)
    marginal = kde_1d(pairs.x, h_x, joint.x_grid).values
    threshold = _SUPPORT_EPS * marginal.max()
    supported = marginal > threshold
    values = np.zeros_like(joint.values)
    values[supported] = joint.values[supported] / marginal[supported, None]
    return DensityGrid(mode=pairs.mode, kind="conditional", x_grid=joint.x_grid,
                       y_grid=joint.y_grid, values=values, h_x=h_x, h_y=h_y,
                       n_obs=pairs.n_obs, delta=pairs.delta,
                       empty_columns=[int(i) for i in np.where(~supported)[0]])


def build_pairs(series: ScoreSeries, weights: SpatialWeights | None, mode: str,
                delta: int = 3) -> ObservationPairs:
    """Assemble the (x, y) observations for one mode.

    Lagged modes need the series to span at least delta + 1 years. Spatial
    modes require weights and drop island regions; the unconditional mode
    pairs every region with itself and ignores the weights.
    """
    if mode not in MODES:
        raise DataError(f"unknown density mode {mode!r}")
    scores = series.scores
    n_years = len(series.years)
    lagged = mode != "spatial_static"
    if lagged and n_years < delta + 1:
        raise DataError(f"{mode} needs a span of >= {delta + 1} years, have {n_years}")

    if mode == "unconditional":
        keep = np.ones(len(series.regions), dtype=bool)
    else:
        if weights is None:
            raise DataError(f"{mode} requires spatial weights")
        if weights.regions != series.regions:
            raise DataError("spatial weights regions do not match the score series")
        keep = weights.matrix.sum(axis=1) > 0
        if not keep.any():
            raise DegenerateError("every region is an island; no spatial pairs")

    if mode == "unconditional":
        x_cols = scores[:, : n_years - delta]
        y_cols = scores[:, delta:]
        base_years = series.years[: n_years - delta]
    elif mode == "spatial_static":
        lag = weights.lag(scores)
        x_cols = lag[keep, :]
        y_cols = scores[keep, :]
        base_years = series.years
    else:  # spatial_dynamic
        lag = weights.lag(scores)
        x_cols = lag[keep, : n_years - delta]
        y_cols = scores[keep, delta:]
        base_years = series.years[: n_years - delta]

    kept_regions = [r for r, ok in zip(series.regions, keep) if ok]
    regions = [r for _ in base_years for r in kept_regions]
    years = [y for y in base_years for _ in kept_regions]
    return ObservationPairs(mode=mode, x=x_cols.T.ravel(), y=y_cols.T.ravel(),
                            delta=delta if lagged else None,
                            regions=regions, years=years)
