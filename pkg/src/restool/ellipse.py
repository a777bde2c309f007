"""Weighted mean centre and standard-deviational ellipse.

Classical one-standard-deviation SDE after Lefever (1926): the azimuth is
measured in degrees clockwise from north and points along the major axis,

    tan(theta) = [(Sxx - Syy) + sqrt((Sxx - Syy)^2 + 4 Sxy^2)] / (2 Sxy)

with weighted central second moments Sxx = sum W x~^2, Syy = sum W y~^2,
Sxy = sum W x~ y~. Semi-axes are the root mean square spreads along and
across the azimuth direction; the area is pi * a * b. All computations run
in projected km (Euclidean plane).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateError
from .indexing import ScoreSeries
from .panel import Centroids

#: Relative threshold below which the cross-axis spread counts as collinear.
_DEGENERATE_RTOL = 1e-9


@dataclass
class EllipseSummary:
    """One ellipse: centre, azimuth, semi-axes (major first), area.

    ``degenerate`` marks collinear inputs (zero minor axis); ``isotropic``
    marks rotationally symmetric inputs whose azimuth is arbitrary and
    reported as 0.
    """

    center_x: float
    center_y: float
    azimuth_deg: float  # clockwise from north, in [0, 180)
    semi_major: float
    semi_minor: float
    area: float
    year: int | None = None
    center_lon: float | None = None
    center_lat: float | None = None
    degenerate: bool = False
    isotropic: bool = False


@dataclass
class CenterShift:
    """Year-over-year movement of the weighted centre plus the azimuth trend."""

    year_from: int
    year_to: int
    distance_km: float
    bearing_deg: float  # compass bearing of the shift, clockwise from north
    azimuth_delta_deg: float  # signed change on the 180-degree azimuth circle
    azimuth_trend: str  # "increase" | "decrease" | "flat"


def weighted_center(xy, weights) -> tuple[float, float]:
    """Weight-averaged centre of gravity of the points."""
    pts = np.asarray(xy, dtype=float)
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise DataError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise DegenerateError("all weights are zero; centre undefined")
    return float(w @ pts[:, 0] / total), float(w @ pts[:, 1] / total)


def sd_ellipse(xy, weights) -> EllipseSummary:
    """Weighted standard-deviational ellipse of >= 3 points.

    Collinear configurations come back flagged ``degenerate`` with a zero
    minor axis; rotationally symmetric ones come back flagged ``isotropic``
    with azimuth 0.
    """
    pts = np.asarray(xy, dtype=float)
    w = np.asarray(weights, dtype=float)
    if pts.shape[0] < 3:
        raise DataError(f"need >= 3 points, got {pts.shape[0]}")
    cx, cy = weighted_center(pts, w)
    total = w.sum()
    dx = pts[:, 0] - cx
    dy = pts[:, 1] - cy

    sxx = float(w @ (dx * dx))
    syy = float(w @ (dy * dy))
    sxy = float(w @ (dx * dy))
    scale = sxx + syy  # rotation-invariant magnitude reference
    if scale <= 0:
        raise DegenerateError("all weighted points coincide; ellipse undefined")

    diff = sxx - syy
    isotropic = abs(diff) <= _DEGENERATE_RTOL * scale and abs(sxy) <= _DEGENERATE_RTOL * scale
    if isotropic:
        theta = 0.0
    elif sxy == 0.0 and diff < 0:
        theta = 0.0  # pure north-south spread
    else:
        theta = math.atan2(diff + math.hypot(diff, 2.0 * sxy), 2.0 * sxy)

    sin_t, cos_t = math.sin(theta), math.cos(theta)
    along = dx * sin_t + dy * cos_t  # projection on the azimuth direction
    across = dx * cos_t - dy * sin_t
    semi_major = math.sqrt(float(w @ (along * along)) / total)
    semi_minor = math.sqrt(float(w @ (across * across)) / total)
    if semi_major < semi_minor:  # guard: the chosen root should already order them
        semi_major, semi_minor = semi_minor, semi_major
        theta = math.fmod(theta + 0.5 * math.pi, math.pi)

    degenerate = semi_minor <= _DEGENERATE_RTOL * semi_major
    if degenerate:
        semi_minor = 0.0  # collinear: report a true zero minor axis
    azimuth = math.degrees(theta) % 180.0
    return EllipseSummary(center_x=cx, center_y=cy, azimuth_deg=azimuth,
                          semi_major=semi_major, semi_minor=semi_minor,
                          area=math.pi * semi_major * semi_minor,
                          degenerate=degenerate, isotropic=isotropic)


def _bearing_deg(dx: float, dy: float) -> float:
    """Compass bearing of a displacement vector, clockwise from north in [0, 360)."""
    return math.degrees(math.atan2(dx, dy)) % 360.0


def ellipse_trajectory(series: ScoreSeries, centroids: Centroids,
                       years: list[int]) -> tuple[list[EllipseSummary], list[CenterShift]]:
    """Per-year ellipses weighted by that year's scores, plus centre-shift steps.

    Scores act as the point weights, so uniformly rescaling a year's scores
    leaves its ellipse unchanged. Shifts are reported between consecutive
    requested years with distance, compass bearing, and the direction of the
    azimuth change.
    """
    if centroids.regions != series.regions:
        raise DataError("centroid regions do not match the score series")
    summaries = []
    for year in years:
        if year not in series.years:
            raise DataError(f"ellipse year {year} not in scored years")
        col = series.years.index(year)
        w = series.scores[:, col]
        if np.any(w < 0):
            raise DegenerateError(f"negative scores in {year}; ellipse weights must be >= 0")
        summary = sd_ellipse(centroids.xy, w)
        summary.year = year
        lonlat = centroids.to_lonlat([[summary.center_x, summary.center_y]])
        if lonlat is not None:
            summary.center_lon = float(lonlat[0, 0])
            summary.center_lat = float(lonlat[0, 1])
        summaries.append(summary)

    shifts = []
    for prev, cur in zip(summaries, summaries[1:]):
        dx = cur.center_x - prev.center_x
        dy = cur.center_y - prev.center_y
        # Azimuth is 180-degree periodic; wrap the change into (-90, 90].
        delta = (cur.azimuth_deg - prev.azimuth_deg + 90.0) % 180.0 - 90.0
        if delta == -90.0:
            delta = 90.0
        trend = "flat" if delta == 0 else ("increase" if delta > 0 else "decrease")
        shifts.append(CenterShift(year_from=prev.year, year_to=cur.year,
                                  distance_km=math.hypot(dx, dy),
                                  bearing_deg=_bearing_deg(dx, dy),
                                  azimuth_delta_deg=delta, azimuth_trend=trend))
    return summaries, shifts
