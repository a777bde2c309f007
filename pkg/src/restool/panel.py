"""Indicator-panel ingestion: loading, validation, gap repair, geometry, spatial weights.

File formats
------------
values CSV     header ``region,year,indicator,value``; UTF-8; empty value = missing.
spec JSON      array of ``{id, name, attribute: "+"|"-", weight?: number}``.
centroids CSV  ``region,lon,lat`` (degrees) or ``region,x_km,y_km`` (pre-projected).
adjacency CSV  ``region_a,region_b`` symmetric contiguity pairs.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import DataError, DegenerateError

POSITIVE = "positive"
NEGATIVE = "negative"
_ATTRIBUTES = {
    "+": POSITIVE,
    "-": NEGATIVE,
    "positive": POSITIVE,
    "negative": NEGATIVE,
}

#: Mean Earth radius used by the built-in equirectangular projection.
EARTH_RADIUS_KM = 6371.0088

#: Tolerance on the sum of weights read from a file (printed rounding).
FILE_WEIGHT_TOL = 0.005


@dataclass(frozen=True)
class IndicatorSpec:
    """One indicator: id, display name, direction of merit, optional fixed weight."""

    id: str
    name: str
    attribute: str  # "positive" | "negative"
    weight: float | None = None


@dataclass
class IndicatorPanel:
    """Dense regions x indicators x years cube with a missing-cell mask.

    ``values[i, j, k]`` is the raw figure for region i, indicator j, year k;
    missing cells hold NaN and are flagged in ``missing``.
    """

    regions: list[str]
    years: list[int]
    indicators: list[IndicatorSpec]
    values: np.ndarray  # (R, J, K) float64
    missing: np.ndarray  # (R, J, K) bool

    @property
    def n_cells(self) -> int:
        return int(self.values.size)

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())

    def indicator_ids(self) -> list[str]:
        return [spec.id for spec in self.indicators]

    def region_index(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.regions)}


def load_indicator_specs(path) -> list[IndicatorSpec]:
    """Parse the indicator spec JSON and validate attributes/weights."""
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse indicator spec {path}: {exc}") from exc
    if not isinstance(raw, list) or not raw:
        raise DataError("indicator spec must be a nonempty JSON array")

    specs = []
    seen = set()
    for entry in raw:
        if not isinstance(entry, dict) or "id" not in entry or "attribute" not in entry:
            raise DataError(f"indicator entry missing id/attribute: {entry!r}")
        ind_id = str(entry["id"])
        if ind_id in seen:
            raise DataError(f"duplicate indicator id {ind_id!r}")
        seen.add(ind_id)
        attr = _ATTRIBUTES.get(str(entry["attribute"]).strip())
        if attr is None:
            raise DataError(
                f"indicator {ind_id!r}: attribute must be '+' or '-', got {entry['attribute']!r}"
            )
        weight = entry.get("weight")
        if weight is not None:
            weight = float(weight)
            if not 0.0 <= weight <= 1.0:
                raise DataError(f"indicator {ind_id!r}: weight {weight} outside [0, 1]")
        specs.append(IndicatorSpec(id=ind_id, name=str(entry.get("name", ind_id)),
                                   attribute=attr, weight=weight))

    weights = [s.weight for s in specs]
    if any(w is not None for w in weights):
        if any(w is None for w in weights):
            raise DataError("either all indicators carry a weight or none does")
        total = sum(weights)
        if abs(total - 1.0) > FILE_WEIGHT_TOL:
            raise DataError(
                f"indicator weights sum to {total:.6f}, outside 1 +/- {FILE_WEIGHT_TOL}"
            )
    return specs


def load_panel(values_file, spec_file) -> IndicatorPanel:
    """Load and validate the long-format values CSV against the indicator spec.

    Errors on duplicate (region, year, indicator) rows, gaps in the year
    sequence, indicators not present in the spec, and unparseable values.
    Cells absent from the file are flagged missing.
    """
    indicators = load_indicator_specs(spec_file)
    try:
        frame = pd.read_csv(values_file, dtype=str, keep_default_na=False)
    except Exception as exc:  # pandas raises several parse error types
        raise DataError(f"cannot parse values CSV {values_file}: {exc}") from exc
    expected = ["region", "year", "indicator", "value"]
    if list(frame.columns) != expected:
        raise DataError(f"values CSV header must be {expected}, got {list(frame.columns)}")
    if frame.empty:
        raise DataError("values CSV has no data rows")

    try:
        years_col = frame["year"].astype(int)
    except ValueError as exc:
        raise DataError(f"non-integer year in values CSV: {exc}") from exc

    years = sorted(set(years_col))
    if years != list(range(years[0], years[-1] + 1)):
        missing_years = sorted(set(range(years[0], years[-1] + 1)) - set(years))
        raise DataError(f"year sequence has gaps at {missing_years}")

    regions = list(dict.fromkeys(frame["region"]))
    ind_ids = [s.id for s in indicators]
    unknown = sorted(set(frame["indicator"]) - set(ind_ids))
    if unknown:
        raise DataError(f"indicators in values but absent from spec: {unknown}")

    r_idx = {r: i for i, r in enumerate(regions)}
    j_idx = {j: i for i, j in enumerate(ind_ids)}
    k_idx = {y: i for i, y in enumerate(years)}

    shape = (len(regions), len(ind_ids), len(years))
    values = np.full(shape, np.nan)
    missing = np.ones(shape, dtype=bool)
    seen = np.zeros(shape, dtype=bool)

    for region, year, indicator, raw in zip(
        frame["region"], years_col, frame["indicator"], frame["value"]
    ):
        cell = (r_idx[region], j_idx[indicator], k_idx[year])
        if seen[cell]:
            raise DataError(f"duplicate cell ({region}, {year}, {indicator})")
        seen[cell] = True
        text = raw.strip()
        if text == "":
            continue
        try:
            val = float(text)
        except ValueError as exc:
            raise DataError(
                f"cell ({region}, {year}, {indicator}): cannot parse value {raw!r}"
            ) from exc
        if not math.isfinite(val):
            raise DataError(f"cell ({region}, {year}, {indicator}): non-finite value {raw!r}")
        values[cell] = val
        missing[cell] = False

    return IndicatorPanel(regions=regions, years=years, indicators=indicators,
                          values=values, missing=missing)


def write_panel(panel: IndicatorPanel, path) -> None:
    """Write a panel back to the long CSV format (missing cells as empty values)."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("region,year,indicator,value\n")
        for i, region in enumerate(panel.regions):
            for k, year in enumerate(panel.years):
                for j, spec in enumerate(panel.indicators):
                    if panel.missing[i, j, k]:
                        text = ""
                    else:
                        text = repr(float(panel.values[i, j, k]))
                    handle.write(f"{region},{year},{spec.id},{text}\n")


def _fill_series(values: np.ndarray, observed: np.ndarray, years: np.ndarray) -> np.ndarray:
    """Fill one (region, indicator) series.

    Interior gaps: linear interpolation between the nearest observed years.
    Leading/trailing gaps: extrapolation by the compound average annual
    growth rate between the first and last observed values; if either
    endpoint is nonpositive the compound rate is undefined and the average
    annual increment is used instead.
    """
    obs_years = years[observed]
    obs_vals = values[observed]
    out = values.copy()
    out[~observed] = np.interp(years[~observed], obs_years, obs_vals)

    first_y, last_y = obs_years[0], obs_years[-1]
    first_v, last_v = obs_vals[0], obs_vals[-1]
    span = last_y - first_y
    use_compound = first_v > 0 and last_v > 0 and span > 0
    growth = (last_v / first_v) ** (1.0 / span) if use_compound else 0.0
    slope = (last_v - first_v) / span if span > 0 else 0.0

    lead = ~observed & (years < first_y)
    trail = ~observed & (years > last_y)
    if use_compound:
        out[lead] = first_v * growth ** (years[lead] - first_y)
        out[trail] = last_v * growth ** (years[trail] - last_y)
    else:
        out[lead] = first_v + slope * (years[lead] - first_y)
        out[trail] = last_v + slope * (years[trail] - last_y)
    return out


def fill_missing(panel: IndicatorPanel) -> IndicatorPanel:
    """Return a copy of the panel with every missing cell imputed.

    Observed cells are untouched (bit-identical). Every (region, indicator)
    series with gaps needs at least two observed values. Idempotent.
    """
    if panel.n_missing == 0:
        return replace(panel, values=panel.values.copy(), missing=panel.missing.copy())

    years = np.asarray(panel.years)
    values = panel.values.copy()
    for i, region in enumerate(panel.regions):
        for j, spec in enumerate(panel.indicators):
            observed = ~panel.missing[i, j, :]
            if observed.all():
                continue
            if observed.sum() < 2:
                raise DataError(
                    f"series ({region}, {spec.id}) has {int(observed.sum())} observed "
                    "values; need >= 2 to infer growth"
                )
            values[i, j, :] = _fill_series(panel.values[i, j, :], observed, years)

    return IndicatorPanel(regions=panel.regions, years=panel.years,
                          indicators=panel.indicators, values=values,
                          missing=np.zeros_like(panel.missing))


@dataclass
class Centroids:
    """Per-region point geometry in projected km, optionally with lon/lat degrees.

    When built from lon/lat the equirectangular projection parameters are
    kept so ellipse centers can be reported back in degrees.
    """

    regions: list[str]
    xy: np.ndarray  # (R, 2) projected km
    lonlat: np.ndarray | None = None  # (R, 2) degrees, if known
    ref_lon: float | None = None
    ref_lat: float | None = None

    def to_lonlat(self, xy: np.ndarray) -> np.ndarray | None:
        """Back-project points from km to degrees; None without projection info."""
        if self.ref_lon is None or self.ref_lat is None:
            return None
        xy = np.atleast_2d(np.asarray(xy, dtype=float))
        lon = self.ref_lon + np.degrees(xy[:, 0] / (EARTH_RADIUS_KM * math.cos(math.radians(self.ref_lat))))
        lat = self.ref_lat + np.degrees(xy[:, 1] / EARTH_RADIUS_KM)
        return np.column_stack([lon, lat])


def load_centroids(path, regions: list[str]) -> Centroids:
    """Read region centroids and project lon/lat input to km.

    The projection is equirectangular about the mean centroid, so the
    downstream ellipse math runs in Euclidean km.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except Exception as exc:
        raise DataError(f"cannot parse centroids CSV {path}: {exc}") from exc
    cols = list(frame.columns)
    if cols == ["region", "lon", "lat"]:
        projected = False
    elif cols == ["region", "x_km", "y_km"]:
        projected = True
    else:
        raise DataError(
            "centroids CSV header must be region,lon,lat or region,x_km,y_km; "
            f"got {cols}"
        )

    table = {}
    for _, row in frame.iterrows():
        region = row["region"]
        if region in table:
            raise DataError(f"duplicate centroid for region {region!r}")
        try:
            a, b = float(row[cols[1]]), float(row[cols[2]])
        except ValueError as exc:
            raise DataError(f"centroid for {region!r}: {exc}") from exc
        table[region] = (a, b)

    absent = [r for r in regions if r not in table]
    if absent:
        raise DataError(f"centroids missing for regions {absent}")
    coords = np.array([table[r] for r in regions], dtype=float)

    if projected:
        return Centroids(regions=list(regions), xy=coords)

    lon, lat = coords[:, 0], coords[:, 1]
    if np.any(np.abs(lon) > 180) or np.any(np.abs(lat) > 90):
        raise DataError("centroid lon/lat outside [-180,180] x [-90,90]")
    ref_lon = float(lon.mean())
    ref_lat = float(lat.mean())
    x = EARTH_RADIUS_KM * math.cos(math.radians(ref_lat)) * np.radians(lon - ref_lon)
    y = EARTH_RADIUS_KM * np.radians(lat - ref_lat)
    return Centroids(regions=list(regions), xy=np.column_stack([x, y]),
                     lonlat=coords, ref_lon=ref_lon, ref_lat=ref_lat)


@dataclass
class SpatialWeights:
    """Row-standardized spatial weights with zero diagonal.

    Rows of regions without neighbors (islands) are all-zero and listed in
    ``islands``.
    """

    regions: list[str]
    matrix: np.ndarray  # (R, R)
    islands: list[str] = field(default_factory=list)

    def lag(self, values: np.ndarray) -> np.ndarray:
        """Row-standardized spatial lag of a per-region vector (or (R, K) array)."""
        return self.matrix @ np.asarray(values, dtype=float)


def build_spatial_weights(adjacency_file, regions: list[str]) -> SpatialWeights:
    """Binary contiguity weights from a pair list, symmetrized and row-standardized."""
    try:
        frame = pd.read_csv(adjacency_file, dtype=str, keep_default_na=False)
    except Exception as exc:
        raise DataError(f"cannot parse adjacency CSV {adjacency_file}: {exc}") from exc
    if list(frame.columns) != ["region_a", "region_b"]:
        raise DataError(
            f"adjacency CSV header must be region_a,region_b, got {list(frame.columns)}"
        )

    index = {r: i for i, r in enumerate(regions)}
    n = len(regions)
    adj = np.zeros((n, n))
    for a, b in zip(frame["region_a"], frame["region_b"]):
        if a not in index or b not in index:
            missing = a if a not in index else b
            raise DataError(f"adjacency pair references unknown region {missing!r}")
        if a == b:
            raise DataError(f"self-pair for region {a!r}")
        adj[index[a], index[b]] = 1.0
        adj[index[b], index[a]] = 1.0

    degree = adj.sum(axis=1)
    islands = [regions[i] for i in range(n) if degree[i] == 0]
    matrix = np.zeros_like(adj)
    nonzero = degree > 0
    matrix[nonzero] = adj[nonzero] / degree[nonzero, None]
    return SpatialWeights(regions=list(regions), matrix=matrix, islands=islands)


def build_knn_weights(centroids: Centroids, k: int = 4) -> SpatialWeights:
    """k-nearest-neighbour weights on projected coordinates, row-standardized.

    Distance ties break by region order; the matrix is generally asymmetric,
    which is fine for lag construction.
    """
    n = len(centroids.regions)
    if not 1 <= k < n:
        raise DataError(f"k-nearest k={k} must be in [1, {n - 1}]")
    diff = centroids.xy[:, None, :] - centroids.xy[None, :, :]
    dist = np.hypot(diff[..., 0], diff[..., 1])
    np.fill_diagonal(dist, np.inf)
    matrix = np.zeros((n, n))
    for i in range(n):
        order = np.lexsort((np.arange(n), dist[i]))
        matrix[i, order[:k]] = 1.0 / k
    return SpatialWeights(regions=list(centroids.regions), matrix=matrix, islands=[])
