"""Composite-index construction.

Normalizes the raw panel (per-year/pooled min-max or fixed-base efficacy
coefficients against a base year), derives entropy weights or accepts a
weight file, aggregates to one score per region-year by linear weighting,
and classifies each year's scores into ordered level zones with exact
natural breaks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegenerateError
from .jenks import assign_classes, natural_breaks
from .panel import FILE_WEIGHT_TOL, NEGATIVE, IndicatorPanel, IndicatorSpec

#: Level-zone names for the default five-class split, ordered low -> high.
LEVEL_NAMES = ("low", "lower", "medium", "higher", "high")

#: Tolerance on the sum of computed weights.
COMPUTED_WEIGHT_TOL = 1e-9


@dataclass
class NormalizedPanel:
    """Panel of dimensionless indicator values plus the normalization mode tag.

    Min-max modes keep every value in [0, 1]. Under ``fixed_base`` only the
    base-year cross-section is confined to [0, 1]; later years may exceed 1
    (or drop below 0) because they are scaled against the base-year range.
    """

    regions: list[str]
    years: list[int]
    indicators: list[IndicatorSpec]
    values: np.ndarray  # (R, J, K)
    mode: str  # "minmax_per_year" | "minmax_pooled" | "fixed_base"
    base_year: int | None = None


@dataclass
class WeightVector:
    """Per-indicator weights in indicator order, summing to 1 (entropy) or
    within the file tolerance (printed weights)."""

    indicator_ids: list[str]
    weights: np.ndarray
    source: str  # "entropy" | "file"

    def as_dict(self) -> dict[str, float]:
        return {i: float(w) for i, w in zip(self.indicator_ids, self.weights)}


@dataclass
class ScoreSeries:
    """Composite scores per region-year, optionally with level-zone labels."""

    regions: list[str]
    years: list[int]
    scores: np.ndarray  # (R, K)
    levels: np.ndarray | None = None  # (R, K) object array of label strings


def _require_complete(panel: IndicatorPanel) -> None:
    if panel.n_missing:
        raise DataError(
            f"panel still has {panel.n_missing} missing cells; run fill_missing first"
        )


def _directed(values: np.ndarray, lo: np.ndarray, hi: np.ndarray,
              indicators: list[IndicatorSpec]) -> np.ndarray:
    """Apply the signed range transform per indicator along axis 1."""
    span = hi - lo
    out = (values - lo) / span
    for j, spec in enumerate(indicators):
        if spec.attribute == NEGATIVE:
            out[:, j, ...] = (hi[:, j, ...] - values[:, j, ...]) / span[:, j, ...]
    return out


def normalize_minmax(panel: IndicatorPanel, scope: str = "pooled") -> NormalizedPanel:
    """Min-max normalization; negative-attribute indicators are inverted.

    ``scope="per_year"`` rescales each year's cross-section on its own;
    ``scope="pooled"`` uses one range over all region-years. Output lies in
    [0, 1]. An indicator with zero range within the scope is an error.
    """
    _require_complete(panel)
    if scope not in ("per_year", "pooled"):
        raise DataError(f"minmax scope must be per_year or pooled, got {scope!r}")
    values = panel.values
    if scope == "per_year":
        lo = values.min(axis=0, keepdims=True)  # (1, J, K)
        hi = values.max(axis=0, keepdims=True)
    else:
        lo = values.min(axis=(0, 2), keepdims=True)  # (1, J, 1)
        hi = values.max(axis=(0, 2), keepdims=True)
    flat = (hi - lo) <= 0
    if flat.any():
        bad = sorted({panel.indicators[j].id for j in np.where(flat)[1]})
        raise DegenerateError(f"zero range within scope for indicators {bad}")
    out = _directed(values, lo, hi, panel.indicators)
    return NormalizedPanel(regions=panel.regions, years=panel.years,
                           indicators=panel.indicators, values=out,
                           mode=f"minmax_{scope}")


def normalize_fixed_base(panel: IndicatorPanel, base_year: int) -> NormalizedPanel:
    """Fixed-base efficacy coefficients: every year scaled by the base-year range.

    The base-year cross-section lands in [0, 1]; values in other years are
    unconstrained, so scores comparable across years can exceed 1.
    """
    _require_complete(panel)
    if base_year not in panel.years:
        raise DataError(f"base year {base_year} not in panel years {panel.years}")
    k0 = panel.years.index(base_year)
    base = panel.values[:, :, k0]
    lo = base.min(axis=0)  # (J,)
    hi = base.max(axis=0)
    flat = (hi - lo) <= 0
    if flat.any():
        bad = [panel.indicators[j].id for j in np.where(flat)[0]]
        raise DegenerateError(f"zero base-year range for indicators {bad}")
    out = _directed(panel.values, lo[None, :, None], hi[None, :, None], panel.indicators)
    return NormalizedPanel(regions=panel.regions, years=panel.years,
                           indicators=panel.indicators, values=out,
                           mode="fixed_base", base_year=base_year)


def entropy_weights(norm: NormalizedPanel) -> WeightVector:
    """Entropy weights over the pooled (region, year) rows of each indicator.

    Shares p_ij = s_ij / sum_i s_ij, entropy e_j = -(1/ln n) sum p ln p with
    0 ln 0 := 0, divergence d_j = 1 - e_j, and w_j = d_j / sum d_j. Negative
    normalized values (possible under fixed-base) are clamped to zero for
    the share computation only; an all-constant panel is an error.
    """
    n_ind = len(norm.indicators)
    rows = norm.values.transpose(0, 2, 1).reshape(-1, n_ind)  # (R*K, J)
    shares_src = np.clip(rows, 0.0, None)
    n = rows.shape[0]

    divergence = np.zeros(n_ind)
    for j in range(n_ind):
        col = shares_src[:, j]
        total = col.sum()
        if total <= 0:
            continue  # constant-zero column carries no information
        p = col / total
        plogp = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        entropy = -plogp.sum() / np.log(n)
        divergence[j] = 1.0 - entropy

    total_div = divergence.sum()
    if total_div <= 0:
        raise DegenerateError("all indicators are constant; entropy weights undefined")
    weights = divergence / total_div
    assert abs(weights.sum() - 1.0) <= COMPUTED_WEIGHT_TOL
    return WeightVector(indicator_ids=[s.id for s in norm.indicators],
                        weights=weights, source="entropy")


def load_weights(path, indicators: list[IndicatorSpec]) -> WeightVector:
    """Read a ``{indicator_id: weight}`` JSON file covering every indicator.

    The sum is checked to 1 within +/- 0.005 to accommodate printed
    rounding; weights are used as given, never renormalized.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot parse weights file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise DataError("weights file must be a JSON object {indicator_id: weight}")
    ids = [s.id for s in indicators]
    absent = [i for i in ids if i not in raw]
    if absent:
        raise DataError(f"weights file missing indicators {absent}")
    extra = sorted(set(raw) - set(ids))
    if extra:
        raise DataError(f"weights file has unknown indicators {extra}")
    weights = np.array([float(raw[i]) for i in ids])
    if np.any(weights < 0) or np.any(weights > 1):
        raise DataError("weights must lie in [0, 1]")
    total = float(weights.sum())
    if abs(total - 1.0) > FILE_WEIGHT_TOL:
        raise DataError(f"weights sum to {total:.6f}, outside 1 +/- {FILE_WEIGHT_TOL}")
    return WeightVector(indicator_ids=ids, weights=weights, source="file")


def aggregate_scores(norm: NormalizedPanel, weights: WeightVector) -> ScoreSeries:
    """Linear weighting: score(i, k) = sum_j w_j * s_ijk."""
    if weights.indicator_ids != [s.id for s in norm.indicators]:
        raise DataError("weight vector does not match the panel's indicators")
    scores = np.einsum("rjk,j->rk", norm.values, weights.weights, optimize=False)
    return ScoreSeries(regions=norm.regions, years=norm.years, scores=scores)


def classify_levels(values, k: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Partition one year's scores into k ordered classes by natural breaks.

    Returns (labels, breaks): 0-based class indices per value (0 = lowest
    class) and the k class upper bounds. Requires at least k distinct values.
    """
    breaks = natural_breaks(values, k)
    return assign_classes(values, breaks), breaks


def level_names(k: int) -> list[str]:
    """Ordered label strings for k classes; the five-zone names when k == 5."""
    if k == 5:
        return list(LEVEL_NAMES)
    return [f"level_{i + 1}" for i in range(k)]


def attach_levels(series: ScoreSeries, k: int = 5) -> ScoreSeries:
    """Label every year's cross-section of a score series with level zones."""
    names = level_names(k)
    levels = np.empty(series.scores.shape, dtype=object)
    for col, year in enumerate(series.years):
        labels, _ = classify_levels(series.scores[:, col], k)
        for row, lab in enumerate(labels):
            levels[row, col] = names[lab]
    return ScoreSeries(regions=series.regions, years=series.years,
                       scores=series.scores, levels=levels)
