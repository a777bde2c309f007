"""Pipeline stages wiring the modules together over file-based inputs/outputs.

Stage outputs land under ``<output_dir>/<stage>/``; floats are serialized
with ``repr`` (shortest exact round-trip), so re-running a stage with the
same config and seed reproduces its files byte for byte. Downstream stages
consume the ``index`` stage's scores file rather than recomputing it.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .config import PipelineConfig, config_hash
from .density import build_pairs, conditional_density, default_grid, kde_1d, kde_2d, silverman_bandwidth
from .detector import discretize_optimal, interaction, significance
from .ellipse import ellipse_trajectory
from .errors import ConfigError, DataError
from .indexing import (ScoreSeries, aggregate_scores, attach_levels, entropy_weights,
                       load_weights, normalize_fixed_base, normalize_minmax)
from .panel import (IndicatorPanel, build_knn_weights, build_spatial_weights,
                    fill_missing, load_centroids, load_panel)

STAGES = ("validate", "index", "classify", "ellipse", "density", "detect")


@dataclass
class RunManifest:
    """Record of one pipeline invocation."""

    config_hash: str
    version: str
    stages: dict = field(default_factory=dict)

    def record(self, stage: str, outputs: list[Path], seconds: float, outdir: Path) -> None:
        self.stages[stage] = {
            "outputs": sorted(str(p.relative_to(outdir)) for p in outputs),
            "seconds": seconds,
        }

    def write(self, outdir: Path) -> Path:
        path = outdir / "manifest.json"
        payload = {"config_hash": self.config_hash, "version": self.version,
                   "stages": self.stages}
        path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                        encoding="utf-8")
        return path


def _fmt(x) -> str:
    return repr(float(x))


def _load_inputs(config: PipelineConfig):
    panel = load_panel(config.resolve("values"), config.resolve("spec"))
    filled = fill_missing(panel)
    centroids = load_centroids(config.resolve("centroids"), panel.regions)
    contiguity = build_spatial_weights(config.resolve("adjacency"), panel.regions)
    return panel, filled, centroids, contiguity


def _normalize(config: PipelineConfig, filled: IndicatorPanel):
    norm_cfg = config.normalization
    if norm_cfg.mode == "fixed_base":
        if norm_cfg.base_year not in filled.years:
            raise ConfigError(
                f"normalization.base_year {norm_cfg.base_year} outside panel years "
                f"{filled.years[0]}..{filled.years[-1]}",
                field="normalization.base_year")
        return normalize_fixed_base(filled, norm_cfg.base_year)
    return normalize_minmax(filled, norm_cfg.scope)


def _write_scores(series: ScoreSeries, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["region", "year", "score", "level"])
        for i, region in enumerate(series.regions):
            for k, year in enumerate(series.years):
                level = "" if series.levels is None else series.levels[i, k]
                writer.writerow([region, year, _fmt(series.scores[i, k]), level])


def read_scores(path) -> ScoreSeries:
    """Read a scores CSV back into a ScoreSeries (levels kept when present)."""
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read scores from {path} (run the index stage "
                        f"first): {exc}") from exc
    if not rows or rows[0] != ["region", "year", "score", "level"]:
        raise DataError(f"{path}: not a scores CSV")
    regions = list(dict.fromkeys(r[0] for r in rows[1:]))
    years = sorted({int(r[1]) for r in rows[1:]})
    r_idx = {r: i for i, r in enumerate(regions)}
    k_idx = {y: i for i, y in enumerate(years)}
    scores = np.full((len(regions), len(years)), np.nan)
    levels = np.empty((len(regions), len(years)), dtype=object)
    any_level = False
    for region, year, score, level in rows[1:]:
        cell = (r_idx[region], k_idx[int(year)])
        scores[cell] = float(score)
        levels[cell] = level
        any_level = any_level or bool(level)
    if np.isnan(scores).any():
        raise DataError(f"{path}: incomplete region-year coverage")
    return ScoreSeries(regions=regions, years=years, scores=scores,
                       levels=levels if any_level else None)


def _density_weights(config: PipelineConfig, centroids, contiguity):
    if config.density.weights == "knn":
        return build_knn_weights(centroids, config.density.k_nearest)
    return contiguity


def _grid_json(grid) -> dict:
    payload = {
        "mode": grid.mode,
        "kind": grid.kind,
        "n_obs": grid.n_obs,
        "h_x": grid.h_x,
        "x_grid": [float(v) for v in grid.x_grid],
        "values": np.asarray(grid.values).ravel().tolist(),
    }
    if grid.y_grid is not None:
        payload["y_grid"] = [float(v) for v in grid.y_grid]
        payload["h_y"] = grid.h_y
    if grid.delta is not None:
        payload["delta"] = grid.delta
    if grid.kind == "conditional":
        payload["empty_columns"] = grid.empty_columns
    return payload


def _dump_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n",
                    encoding="utf-8")


# --- stage implementations -------------------------------------------------

def stage_validate(config: PipelineConfig, outdir: Path) -> list[Path]:
    panel, filled, centroids, contiguity = _load_inputs(config)
    weight_sum = None
    if all(s.weight is not None for s in panel.indicators):
        weight_sum = float(sum(s.weight for s in panel.indicators))
    report = {
        "regions": len(panel.regions),
        "years": panel.years,
        "indicators": panel.indicator_ids(),
        "cells": panel.n_cells,
        "missing_before_fill": panel.n_missing,
        "missing_after_fill": filled.n_missing,
        "islands": contiguity.islands,
        "spec_weight_sum": weight_sum,
        "centroids_projected_from_lonlat": centroids.lonlat is not None,
    }
    path = outdir / "report.json"
    _dump_json(report, path)
    return [path]


def stage_index(config: PipelineConfig, outdir: Path) -> list[Path]:
    _, filled, _, _ = _load_inputs(config)
    norm = _normalize(config, filled)
    if config.weights.source == "file":
        weights = load_weights(config.base_dir / config.weights.file, filled.indicators)
    else:
        weights = entropy_weights(norm)
    series = aggregate_scores(norm, weights)

    scores_path = outdir / "scores.csv"
    _write_scores(series, scores_path)
    # flat {indicator_id: weight} mapping, reusable as a weights.file input
    weights_path = outdir / "weights.json"
    _dump_json(weights.as_dict(), weights_path)
    return [scores_path, weights_path]


def stage_classify(config: PipelineConfig, outdir: Path) -> list[Path]:
    series = read_scores(outdir.parent / "index" / "scores.csv")
    labelled = attach_levels(series, config.classification.k)
    path = outdir / "scores.csv"
    _write_scores(labelled, path)
    return [path]


def stage_ellipse(config: PipelineConfig, outdir: Path) -> list[Path]:
    series = read_scores(outdir.parent / "index" / "scores.csv")
    centroids = load_centroids(config.resolve("centroids"), series.regions)
    years = series.years if config.ellipse.years == "all" else list(config.ellipse.years)
    summaries, shifts = ellipse_trajectory(series, centroids, years)

    ellipse_path = outdir / "ellipses.csv"
    with open(ellipse_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["year", "center_lon", "center_lat", "semi_major_km",
                         "semi_minor_km", "azimuth_deg", "area_km2"])
        for s in summaries:
            lon = "" if s.center_lon is None else _fmt(s.center_lon)
            lat = "" if s.center_lat is None else _fmt(s.center_lat)
            writer.writerow([s.year, lon, lat, _fmt(s.semi_major), _fmt(s.semi_minor),
                             _fmt(s.azimuth_deg), _fmt(s.area)])

    shifts_path = outdir / "center_shifts.csv"
    with open(shifts_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["year_from", "year_to", "shift_km", "bearing_deg",
                         "azimuth_delta_deg", "azimuth_trend"])
        for s in shifts:
            writer.writerow([s.year_from, s.year_to, _fmt(s.distance_km),
                             _fmt(s.bearing_deg), _fmt(s.azimuth_delta_deg),
                             s.azimuth_trend])
    return [ellipse_path, shifts_path]


def stage_density(config: PipelineConfig, outdir: Path) -> list[Path]:
    series = read_scores(outdir.parent / "index" / "scores.csv")
    centroids = load_centroids(config.resolve("centroids"), series.regions)
    contiguity = build_spatial_weights(config.resolve("adjacency"), series.regions)
    weights = _density_weights(config, centroids, contiguity)
    cfg = config.density

    outputs = []
    for mode in cfg.modes:
        pairs = build_pairs(series, weights, mode, cfg.delta)
        h_x = cfg.h_x if cfg.h_x is not None else silverman_bandwidth(pairs.x)
        h_y = cfg.h_y if cfg.h_y is not None else silverman_bandwidth(pairs.y)
        x_grid = default_grid(pairs.x, h_x, cfg.grid_size)
        y_grid = default_grid(pairs.y, h_y, cfg.grid_size)

        joint = kde_2d(pairs, h_x, h_y, x_grid, y_grid)
        cond = conditional_density(pairs, h_x, h_y, x_grid, y_grid)
        for grid, name in ((joint, "joint"), (cond, "conditional")):
            path = outdir / f"{mode}_{name}.json"
            _dump_json(_grid_json(grid), path)
            outputs.append(path)

        if mode == "unconditional":
            marginal = kde_1d(pairs.x, h_x, x_grid, mode=mode)
            marginal.delta = pairs.delta
            path = outdir / "unconditional_marginal.json"
            _dump_json(_grid_json(marginal), path)
            outputs.append(path)
    return outputs


def _load_drivers(path, regions: list[str], years: list[int], factors: list[str] | str):
    """Long CSV ``region,year,factor,value`` -> {factor: {year: np.ndarray}}."""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != ["region", "year", "factor", "value"]:
        raise DataError(f"drivers CSV header must be region,year,factor,value, "
                        f"got {list(frame.columns)}")
    factor_ids = list(dict.fromkeys(frame["factor"])) if factors == "all" else list(factors)
    r_idx = {r: i for i, r in enumerate(regions)}
    table: dict[str, dict[int, np.ndarray]] = {
        f: {y: np.full(len(regions), np.nan) for y in years} for f in factor_ids
    }
    seen = set()
    for region, year_s, factor, value in zip(frame["region"], frame["year"],
                                             frame["factor"], frame["value"]):
        year = int(year_s)
        if factor not in table or year not in table[factor]:
            continue
        if region not in r_idx:
            raise DataError(f"drivers reference unknown region {region!r}")
        cell = (region, year, factor)
        if cell in seen:
            raise DataError(f"duplicate driver cell {cell}")
        seen.add(cell)
        table[factor][year][r_idx[region]] = float(value)
    for factor, by_year in table.items():
        for year, vec in by_year.items():
            if np.isnan(vec).any():
                raise DataError(f"driver {factor!r} incomplete for year {year}")
    return factor_ids, table


def stage_detect(config: PipelineConfig, outdir: Path) -> list[Path]:
    series = read_scores(outdir.parent / "index" / "scores.csv")
    det = config.detector
    years = series.years if det.years == "all" else list(det.years)
    bad_years = [y for y in years if y not in series.years]
    if bad_years:
        raise ConfigError(f"detector.years {bad_years} outside scored years",
                          field="detector.years")
    factor_ids, drivers = _load_drivers(config.resolve("drivers"), series.regions,
                                        years, det.factors)
    seed = det.seed if det.seed is not None else config.seed
    l_range = range(det.l_range[0], det.l_range[1] + 1)

    factors_block: dict[str, dict] = {}
    interactions_block: dict[str, list] = {}
    for year in years:
        y = series.scores[:, series.years.index(year)]
        partitions = {}
        year_key = str(year)
        factors_block[year_key] = {}
        for f_pos, factor in enumerate(factor_ids):
            part, q = discretize_optimal(drivers[factor][year], y, factor_id=factor,
                                         methods=det.methods, l_range=l_range)
            partitions[factor] = part
            test = significance(y, part.labels, det.permutations,
                                seed=_derived_seed(seed, year, f_pos))
            factors_block[year_key][factor] = {
                "q": q,
                "p": test.p_value,
                "n": int(y.size),
                "strata": part.n_strata,
                "method": part.method,
                "breaks": part.breaks,
            }
        interactions_block[year_key] = []
        for fa, fb in _ordered_pairs(factor_ids):
            res = interaction(y, partitions[fa].labels, partitions[fb].labels)
            interactions_block[year_key].append({
                "pair": [fa, fb],
                "q_a": res.q_a,
                "q_b": res.q_b,
                "q_ab": res.q_ab,
                "type": res.interaction_type,
                "boundary": res.boundary,
            })

    report = {
        "seed": seed,
        "permutations": det.permutations,
        "years": years,
        "factors": factors_block,
        "interactions": interactions_block,
    }
    path = outdir / "detector_report.json"
    _dump_json(report, path)
    return [path]


def _ordered_pairs(items):
    for i, a in enumerate(items):
        for b in items[i + 1:]:
            yield a, b


def _derived_seed(master: int, year: int, factor_pos: int) -> int:
    # Distinct, reproducible stream per (year, factor) regardless of run order.
    return (master * 1_000_003 + year * 101 + factor_pos) % (2**31 - 1)


_STAGE_FUNCS = {
    "validate": stage_validate,
    "index": stage_index,
    "classify": stage_classify,
    "ellipse": stage_ellipse,
    "density": stage_density,
    "detect": stage_detect,
}


def run(subcommand: str, config: PipelineConfig, threads: int = 1) -> RunManifest:
    """Run one stage or the whole chain; returns the written manifest.

    ``threads`` caps any internal parallelism and never changes results;
    the current implementations evaluate sequentially.
    """
    if subcommand != "all" and subcommand not in STAGES:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    stages = list(STAGES) if subcommand == "all" else [subcommand]

    outdir = config.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(config_hash=config_hash(config), version=__version__)
    existing = _read_manifest_stages(outdir / "manifest.json")
    manifest.stages.update(existing)

    for stage in stages:
        stage_dir = outdir / stage
        stage_dir.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        outputs = _STAGE_FUNCS[stage](config, stage_dir)
        manifest.record(stage, outputs, time.perf_counter() - start, outdir)
    manifest.write(outdir)
    return manifest


def _read_manifest_stages(path: Path) -> dict:
    if not path.is_file():
        return {}
    try:
        return json.loads(path.read_text(encoding="utf-8")).get("stages", {})
    except (OSError, json.JSONDecodeError):
        return {}
