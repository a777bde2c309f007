#!/usr/bin/env python3
"""Generate the bundled synthetic demo dataset.

Writes a 30-region x 18-year x 12-indicator panel (with a handful of known
gaps), region centroids on a jittered lon/lat grid, rook adjacency, five
driver factors, and the pipeline config, all under data/synthetic/. Fully
seeded; rerunning reproduces the files byte for byte.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "data" / "synthetic"

SEED = 20240807
N_COLS, N_ROWS = 6, 5  # 30 regions on a grid
YEARS = list(range(2004, 2022))
BASE_YEAR = 2004

# id, name, attribute, per-indicator scale and annual trend of the raw values
INDICATORS = [
    ("x1", "energy intensity", "-", 1.2, -0.020),
    ("x2", "energy production elasticity", "-", 2.5, -0.010),
    ("x3", "energy industry investment", "+", 8.0e6, 0.060),
    ("x4", "research intensity", "+", 1.8, 0.040),
    ("x5", "research full-time equivalent", "+", 1.1e5, 0.070),
    ("x6", "technology market turnover", "+", 3.2e6, 0.080),
    ("x7", "rail kilometres", "+", 3.5e3, 0.030),
    ("x8", "freight volume", "+", 1.2e5, 0.050),
    ("x9", "cell phone penetration", "+", 95.0, 0.045),
    ("x10", "forest cover", "+", 33.0, 0.008),
    ("x11", "carbon emission intensity", "-", 3.0, -0.025),
    ("x12", "pollution control investment", "+", 19.0, 0.035),
]

DRIVERS = ["d1", "d2", "d3", "d4", "d5"]

# (region, indicator) series with injected gaps: list of missing year offsets
GAPS = {
    ("R03", "x4"): [5],            # single interior gap
    ("R07", "x8"): [8, 9],         # double interior gap
    ("R12", "x2"): [0, 1],         # leading gap (compound-growth backcast)
    ("R18", "x11"): [16, 17],      # trailing gap (compound-growth forecast)
    ("R22", "x6"): [0],            # single leading gap
    ("R27", "x9"): [3, 10],        # two separated interior gaps
}


def fmt(x: float) -> str:
    return format(float(x), ".10g")


def region_ids() -> list[str]:
    return [f"R{i + 1:02d}" for i in range(N_COLS * N_ROWS)]


def make_geometry(rng) -> dict[str, tuple[float, float]]:
    coords = {}
    for idx, region in enumerate(region_ids()):
        row, col = divmod(idx, N_COLS)
        lon = 100.0 + 4.0 * col + rng.uniform(-0.6, 0.6)
        lat = 25.0 + 4.0 * row + rng.uniform(-0.6, 0.6)
        coords[region] = (lon, lat)
    return coords


def make_levels(rng) -> dict[str, float]:
    """Latent development level per region: stronger toward the east coast."""
    levels = {}
    for idx, region in enumerate(region_ids()):
        row, col = divmod(idx, N_COLS)
        east = col / (N_COLS - 1)
        mid = 1.0 - abs(row - 2.0) / 4.0
        levels[region] = 0.55 + 0.8 * east + 0.25 * mid + rng.uniform(-0.08, 0.08)
    return levels


def main() -> None:
    rng = np.random.default_rng(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    regions = region_ids()
    geometry = make_geometry(rng)
    levels = make_levels(rng)

    # Indicator spec (no fixed weights; the reference weight file is separate).
    spec = [{"id": i, "name": n, "attribute": a} for i, n, a, _, _ in INDICATORS]
    (OUT / "spec.json").write_text(json.dumps(spec, indent=1) + "\n", encoding="utf-8")

    # Raw panel values with mild region-level persistence and noise.
    lines = ["region,year,indicator,value"]
    for region in regions:
        growth_bias = rng.uniform(0.985, 1.015)
        for ind_id, _, attr, scale, trend in INDICATORS:
            series = []
            level = levels[region] if attr == "+" else 1.0 / levels[region]
            value = scale * level * rng.uniform(0.85, 1.15)
            for k, year in enumerate(YEARS):
                if k > 0:
                    value *= (1.0 + trend) * growth_bias * rng.uniform(0.97, 1.03)
                series.append(value)
            gaps = GAPS.get((region, ind_id), [])
            for k, year in enumerate(YEARS):
                text = "" if k in gaps else fmt(series[k])
                lines.append(f"{region},{year},{ind_id},{text}")
    (OUT / "values.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    # Centroids and rook adjacency on the grid.
    cent = ["region,lon,lat"]
    for region in regions:
        lon, lat = geometry[region]
        cent.append(f"{region},{fmt(lon)},{fmt(lat)}")
    (OUT / "centroids.csv").write_text("\n".join(cent) + "\n", encoding="utf-8")

    adj = ["region_a,region_b"]
    for idx, region in enumerate(regions):
        row, col = divmod(idx, N_COLS)
        if col + 1 < N_COLS:
            adj.append(f"{region},{regions[idx + 1]}")
        if row + 1 < N_ROWS:
            adj.append(f"{region},{regions[idx + N_COLS]}")
    (OUT / "adjacency.csv").write_text("\n".join(adj) + "\n", encoding="utf-8")

    # Driver factors: deterministic functions of the latent level plus noise,
    # so detector q values are informative without being trivial.
    strengths = [0.85, 0.35, 0.55, 0.7, 0.5]
    drv = ["region,year,factor,value"]
    for region in regions:
        for k, year in enumerate(YEARS):
            grown = levels[region] * (1.0 + 0.04 * k)
            for d_pos, driver in enumerate(DRIVERS):
                signal = strengths[d_pos] * grown
                noise = (1.0 - strengths[d_pos]) * rng.uniform(0.2, 1.8)
                drv.append(f"{region},{year},{driver},{fmt(100.0 * (signal + noise))}")
    (OUT / "drivers.csv").write_text("\n".join(drv) + "\n", encoding="utf-8")

    config = {
        "seed": SEED,
        "paths": {
            "values": "values.csv",
            "spec": "spec.json",
            "centroids": "centroids.csv",
            "adjacency": "adjacency.csv",
            "drivers": "drivers.csv",
            "output_dir": "out",
        },
        "normalization": {"mode": "fixed_base", "base_year": BASE_YEAR},
        "weights": {"source": "entropy"},
        "classification": {"k": 5},
        "ellipse": {"years": [2004, 2007, 2010, 2013, 2016, 2019, 2021]},
        "density": {
            "modes": ["unconditional", "spatial_static", "spatial_dynamic"],
            "delta": 3,
            "grid_size": 64,
            "weights": "contiguity",
        },
        "detector": {
            "factors": "all",
            "years": [2004, 2010, 2016, 2021],
            "methods": ["equal_interval", "quantile", "natural_breaks",
                        "geometric", "std_dev"],
            "l_range": [3, 6],
            "permutations": 999,
        },
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=1) + "\n",
                                     encoding="utf-8")
    n_values = sum(1 for line in lines[1:] if line.rsplit(",", 1)[1])
    print(f"wrote {OUT}: {len(regions)} regions, {len(YEARS)} years, "
          f"{len(INDICATORS)} indicators, {len(lines) - 1} cells "
          f"({len(lines) - 1 - n_values} missing)")


if __name__ == "__main__":
    main()
