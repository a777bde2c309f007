import json
import shutil
from pathlib import Path

import pytest

from restool.cli import main
from restool.config import apply_overrides, config_hash, load_config
from restool.errors import ConfigError
from restool.pipeline import read_scores

FAST_OVERRIDES = [
    "--set", "density.grid_size=32",
    "--set", "detector.permutations=99",
    "--set", "detector.years=[2004]",
]


def run_cli(*args):
    return main([str(a) for a in args])


def stage_files(outdir: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(outdir)): p.read_bytes()
        for p in sorted(outdir.rglob("*"))
        if p.is_file() and p.name != "manifest.json"
    }


# --- config ------------------------------------------------------------------

def test_load_bundled_config(synthetic_dir):
    config = load_config(synthetic_dir / "config.json")
    assert config.normalization.base_year == 2004
    assert config.detector.permutations == 999
    assert config.seed == 20240807


def test_unknown_field_rejected(tmp_path, synthetic_dir):
    raw = json.loads((synthetic_dir / "config.json").read_text())
    raw["normalization"]["typo_field"] = 1
    bad = tmp_path / "config.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match="typo_field"):
        load_config(bad)


def test_missing_input_file_rejected(tmp_path, synthetic_dir):
    raw = json.loads((synthetic_dir / "config.json").read_text())
    bad = tmp_path / "config.json"
    bad.write_text(json.dumps(raw))  # relative paths now resolve to tmp_path
    with pytest.raises(ConfigError, match="not found"):
        load_config(bad)


def test_seed_required_for_permutations(tmp_path, synthetic_dir):
    raw = json.loads((synthetic_dir / "config.json").read_text())
    del raw["seed"]
    for name in ("values", "spec", "centroids", "adjacency", "drivers"):
        raw["paths"][name] = str(synthetic_dir / raw["paths"][name])
    bad = tmp_path / "config.json"
    bad.write_text(json.dumps(raw))
    with pytest.raises(ConfigError, match="seed"):
        load_config(bad)


def test_config_hash_tracks_meaningful_fields(synthetic_dir):
    base = load_config(synthetic_dir / "config.json")
    h0 = config_hash(base)

    moved = load_config(synthetic_dir / "config.json")
    apply_overrides(moved, ["paths.output_dir=somewhere/else"])
    assert config_hash(moved) == h0  # output location is not semantic

    changed = load_config(synthetic_dir / "config.json")
    apply_overrides(changed, ["normalization.base_year=2005"])
    assert config_hash(changed) != h0

    reseeded = load_config(synthetic_dir / "config.json")
    apply_overrides(reseeded, ["seed=1"])
    assert config_hash(reseeded) != h0


# --- CLI exit codes ------------------------------------------------------------

def test_validate_succeeds_and_reports_zero_missing(tmp_path, synthetic_dir):
    out = tmp_path / "out"
    code = run_cli("validate", "--config", synthetic_dir / "config.json", "--out", out)
    assert code == 0
    report = json.loads((out / "validate" / "report.json").read_text())
    assert report["missing_before_fill"] == 10
    assert report["missing_after_fill"] == 0
    assert report["cells"] == 30 * 18 * 12
    assert report["islands"] == []


def test_base_year_outside_panel_exits_2(tmp_path, synthetic_dir, capsys):
    code = run_cli("index", "--config", synthetic_dir / "config.json",
                   "--out", tmp_path / "out", "--set", "normalization.base_year=1990")
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["field"] == "normalization.base_year"


def test_data_error_exits_3(tmp_path, synthetic_dir, capsys):
    broken = tmp_path / "data"
    shutil.copytree(synthetic_dir, broken)
    with open(broken / "values.csv", "a", encoding="utf-8") as handle:
        handle.write("R01,2004,x1,9.9\n")  # duplicate cell
    code = run_cli("validate", "--config", broken / "config.json",
                   "--out", tmp_path / "out")
    assert code == 3
    assert "duplicate" in capsys.readouterr().err


def test_degenerate_data_exits_4(tmp_path, synthetic_dir, capsys):
    broken = tmp_path / "data"
    shutil.copytree(synthetic_dir, broken)
    rows = ["region,year,indicator,value"]
    for region in ("R1", "R2"):
        for year in (2004, 2005):
            for ind in [f"x{j}" for j in range(1, 13)]:
                rows.append(f"{region},{year},{ind},1.0")  # constant everywhere
    (broken / "values.csv").write_text("\n".join(rows) + "\n")
    (broken / "centroids.csv").write_text(
        "region,lon,lat\nR1,100,30\nR2,101,31\n")
    (broken / "adjacency.csv").write_text("region_a,region_b\nR1,R2\n")
    code = run_cli("index", "--config", broken / "config.json",
                   "--out", tmp_path / "out")
    assert code == 4
    assert "zero" in capsys.readouterr().err


# --- end-to-end behaviour ---------------------------------------------------------

@pytest.fixture(scope="module")
def fast_run(tmp_path_factory, synthetic_dir):
    out = tmp_path_factory.mktemp("fastrun")
    code = run_cli("all", "--config", synthetic_dir / "config.json",
                   "--out", out, *FAST_OVERRIDES)
    assert code == 0
    return out


def test_rerun_is_byte_identical(tmp_path, synthetic_dir, fast_run):
    out2 = tmp_path / "again"
    code = run_cli("all", "--config", synthetic_dir / "config.json",
                   "--out", out2, *FAST_OVERRIDES)
    assert code == 0
    assert stage_files(fast_run) == stage_files(out2)


def test_stage_isolation(tmp_path, synthetic_dir):
    out = tmp_path / "out"
    assert run_cli("all", "--config", synthetic_dir / "config.json",
                   "--out", out, *FAST_OVERRIDES) == 0
    before = stage_files(out / "ellipse")
    shutil.rmtree(out / "ellipse")
    assert run_cli("ellipse", "--config", synthetic_dir / "config.json",
                   "--out", out, *FAST_OVERRIDES) == 0
    assert stage_files(out / "ellipse") == before
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["stages"]) == {"validate", "index", "classify",
                                       "ellipse", "density", "detect"}


def test_scores_roundtrip_and_levels(fast_run):
    raw = read_scores(fast_run / "index" / "scores.csv")
    assert raw.levels is None
    labelled = read_scores(fast_run / "classify" / "scores.csv")
    assert labelled.levels is not None
    assert (labelled.scores == raw.scores).all()
    assert set(labelled.levels.ravel()) == {"low", "lower", "medium", "higher", "high"}


def test_ellipse_output_shape(fast_run):
    lines = (fast_run / "ellipse" / "ellipses.csv").read_text().splitlines()
    assert lines[0] == "year,center_lon,center_lat,semi_major_km,semi_minor_km,azimuth_deg,area_km2"
    assert len(lines) == 8  # 7 configured years
    shifts = (fast_run / "ellipse" / "center_shifts.csv").read_text().splitlines()
    assert len(shifts) == 7


def test_density_outputs(fast_run):
    joint = json.loads((fast_run / "density" / "unconditional_joint.json").read_text())
    assert joint["n_obs"] == 450
    assert len(joint["values"]) == 32 * 32
    cond = json.loads((fast_run / "density" / "spatial_static_conditional.json").read_text())
    assert cond["kind"] == "conditional"
    assert cond["n_obs"] == 30 * 18
    marginal = json.loads((fast_run / "density" / "unconditional_marginal.json").read_text())
    assert "y_grid" not in marginal
    assert len(marginal["values"]) == 32


def test_detector_report_shape(fast_run):
    report = json.loads((fast_run / "detect" / "detector_report.json").read_text())
    assert report["years"] == [2004]
    factors = report["factors"]["2004"]
    assert set(factors) == {"d1", "d2", "d3", "d4", "d5"}
    for entry in factors.values():
        assert 0.0 <= entry["q"] <= 1.0
        assert 0.0 < entry["p"] <= 1.0
        assert entry["method"] in {"equal_interval", "quantile", "natural_breaks",
                                   "geometric", "std_dev"}
    pairs = [tuple(i["pair"]) for i in report["interactions"]["2004"]]
    assert len(pairs) == 10  # 5 choose 2, ordered
    for entry in report["interactions"]["2004"]:
        assert entry["q_ab"] >= max(entry["q_a"], entry["q_b"]) - 1e-12


def test_downstream_stage_without_index_exits_3(tmp_path, synthetic_dir, capsys):
    code = run_cli("classify", "--config", synthetic_dir / "config.json",
                   "--out", tmp_path / "out")
    assert code == 3
    assert "index stage" in capsys.readouterr().err


def test_knn_weights_route(tmp_path, synthetic_dir):
    out = tmp_path / "out"
    assert run_cli("index", "--config", synthetic_dir / "config.json",
                   "--out", out) == 0
    code = run_cli("density", "--config", synthetic_dir / "config.json", "--out", out,
                   "--set", "density.weights=knn", "--set", "density.grid_size=32")
    assert code == 0
    static = json.loads((out / "density" / "spatial_static_joint.json").read_text())
    assert static["n_obs"] == 30 * 18  # knn graph has no islands


def test_weights_file_route(tmp_path, synthetic_dir, data_dir):
    out = tmp_path / "out"
    code = run_cli("index", "--config", synthetic_dir / "config.json", "--out", out,
                   "--set", "weights.source=file",
                   "--set", f"weights.file={data_dir / 'reference_weights.json'}")
    assert code == 0
    weights = json.loads((out / "index" / "weights.json").read_text())
    assert weights["x8"] == 0.212


def test_emitted_weights_file_feeds_back_as_input(tmp_path, synthetic_dir):
    out = tmp_path / "entropy_run"
    assert run_cli("index", "--config", synthetic_dir / "config.json",
                   "--out", out) == 0
    emitted = out / "index" / "weights.json"
    out2 = tmp_path / "frozen_run"
    assert run_cli("index", "--config", synthetic_dir / "config.json", "--out", out2,
                   "--set", "weights.source=file",
                   "--set", f"weights.file={emitted}") == 0
    first = (out / "index" / "scores.csv").read_bytes()
    second = (out2 / "index" / "scores.csv").read_bytes()
    assert first == second  # repr round-trip keeps the weights exact
