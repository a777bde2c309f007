import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from restool.ellipse import ellipse_trajectory, sd_ellipse, weighted_center
from restool.errors import DataError, DegenerateError
from restool.indexing import ScoreSeries
from restool.panel import Centroids

CROSS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
UNIT = np.ones(4)


def random_config(rng, n=12):
    pts = rng.uniform(-50, 50, size=(n, 2))
    w = rng.uniform(0.1, 3.0, size=n)
    return pts, w


# --- weighted centre ---------------------------------------------------------

def test_center_midpoint():
    assert weighted_center([[0, 0], [2, 0]], [1, 1]) == (1.0, 0.0)


def test_center_weighted():
    # 3*0 + 1*4 over total weight 4
    assert weighted_center([[0, 0], [4, 0]], [3, 1]) == (1.0, 0.0)


def test_center_single_point():
    center = weighted_center([[2.5, -3.0]], [0.7])
    assert center == pytest.approx((2.5, -3.0), rel=1e-12)


def test_center_zero_weights_errors():
    with pytest.raises(DegenerateError):
        weighted_center([[0, 0], [1, 1]], [0, 0])


def test_center_negative_weights_errors():
    with pytest.raises(DataError):
        weighted_center([[0, 0], [1, 1]], [1, -1])


# --- ellipse fixtures ----------------------------------------------------------

def test_isotropic_cross_fixture():
    s = sd_ellipse(CROSS, UNIT)
    assert s.semi_major == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert s.semi_minor == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert s.area == pytest.approx(math.pi / 2, abs=1e-12)
    assert s.isotropic
    assert s.azimuth_deg == 0.0


def test_collinear_is_flagged_degenerate():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [5.0, 0.0]])
    s = sd_ellipse(pts, np.ones(4))
    assert s.degenerate
    assert s.semi_minor == 0.0
    assert s.azimuth_deg == pytest.approx(90.0)  # spread runs east-west


def test_axis_aligned_azimuths():
    east_west = np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, 0.5], [0.0, -0.5]])
    assert sd_ellipse(east_west, np.ones(4)).azimuth_deg == pytest.approx(90.0)
    north_south = east_west[:, ::-1].copy()
    assert sd_ellipse(north_south, np.ones(4)).azimuth_deg == pytest.approx(0.0)


def test_diagonal_azimuth():
    pts = np.array([[1.0, 1.0], [-1.0, -1.0], [0.3, -0.3], [-0.3, 0.3]])
    s = sd_ellipse(pts, np.ones(4))
    assert s.azimuth_deg == pytest.approx(45.0)
    assert s.semi_major > s.semi_minor


def test_translation_equivariance():
    rng = np.random.default_rng(1)
    pts, w = random_config(rng)
    base = sd_ellipse(pts, w)
    moved = sd_ellipse(pts + [123.0, -45.0], w)
    assert moved.center_x == pytest.approx(base.center_x + 123.0, rel=1e-12)
    assert moved.center_y == pytest.approx(base.center_y - 45.0, rel=1e-12)
    assert moved.azimuth_deg == pytest.approx(base.azimuth_deg, abs=1e-9)
    assert moved.semi_major == pytest.approx(base.semi_major, rel=1e-12)
    assert moved.semi_minor == pytest.approx(base.semi_minor, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 179.9))
def test_rotation_covariance(seed, phi_deg):
    rng = np.random.default_rng(seed)
    pts, w = random_config(rng)
    base = sd_ellipse(pts, w)
    phi = math.radians(phi_deg)
    rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
    rotated = sd_ellipse(pts @ rot.T, w)
    assert rotated.semi_major == pytest.approx(base.semi_major, rel=1e-9)
    assert rotated.semi_minor == pytest.approx(base.semi_minor, rel=1e-9)
    assert rotated.area == pytest.approx(base.area, rel=1e-9)
    # ccw point rotation by phi decreases the compass azimuth by phi (mod 180)
    expected = (base.azimuth_deg - phi_deg) % 180.0
    diff = abs(rotated.azimuth_deg - expected)
    assert min(diff, 180.0 - diff) < 1e-6


def test_weight_scaling_invariance():
    rng = np.random.default_rng(2)
    pts, w = random_config(rng)
    base = sd_ellipse(pts, w)
    scaled = sd_ellipse(pts, 37.5 * w)
    assert scaled.center_x == pytest.approx(base.center_x, rel=1e-12)
    assert scaled.semi_major == pytest.approx(base.semi_major, rel=1e-12)
    assert scaled.semi_minor == pytest.approx(base.semi_minor, rel=1e-12)
    assert scaled.azimuth_deg == pytest.approx(base.azimuth_deg, abs=1e-12)


def test_area_equals_pi_ab_exactly():
    rng = np.random.default_rng(3)
    for _ in range(25):
        pts, w = random_config(rng)
        s = sd_ellipse(pts, w)
        assert s.area == math.pi * s.semi_major * s.semi_minor


def test_equal_weight_trace_invariance():
    rng = np.random.default_rng(4)
    pts = rng.uniform(-10, 10, size=(15, 2))
    s = sd_ellipse(pts, np.ones(15))
    total_var = pts.var(axis=0).sum()
    assert s.semi_major**2 + s.semi_minor**2 == pytest.approx(total_var, rel=1e-12)


def test_too_few_points_errors():
    with pytest.raises(DataError):
        sd_ellipse([[0, 0], [1, 1]], [1, 1])


def test_axes_match_eigendecomposition_oracle():
    # independent oracle: spreads along the stationary directions are the
    # square roots of the weighted covariance eigenvalues
    rng = np.random.default_rng(123)
    for _ in range(200):
        pts, w = random_config(rng, n=int(rng.integers(4, 20)))
        s = sd_ellipse(pts, w)
        cx, cy = weighted_center(pts, w)
        dev = pts - [cx, cy]
        cov = (dev.T * w) @ dev / w.sum()
        lam_min, lam_max = np.sort(np.linalg.eigvalsh(cov))
        assert s.semi_major == pytest.approx(math.sqrt(lam_max), rel=1e-9)
        assert s.semi_minor == pytest.approx(math.sqrt(lam_min), rel=1e-9)
        leading = np.linalg.eigh(cov)[1][:, 1]
        azimuth = math.degrees(math.atan2(leading[0], leading[1])) % 180.0
        diff = abs(s.azimuth_deg - azimuth)
        assert min(diff, 180.0 - diff) < 1e-6


# --- trajectory ------------------------------------------------------------------

def make_series_and_geometry(score_rows):
    scores = np.asarray(score_rows, dtype=float)
    n = scores.shape[0]
    regions = [f"R{i}" for i in range(n)]
    years = list(range(2004, 2004 + scores.shape[1]))
    # unit square corners plus a centre point
    pts = np.array([[0.0, 0.0], [100.0, 0.0], [0.0, 100.0], [100.0, 100.0],
                    [50.0, 50.0]])[:n]
    series = ScoreSeries(regions=regions, years=years, scores=scores)
    geometry = Centroids(regions=regions, xy=pts)
    return series, geometry


def test_identical_years_zero_displacement():
    series, geometry = make_series_and_geometry(
        [[1.0, 1.0], [2.0, 2.0], [1.5, 1.5], [0.5, 0.5], [1.0, 1.0]])
    _, shifts = ellipse_trajectory(series, geometry, [2004, 2005])
    assert shifts[0].distance_km == 0.0
    assert shifts[0].azimuth_trend == "flat"


def test_uniform_weight_doubling_keeps_ellipse():
    series, geometry = make_series_and_geometry(
        [[1.0, 2.0], [2.0, 4.0], [1.5, 3.0], [0.5, 1.0], [1.0, 2.0]])
    summaries, shifts = ellipse_trajectory(series, geometry, [2004, 2005])
    assert shifts[0].distance_km == pytest.approx(0.0, abs=1e-9)
    assert summaries[0].semi_major == pytest.approx(summaries[1].semi_major, rel=1e-12)
    assert summaries[0].area == pytest.approx(summaries[1].area, rel=1e-12)


def test_southwest_drift_bearing():
    # mass moves from the NE corner to the SW corner between the two years
    series, geometry = make_series_and_geometry(
        [[1.0, 4.0], [1.0, 1.0], [1.0, 1.0], [4.0, 1.0], [1.0, 1.0]])
    summaries, shifts = ellipse_trajectory(series, geometry, [2004, 2005])
    # oracle: recompute both centres directly
    w0, w1 = np.array([1, 1, 1, 4, 1.0]), np.array([4, 1, 1, 1, 1.0])
    for s, w in zip(summaries, (w0, w1)):
        assert s.center_x == pytest.approx(w @ geometry.xy[:, 0] / w.sum())
        assert s.center_y == pytest.approx(w @ geometry.xy[:, 1] / w.sum())
    assert 180.0 < shifts[0].bearing_deg < 270.0


def test_trajectory_reports_lonlat_when_projected(tmp_path):
    path = tmp_path / "centroids.csv"
    path.write_text("region,lon,lat\nR0,100,30\nR1,104,30\nR2,102,33\nR3,101,31\n")
    from restool.panel import load_centroids
    geometry = load_centroids(path, ["R0", "R1", "R2", "R3"])
    series = ScoreSeries(regions=["R0", "R1", "R2", "R3"], years=[2004],
                         scores=np.array([[1.0], [2.0], [1.0], [1.0]]))
    summaries, _ = ellipse_trajectory(series, geometry, [2004])
    assert summaries[0].center_lon is not None
    assert 100 < summaries[0].center_lon < 104
    assert 30 < summaries[0].center_lat < 33


def test_negative_scores_rejected():
    series, geometry = make_series_and_geometry(
        [[1.0], [2.0], [-0.5], [1.0], [1.0]])
    with pytest.raises(DegenerateError, match="negative"):
        ellipse_trajectory(series, geometry, [2004])
