import numpy as np
import pytest

from app.services.exceptions import ArgumentError
from app.services.grid import ConfidenceGrid, RgbRaster
from app.services.resample import (
    AERIAL_GSDS_M,
    SATELLITE_GSD_M,
    bilinear_weights,
    box_weights,
    degradation_factor,
    effective_extent,
    simulate_gsd,
)


def test_identity_at_source_gsd(rng, meta_factory):
    grid = ConfidenceGrid(meta=meta_factory(20, 12, gsd_m=0.02), values=rng.random((12, 20)))
    out = simulate_gsd(grid, 0.02)
    assert out.values.tobytes() == grid.values.tobytes()
    assert out.meta.gsd_m == 0.02
    assert out.meta.effective_gsd_m == 0.02


def test_satellite_factor():
    assert degradation_factor(0.02, SATELLITE_GSD_M) == pytest.approx(15.0)


def test_finer_target_rejected(meta_factory):
    grid = ConfidenceGrid(meta=meta_factory(4, 4, gsd_m=0.03), values=np.zeros((4, 4)))
    with pytest.raises(ArgumentError):
        simulate_gsd(grid, 0.02)


@pytest.mark.parametrize("target", [0.03, 0.075, 0.15, 0.30, 0.57])
def test_constant_grid_unchanged(target, meta_factory):
    grid = ConfidenceGrid(meta=meta_factory(45, 31, gsd_m=0.02), values=np.full((31, 45), 0.37))
    out = simulate_gsd(grid, target)
    assert out.values.shape == (31, 45)
    np.testing.assert_array_equal(out.values, grid.values)
    assert out.meta.effective_gsd_m == target
    assert out.meta.gsd_m == 0.02


@pytest.mark.parametrize("target", [0.03, 0.075, 0.15, 0.30])
def test_range_and_mean_preserved(target, rng, meta_factory):
    values = rng.uniform(0.2, 0.9, size=(120, 120))
    grid = ConfidenceGrid(meta=meta_factory(120, 120, gsd_m=0.02), values=values)
    out = simulate_gsd(grid, target).values
    assert out.min() >= grid.values.min()
    assert out.max() <= grid.values.max()
    assert abs(out.mean() - grid.values.mean()) < 0.01 * grid.values.mean()


def test_impulse_spreads_with_factor(meta_factory):
    values = np.zeros((120, 120))
    values[60, 60] = 1.0
    grid = ConfidenceGrid(meta=meta_factory(120, 120, gsd_m=0.02), values=values)
    peaks = [
        float(simulate_gsd(grid, 0.02 * f).values.max()) for f in (1, 2, 3, 4, 5, 6, 8, 10, 12, 15)
    ]
    assert all(b <= a for a, b in zip(peaks, peaks[1:]))
    assert peaks[-1] <= peaks[0] / 10


def test_panel_survives_at_uav_resolution(meta_factory):
    # 0.55 m panel side, imaged at 0.017 m and at satellite resolution
    side_px = 33
    assert effective_extent(0.55, 0.017) >= 32
    values = np.zeros((99, 99))
    values[33:33 + side_px, 33:33 + side_px] = 1.0
    grid = ConfidenceGrid(meta=meta_factory(99, 99, gsd_m=0.017), values=values)
    coarse = simulate_gsd(grid, SATELLITE_GSD_M).values
    assert coarse.max() < 1.0
    assert abs(coarse.mean() - grid.values.mean()) < 0.01 * grid.values.mean()


def test_rgb(rng, meta_factory):
    meta = meta_factory(30, 20, gsd_m=0.025)
    flat = RgbRaster(meta=meta, pixels=np.broadcast_to(np.array([10, 200, 77], dtype=np.uint8), (20, 30, 3)))
    out = simulate_gsd(flat, AERIAL_GSDS_M[0])
    assert isinstance(out, RgbRaster)
    np.testing.assert_array_equal(out.pixels, flat.pixels)

    noisy = RgbRaster(meta=meta, pixels=rng.integers(0, 256, size=(20, 30, 3)))
    out = simulate_gsd(noisy, AERIAL_GSDS_M[1])
    assert out.pixels.shape == (20, 30, 3)
    assert out.meta.effective_gsd_m == AERIAL_GSDS_M[1]


@pytest.mark.parametrize("n,factor", [(12, 3.0), (10, 3.75), (7, 2.5), (5, 1.2)])
def test_weight_matrices_are_convex(n, factor):
    down = box_weights(n, factor).toarray()
    up = bilinear_weights(n, factor).toarray()
    assert down.shape == (int(np.ceil(n / factor)), n)
    assert up.shape == (n, down.shape[0])
    np.testing.assert_allclose(down.sum(axis=1), 1.0)
    np.testing.assert_allclose(up.sum(axis=1), 1.0)
    assert (down >= 0).all() and (up >= 0).all()


@pytest.mark.parametrize("factor", [1.2, 2.5, 15.0])
def test_weights_stay_sparse_on_large_grids(factor):
    down = box_weights(4000, factor)
    up = bilinear_weights(4000, factor)
    assert down.nnz <= down.shape[0] * (np.ceil(factor) + 1)
    assert up.nnz <= 2 * 4000


def test_box_weights_fractional_cells():
    np.testing.assert_allclose(
        box_weights(5, 2.5).toarray(),
        [[0.4, 0.4, 0.2, 0.0, 0.0], [0.0, 0.0, 0.2, 0.4, 0.4]],
    )


@pytest.mark.parametrize(
    "object_m,gsd,expected",
    [(0.55, 0.30, 1.8333), (0.55, 0.017, 32.35), (0.4, 0.4, 1.0)],
)
def test_effective_extent(object_m, gsd, expected):
    assert effective_extent(object_m, gsd) == pytest.approx(expected, abs=0.01)


def test_effective_extent_rejects_zero():
    with pytest.raises(ArgumentError):
        effective_extent(0.0, 0.03)
