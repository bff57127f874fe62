import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcrct.core import (MU_WATER, FanBeamGeometry, Image, ImageGrid, Unit,
                        fov_mask, hu_to_mu, mu_to_hu)


class TestImageGrid:
    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            ImageGrid(nx=0, ny=4, dx=1.0, dy=1.0)
        with pytest.raises(ValueError):
            ImageGrid(nx=4, ny=4, dx=-1.0, dy=1.0)

    @given(st.integers(1, 50), st.integers(1, 50),
           st.floats(0.1, 10.0), st.floats(0.1, 10.0),
           st.floats(-50.0, 50.0), st.floats(-50.0, 50.0))
    @settings(max_examples=50, deadline=None)
    def test_world_index_round_trip(self, nx, ny, dx, dy, cx, cy):
        grid = ImageGrid(nx=nx, ny=ny, dx=dx, dy=dy, cx=cx, cy=cy)
        i = np.arange(nx)
        j = np.arange(nx) % ny
        x, y = grid.world_from_index(i, j)
        ii, jj = grid.index_from_world(x, y)
        assert np.allclose(ii, i, atol=1e-12)
        x2, y2 = grid.world_from_index(ii, jj)
        assert np.allclose(x2, x, atol=1e-12)
        assert np.allclose(y2, y, atol=1e-12)


class TestGeometry:
    def test_invariants(self):
        with pytest.raises(ValueError):
            FanBeamGeometry(sdd=500, sid=600, n_views=4, n_det=8, det_spacing=1.0,
                            n_det_virtual=8)
        with pytest.raises(ValueError):
            FanBeamGeometry(sdd=1200, sid=600, n_views=4, n_det=8, det_spacing=1.0,
                            n_det_virtual=4)

    def test_angles_uniform_360(self, table_geometry):
        a = table_geometry.angles
        assert a[0] == 0.0
        assert np.allclose(np.diff(a), 2 * np.pi / 360)
        assert a[-1] < 2 * np.pi

    def test_measured_mask_counts(self, table_geometry):
        m = table_geometry.measured_mask()
        assert m.sum() == 600
        assert m[200] and m[799]
        assert not m[199] and not m[800]


class TestFovMask:
    def test_table_values(self, table_geometry):
        # closed form: 600 * sin(atan(300/1200)) = 600/sqrt(17)
        assert table_geometry.fov_radius(False) == pytest.approx(600.0 / math.sqrt(17.0))
        assert table_geometry.fov_radius(False) == pytest.approx(145.521, abs=1e-3)
        # 1000-channel virtual detector: 5-12-13 triangle
        assert table_geometry.fov_radius(True) == pytest.approx(600.0 * 5.0 / 13.0)
        assert table_geometry.fov_radius(True) == pytest.approx(230.769, abs=1e-3)

    def test_small_grid_all_inside(self, table_geometry):
        grid = ImageGrid(nx=16, ny=16, dx=1.0, dy=1.0)
        assert fov_mask(table_geometry, grid).flags.all()

    def test_monotone_in_detector_width(self, table_geometry, table_grid):
        phys = fov_mask(table_geometry, table_grid, virtual=False).flags
        virt = fov_mask(table_geometry, table_grid, virtual=True).flags
        assert np.all(virt[phys])
        assert virt.sum() > phys.sum()


class TestUnits:
    def test_reference_points(self):
        grid = ImageGrid(nx=1, ny=1, dx=1.0, dy=1.0)
        for hu, mu in ((0.0, 0.02), (-1000.0, 0.0), (1000.0, 0.04)):
            img = Image(grid, np.full((1, 1), hu), Unit.HU)
            assert hu_to_mu(img).values[0, 0] == pytest.approx(mu, abs=1e-15)

    def test_wrong_unit_rejected(self):
        grid = ImageGrid(nx=1, ny=1, dx=1.0, dy=1.0)
        img = Image(grid, np.zeros((1, 1)), Unit.MU_PER_MM)
        with pytest.raises(ValueError):
            hu_to_mu(img)
        with pytest.raises(ValueError):
            mu_to_hu(Image(grid, np.zeros((1, 1)), Unit.HU))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_round_trip(self, seed):
        grid = ImageGrid(nx=8, ny=8, dx=1.0, dy=1.0)
        rng = np.random.default_rng(seed)
        hu = rng.uniform(-1000.0, 3000.0, grid.shape)
        back = mu_to_hu(hu_to_mu(Image(grid, hu, Unit.HU))).values
        assert np.allclose(back, hu, rtol=1e-12, atol=1e-9)

    def test_water_constant(self):
        assert MU_WATER == 0.02


def test_image_rejects_nonfinite():
    grid = ImageGrid(nx=2, ny=2, dx=1.0, dy=1.0)
    with pytest.raises(ValueError):
        Image(grid, np.array([[1.0, np.nan], [0.0, 0.0]]), Unit.HU)
