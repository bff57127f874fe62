import numpy as np
import pytest

from dcrct.core import Image, ImageGrid, Mask, Unit, fov_mask
from dcrct.metrics import EvalReport, body_mask, evaluate, rmse, ssim
from dcrct.phantom import rasterize, sample_phantom

grid = ImageGrid(nx=32, ny=32, dx=4.0, dy=4.0)


def img(vals):
    return Image(grid, np.asarray(vals, dtype=float), Unit.HU)


def const(v):
    return img(np.full(grid.shape, float(v)))


def full_mask():
    return Mask(grid, np.ones(grid.shape, bool))


class TestRmse:
    def test_identical_is_zero(self):
        assert rmse(const(100.0), const(100.0), full_mask()) == 0.0

    def test_constant_offset(self):
        assert rmse(const(0.0), const(30.0), full_mask()) == pytest.approx(30.0)

    def test_respects_mask(self):
        a = np.zeros(grid.shape)
        a[0, 0] = 1e6
        flags = np.ones(grid.shape, bool)
        flags[0, 0] = False
        assert rmse(img(a), const(0.0), Mask(grid, flags)) == 0.0

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError):
            rmse(const(0.0), const(0.0), Mask(grid, np.zeros(grid.shape, bool)))


class TestBodyMask:
    def test_single_disk(self):
        vals = np.full(grid.shape, -1000.0)
        yy, xx = np.mgrid[:32, :32]
        disk = (xx - 16) ** 2 + (yy - 16) ** 2 <= 100
        vals[disk] = 0.0
        m = body_mask(img(vals))
        assert np.array_equal(m.flags, disk)

    def test_keeps_largest_component_only(self):
        vals = np.full(grid.shape, -1000.0)
        vals[4:20, 4:20] = 0.0   # 256 px
        vals[25:28, 25:28] = 0.0  # 9 px satellite
        m = body_mask(img(vals))
        assert m.flags[10, 10]
        assert not m.flags[26, 26]

    def test_fills_holes(self):
        vals = np.full(grid.shape, -1000.0)
        vals[4:20, 4:20] = 0.0
        vals[10:12, 10:12] = -900.0  # air pocket inside the body
        m = body_mask(img(vals))
        assert m.flags[10, 10]

    def test_all_air_rejected(self):
        with pytest.raises(ValueError):
            body_mask(const(-1000.0))


class TestSsim:
    def test_identical_is_one(self):
        rng = np.random.default_rng(0)
        a = img(500.0 * rng.standard_normal(grid.shape))
        assert ssim(a, a) == pytest.approx(1.0)

    def test_bounded_and_symmetric(self):
        rng = np.random.default_rng(1)
        a = img(300.0 * rng.standard_normal(grid.shape))
        b = img(300.0 * rng.standard_normal(grid.shape))
        s = ssim(a, b)
        assert -1.0 <= s <= 1.0
        assert s == pytest.approx(ssim(b, a), abs=1e-12)

    def test_degrades_with_noise(self):
        ph = sample_phantom(3, truncating=False)
        ref = rasterize(ph, grid)
        rng = np.random.default_rng(2)
        mild = img(ref.values + 20.0 * rng.standard_normal(grid.shape))
        harsh = img(ref.values + 200.0 * rng.standard_normal(grid.shape))
        assert ssim(mild, ref) > ssim(harsh, ref)

    def test_mask_restricts_average(self):
        ref = const(0.0)
        vals = np.zeros(grid.shape)
        vals[:, 16:] = 400.0 * np.random.default_rng(3).standard_normal((32, 16))
        noisy = img(vals)
        left = np.zeros(grid.shape, bool)
        left[:, :10] = True
        assert ssim(noisy, ref, Mask(grid, left)) > ssim(noisy, ref)


class TestEvaluate:
    def test_report_fields(self, small_geometry):
        ph = sample_phantom(5, truncating=True)
        ref = rasterize(ph, grid)
        rng = np.random.default_rng(4)
        rec = img(ref.values + 25.0 * rng.standard_normal(grid.shape))
        fov = fov_mask(small_geometry, grid, virtual=False)
        rep = evaluate(rec, ref, fov)
        assert rep.rmse_fov == pytest.approx(25.0, rel=0.15)
        assert 0.0 < rep.ssim < 1.0
        d = rep.to_dict()
        assert set(d) >= {"rmse_fov", "rmse_body", "ssim"}

    def test_perfect_reconstruction(self, small_geometry):
        ph = sample_phantom(5, truncating=True)
        ref = rasterize(ph, grid)
        fov = fov_mask(small_geometry, grid, virtual=False)
        rep = evaluate(ref, ref, fov)
        assert rep.rmse_fov == 0.0
        assert rep.ssim == pytest.approx(1.0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            EvalReport(rmse_fov=float("nan"), rmse_body=0.0, ssim=0.5)
        with pytest.raises(ValueError):
            EvalReport(rmse_fov=0.0, rmse_body=0.0, ssim=1.5)
