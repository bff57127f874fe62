import numpy as np
import pytest

from dcrct.core import MU_WATER, Sinogram, hu_to_mu
from dcrct.phantom import rasterize, sample_phantom
from dcrct.projector import forward_project
from dcrct.simulate import truncate
from dcrct.wce import fit_cylinder, wce_extrapolate


def truncated_sinogram(small_geometry, small_grid, seed=1):
    ph = sample_phantom(seed, truncating=True)
    full = forward_project(hu_to_mu(rasterize(ph, small_grid)), small_geometry)
    return truncate(full)


class TestFit:
    def test_zero_slope_water_cylinder(self):
        # p_e = 2, g_e = 0: R = p_e / (2 mu_w) = 50 mm, apex at the edge
        fit = fit_cylinder(2.0, 0.0, "left")
        assert fit.radius == pytest.approx(50.0)
        assert fit.apex_offset == 0.0

    def test_value_and_slope_match(self):
        p_e, g_e = 1.5, -0.03
        fit = fit_cylinder(p_e, g_e, "right")
        t0, r = fit.apex_offset, fit.radius
        val = 2.0 * MU_WATER * np.sqrt(r**2 - t0**2)
        assert val == pytest.approx(p_e, rel=1e-12)
        h = 1e-7
        prof = lambda t: 2.0 * MU_WATER * np.sqrt(r**2 - (t - t0) ** 2)
        assert (prof(h) - prof(-h)) / (2 * h) == pytest.approx(g_e, rel=1e-5)


class TestExtrapolate:
    def test_untruncated_identity(self, small_geometry, small_grid):
        ph = sample_phantom(2, truncating=False)
        full = forward_project(hu_to_mu(rasterize(ph, small_grid)), small_geometry)
        full = Sinogram(small_geometry, full.values,
                        np.ones(small_geometry.n_det_virtual, bool))
        assert wce_extrapolate(full) is full

    def test_measured_passthrough_bit_exact(self, small_geometry, small_grid):
        meas = truncated_sinogram(small_geometry, small_grid)
        ext = wce_extrapolate(meas)
        m = meas.measured_mask
        assert np.array_equal(ext.values[:, m], meas.values[:, m])
        assert np.array_equal(ext.measured_mask, meas.measured_mask)

    def test_fills_truncated_channels(self, small_geometry, small_grid):
        meas = truncated_sinogram(small_geometry, small_grid)
        ext = wce_extrapolate(meas)
        m = meas.measured_mask
        edge = np.flatnonzero(m)[0]
        # a view whose edge value is substantial must be extended
        v = int(np.argmax(meas.values[:, edge]))
        assert ext.values[v, edge - 1] > 0.0

    def test_zero_edge_zero_fill(self, small_geometry):
        shape = (small_geometry.n_views, small_geometry.n_det_virtual)
        sino = Sinogram(small_geometry, np.zeros(shape), small_geometry.measured_mask())
        ext = wce_extrapolate(sino)
        assert np.all(ext.values == 0.0)

    def test_continuity_at_edge(self, small_geometry, small_grid):
        meas = truncated_sinogram(small_geometry, small_grid)
        ext = wce_extrapolate(meas)
        ds = small_geometry.det_spacing
        m = meas.measured_mask
        edge = np.flatnonzero(m)[0]
        for v in range(0, small_geometry.n_views, 7):
            p_e = meas.values[v, edge]
            if p_e <= 0:
                continue
            jump = abs(ext.values[v, edge - 1] - p_e)
            local_slope = abs(meas.values[v, edge + 1] - p_e) / ds
            assert jump <= (local_slope + 0.05) * ds + 0.1 * abs(p_e)

    def test_monotone_decay_with_nonpositive_slope(self):
        fit = fit_cylinder(2.0, -0.01, "left")
        t = np.linspace(0.0, 80.0, 200)
        prof = 2.0 * MU_WATER * np.sqrt(np.maximum(fit.radius**2 -
                                                   (t - fit.apex_offset) ** 2, 0.0))
        assert np.all(np.diff(prof) <= 1e-12)
