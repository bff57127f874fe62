"""Water cylinder extrapolation of laterally truncated sinograms.

At each truncation edge of each view, a water cylinder is fitted so that its
projection matches the edge value and slope, and the unmeasured virtual
channels are filled with the cylinder profile. Measured channels pass through
bit-exactly and the measured mask is unchanged: the fill is an estimate, not
a measurement.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MU_WATER, Image, ImageGrid, Sinogram
from .fbp import fbp_reconstruct

EDGE_FIT_CHANNELS = 5  # least-squares slope window; single differences are too noisy
TAPER_CHANNELS = 20  # cosine roll-off if the cylinder reaches the virtual edge


@dataclass(frozen=True)
class CylinderFit:
    radius: float  # mm
    apex_offset: float  # detector mm beyond the edge (negative = behind it)
    side: str  # "left" | "right"


def fit_cylinder(p_edge: float, slope_out: float, side: str,
                 mu_w: float = MU_WATER) -> CylinderFit:
    """Match 2*mu_w*sqrt(R^2 - (t - t0)^2) to value and outward slope at t = 0.

    Closed form: t0 = p_e * g_e / (4 mu_w^2), R^2 = t0^2 + (p_e / (2 mu_w))^2.
    """
    t0 = p_edge * slope_out / (4.0 * mu_w * mu_w)
    r = np.hypot(t0, p_edge / (2.0 * mu_w))
    return CylinderFit(float(r), float(t0), side)


def _cylinder_profile(fit: CylinderFit, t: np.ndarray, mu_w: float = MU_WATER) -> np.ndarray:
    arg = fit.radius**2 - (t - fit.apex_offset) ** 2
    return 2.0 * mu_w * np.sqrt(np.maximum(arg, 0.0))


def _fill_side(row: np.ndarray, measured_idx: np.ndarray, side: str, ds: float) -> None:
    if side == "left":
        edge = measured_idx[0]
        if edge == 0:
            return
        window = np.arange(edge, min(edge + EDGE_FIT_CHANNELS, measured_idx[-1] + 1))
        fill = np.arange(edge - 1, -1, -1)
    else:
        edge = measured_idx[-1]
        if edge == row.shape[0] - 1:
            return
        window = np.arange(max(edge - EDGE_FIT_CHANNELS + 1, measured_idx[0]), edge + 1)[::-1]
        fill = np.arange(edge + 1, row.shape[0])
    p_edge = row[edge]
    if p_edge <= 0.0:
        row[fill] = 0.0
        return
    slope = _ls_outward_slope(row, window, ds)
    fit = fit_cylinder(p_edge, slope, side)
    t = (np.arange(1, len(fill) + 1, dtype=np.float64)) * ds
    prof = _cylinder_profile(fit, t)
    if prof[-1] > 0.0 and len(prof) >= 2:
        # cylinder reaches past the virtual detector: cosine roll-off to zero
        k = min(TAPER_CHANNELS, len(prof))
        ramp = 0.5 * (1.0 + np.cos(np.linspace(0.0, np.pi, k)))
        prof[-k:] *= ramp
    row[fill] = prof


def _ls_outward_slope(row: np.ndarray, window: np.ndarray, ds: float) -> float:
    """Slope (per mm) of a least-squares line over the window, with the
    coordinate increasing toward the truncated side (window[0] = edge)."""
    vals = row[window]
    if len(vals) < 2:
        return 0.0
    t = -np.arange(len(vals), dtype=np.float64) * ds  # edge at 0, inward negative
    t -= t.mean()
    v = vals - vals.mean()
    return float((t * v).sum() / (t * t).sum())


def wce_extrapolate(sinogram: Sinogram) -> Sinogram:
    """Fill unmeasured edge channels of every view with fitted water cylinders."""
    mask = sinogram.measured_mask
    if mask.all():
        return sinogram
    measured_idx = np.flatnonzero(mask)
    if measured_idx.size == 0:
        raise ValueError("sinogram has no measured channels")
    ds = sinogram.geometry.det_spacing
    values = sinogram.values.copy()
    for v in range(values.shape[0]):
        _fill_side(values[v], measured_idx, "left", ds)
        _fill_side(values[v], measured_idx, "right", ds)
    return sinogram.with_values(values)


def reconstruct_wce(sinogram: Sinogram, grid: ImageGrid) -> Image:
    """FBP of the water-cylinder-extrapolated sinogram (the network input image)."""
    return fbp_reconstruct(wce_extrapolate(sinogram), grid)
