"""SART + reweighted-TV iterative reconstruction and the data-consistent driver.

The constrained problem (minimize the weighted TV norm subject to residual
tolerances on measured and prior-filled channels) is solved by alternating
view-sequential SART sweeps, gated by the relative residual tolerances, with
gradient descent steps on a smoothed weighted-TV objective. Weights are
recomputed from the previous outer iterate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (Image, ImageGrid, Sinogram, Unit, hu_to_mu, hu_values_to_mu,
                   mu_values_to_hu)
from .projector import (ViewProjector, _detector_points, _forward_all,
                        _grid_params, forward_project)

_TINY = 1e-12


@dataclass(frozen=True)
class ReconConfig:
    e1: float = 0.01  # measured-data relative residual tolerance
    e2: float = 0.5  # prior-data relative residual tolerance
    epsilon_tv: float = 5.0  # HU, weight regularizer
    n_outer: int = 10
    n_tv_steps: int = 20
    sart_relaxation: float = 0.8

    def __post_init__(self):
        if self.e1 < 0 or self.e2 < 0:
            raise ValueError("tolerances must be nonnegative")
        if self.epsilon_tv <= 0:
            raise ValueError("epsilon_tv must be positive")
        if self.n_outer < 0:
            raise ValueError("n_outer must be nonnegative")
        if not (0.0 < self.sart_relaxation < 2.0):
            raise ValueError("sart_relaxation must be in (0, 2)")


@dataclass(frozen=True)
class TVWeights:
    w: np.ndarray  # per-pixel, strictly positive

    def __post_init__(self):
        w = np.ascontiguousarray(self.w, dtype=np.float64)
        if np.any(w <= 0):
            raise ValueError("TV weights must be strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


def image_gradient(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences (Dx, Dy) with zero rows/columns at the far boundary."""
    gx = np.zeros_like(values)
    gy = np.zeros_like(values)
    gx[:, :-1] = values[:, 1:] - values[:, :-1]
    gy[:-1, :] = values[1:, :] - values[:-1, :]
    return gx, gy


def _gradient_adjoint(ux: np.ndarray, uy: np.ndarray) -> np.ndarray:
    """Transpose of image_gradient (negative divergence with matching boundaries)."""
    out = -ux.copy()
    out[:, 1:] += ux[:, :-1]
    out -= uy
    out[1:, :] += uy[:-1, :]
    return out


def tv_weights(prev: Image, epsilon_tv: float) -> TVWeights:
    """w = 1 / (||grad f_prev|| + epsilon), from the previous outer iterate (HU)."""
    if epsilon_tv <= 0:
        raise ValueError("epsilon_tv must be positive")
    gx, gy = image_gradient(prev.values)
    return TVWeights(1.0 / (np.hypot(gx, gy) + epsilon_tv))


def wtv_norm(f: Image, w: TVWeights) -> float:
    if w.w.shape != f.values.shape:
        raise ValueError("weight shape mismatch")
    gx, gy = image_gradient(f.values)
    return float((w.w * np.hypot(gx, gy)).sum())


def _smoothed_wtv(values: np.ndarray, w: np.ndarray, delta: float) -> float:
    gx, gy = image_gradient(values)
    return float((w * np.sqrt(gx * gx + gy * gy + delta * delta)).sum())


def wtv_gradient(f: Image, w: TVWeights, smoothing_delta: float) -> Image:
    """Gradient of sum w*sqrt(||grad f||^2 + delta^2); matches finite differences."""
    if smoothing_delta <= 0:
        raise ValueError("smoothing_delta must be positive")
    gx, gy = image_gradient(f.values)
    mag = np.sqrt(gx * gx + gy * gy + smoothing_delta**2)
    grad = _gradient_adjoint(w.w * gx / mag, w.w * gy / mag)
    return f.with_values(grad)


def _rel_residual(diff_sq: float, ref_sq: float) -> float:
    if ref_sq <= _TINY:
        return np.sqrt(diff_sq)
    return np.sqrt(diff_sq / ref_sq)


def _sweep(ws: ViewProjector, f_mu: np.ndarray, target: np.ndarray,
           chans: np.ndarray, relaxation: float) -> None:
    """One SART pass over all views, sequential in view order (in place)."""
    rows = ws.view_row_sums(chans)
    cols = ws.view_col_sums(chans)
    n_views = ws.geometry.n_views
    for v in range(n_views):
        fp = ws.forward_view(f_mu, v, chans)
        rv = rows[v]
        resid = np.zeros_like(fp)
        np.divide(target[v] - fp, rv, out=resid, where=rv > _TINY)
        resid[~_chan_bool(chans, rv.shape[0])] = 0.0
        delta = np.zeros_like(f_mu)
        ws.backward_view(resid, v, chans, delta)
        cs = cols[v]
        np.divide(delta, cs, out=delta, where=cs > _TINY)
        delta[cs <= _TINY] = 0.0
        f_mu += relaxation * delta


def _chan_bool(chans: np.ndarray, n: int) -> np.ndarray:
    b = np.zeros(n, dtype=bool)
    b[chans] = True
    return b


def sart_sweep(f: Image, sino: Sinogram, channel_set: str, relaxation: float,
               workspace: ViewProjector | None = None) -> Image:
    """One relaxed SART pass restricted to the measured or truncated channels."""
    if f.unit is not Unit.MU_PER_MM:
        raise ValueError("sart_sweep expects an attenuation image")
    chans = _channel_set(sino, channel_set)
    if chans.size == 0:
        raise ValueError(f"empty channel set: {channel_set}")
    ws = workspace or ViewProjector(sino.geometry, f.grid)
    f_mu = f.values.copy()
    _sweep(ws, f_mu, sino.values, chans, relaxation)
    return f.with_values(f_mu)


def _channel_set(sino: Sinogram, which: str) -> np.ndarray:
    if which == "measured":
        return np.flatnonzero(sino.measured_mask).astype(np.int64)
    if which == "truncated":
        return np.flatnonzero(~sino.measured_mask).astype(np.int64)
    raise ValueError("channel_set must be 'measured' or 'truncated'")


def merge_sinograms(measured: Sinogram, prior_image: Image) -> Sinogram:
    """Complete a truncated sinogram with the forward projection of the prior.

    Measured channels pass through bit-exactly; truncated channels take the
    prior's projections, giving full virtual-detector coverage.
    """
    prior_mu = hu_to_mu(prior_image) if prior_image.unit is Unit.HU else prior_image
    projected = forward_project(prior_mu, measured.geometry)
    values = projected.values.copy()
    values[:, measured.measured_mask] = measured.values[:, measured.measured_mask]
    return measured.with_values(values)


def _tv_descent(f_hu: np.ndarray, w: np.ndarray, n_steps: int,
                step_hint: float | None = None,
                on_step=None) -> tuple[np.ndarray, float]:
    """Backtracking gradient descent on the smoothed weighted-TV objective.

    The objective is guaranteed non-increasing per accepted step; a step that
    cannot decrease it after the backtracking budget is skipped.
    """
    rng_span = float(f_hu.max() - f_hu.min())
    delta = max(1e-3 * rng_span, 1e-6)
    obj = _smoothed_wtv(f_hu, w, delta)
    t = step_hint if step_hint is not None else max(rng_span, 1.0)
    for _ in range(n_steps):
        gx, gy = image_gradient(f_hu)
        mag = np.sqrt(gx * gx + gy * gy + delta * delta)
        g = _gradient_adjoint(w * gx / mag, w * gy / mag)
        gnorm = float(np.abs(g).max())
        if gnorm <= _TINY:
            break
        accepted = False
        for _ in range(30):
            cand = f_hu - t * g
            cand_obj = _smoothed_wtv(cand, w, delta)
            if cand_obj <= obj:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        if on_step is not None:
            on_step(obj, cand_obj)
        f_hu = cand
        obj = cand_obj
        t *= 2.0
    return f_hu, t


def _iterative_reconstruct(measured: Sinogram, grid: ImageGrid, cfg: ReconConfig,
                           prior: Image | None, on_tv_step=None) -> Image:
    geometry = measured.geometry
    ws = ViewProjector(geometry, grid)
    if prior is not None:
        full = merge_sinograms(measured, prior)
        f_mu = hu_to_mu(prior).values.copy()
    else:
        full = measured
        f_mu = np.zeros(grid.shape, dtype=np.float64)

    chans_m = _channel_set(measured, "measured")
    chans_t = _channel_set(measured, "truncated") if prior is not None else np.empty(0, np.int64)
    m_bool = measured.measured_mask
    pm_sq = float((measured.values[:, m_bool] ** 2).sum())
    pt_sq = float((full.values[:, ~m_bool] ** 2).sum()) if chans_t.size else 0.0

    step_hint = None
    for _ in range(cfg.n_outer):
        f_hu = mu_values_to_hu(f_mu)
        w = tv_weights(Image(grid, f_hu, Unit.HU), cfg.epsilon_tv)

        fp = np.empty((geometry.n_views, geometry.n_det_virtual))
        nx, ny, dx, dy, x0, y0 = _grid_params(grid)
        sxs, sys = geometry.source_positions()
        pxs, pys = _detector_points(geometry)
        _forward_all(f_mu, nx, ny, dx, dy, x0, y0, sxs, sys, pxs, pys, fp)

        res_m = _rel_residual(float(((fp - full.values)[:, m_bool] ** 2).sum()), pm_sq)
        if res_m > cfg.e1:
            _sweep(ws, f_mu, full.values, chans_m, cfg.sart_relaxation)
        if chans_t.size:
            res_t = _rel_residual(float(((fp - full.values)[:, ~m_bool] ** 2).sum()), pt_sq)
            if res_t > cfg.e2:
                _sweep(ws, f_mu, full.values, chans_t, cfg.sart_relaxation)

        f_hu = mu_values_to_hu(f_mu)
        f_hu, step_hint = _tv_descent(f_hu, w.w, cfg.n_tv_steps, step_hint, on_tv_step)
        f_mu = hu_values_to_mu(f_hu)
        if not np.all(np.isfinite(f_mu)):
            raise FloatingPointError("non-finite iterate in SART + wTV loop")
    return Image(grid, mu_values_to_hu(f_mu), Unit.HU)


def dcr_reconstruct(measured: Sinogram, prior: Image, cfg: ReconConfig,
                    grid: ImageGrid | None = None, on_tv_step=None) -> Image:
    """Data-consistent reconstruction: prior-completed sinogram + gated SART + wTV."""
    grid = grid or prior.grid
    if prior.grid != grid:
        raise ValueError("prior must live on the reconstruction grid")
    return _iterative_reconstruct(measured, grid, cfg, prior, on_tv_step)


def wtv_reconstruct(measured: Sinogram, cfg: ReconConfig, grid: ImageGrid,
                    on_tv_step=None) -> Image:
    """Reweighted-TV reconstruction from measured channels only, zero-initialized."""
    return _iterative_reconstruct(measured, grid, cfg, None, on_tv_step)


def measured_residual(sino: Sinogram, image: Image) -> float:
    """Relative residual of an HU image against the measured channels."""
    mu = hu_to_mu(image) if image.unit is Unit.HU else image
    fp = forward_project(mu, sino.geometry)
    m = sino.measured_mask
    diff_sq = float(((fp.values - sino.values)[:, m] ** 2).sum())
    return _rel_residual(diff_sq, float((sino.values[:, m] ** 2).sum()))
