"""Ray-driven fan-beam projector (Joseph-style) and its exact adjoint.

The forward operator samples the image with linear interpolation along the
driving axis of each ray; the backprojector scatters with the identical
weights, so <A x, y> == <x, A^T y> holds to rounding. Masked application over
the virtual detector realizes the measured / truncated sub-operators.

Inner loops are numba-compiled; accumulation order is fixed, so results are
bitwise reproducible.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

from .core import FanBeamGeometry, Image, ImageGrid, Sinogram, Unit


@njit(cache=True)
def _ray_forward(values, nx, ny, dx, dy, x0, y0, sx, sy, px, py):
    """Line integral of one ray from (sx, sy) to (px, py)."""
    ux = px - sx
    uy = py - sy
    norm = np.sqrt(ux * ux + uy * uy)
    ux /= norm
    uy /= norm
    acc = 0.0
    if abs(ux) >= abs(uy):
        step = dx / abs(ux)
        for i in range(nx):
            x = x0 + i * dx
            t = (x - sx) / ux
            jf = (sy + t * uy - y0) / dy
            j0 = int(np.floor(jf))
            w = jf - j0
            if 0 <= j0 < ny - 1:
                acc += step * ((1.0 - w) * values[j0, i] + w * values[j0 + 1, i])
            elif j0 == -1:
                acc += step * w * values[0, i]
            elif j0 == ny - 1:
                acc += step * (1.0 - w) * values[ny - 1, i]
    else:
        step = dy / abs(uy)
        for j in range(ny):
            y = y0 + j * dy
            t = (y - sy) / uy
            if_ = (sx + t * ux - x0) / dx
            i0 = int(np.floor(if_))
            w = if_ - i0
            if 0 <= i0 < nx - 1:
                acc += step * ((1.0 - w) * values[j, i0] + w * values[j, i0 + 1])
            elif i0 == -1:
                acc += step * w * values[j, 0]
            elif i0 == nx - 1:
                acc += step * (1.0 - w) * values[j, nx - 1]
    return acc


@njit(cache=True)
def _ray_backward(out, nx, ny, dx, dy, x0, y0, sx, sy, px, py, val):
    """Scatter val along one ray with the transpose of _ray_forward's weights."""
    ux = px - sx
    uy = py - sy
    norm = np.sqrt(ux * ux + uy * uy)
    ux /= norm
    uy /= norm
    if abs(ux) >= abs(uy):
        step = dx / abs(ux)
        for i in range(nx):
            x = x0 + i * dx
            t = (x - sx) / ux
            jf = (sy + t * uy - y0) / dy
            j0 = int(np.floor(jf))
            w = jf - j0
            if 0 <= j0 < ny - 1:
                out[j0, i] += val * step * (1.0 - w)
                out[j0 + 1, i] += val * step * w
            elif j0 == -1:
                out[0, i] += val * step * w
            elif j0 == ny - 1:
                out[ny - 1, i] += val * step * (1.0 - w)
    else:
        step = dy / abs(uy)
        for j in range(ny):
            y = y0 + j * dy
            t = (y - sy) / uy
            if_ = (sx + t * ux - x0) / dx
            i0 = int(np.floor(if_))
            w = if_ - i0
            if 0 <= i0 < nx - 1:
                out[j, i0] += val * step * (1.0 - w)
                out[j, i0 + 1] += val * step * w
            elif i0 == -1:
                out[j, 0] += val * step * w
            elif i0 == nx - 1:
                out[j, nx - 1] += val * step * (1.0 - w)


@njit(cache=True, parallel=True)
def _forward_all(values, nx, ny, dx, dy, x0, y0, sxs, sys, pxs, pys, out):
    for v in prange(sxs.shape[0]):
        for c in range(pxs.shape[1]):
            out[v, c] = _ray_forward(values, nx, ny, dx, dy, x0, y0,
                                     sxs[v], sys[v], pxs[v, c], pys[v, c])


@njit(cache=True)
def _forward_view(values, nx, ny, dx, dy, x0, y0, sx, sy, pxs, pys, chans, out):
    for k in range(chans.shape[0]):
        c = chans[k]
        out[c] = _ray_forward(values, nx, ny, dx, dy, x0, y0, sx, sy, pxs[c], pys[c])


@njit(cache=True)
def _backward_all(sino, nx, ny, dx, dy, x0, y0, sxs, sys, pxs, pys, chans, out):
    for v in range(sxs.shape[0]):
        for k in range(chans.shape[0]):
            c = chans[k]
            _ray_backward(out, nx, ny, dx, dy, x0, y0, sxs[v], sys[v],
                          pxs[v, c], pys[v, c], sino[v, c])


@njit(cache=True)
def _backward_view(vals, nx, ny, dx, dy, x0, y0, sx, sy, pxs, pys, chans, out):
    for k in range(chans.shape[0]):
        c = chans[k]
        _ray_backward(out, nx, ny, dx, dy, x0, y0, sx, sy, pxs[c], pys[c], vals[c])


def _detector_points(geometry: FanBeamGeometry):
    """World positions of each (view, virtual channel) detector cell center."""
    s = geometry.det_coords(virtual=True)
    cosb, sinb = np.cos(geometry.angles), np.sin(geometry.angles)
    px = (geometry.sid - geometry.sdd) * cosb[:, None] - s[None, :] * sinb[:, None]
    py = (geometry.sid - geometry.sdd) * sinb[:, None] + s[None, :] * cosb[:, None]
    return np.ascontiguousarray(px), np.ascontiguousarray(py)


def _grid_params(grid: ImageGrid):
    x = grid.x_coords()
    y = grid.y_coords()
    return grid.nx, grid.ny, grid.dx, grid.dy, x[0], y[0]


def _check_source_outside(geometry: FanBeamGeometry, grid: ImageGrid):
    x = grid.x_coords()
    y = grid.y_coords()
    half_diag = np.hypot(max(abs(x[0]), abs(x[-1])) + grid.dx, max(abs(y[0]), abs(y[-1])) + grid.dy)
    if geometry.sid <= half_diag:
        raise ValueError("degenerate geometry: source inside the image grid")


def _channel_indices(n_channels: int, channel_mask: np.ndarray | None) -> np.ndarray:
    if channel_mask is None:
        return np.arange(n_channels, dtype=np.int64)
    m = np.asarray(channel_mask, dtype=bool)
    if m.shape != (n_channels,):
        raise ValueError("channel mask length must equal channel count")
    return np.flatnonzero(m).astype(np.int64)


def forward_project(image: Image, geometry: FanBeamGeometry) -> Sinogram:
    """Project an attenuation image onto the full virtual detector."""
    if image.unit is not Unit.MU_PER_MM:
        raise ValueError("forward_project expects an attenuation image")
    _check_source_outside(geometry, image.grid)
    nx, ny, dx, dy, x0, y0 = _grid_params(image.grid)
    sxs, sys = geometry.source_positions()
    pxs, pys = _detector_points(geometry)
    out = np.empty((geometry.n_views, geometry.n_det_virtual), dtype=np.float64)
    _forward_all(image.values, nx, ny, dx, dy, x0, y0, sxs, sys, pxs, pys, out)
    return Sinogram(geometry, out, geometry.measured_mask())


def back_project(sinogram: Sinogram, grid: ImageGrid,
                 channel_mask: np.ndarray | None = None) -> Image:
    """Exact transpose of forward_project, restricted to unmasked channels."""
    geometry = sinogram.geometry
    _check_source_outside(geometry, grid)
    nx, ny, dx, dy, x0, y0 = _grid_params(grid)
    sxs, sys = geometry.source_positions()
    pxs, pys = _detector_points(geometry)
    chans = _channel_indices(sinogram.n_channels, channel_mask)
    out = np.zeros((ny, nx), dtype=np.float64)
    _backward_all(sinogram.values, nx, ny, dx, dy, x0, y0, sxs, sys, pxs, pys, chans, out)
    return Image(grid, out, Unit.MU_PER_MM)


def row_sums(geometry: FanBeamGeometry, grid: ImageGrid) -> Sinogram:
    """A applied to the all-ones image (per-ray weight totals)."""
    ones = Image(grid, np.ones(grid.shape), Unit.MU_PER_MM)
    return forward_project(ones, geometry)


def col_sums(geometry: FanBeamGeometry, grid: ImageGrid,
             channel_mask: np.ndarray | None = None) -> Image:
    """A^T applied to the all-ones sinogram over unmasked channels."""
    ones = Sinogram(geometry, np.ones((geometry.n_views, geometry.n_det_virtual)),
                    geometry.measured_mask())
    return back_project(ones, grid, channel_mask)


class ViewProjector:
    """Per-view forward/backward application for view-sequential SART sweeps.

    Caches the detector sampling geometry and, per channel set, the per-view
    column sums so repeated sweeps do not recompute them.
    """

    def __init__(self, geometry: FanBeamGeometry, grid: ImageGrid):
        _check_source_outside(geometry, grid)
        self.geometry = geometry
        self.grid = grid
        self._gp = _grid_params(grid)
        sxs, sys = geometry.source_positions()
        self._sxs, self._sys = sxs, sys
        self._pxs, self._pys = _detector_points(geometry)
        self._col_sums_cache: dict[bytes, np.ndarray] = {}
        self._row_sums_cache: dict[bytes, np.ndarray] = {}

    def forward_view(self, values: np.ndarray, view: int, chans: np.ndarray) -> np.ndarray:
        nx, ny, dx, dy, x0, y0 = self._gp
        out = np.zeros(self.geometry.n_det_virtual, dtype=np.float64)
        _forward_view(values, nx, ny, dx, dy, x0, y0,
                      self._sxs[view], self._sys[view],
                      self._pxs[view], self._pys[view], chans, out)
        return out

    def backward_view(self, sino_row: np.ndarray, view: int, chans: np.ndarray,
                      out: np.ndarray) -> None:
        nx, ny, dx, dy, x0, y0 = self._gp
        _backward_view(sino_row, nx, ny, dx, dy, x0, y0,
                       self._sxs[view], self._sys[view],
                       self._pxs[view], self._pys[view], chans, out)

    def view_row_sums(self, chans: np.ndarray) -> np.ndarray:
        """Row sums A_v 1 for every view, [n_views][n_channels]."""
        key = chans.tobytes()
        if key not in self._row_sums_cache:
            ones = np.ones(self.grid.shape, dtype=np.float64)
            rows = np.zeros((self.geometry.n_views, self.geometry.n_det_virtual))
            for v in range(self.geometry.n_views):
                rows[v] = self.forward_view(ones, v, chans)
            self._row_sums_cache[key] = rows
        return self._row_sums_cache[key]

    def view_col_sums(self, chans: np.ndarray) -> np.ndarray:
        """Column sums A_v^T 1 per view, [n_views][ny][nx]."""
        key = chans.tobytes()
        if key not in self._col_sums_cache:
            ny, nx = self.grid.shape
            cols = np.zeros((self.geometry.n_views, ny, nx), dtype=np.float64)
            ones = np.ones(self.geometry.n_det_virtual, dtype=np.float64)
            for v in range(self.geometry.n_views):
                self.backward_view(ones, v, chans, cols[v])
            self._col_sums_cache[key] = cols
        return self._col_sums_cache[key]
