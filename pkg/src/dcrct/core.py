"""Shared value types: image grids, images, fan-beam geometry, sinograms, masks.

All types are immutable after construction and safe to share between threads.
Internal arithmetic is float64; file exchange (see ``dcrct.io``) is float32.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

MU_WATER = 0.02  # attenuation of water in 1/mm at ~70 keV effective energy


class Unit(Enum):
    HU = "HU"
    MU_PER_MM = "mu_per_mm"


@dataclass(frozen=True)
class ImageGrid:
    """2-D pixel lattice with physical spacing, centered on the isocenter."""

    nx: int
    ny: int
    dx: float
    dy: float
    cx: float = 0.0
    cy: float = 0.0

    def __post_init__(self):
        if self.nx <= 0 or self.ny <= 0:
            raise ValueError("pixel counts must be positive")
        if self.dx <= 0 or self.dy <= 0:
            raise ValueError("pixel spacing must be positive")

    def x_coords(self) -> np.ndarray:
        """World x of pixel centers, index i = 0..nx-1."""
        return self.cx + (np.arange(self.nx) - (self.nx - 1) / 2.0) * self.dx

    def y_coords(self) -> np.ndarray:
        return self.cy + (np.arange(self.ny) - (self.ny - 1) / 2.0) * self.dy

    def world_from_index(self, i, j):
        """Pixel index (i, j) -> world (x, y) mm. Affine and exactly invertible."""
        x = self.cx + (np.asarray(i) - (self.nx - 1) / 2.0) * self.dx
        y = self.cy + (np.asarray(j) - (self.ny - 1) / 2.0) * self.dy
        return x, y

    def index_from_world(self, x, y):
        i = (np.asarray(x) - self.cx) / self.dx + (self.nx - 1) / 2.0
        j = (np.asarray(y) - self.cy) / self.dy + (self.ny - 1) / 2.0
        return i, j

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)


def _as_readonly(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Image:
    grid: ImageGrid
    values: np.ndarray  # [ny][nx]
    unit: Unit

    def __post_init__(self):
        v = _as_readonly(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("image values must be finite")
        object.__setattr__(self, "values", v)

    def with_values(self, values: np.ndarray, unit: Unit | None = None) -> "Image":
        return Image(self.grid, values, unit or self.unit)


@dataclass(frozen=True)
class Mask:
    grid: ImageGrid
    flags: np.ndarray  # [ny][nx] bool

    def __post_init__(self):
        f = np.ascontiguousarray(self.flags, dtype=bool)
        if f.shape != self.grid.shape:
            raise ValueError("mask shape mismatch")
        f.setflags(write=False)
        object.__setattr__(self, "flags", f)


@dataclass(frozen=True)
class FanBeamGeometry:
    """Circular source trajectory with a flat equispaced detector.

    The physical detector has ``n_det`` channels; computations run on an
    extended virtual detector of ``n_det_virtual`` channels sharing the same
    spacing and center. Channels outside the physical detector model the
    truncated region.
    """

    sdd: float  # source-to-detector distance, mm
    sid: float  # source-to-isocenter distance, mm
    n_views: int
    n_det: int
    det_spacing: float
    n_det_virtual: int
    angles: np.ndarray = field(default=None)  # rad, uniform over 2*pi

    def __post_init__(self):
        if not (self.sdd > self.sid > 0):
            raise ValueError("require sdd > sid > 0")
        if self.n_det_virtual < self.n_det:
            raise ValueError("virtual detector must not be narrower than physical")
        if self.n_views <= 0 or self.n_det <= 0:
            raise ValueError("counts must be positive")
        if self.det_spacing <= 0:
            raise ValueError("detector spacing must be positive")
        angles = self.angles
        if angles is None:
            angles = np.arange(self.n_views) * (2.0 * np.pi / self.n_views)
        angles = _as_readonly(angles)
        if angles.shape != (self.n_views,):
            raise ValueError("angles length must equal n_views")
        if np.any(np.diff(angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        object.__setattr__(self, "angles", angles)

    def det_coords(self, virtual: bool = True) -> np.ndarray:
        """Detector coordinates (mm) of channel centers, detector-centered."""
        n = self.n_det_virtual if virtual else self.n_det
        return (np.arange(n) - (n - 1) / 2.0) * self.det_spacing

    def measured_mask(self) -> np.ndarray:
        """Per virtual channel: True if inside the physical detector."""
        s = self.det_coords(virtual=True)
        return np.abs(s) <= self.n_det * self.det_spacing / 2.0

    def source_positions(self) -> tuple[np.ndarray, np.ndarray]:
        return self.sid * np.cos(self.angles), self.sid * np.sin(self.angles)

    def fov_radius(self, virtual: bool = False) -> float:
        n = self.n_det_virtual if virtual else self.n_det
        w = n * self.det_spacing / 2.0
        return self.sid * math.sin(math.atan(w / self.sdd))


@dataclass(frozen=True)
class Sinogram:
    """Line integrals [n_views][n_channels] plus the per-channel measured flag."""

    geometry: FanBeamGeometry
    values: np.ndarray
    measured_mask: np.ndarray  # [n_channels] bool, constant across views

    def __post_init__(self):
        v = _as_readonly(self.values)
        if v.ndim != 2 or v.shape[0] != self.geometry.n_views:
            raise ValueError("sinogram shape must be [n_views][n_channels]")
        if not np.all(np.isfinite(v)):
            raise ValueError("sinogram values must be finite")
        m = np.ascontiguousarray(self.measured_mask, dtype=bool)
        if m.shape != (v.shape[1],):
            raise ValueError("measured_mask length must equal channel count")
        m.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "measured_mask", m)

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray, measured_mask: np.ndarray | None = None) -> "Sinogram":
        m = self.measured_mask if measured_mask is None else measured_mask
        return Sinogram(self.geometry, values, m)


def fov_mask(geometry: FanBeamGeometry, grid: ImageGrid, virtual: bool = False) -> Mask:
    """Pixels whose center lies inside the (physical or virtual) scan FOV circle."""
    r = geometry.fov_radius(virtual=virtual)
    x = grid.x_coords()[None, :]
    y = grid.y_coords()[:, None]
    return Mask(grid, x * x + y * y <= r * r)


def hu_to_mu(image: Image) -> Image:
    """HU -> attenuation: mu = mu_water * (1 + HU/1000)."""
    if image.unit is not Unit.HU:
        raise ValueError("hu_to_mu expects an HU image")
    return Image(image.grid, MU_WATER * (1.0 + image.values / 1000.0), Unit.MU_PER_MM)


def mu_to_hu(image: Image) -> Image:
    if image.unit is not Unit.MU_PER_MM:
        raise ValueError("mu_to_hu expects an attenuation image")
    return Image(image.grid, (image.values / MU_WATER - 1.0) * 1000.0, Unit.HU)


def mu_values_to_hu(values: np.ndarray) -> np.ndarray:
    return (values / MU_WATER - 1.0) * 1000.0


def hu_values_to_mu(values: np.ndarray) -> np.ndarray:
    return MU_WATER * (1.0 + values / 1000.0)
