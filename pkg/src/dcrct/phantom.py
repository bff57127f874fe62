"""Analytic ellipse phantoms: rasterization, closed-form sinograms, random sampling.

Phantoms are additive in HU over a -1000 HU (air) background, so the analytic
line integral of the attenuation is a sum of per-ellipse chord lengths. This
gives a closed-form oracle for validating the discrete projector.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import MU_WATER, FanBeamGeometry, Image, ImageGrid, Sinogram, Unit


@dataclass(frozen=True)
class Ellipse:
    cx: float  # mm
    cy: float  # mm
    a: float  # semi-axis, mm
    b: float  # semi-axis, mm
    theta: float  # rotation, rad
    delta_hu: float  # additive HU contribution

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("semi-axes must be positive")

    def max_extent(self) -> float:
        """Upper bound on distance from isocenter to any point of the ellipse."""
        return math.hypot(self.cx, self.cy) + max(self.a, self.b)


@dataclass(frozen=True)
class EllipsePhantom:
    ellipses: tuple[Ellipse, ...]
    background_hu: float = -1000.0

    def __post_init__(self):
        object.__setattr__(self, "ellipses", tuple(self.ellipses))

    def to_json(self) -> str:
        recs = [
            {"cx": e.cx, "cy": e.cy, "a": e.a, "b": e.b, "theta": e.theta, "delta_hu": e.delta_hu}
            for e in self.ellipses
        ]
        return json.dumps({"background_hu": self.background_hu, "ellipses": recs}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EllipsePhantom":
        doc = json.loads(text)
        ells = tuple(Ellipse(**rec) for rec in doc["ellipses"])
        return cls(ells, background_hu=doc.get("background_hu", -1000.0))


def rasterize(phantom: EllipsePhantom, grid: ImageGrid) -> Image:
    """Point-sample the analytic HU field at pixel centers."""
    x = grid.x_coords()[None, :]
    y = grid.y_coords()[:, None]
    hu = np.full(grid.shape, phantom.background_hu, dtype=np.float64)
    for e in phantom.ellipses:
        ct, st = math.cos(e.theta), math.sin(e.theta)
        xr = (x - e.cx) * ct + (y - e.cy) * st
        yr = -(x - e.cx) * st + (y - e.cy) * ct
        inside = (xr / e.a) ** 2 + (yr / e.b) ** 2 <= 1.0
        hu += np.where(inside, e.delta_hu, 0.0)
    return Image(grid, hu, Unit.HU)


def _chord_lengths(e: Ellipse, px, py, ux, uy):
    """Chord length of rays p + t*u (u unit) through the ellipse, closed form."""
    ct, st = math.cos(e.theta), math.sin(e.theta)
    # ray origin and direction in the ellipse frame, axes scaled to a unit circle
    rx = ((px - e.cx) * ct + (py - e.cy) * st) / e.a
    ry = (-(px - e.cx) * st + (py - e.cy) * ct) / e.b
    dx = (ux * ct + uy * st) / e.a
    dy = (-ux * st + uy * ct) / e.b
    A = dx * dx + dy * dy
    B = 2.0 * (rx * dx + ry * dy)
    C = rx * rx + ry * ry - 1.0
    disc = B * B - 4.0 * A * C
    return np.where(disc > 0.0, np.sqrt(np.maximum(disc, 0.0)) / A, 0.0)


def analytic_sinogram(phantom: EllipsePhantom, geometry: FanBeamGeometry) -> Sinogram:
    """Closed-form fan-beam line integrals on the virtual detector.

    Each value is the sum over ellipses of chord length times the ellipse's
    attenuation contribution (0.02 * delta_hu / 1000 per mm); the air
    background contributes nothing.
    """
    sx, sy = geometry.source_positions()
    s = geometry.det_coords(virtual=True)
    cosb, sinb = np.cos(geometry.angles), np.sin(geometry.angles)
    # detector point of channel c at view v
    dcx = (geometry.sid - geometry.sdd) * cosb[:, None] - s[None, :] * sinb[:, None]
    dcy = (geometry.sid - geometry.sdd) * sinb[:, None] + s[None, :] * cosb[:, None]
    ux = dcx - sx[:, None]
    uy = dcy - sy[:, None]
    norm = np.hypot(ux, uy)
    ux /= norm
    uy /= norm
    px = np.broadcast_to(sx[:, None], ux.shape)
    py = np.broadcast_to(sy[:, None], ux.shape)
    values = np.zeros(ux.shape, dtype=np.float64)
    for e in phantom.ellipses:
        mu = MU_WATER * e.delta_hu / 1000.0
        values += mu * _chord_lengths(e, px, py, ux, uy)
    return Sinogram(geometry, values, geometry.measured_mask())


def sample_phantom(rng_seed: int, truncating: bool,
                   r_fov: float = 145.521, r_ext: float = 230.769,
                   half_extent: float = 160.0) -> EllipsePhantom:
    """Deterministically sample a body phantom with interior features.

    With ``truncating`` the body reaches past the physical FOV radius along x
    and two arm ellipses are placed between ``r_fov`` and ``r_ext``; without
    it, everything stays inside ``r_fov``. All mass stays inside ``r_ext``
    and inside the reconstruction square of ``half_extent`` (the default
    grid is narrower than the extended FOV circle, so truncated content goes
    where the square actually reaches: along x for the body, along the grid
    diagonals for the arms).
    """
    rng = np.random.default_rng(rng_seed)
    margin = 4.0
    ells = []
    body_cx = rng.uniform(-2.0, 2.0)
    body_cy = rng.uniform(-3.0, 3.0)
    if truncating:
        a_hi = min(half_extent, r_ext) - margin - abs(body_cx)
        a = rng.uniform(min(1.045 * r_fov, a_hi - 1.0), a_hi)
        b = rng.uniform(0.65, 0.9) * min(a, r_fov - margin - abs(body_cy))
    else:
        a = rng.uniform(0.6 * r_fov, r_fov - margin - abs(body_cx))
        b = rng.uniform(0.6, 0.95) * a
    body = Ellipse(body_cx, body_cy, a, b, 0.0, rng.uniform(950.0, 1050.0))
    ells.append(body)

    n_inner = int(rng.integers(3, 9))
    for _ in range(n_inner):
        # keep interior features inside the body (and thus inside its bounds)
        fa = rng.uniform(4.0, 0.35 * b)
        fb = rng.uniform(4.0, 0.35 * b)
        rad = rng.uniform(0.0, 0.75)
        ang = rng.uniform(0.0, 2.0 * math.pi)
        fcx = body_cx + rad * (a - max(fa, fb) - 2.0) * math.cos(ang)
        fcy = body_cy + rad * (b - max(fa, fb) - 2.0) * math.sin(ang)
        ells.append(Ellipse(fcx, fcy, fa, fb, rng.uniform(0.0, math.pi),
                            rng.uniform(-900.0, 1200.0)))

    if truncating:
        # arms sit past the FOV circle along the grid diagonals, where the
        # square grid still covers them
        for quadrant in rng.permutation(4)[:2]:
            arm_r = rng.uniform(24.0, 34.0)
            theta = (0.25 + 0.5 * quadrant) * math.pi + rng.uniform(-0.03, 0.03)
            d = max(abs(math.cos(theta)), abs(math.sin(theta)))
            rho_hi = min((half_extent - margin - arm_r) / d, r_ext - margin - arm_r)
            rho_lo = min(r_fov + 0.3 * arm_r, rho_hi - 1.0)
            rho = rng.uniform(rho_lo, rho_hi)
            ells.append(Ellipse(rho * math.cos(theta), rho * math.sin(theta),
                                arm_r, rng.uniform(0.7, 1.0) * arm_r,
                                rng.uniform(0.0, math.pi), rng.uniform(900.0, 1100.0)))
    return EllipsePhantom(tuple(ells))
