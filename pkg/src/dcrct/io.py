"""File exchange formats and pipeline configuration.

Arrays travel as a pair of files: a JSON header (magic "DCRF1") describing
kind, shape, spacing, unit and optional geometry, and a raw little-endian
payload next to it (float32 for values, uint8 for masks, row-major). The
format is deliberately trivial so the training component can read and write
it from any language.
"""
from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .core import FanBeamGeometry, Image, ImageGrid, Mask, Sinogram, Unit
from .recon import ReconConfig
from .simulate import NoiseModel

MAGIC = "DCRF1"


class ConfigError(Exception):
    """Invalid configuration; maps to CLI exit code 2."""


class DataError(Exception):
    """Invalid or inconsistent data files; maps to CLI exit code 3."""


# ---------------------------------------------------------------- ArrayFile

def _payload_path(header_path: Path) -> Path:
    return header_path.with_suffix(".raw")


def _geometry_record(g: FanBeamGeometry) -> dict:
    return {
        "sdd": g.sdd, "sid": g.sid, "n_views": g.n_views, "n_det": g.n_det,
        "det_spacing": g.det_spacing, "n_det_virtual": g.n_det_virtual,
    }


def _geometry_from_record(rec: dict) -> FanBeamGeometry:
    return FanBeamGeometry(**rec)


def _write(path: str | Path, header: dict, payload: np.ndarray) -> Path:
    header_path = Path(path)
    if header_path.suffix != ".json":
        header_path = header_path.with_suffix(header_path.suffix + ".json")
    if payload.dtype == np.float32 and not np.all(np.isfinite(payload)):
        warnings.warn(f"non-finite values written to {header_path}", stacklevel=3)
    raw = _payload_path(header_path)
    header = {"magic": MAGIC, **header, "payload": raw.name}
    header_path.parent.mkdir(parents=True, exist_ok=True)
    raw.write_bytes(np.ascontiguousarray(payload).tobytes())
    header_path.write_text(json.dumps(header, indent=2))
    return header_path


def _read(path: str | Path) -> tuple[dict, bytes]:
    header_path = Path(path)
    try:
        header = json.loads(header_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read header {header_path}: {exc}") from exc
    if header.get("magic") != MAGIC:
        raise DataError(f"{header_path}: bad magic {header.get('magic')!r}")
    raw = header_path.parent / header["payload"]
    try:
        payload = raw.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read payload {raw}: {exc}") from exc
    elem = 1 if header["unit"] == "bool" else 4
    expected = int(np.prod(header["shape"])) * elem
    if len(payload) != expected:
        raise DataError(f"{raw}: payload is {len(payload)} bytes, expected {expected}")
    return header, payload


def save_image(path: str | Path, image: Image, **extra) -> Path:
    header = {
        "kind": "image",
        "shape": list(image.grid.shape),
        "spacing_mm": [image.grid.dy, image.grid.dx],
        "center_mm": [image.grid.cy, image.grid.cx],
        "unit": image.unit.value,
        **extra,
    }
    return _write(path, header, image.values.astype("<f4"))


def save_sinogram(path: str | Path, sino: Sinogram, **extra) -> Path:
    header = {
        "kind": "sinogram",
        "shape": [sino.geometry.n_views, sino.n_channels],
        "spacing_mm": [360.0 / sino.geometry.n_views, sino.geometry.det_spacing],
        "unit": "line_integral",
        "geometry": _geometry_record(sino.geometry),
        "measured_mask": [int(m) for m in sino.measured_mask],
        **extra,
    }
    return _write(path, header, sino.values.astype("<f4"))


def save_mask(path: str | Path, mask: Mask, **extra) -> Path:
    header = {
        "kind": "mask",
        "shape": list(mask.grid.shape),
        "spacing_mm": [mask.grid.dy, mask.grid.dx],
        "center_mm": [mask.grid.cy, mask.grid.cx],
        "unit": "bool",
        **extra,
    }
    return _write(path, header, mask.flags.astype(np.uint8))


def load_array(path: str | Path) -> tuple[dict, np.ndarray]:
    """Low-level load: header dict plus the payload decoded to its file dtype."""
    header, payload = _read(path)
    shape = tuple(header["shape"])
    dtype = np.uint8 if header["unit"] == "bool" else np.dtype("<f4")
    return header, np.frombuffer(payload, dtype=dtype).reshape(shape)


def load_image(path: str | Path) -> Image:
    header, arr = load_array(path)
    if header["kind"] != "image":
        raise DataError(f"{path}: expected an image file, got {header['kind']}")
    ny, nx = header["shape"]
    dy, dx = header["spacing_mm"]
    cy, cx = header.get("center_mm", [0.0, 0.0])
    grid = ImageGrid(nx=nx, ny=ny, dx=dx, dy=dy, cx=cx, cy=cy)
    unit = Unit.HU if header["unit"] == "HU" else Unit.MU_PER_MM
    return Image(grid, arr.astype(np.float64), unit)


def load_sinogram(path: str | Path) -> Sinogram:
    header, arr = load_array(path)
    if header["kind"] != "sinogram":
        raise DataError(f"{path}: expected a sinogram file, got {header['kind']}")
    geometry = _geometry_from_record(header["geometry"])
    mask = np.array(header["measured_mask"], dtype=bool)
    return Sinogram(geometry, arr.astype(np.float64), mask)


def load_mask(path: str | Path) -> Mask:
    header, arr = load_array(path)
    if header["kind"] != "mask":
        raise DataError(f"{path}: expected a mask file, got {header['kind']}")
    ny, nx = header["shape"]
    dy, dx = header["spacing_mm"]
    cy, cx = header.get("center_mm", [0.0, 0.0])
    return Mask(ImageGrid(nx=nx, ny=ny, dx=dx, dy=dy, cx=cx, cy=cy), arr.astype(bool))


# ------------------------------------------------------------ configuration

class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GeometryConfig(_StrictModel):
    sdd: float = 1200.0
    sid: float = 600.0
    n_views: int = Field(360, gt=0)
    n_det: int = Field(600, gt=0)
    det_spacing: float = Field(1.0, gt=0)
    n_det_virtual: int = Field(1000, gt=0)

    def build(self) -> FanBeamGeometry:
        try:
            return FanBeamGeometry(sdd=self.sdd, sid=self.sid, n_views=self.n_views,
                                   n_det=self.n_det, det_spacing=self.det_spacing,
                                   n_det_virtual=self.n_det_virtual)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


class GridConfig(_StrictModel):
    nx: int = Field(256, gt=0)
    ny: int = Field(256, gt=0)
    dx: float = Field(1.25, gt=0)
    dy: float = Field(1.25, gt=0)

    def build(self) -> ImageGrid:
        return ImageGrid(nx=self.nx, ny=self.ny, dx=self.dx, dy=self.dy)


class NoiseConfig(_StrictModel):
    i0: float = Field(1e5, gt=0)
    enabled: bool = True

    def build(self, seed: int) -> NoiseModel:
        return NoiseModel(i0=self.i0, rng_seed=seed)


class ReconSettings(_StrictModel):
    e1: float = Field(0.01, ge=0)
    e2: float = Field(0.5, ge=0)
    epsilon_tv: float = Field(5.0, gt=0)
    n_outer: int = Field(10, ge=0)
    n_tv_steps: int = Field(20, ge=0)
    sart_relaxation: float = Field(0.8, gt=0, lt=2)

    def build(self) -> ReconConfig:
        return ReconConfig(e1=self.e1, e2=self.e2, epsilon_tv=self.epsilon_tv,
                           n_outer=self.n_outer, n_tv_steps=self.n_tv_steps,
                           sart_relaxation=self.sart_relaxation)


class SurrogatePriorConfig(_StrictModel):
    blur_px: float = Field(5.0, ge=0)
    noise_hu: float = Field(30.0, ge=0)


class PipelineConfig(_StrictModel):
    geometry: GeometryConfig = GeometryConfig()
    grid: GridConfig = GridConfig()
    noise: NoiseConfig = NoiseConfig()
    recon: ReconSettings = ReconSettings()
    surrogate_prior: SurrogatePriorConfig = SurrogatePriorConfig()
    seed: int = 0
    n_phantoms: int = Field(1, gt=0)
    window_hu: tuple[float, float] = (-600.0, 500.0)  # PNG display window

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        try:
            return cls.model_validate(doc)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
