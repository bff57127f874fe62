"""Quantitative evaluation: RMSE inside the FOV, whole-body RMSE, and SSIM."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .core import Image, Mask

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 2000.0  # HU dynamic range used for the stability constants


@dataclass(frozen=True)
class EvalReport:
    rmse_fov: float  # HU
    rmse_body: float  # HU
    ssim: float
    per_slice: tuple[dict, ...] = field(default_factory=tuple)

    def __post_init__(self):
        for v in (self.rmse_fov, self.rmse_body, self.ssim):
            if not np.isfinite(v):
                raise ValueError("report values must be finite")
        if self.ssim > 1.0 + 1e-12:
            raise ValueError("ssim cannot exceed 1")

    def to_dict(self) -> dict:
        return asdict(self)


def rmse(a: Image, b: Image, mask: Mask) -> float:
    if a.values.shape != b.values.shape or a.values.shape != mask.flags.shape:
        raise ValueError("shape mismatch")
    if not mask.flags.any():
        raise ValueError("empty evaluation mask")
    d = a.values[mask.flags] - b.values[mask.flags]
    return float(np.sqrt((d * d).mean()))


def body_mask(reference: Image, threshold_hu: float = -500.0) -> Mask:
    """Largest connected component above the threshold, holes filled."""
    fg = reference.values > threshold_hu
    labels, n = ndimage.label(fg)
    if n == 0:
        raise ValueError("no body found: reference is all air")
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
    largest = int(np.argmax(sizes)) + 1
    return Mask(reference.grid, ndimage.binary_fill_holes(labels == largest))


def _ssim_window() -> np.ndarray:
    half = SSIM_WINDOW // 2
    g = np.exp(-0.5 * (np.arange(-half, half + 1) / SSIM_SIGMA) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def ssim(a: Image, b: Image, mask: Mask | None = None) -> float:
    """Mean local SSIM (11x11 Gaussian window, sigma 1.5, L = 2000 HU).

    When a mask is given, the local SSIM map is averaged over it (typically
    the body region); otherwise over the full image.
    """
    if a.values.shape != b.values.shape:
        raise ValueError("shape mismatch")
    win = _ssim_window()
    conv = lambda im: ndimage.convolve(im, win, mode="reflect")
    x, y = a.values, b.values
    mu_x, mu_y = conv(x), conv(y)
    sxx = conv(x * x) - mu_x * mu_x
    syy = conv(y * y) - mu_y * mu_y
    sxy = conv(x * y) - mu_x * mu_y
    c1 = (SSIM_K1 * SSIM_RANGE) ** 2
    c2 = (SSIM_K2 * SSIM_RANGE) ** 2
    smap = ((2 * mu_x * mu_y + c1) * (2 * sxy + c2)) / \
           ((mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2))
    if mask is not None:
        if not mask.flags.any():
            raise ValueError("empty evaluation mask")
        return float(smap[mask.flags].mean())
    return float(smap.mean())


def evaluate(recon: Image, reference: Image, fov: Mask) -> EvalReport:
    body = body_mask(reference)
    return EvalReport(
        rmse_fov=rmse(recon, reference, fov),
        rmse_body=rmse(recon, reference, body),
        ssim=ssim(recon, reference, body),
    )
