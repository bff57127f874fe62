"""Measurement simulation: detector truncation and Poisson counting noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Sinogram


@dataclass(frozen=True)
class NoiseModel:
    i0: float  # photons per detector pixel before attenuation
    rng_seed: int = 0

    def __post_init__(self):
        if self.i0 <= 0:
            raise ValueError("i0 must be positive")


def truncate(sinogram: Sinogram) -> Sinogram:
    """Zero the channels outside the physical detector; measured values bit-identical."""
    mask = sinogram.measured_mask
    if mask.all():
        return sinogram
    values = sinogram.values.copy()
    values[:, ~mask] = 0.0
    return sinogram.with_values(values)


def add_poisson_noise(sinogram: Sinogram, model: NoiseModel) -> Sinogram:
    """Apply counting noise to measured channels: N ~ Poisson(i0 exp(-p)).

    Noisy line integral is -ln(max(N, 1) / i0); zero counts are clamped to one
    photon so the log stays finite. Unmeasured channels are untouched. Each view
    draws from its own (seed, view) RNG stream, so results are deterministic and
    independent of any parallel execution order.
    """
    p = sinogram.values
    mask = sinogram.measured_mask
    if np.any(p[:, mask] < 0):
        raise ValueError("line integrals must be nonnegative")
    values = p.copy()
    cols = np.flatnonzero(mask)
    for v in range(p.shape[0]):
        rng = np.random.default_rng([model.rng_seed, v])
        counts = rng.poisson(model.i0 * np.exp(-p[v, cols]))
        values[v, cols] = -np.log(np.maximum(counts, 1) / model.i0)
    return sinogram.with_values(values)
