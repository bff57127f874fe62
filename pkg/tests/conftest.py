import numpy as np
import pytest

from dcrct.core import FanBeamGeometry, Image, ImageGrid, Unit


@pytest.fixture(scope="session")
def table_geometry():
    return FanBeamGeometry(sdd=1200.0, sid=600.0, n_views=360, n_det=600,
                           det_spacing=1.0, n_det_virtual=1000)


@pytest.fixture(scope="session")
def table_grid():
    return ImageGrid(nx=256, ny=256, dx=1.25, dy=1.25)


@pytest.fixture(scope="session")
def small_geometry():
    # same physical extents as the full system, coarse sampling
    return FanBeamGeometry(sdd=1200.0, sid=600.0, n_views=90, n_det=96,
                           det_spacing=6.25, n_det_virtual=160)


@pytest.fixture(scope="session")
def small_grid():
    return ImageGrid(nx=64, ny=64, dx=5.0, dy=5.0)


@pytest.fixture(scope="session")
def tiny_geometry():
    return FanBeamGeometry(sdd=1200.0, sid=600.0, n_views=24, n_det=32,
                           det_spacing=10.0, n_det_virtual=48)


@pytest.fixture(scope="session")
def tiny_grid():
    return ImageGrid(nx=32, ny=32, dx=4.0, dy=4.0)


def random_image(grid: ImageGrid, seed: int, unit: Unit = Unit.MU_PER_MM,
                 scale: float = 1.0) -> Image:
    rng = np.random.default_rng(seed)
    return Image(grid, scale * rng.standard_normal(grid.shape), unit)
