import numpy as np
import pytest

from app.schemas.grid import GeoMeta
from app.services.objects import DetectedObject, GroundTruthObject


def block_indices(x0: int, y0: int, x1: int, y1: int, width: int) -> np.ndarray:
    """Flat indices of the half-open block [x0, x1) x [y0, y1)"""
    ys, xs = np.mgrid[y0:y1, x0:x1]
    return (ys * width + xs).ravel()


def pred(id: int, rect, confidence: float, width: int = 32) -> DetectedObject:
    return DetectedObject(id=id, indices=block_indices(*rect, width), width=width, confidence=confidence)


def truth(id: int, rect, width: int = 32, gsd_m: float = 0.03) -> GroundTruthObject:
    return GroundTruthObject(id=id, indices=block_indices(*rect, width), width=width, gsd_m=gsd_m)


@pytest.fixture
def meta_factory():
    def make(width: int = 32, height: int = 32, gsd_m: float = 0.03, **kwargs) -> GeoMeta:
        return GeoMeta(width=width, height=height, gsd_m=gsd_m, **kwargs)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20231019)
