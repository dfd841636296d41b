"""Pixel-set objects shared by ground truth and detections"""
from dataclasses import dataclass
from typing import FrozenSet, Tuple

import numpy as np

from app.services.exceptions import ArgumentError


@dataclass(frozen=True, eq=False)
class PixelObject:
    """A group of pixels stored as sorted, unique row-major flat indices"""
    id: int
    indices: np.ndarray
    width: int

    def __post_init__(self):
        indices = np.unique(np.asarray(self.indices, dtype=np.int64))
        if indices.size == 0:
            raise ArgumentError(f"Object {self.id} has no pixels")
        if indices[0] < 0:
            raise ArgumentError(f"Object {self.id} has a negative pixel index")
        indices.setflags(write=False)
        object.__setattr__(self, "indices", indices)

    @property
    def area_px(self) -> int:
        return int(self.indices.size)

    @property
    def pixels(self) -> FrozenSet[Tuple[int, int]]:
        ys, xs = np.divmod(self.indices, self.width)
        return frozenset(zip(xs.tolist(), ys.tolist()))

    @property
    def centroid(self) -> Tuple[float, float]:
        ys, xs = np.divmod(self.indices, self.width)
        return float(xs.mean()), float(ys.mean())


@dataclass(frozen=True, eq=False)
class GroundTruthObject(PixelObject):
    gsd_m: float = 1.0

    @property
    def area_m2(self) -> float:
        return self.area_px * self.gsd_m * self.gsd_m


@dataclass(frozen=True, eq=False)
class DetectedObject(PixelObject):
    """Candidate object; confidence is the mean confidence of its pixels"""
    confidence: float = 0.0

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 <= self.confidence <= 1.0:
            raise ArgumentError(f"Object {self.id} confidence {self.confidence} outside [0, 1]")
