"""Polygon annotations: parsing, validation and pixel-center rasterization"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union
import json
import logging

import numpy as np
from pydantic import ValidationError
from shapely.geometry import LinearRing, Polygon

from app.schemas.annotation import AnnotationFile, PolygonAnnotation
from app.schemas.grid import GeoMeta
from app.services.exceptions import (
    FormatError,
    GeometryError,
    IoError,
    describe_validation_error,
)
from app.services.grid import BinaryMask
from app.services.objects import GroundTruthObject

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

# Vertices may sit up to one pixel outside the frame
BOUNDS_TOLERANCE_PX = 1.0


@dataclass(frozen=True)
class AnnotationSet:
    image_id: str
    meta: GeoMeta
    polygons: Tuple[PolygonAnnotation, ...]

    def to_file(self) -> AnnotationFile:
        return AnnotationFile(
            image=self.image_id,
            width=self.meta.width,
            height=self.meta.height,
            gsd_m=self.meta.gsd_m,
            altitude_m=self.meta.altitude_m,
            tag=self.meta.tag,
            polygons=list(self.polygons),
        )


def validate_polygon(polygon: PolygonAnnotation, meta: GeoMeta) -> None:
    """Reject self-intersecting polygons and vertices far outside the image"""
    ring = LinearRing(polygon.vertices)
    if not ring.is_simple:
        raise GeometryError(f"Polygon {polygon.id} is self-intersecting")

    xs = np.array([v[0] for v in polygon.vertices])
    ys = np.array([v[1] for v in polygon.vertices])
    tol = BOUNDS_TOLERANCE_PX
    if xs.min() < -tol or ys.min() < -tol or xs.max() > meta.width + tol or ys.max() > meta.height + tol:
        raise GeometryError(
            f"Polygon {polygon.id} extends outside the {meta.width}x{meta.height} image"
        )


def annotation_set_from_file(doc: AnnotationFile) -> AnnotationSet:
    meta = GeoMeta(
        width=doc.width,
        height=doc.height,
        gsd_m=doc.gsd_m,
        altitude_m=doc.altitude_m,
        tag=doc.tag,
    )
    for polygon in doc.polygons:
        validate_polygon(polygon, meta)
    return AnnotationSet(image_id=doc.image, meta=meta, polygons=tuple(doc.polygons))


def parse_annotations(path: PathLike) -> AnnotationSet:
    """Load and validate one annotation JSON file"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}") from e

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: malformed JSON ({e})") from e

    try:
        doc = AnnotationFile.model_validate(raw)
    except ValidationError as e:
        raise FormatError(f"{path}: {describe_validation_error(e)}") from e

    annotations = annotation_set_from_file(doc)
    logger.debug(f"Parsed {len(annotations.polygons)} polygons for image {annotations.image_id}")
    return annotations


def dump_annotations(annotations: AnnotationSet, path: PathLike) -> None:
    doc = annotations.to_file().model_dump(mode="json", by_alias=True, exclude_none=True)
    try:
        Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def rasterize(polygon: PolygonAnnotation, meta: GeoMeta) -> BinaryMask:
    """Foreground pixels are those whose center lies inside the polygon.

    Even-odd rule with a top-left convention: a center on an edge is inside
    only when the interior lies to its right or below it.
    """
    if Polygon(polygon.vertices).area == 0.0:
        raise GeometryError(f"Polygon {polygon.id} has zero area")

    verts = np.asarray(polygon.vertices, dtype=np.float64)
    bits = np.zeros(meta.shape, dtype=bool)

    x_lo = max(int(np.floor(verts[:, 0].min() - 0.5)), 0)
    x_hi = min(int(np.ceil(verts[:, 0].max())), meta.width)
    y_lo = max(int(np.floor(verts[:, 1].min() - 0.5)), 0)
    y_hi = min(int(np.ceil(verts[:, 1].max())), meta.height)
    if x_lo >= x_hi or y_lo >= y_hi:
        return BinaryMask(meta=meta, bits=bits)

    xc = np.arange(x_lo, x_hi) + 0.5
    yc = np.arange(y_lo, y_hi) + 0.5

    x0, y0 = verts[:, 0], verts[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    y_min = np.minimum(y0, y1)
    y_max = np.maximum(y0, y1)
    dy = np.where(y1 == y0, 1.0, y1 - y0)

    # rows x edges: half-open [y_min, y_max) so each vertex is counted once
    crosses = (y_min[None, :] <= yc[:, None]) & (yc[:, None] < y_max[None, :])
    x_cross = x0[None, :] + (yc[:, None] - y0[None, :]) * (x1 - x0)[None, :] / dy[None, :]

    # rows x cols x edges
    left_of_center = crosses[:, None, :] & (x_cross[:, None, :] <= xc[None, :, None])
    inside = (left_of_center.sum(axis=2) % 2) == 1
    bits[y_lo:y_hi, x_lo:x_hi] = inside
    return BinaryMask(meta=meta, bits=bits)


def rasterize_set(annotations: AnnotationSet) -> BinaryMask:
    """Union of every polygon raster"""
    bits = np.zeros(annotations.meta.shape, dtype=bool)
    for polygon in annotations.polygons:
        bits |= rasterize(polygon, annotations.meta).bits
    return BinaryMask(meta=annotations.meta, bits=bits)


def truth_objects(annotations: AnnotationSet) -> Tuple[List[GroundTruthObject], List[str]]:
    """One ground-truth object per polygon; polygons covering no pixel center are dropped.

    Returns the objects and a list of warnings naming the dropped polygons.
    """
    objects: List[GroundTruthObject] = []
    warnings: List[str] = []
    for polygon in annotations.polygons:
        mask = rasterize(polygon, annotations.meta)
        indices = np.flatnonzero(mask.bits)
        if indices.size == 0:
            message = (
                f"Polygon {polygon.id} in image {annotations.image_id} covers no pixel center; dropped"
            )
            logger.debug(message)
            warnings.append(message)
            continue
        objects.append(
            GroundTruthObject(
                id=polygon.id,
                indices=indices,
                width=annotations.meta.width,
                gsd_m=annotations.meta.gsd_m,
            )
        )
    return objects, warnings
