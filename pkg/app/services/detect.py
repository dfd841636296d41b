"""Confidence map -> candidate objects.

S1 threshold, S2 group connected pixels, S3 drop small groups, S4 dilate,
S5 regroup the pre-dilation pixels by the dilated components.
"""
from pathlib import Path
from typing import List, Tuple, Union
import json
import logging
import math

import numpy as np
from pydantic import ValidationError
from scipy import ndimage

from app.schemas.detection import DetectionFile, DetectionRecord, PostprocessParams
from app.schemas.grid import GeoMeta
from app.services.exceptions import (
    ArgumentError,
    FormatError,
    IoError,
    describe_validation_error,
)
from app.services.grid import BinaryMask, ConfidenceGrid, LabelGrid, threshold
from app.services.objects import DetectedObject
from app.services.rle import decode_rle, encode_rle

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndimage.generate_binary_structure(2, 2)
    raise ArgumentError(f"Connectivity must be 4 or 8, got {connectivity}")


def _renumber(labels: np.ndarray) -> np.ndarray:
    """Relabel to 1..K in raster-scan order of each label's first pixel"""
    flat = labels.ravel()
    values, first = np.unique(flat, return_index=True)
    keep = values > 0
    values, first = values[keep], first[keep]
    mapping = np.zeros(int(flat.max(initial=0)) + 1, dtype=np.int32)
    mapping[values[np.argsort(first, kind="stable")]] = np.arange(1, values.size + 1, dtype=np.int32)
    return mapping[labels]


def connected_components(mask: BinaryMask, connectivity: int = 8) -> LabelGrid:
    labels, _ = ndimage.label(mask.bits, structure=_structure(connectivity))
    return LabelGrid(meta=mask.meta, labels=_renumber(labels))


def filter_small(labels: LabelGrid, min_area_px: int) -> LabelGrid:
    """Send components smaller than ``min_area_px`` to background"""
    if min_area_px <= 0:
        return labels
    keep = labels.sizes() >= min_area_px
    keep[0] = False
    kept = np.where(keep[labels.labels], labels.labels, 0)
    return LabelGrid(meta=labels.meta, labels=_renumber(kept))


def dilate(mask: BinaryMask, radius_px: int) -> BinaryMask:
    """Binary dilation by a (2r+1) x (2r+1) square"""
    if radius_px < 0:
        raise ArgumentError(f"Dilation radius must be >= 0, got {radius_px}")
    if radius_px == 0:
        return mask
    element = np.ones((2 * radius_px + 1, 2 * radius_px + 1), dtype=bool)
    return BinaryMask(meta=mask.meta, bits=ndimage.binary_dilation(mask.bits, structure=element))


def regroup(pre_labels: LabelGrid, dilated_mask: BinaryMask, connectivity: int = 8) -> LabelGrid:
    """Label pre-dilation pixels with the id of the dilated component covering them"""
    if pre_labels.labels.shape != dilated_mask.bits.shape:
        raise ArgumentError("Label grid and dilated mask differ in size")
    foreground = pre_labels.foreground()
    if np.any(foreground & ~dilated_mask.bits):
        raise ArgumentError("Dilated mask does not cover every pre-dilation pixel")

    grouped = connected_components(dilated_mask, connectivity).labels
    return LabelGrid(meta=pre_labels.meta, labels=_renumber(grouped * foreground))


def min_area_pixels(min_area_m2: float, gsd_m: float) -> int:
    # Tolerance keeps exact ratios such as 0.0009 / 0.0009 from rounding up
    return max(0, math.ceil(min_area_m2 / (gsd_m * gsd_m) - 1e-9))


def extract_objects(grid: ConfidenceGrid, labels: LabelGrid) -> List[DetectedObject]:
    """One object per label, scored by the mean confidence of its pixels"""
    flat = labels.labels.ravel()
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=labels.count + 1)
    bounds = np.cumsum(counts)
    values = grid.values.ravel().astype(np.float64)

    objects = []
    for label in range(1, labels.count + 1):
        indices = order[bounds[label - 1]:bounds[label]]
        member = values[indices]
        # Clip so rounding in the mean cannot leave the members' range
        confidence = float(np.clip(member.mean(), member.min(), member.max()))
        objects.append(
            DetectedObject(id=label, indices=indices, width=grid.meta.width, confidence=confidence)
        )
    return objects


def postprocess(grid: ConfidenceGrid, params: PostprocessParams = PostprocessParams()) -> List[DetectedObject]:
    seeds = threshold(grid, params.tau_seed)
    groups = connected_components(seeds, params.connectivity)
    min_px = min_area_pixels(params.min_area_m2, grid.meta.gsd_m)
    kept = filter_small(groups, min_px)
    dilated = dilate(BinaryMask(meta=grid.meta, bits=kept.foreground()), params.dilation_radius_px)
    final = regroup(kept, dilated, params.connectivity)

    objects = extract_objects(grid, final)
    for obj in objects:
        assert obj.confidence >= params.tau_seed, "object confidence below the seed threshold"
    logger.debug(
        f"{groups.count} groups, {kept.count} after min area {min_px}px, {len(objects)} objects"
    )
    return objects


def detections_to_file(image_id: str, objects: List[DetectedObject], meta: GeoMeta) -> DetectionFile:
    return DetectionFile(
        image=image_id,
        width=meta.width,
        height=meta.height,
        objects=[
            DetectionRecord(
                id=obj.id,
                confidence=obj.confidence,
                area_px=obj.area_px,
                pixels_rle=encode_rle(obj.indices),
            )
            for obj in objects
        ],
    )


def save_detections(path: PathLike, image_id: str, objects: List[DetectedObject], meta: GeoMeta, decimals: int = 6) -> None:
    doc = detections_to_file(image_id, objects, meta).model_dump(mode="json")
    for record in doc["objects"]:
        record["confidence"] = round(record["confidence"], decimals)
    try:
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def load_detections(path: PathLike, meta: GeoMeta) -> Tuple[str, List[DetectedObject]]:
    """Read a detection JSON file; runs are checked against ``meta``"""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: malformed JSON ({e})") from e

    try:
        doc = DetectionFile.model_validate(raw)
    except ValidationError as e:
        raise FormatError(f"{path}: {describe_validation_error(e)}") from e

    if (doc.width, doc.height) not in ((None, None), (meta.width, meta.height)):
        raise FormatError(
            f"{path}: detections are {doc.width}x{doc.height} but the image is {meta.width}x{meta.height}"
        )

    objects = []
    for record in doc.objects:
        indices = decode_rle(record.pixels_rle, meta.size)
        if indices.size != record.area_px:
            raise FormatError(f"{path}: object {record.id} area does not match its runs")
        objects.append(
            DetectedObject(id=record.id, indices=indices, width=meta.width, confidence=record.confidence)
        )
    return doc.image, objects
