"""Seeded synthetic scenes: rectangular panels, their annotations and a confidence map"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union
import logging

import numpy as np

from app.schemas.annotation import PolygonAnnotation
from app.schemas.grid import GeoMeta
from app.services.annotate import AnnotationSet, dump_annotations
from app.services.grid import ConfidenceGrid, gsd_to_altitude, save_confidence_grid

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SLOT_PX = 32
MARGIN_PX = 4


@dataclass(frozen=True)
class SyntheticScene:
    annotations: AnnotationSet
    grid: ConfidenceGrid


def _panels(rng: np.random.Generator, size: int, n_max: int) -> List[Tuple[int, int, int, int]]:
    """Non-touching rectangles (x0, y0, x1, y1), one per randomly chosen slot"""
    slots_per_side = size // SLOT_PX
    n_slots = slots_per_side * slots_per_side
    chosen = rng.choice(n_slots, size=min(n_max, n_slots), replace=False)
    rects = []
    for slot in sorted(chosen.tolist()):
        sy, sx = divmod(slot, slots_per_side)
        w, h = rng.integers(10, SLOT_PX - 2 * MARGIN_PX + 1, size=2)
        x0 = sx * SLOT_PX + MARGIN_PX + int(rng.integers(0, SLOT_PX - 2 * MARGIN_PX - w + 1))
        y0 = sy * SLOT_PX + MARGIN_PX + int(rng.integers(0, SLOT_PX - 2 * MARGIN_PX - h + 1))
        rects.append((x0, y0, x0 + int(w), y0 + int(h)))
    return rects


def make_scene(
    image_id: str,
    rng: np.random.Generator,
    size: int = 96,
    gsd_m: float = 0.02,
    tag: Optional[str] = None,
    perfect: bool = False,
    n_panels: int = 4,
    miss_rate: float = 0.2,
    n_false: int = 1,
) -> SyntheticScene:
    """Build one scene.

    With ``perfect`` the confidence map marks exactly the annotated panels.
    Otherwise panels are scored with random confidence, some are missed, some
    are split by a one-pixel gap, and false blobs are added in empty slots.
    """
    meta = GeoMeta(
        width=size,
        height=size,
        gsd_m=gsd_m,
        altitude_m=round(gsd_to_altitude(gsd_m).value, 3),
        tag=tag,
    )
    rects = _panels(rng, size, n_panels + n_false)
    panels, decoys = rects[:n_panels], rects[n_panels:]

    polygons = [
        PolygonAnnotation(id=i + 1, vertices=((x0, y0), (x1, y0), (x1, y1), (x0, y1)))
        for i, (x0, y0, x1, y1) in enumerate(panels)
    ]
    values = np.zeros((size, size), dtype=np.float32)
    for x0, y0, x1, y1 in panels:
        if perfect:
            values[y0:y1, x0:x1] = 0.9
            continue
        if rng.random() < miss_rate:
            continue
        values[y0:y1, x0:x1] = rng.uniform(0.55, 1.0)
        if rng.random() < 0.3:
            # One-pixel gap that dilation has to bridge
            values[y0:y1, (x0 + x1) // 2] = 0.0
    if not perfect:
        for x0, y0, x1, y1 in decoys:
            values[y0:y1, x0:x1] = rng.uniform(0.5, 0.9)
        noise = rng.uniform(0.0, 0.3, size=values.shape).astype(np.float32)
        values = np.maximum(values, noise)

    annotations = AnnotationSet(image_id=image_id, meta=meta, polygons=tuple(polygons))
    return SyntheticScene(annotations=annotations, grid=ConfidenceGrid(meta=meta, values=values))


def build_synthetic_dataset(
    out_dir: PathLike,
    n_images: int = 20,
    seed: int = 0,
    perfect: bool = False,
    tags: Tuple[str, ...] = ("normal", "sport"),
    gsds_m: Tuple[float, ...] = (0.017, 0.025, 0.035, 0.043),
) -> List[str]:
    """Write truth/<id>.json and pred/<id>.fgrid for ``n_images`` scenes; returns the ids"""
    out = Path(out_dir)
    (out / "truth").mkdir(parents=True, exist_ok=True)
    (out / "pred").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    image_ids = []
    for i in range(n_images):
        image_id = f"img_{i:03d}"
        scene = make_scene(
            image_id,
            rng,
            gsd_m=gsds_m[i % len(gsds_m)],
            tag=tags[i % len(tags)] if tags else None,
            perfect=perfect,
        )
        dump_annotations(scene.annotations, out / "truth" / f"{image_id}.json")
        save_confidence_grid(scene.grid, out / "pred" / f"{image_id}.fgrid")
        image_ids.append(image_id)

    logger.info(f"Wrote {n_images} synthetic scenes to {out}")
    return image_ids
