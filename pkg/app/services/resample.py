"""Simulate coarser sensors on a fine grid while keeping its pixel dimensions"""
from typing import Union
import logging
import math

import numpy as np
from scipy import sparse

from app.services.exceptions import ArgumentError
from app.services.grid import ConfidenceGrid, RgbRaster

logger = logging.getLogger(__name__)

Raster = Union[ConfidenceGrid, RgbRaster]

# Reference resolutions for comparison runs, meters/pixel
SATELLITE_GSD_M = 0.30
AERIAL_GSDS_M = (0.075, 0.15)


def degradation_factor(source_gsd_m: float, target_gsd_m: float) -> float:
    if source_gsd_m <= 0 or target_gsd_m <= 0:
        raise ArgumentError("GSDs must be positive")
    if target_gsd_m < source_gsd_m:
        raise ArgumentError(
            f"Target GSD {target_gsd_m} m is finer than the source {source_gsd_m} m"
        )
    return target_gsd_m / source_gsd_m


def _cell_edges(n_fine: int, factor: float) -> np.ndarray:
    """Coarse cell boundaries in fine pixel units; the last cell may be partial"""
    n_coarse = math.ceil(n_fine / factor - 1e-9)
    edges = np.minimum(np.arange(n_coarse + 1) * factor, n_fine)
    edges[-1] = n_fine
    return edges


def box_weights(n_fine: int, factor: float) -> sparse.csr_matrix:
    """(n_coarse, n_fine) area-average matrix with fractional edge weights"""
    edges = _cell_edges(n_fine, factor)
    n_coarse = len(edges) - 1
    span = math.ceil(factor) + 1
    rows = np.repeat(np.arange(n_coarse), span)
    cols = (np.floor(edges[:-1]).astype(np.int64)[:, None] + np.arange(span)[None, :]).ravel()
    keep = cols < n_fine
    rows, cols = rows[keep], cols[keep]
    # Overlap of fine pixel [i, i+1) with coarse cell [e_j, e_j+1)
    overlap = np.clip(np.minimum(edges[rows + 1], cols + 1) - np.maximum(edges[rows], cols), 0.0, None)
    weights = sparse.csr_matrix((overlap, (rows, cols)), shape=(n_coarse, n_fine))
    weights.eliminate_zeros()
    totals = np.asarray(weights.sum(axis=1)).ravel()
    return sparse.csr_matrix(sparse.diags(1.0 / totals) @ weights)


def bilinear_weights(n_fine: int, factor: float) -> sparse.csr_matrix:
    """(n_fine, n_coarse) linear interpolation from coarse cell centers back to fine pixel centers"""
    edges = _cell_edges(n_fine, factor)
    n_coarse = len(edges) - 1
    if n_coarse == 1:
        return sparse.csr_matrix(np.ones((n_fine, 1)))
    centers = 0.5 * (edges[:-1] + edges[1:])
    fine = np.arange(n_fine) + 0.5

    # Edge pixels beyond the outer centers take the nearest cell
    pos = np.clip(fine, centers[0], centers[-1])
    right = np.clip(np.searchsorted(centers, pos, side="right"), 1, n_coarse - 1)
    left = right - 1
    t = (pos - centers[left]) / (centers[right] - centers[left])
    rows = np.arange(n_fine)
    weights = sparse.csr_matrix(
        (np.concatenate([1.0 - t, t]), (np.concatenate([rows, rows]), np.concatenate([left, right]))),
        shape=(n_fine, n_coarse),
    )
    weights.eliminate_zeros()
    return weights


def _degrade(values: np.ndarray, factor: float) -> np.ndarray:
    height, width = values.shape[:2]
    down_y, down_x = box_weights(height, factor), box_weights(width, factor)
    up_y, up_x = bilinear_weights(height, factor), bilinear_weights(width, factor)

    def resample_plane(plane: np.ndarray) -> np.ndarray:
        # Separable: rows then columns, never forming a full-size square operator
        coarse = (down_x @ (down_y @ plane).T).T
        return (up_x @ (up_y @ coarse).T).T

    data = values.astype(np.float64)
    if data.ndim == 2:
        return resample_plane(data)
    return np.stack([resample_plane(data[..., c]) for c in range(data.shape[2])], axis=-1)


def simulate_gsd(raster: Raster, target_gsd_m: float) -> Raster:
    """Box-average to the target GSD, then bilinear-upsample to the original size.

    The result keeps the pixel pitch and records the target as its effective GSD.
    """
    meta = raster.meta
    factor = degradation_factor(meta.gsd_m, target_gsd_m)
    out_meta = meta.model_copy(update={"effective_gsd_m": target_gsd_m})

    if factor == 1.0:
        if isinstance(raster, ConfidenceGrid):
            return ConfidenceGrid(meta=out_meta, values=raster.values)
        return RgbRaster(meta=out_meta, pixels=raster.pixels)

    logger.info(
        f"Degrading {meta.width}x{meta.height} from {meta.gsd_m} m to {target_gsd_m} m (factor {factor:.3f})"
    )
    if isinstance(raster, ConfidenceGrid):
        degraded = _degrade(raster.values, factor)
        # Convex weights: only rounding can leave the input range
        degraded = np.clip(degraded, raster.values.min(), raster.values.max())
        return ConfidenceGrid(meta=out_meta, values=degraded)

    degraded = np.clip(np.rint(_degrade(raster.pixels, factor)), 0, 255)
    return RgbRaster(meta=out_meta, pixels=degraded.astype(np.uint8))


def effective_extent(object_m: float, gsd_m: float) -> float:
    """How many pixels an object of ``object_m`` meters spans at ``gsd_m``"""
    if object_m <= 0 or gsd_m <= 0:
        raise ArgumentError("Object size and GSD must be positive")
    return object_m / gsd_m
