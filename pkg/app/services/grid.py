"""Raster value types, file formats, thresholding and the altitude/GSD table"""
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Union
import logging
import math
import struct

import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import ValidationError

from app.config import settings
from app.schemas.grid import GeoMeta
from app.services.exceptions import (
    ArgumentError,
    FormatError,
    IoError,
    RangeError,
    describe_validation_error,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FGRID_MAGIC = b"FGRD"
# magic, width, height, gsd_m, altitude_m
FGRID_HEADER = struct.Struct("<4sIIff")

# Flight altitude (m) -> GSD (m/pixel) for the survey camera
ALTITUDE_TABLE_M = np.array([50.0, 60.0, 70.0, 80.0, 90.0, 100.0, 110.0, 120.0])
GSD_TABLE_M = np.array([0.017, 0.021, 0.025, 0.028, 0.032, 0.035, 0.039, 0.043])
MAX_LEGAL_ALTITUDE_M = 120.0


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, order="C", copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ConfidenceGrid:
    """Per-pixel detection confidences in [0, 1], shape (height, width)"""
    meta: GeoMeta
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, np.float32)
        if values.shape != self.meta.shape:
            raise ArgumentError(
                f"Grid shape {values.shape} does not match {self.meta.width}x{self.meta.height}"
            )
        if not np.all((values >= 0.0) & (values <= 1.0)):
            raise RangeError("Confidence values must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, ConfidenceGrid):
            return NotImplemented
        return self.meta == other.meta and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    meta: GeoMeta
    bits: np.ndarray

    def __post_init__(self):
        bits = _frozen(self.bits, bool)
        if bits.shape != self.meta.shape:
            raise ArgumentError(f"Mask shape {bits.shape} does not match meta {self.meta.shape}")
        object.__setattr__(self, "bits", bits)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.meta == other.meta and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class LabelGrid:
    """Component labels, 0 is background and objects are numbered 1..K"""
    meta: GeoMeta
    labels: np.ndarray

    def __post_init__(self):
        labels = _frozen(self.labels, np.int32)
        if labels.shape != self.meta.shape:
            raise ArgumentError(f"Label shape {labels.shape} does not match meta {self.meta.shape}")
        if labels.size and labels.min() < 0:
            raise ArgumentError("Labels must be non-negative")
        object.__setattr__(self, "labels", labels)

    @property
    def count(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def foreground(self) -> np.ndarray:
        return self.labels > 0

    def sizes(self) -> np.ndarray:
        """Pixel count per label, index 0 is the background"""
        return np.bincount(self.labels.ravel(), minlength=self.count + 1)


@dataclass(frozen=True, eq=False)
class RgbRaster:
    """8-bit colour image, shape (height, width, 3)"""
    meta: GeoMeta
    pixels: np.ndarray

    def __post_init__(self):
        pixels = _frozen(self.pixels, np.uint8)
        if pixels.shape != self.meta.shape + (3,):
            raise ArgumentError(f"RGB shape {pixels.shape} does not match meta {self.meta.shape}")
        object.__setattr__(self, "pixels", pixels)


class TableLookup(NamedTuple):
    value: float
    extrapolated: bool


def _shortest_float32(value: float) -> float:
    # Recover the decimal that was written, e.g. 0.017 instead of 0.017000000923...
    return float(str(np.float32(value)))


def sniff_format(path: PathLike) -> str:
    """Return 'fgrid', 'pgm' or 'ppm' from the file magic"""
    try:
        with open(path, "rb") as handle:
            head = handle.read(4)
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}") from e
    if head == FGRID_MAGIC:
        return "fgrid"
    if head[:2] == b"P5":
        return "pgm"
    if head[:2] == b"P6":
        return "ppm"
    raise FormatError(f"{path}: unrecognized raster header {head!r}")


def _make_meta(path: PathLike, **fields) -> GeoMeta:
    try:
        return GeoMeta(**fields)
    except ValidationError as e:
        raise FormatError(f"{path}: invalid metadata ({describe_validation_error(e)})") from e


def _read_fgrid(path: PathLike) -> ConfidenceGrid:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoError(f"Cannot read {path}: {e}") from e

    if len(data) < FGRID_HEADER.size:
        raise FormatError(f"{path}: truncated FGRID header")
    magic, width, height, gsd_m, altitude_m = FGRID_HEADER.unpack_from(data)
    if magic != FGRID_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if not math.isfinite(gsd_m):
        raise FormatError(f"{path}: GSD is not finite")

    payload = data[FGRID_HEADER.size:]
    expected = width * height * 4
    if len(payload) != expected:
        raise FormatError(
            f"{path}: header declares {width}x{height} values but payload holds {len(payload) // 4}"
        )

    meta = _make_meta(
        path,
        width=width,
        height=height,
        gsd_m=_shortest_float32(gsd_m),
        altitude_m=None if math.isnan(altitude_m) else _shortest_float32(altitude_m),
    )
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    if np.isnan(values).any():
        raise RangeError(f"{path}: NaN confidence value")
    return ConfidenceGrid(meta=meta, values=values)


def _open_netpbm(path: PathLike, mode: str) -> np.ndarray:
    try:
        with Image.open(path) as image:
            image.load()
            if image.mode != mode:
                raise FormatError(f"{path}: expected an 8-bit {mode} image, got mode {image.mode}")
            return np.asarray(image, dtype=np.uint8)
    except FileNotFoundError as e:
        raise IoError(f"Cannot read {path}: {e}") from e
    except (UnidentifiedImageError, SyntaxError, ValueError, OSError) as e:
        raise FormatError(f"{path}: malformed image ({e})") from e


def load_confidence_grid(path: PathLike, gsd_m: Optional[float] = None) -> ConfidenceGrid:
    """Load an FGRID file or an 8-bit PGM (values divided by 255).

    PGM files carry no GSD; ``gsd_m`` (or DEFAULT_GSD_M) is used for them.
    """
    kind = sniff_format(path)
    if kind == "fgrid":
        return _read_fgrid(path)
    if kind != "pgm":
        raise FormatError(f"{path}: a confidence grid must be FGRID or PGM (P5)")

    if gsd_m is None:
        logger.warning(f"{path}: PGM carries no GSD, assuming {settings.DEFAULT_GSD_M} m")
        gsd_m = settings.DEFAULT_GSD_M
    raw = _open_netpbm(path, "L")
    meta = _make_meta(path, width=raw.shape[1], height=raw.shape[0], gsd_m=gsd_m)
    return ConfidenceGrid(meta=meta, values=raw.astype(np.float32) / np.float32(255.0))


def save_confidence_grid(grid: ConfidenceGrid, path: PathLike) -> None:
    """Write a grid as FGRID; loading it back is bit-exact"""
    meta = grid.meta
    header = FGRID_HEADER.pack(
        FGRID_MAGIC,
        meta.width,
        meta.height,
        meta.gsd_m,
        float("nan") if meta.altitude_m is None else meta.altitude_m,
    )
    try:
        with open(path, "wb") as handle:
            handle.write(header)
            handle.write(grid.values.astype("<f4").tobytes(order="C"))
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def save_confidence_pgm(grid: ConfidenceGrid, path: PathLike) -> None:
    """Write a grid as 8-bit PGM, quantized to 1/255"""
    quantized = np.rint(grid.values.astype(np.float64) * 255.0).astype(np.uint8)
    _save_netpbm(Image.fromarray(quantized), path)


def _save_netpbm(image: Image.Image, path: PathLike) -> None:
    try:
        image.save(path, format="PPM")
    except OSError as e:
        raise IoError(f"Cannot write {path}: {e}") from e


def load_mask(path: PathLike, gsd_m: Optional[float] = None) -> BinaryMask:
    raw = _open_netpbm(path, "L")
    meta = _make_meta(
        path, width=raw.shape[1], height=raw.shape[0], gsd_m=gsd_m or settings.DEFAULT_GSD_M
    )
    return BinaryMask(meta=meta, bits=raw > 0)


def save_mask(mask: BinaryMask, path: PathLike) -> None:
    """Write a mask as PGM, 0 background and 255 foreground"""
    raw = np.where(mask.bits, 255, 0).astype(np.uint8)
    _save_netpbm(Image.fromarray(raw), path)


def load_rgb(path: PathLike, gsd_m: Optional[float] = None) -> RgbRaster:
    raw = _open_netpbm(path, "RGB")
    meta = _make_meta(
        path, width=raw.shape[1], height=raw.shape[0], gsd_m=gsd_m or settings.DEFAULT_GSD_M
    )
    return RgbRaster(meta=meta, pixels=raw)


def save_rgb(raster: RgbRaster, path: PathLike) -> None:
    """Write an RGB raster as binary PPM (P6)"""
    _save_netpbm(Image.fromarray(np.ascontiguousarray(raster.pixels)), path)


def threshold(grid: ConfidenceGrid, tau: float) -> BinaryMask:
    """Foreground where confidence >= tau"""
    if not 0.0 <= tau <= 1.0:
        raise ArgumentError(f"tau must lie in [0, 1], got {tau}")
    # Compare in float64 so membership agrees with the float64 object means
    return BinaryMask(meta=grid.meta, bits=grid.values.astype(np.float64) >= tau)


def _table_lookup(x: float, xs: np.ndarray, ys: np.ndarray) -> TableLookup:
    if xs[0] <= x <= xs[-1]:
        return TableLookup(float(np.interp(x, xs, ys)), False)
    # Linear extrapolation from the two nearest rows
    i = 0 if x < xs[0] else len(xs) - 2
    slope = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
    return TableLookup(float(ys[i] + slope * (x - xs[i])), True)


def altitude_to_gsd(altitude_m: float) -> TableLookup:
    """Piecewise-linear GSD for a flight altitude; out-of-table values are flagged"""
    if altitude_m <= 0:
        raise ArgumentError(f"Altitude must be positive, got {altitude_m}")
    result = _table_lookup(altitude_m, ALTITUDE_TABLE_M, GSD_TABLE_M)
    if result.extrapolated:
        logger.warning(
            f"Altitude {altitude_m} m is outside the {ALTITUDE_TABLE_M[0]:g}-"
            f"{ALTITUDE_TABLE_M[-1]:g} m table; GSD extrapolated"
        )
    if altitude_m > MAX_LEGAL_ALTITUDE_M:
        logger.warning(f"Altitude {altitude_m} m exceeds the {MAX_LEGAL_ALTITUDE_M:g} m flight cap")
    return result


def gsd_to_altitude(gsd_m: float) -> TableLookup:
    """Altitude in meters for a GSD, the inverse of altitude_to_gsd"""
    if gsd_m <= 0:
        raise ArgumentError(f"GSD must be positive, got {gsd_m}")
    return _table_lookup(gsd_m, GSD_TABLE_M, ALTITUDE_TABLE_M)


def altitude_bin(altitude_m: float, width_m: float = 20.0, origin_m: float = 50.0) -> str:
    """Label of the altitude bin holding ``altitude_m``, e.g. '50-70m'"""
    if width_m <= 0:
        raise ArgumentError("Bin width must be positive")
    low = origin_m + math.floor((altitude_m - origin_m) / width_m) * width_m
    return f"{low:g}-{low + width_m:g}m"
