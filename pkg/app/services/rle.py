"""Row-major run-length encoding of pixel index sets"""
from typing import List, Sequence

import numpy as np

from app.services.exceptions import FormatError


def encode_rle(indices: np.ndarray) -> List[List[int]]:
    """Encode sorted flat pixel indices as [start_index, run_length] runs"""
    flat = np.unique(np.asarray(indices, dtype=np.int64))
    if flat.size == 0:
        return []
    # A run breaks wherever consecutive indices are not adjacent
    breaks = np.flatnonzero(np.diff(flat) != 1) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [flat.size]))
    return [[int(flat[s]), int(e - s)] for s, e in zip(starts, ends)]


def decode_rle(runs: Sequence[Sequence[int]], size: int) -> np.ndarray:
    """Expand runs back to sorted flat indices, checking they stay inside ``size``"""
    pieces = []
    previous_end = -1
    for run in runs:
        if len(run) != 2:
            raise FormatError(f"RLE run must be [start, length], got {list(run)}")
        start, length = int(run[0]), int(run[1])
        if length < 1 or start < 0 or start + length > size:
            raise FormatError(f"RLE run [{start}, {length}] outside a grid of {size} pixels")
        if start < previous_end:
            raise FormatError("RLE runs must be sorted and non-overlapping")
        pieces.append(np.arange(start, start + length, dtype=np.int64))
        previous_end = start + length
    if not pieces:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(pieces)
