"""Binary mask codec and geometry."""

from typing import List, Sequence

import numpy as np
import pydantic
from pydantic import ConfigDict, Field, model_validator

from .utils import EmptyMaskError, RLEError


class BinaryMask(pydantic.BaseModel):
    """
    Run-length encoded binary mask: row-major scan, alternating run lengths that start with a
    (possibly zero-length) run of 0s.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    height: int = Field(..., ge=1)
    width: int = Field(..., ge=1)
    runs: List[int]

    @model_validator(mode="after")
    def _check_runs(self):
        if any(run < 0 for run in self.runs):
            raise ValueError("run lengths must be non-negative")
        if sum(self.runs) != self.height * self.width:
            raise ValueError(
                f"runs sum to {sum(self.runs)}, expected {self.height}x{self.width}={self.height * self.width}"
            )
        return self

    @classmethod
    def from_array(cls, mask: np.ndarray) -> "BinaryMask":
        height, width = mask.shape
        return cls(height=height, width=width, runs=rle_encode(mask))

    def to_array(self) -> np.ndarray:
        return rle_decode(self.runs, self.height, self.width)


def rle_encode(mask: np.ndarray) -> List[int]:
    """Run lengths of a 2-d mask, the first run counting 0s."""
    flat = np.asarray(mask).reshape(-1).astype(bool)
    if flat.size == 0:
        raise RLEError("cannot encode an empty raster")
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return runs


def rle_decode(runs: Sequence[int], height: int, width: int) -> np.ndarray:
    """Boolean `height`×`width` raster from run lengths.

    Raises:
        RLEError: negative runs or runs not summing to height*width.
    """
    runs = np.asarray(runs, dtype=np.int64)
    if runs.ndim != 1 or (runs < 0).any():
        raise RLEError(f"run lengths must be a flat list of non-negative integers, got {runs.tolist()}")
    if runs.sum() != height * width:
        raise RLEError(f"runs sum to {int(runs.sum())}, expected {height}x{width}={height * width}")
    values = (np.arange(runs.size) % 2).astype(bool)
    return np.repeat(values, runs).reshape(height, width)


class Box(pydantic.BaseModel):
    """Half-open pixel rectangle [row0, row1) × [col0, col1)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    row0: int
    col0: int
    row1: int
    col1: int

    @model_validator(mode="after")
    def _check_order(self):
        if not (self.row0 < self.row1 and self.col0 < self.col1):
            raise ValueError(f"degenerate box {self.as_tuple()}")
        return self

    def as_tuple(self):
        return self.row0, self.col0, self.row1, self.col1

    @property
    def area(self) -> int:
        return (self.row1 - self.row0) * (self.col1 - self.col0)

    def to_mask(self, height: int, width: int) -> np.ndarray:
        mask = np.zeros((height, width), dtype=bool)
        mask[self.row0 : self.row1, self.col0 : self.col1] = True
        return mask


def mask_to_box(mask: np.ndarray) -> Box:
    """Smallest box containing every set pixel; each of its edges touches one.

    Raises:
        EmptyMaskError: the mask has no set pixel.
    """
    mask = np.asarray(mask, dtype=bool)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyMaskError("cannot fit a bounding box to an empty mask")
    return Box(row0=int(rows[0]), col0=int(cols[0]), row1=int(rows[-1]) + 1, col1=int(cols[-1]) + 1)


def boxed_mask(mask: np.ndarray) -> np.ndarray:
    """The mask replaced by its filled minimal bounding box."""
    mask = np.asarray(mask, dtype=bool)
    return mask_to_box(mask).to_mask(*mask.shape)
