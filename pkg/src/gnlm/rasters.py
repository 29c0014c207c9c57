"""In-memory raster types shared by the filters, metrics and I/O."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SarImage:
    """Single-channel linear intensity image with its nominal number of looks."""

    pixels: np.ndarray
    looks: float = 1.0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ValueError(f"SAR image must be a non-empty 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise ValueError("SAR image contains NaN or Inf")
        if np.any(px < 0):
            raise ValueError("SAR intensities must be nonnegative")
        if not self.looks > 0:
            raise ValueError(f"looks must be positive, got {self.looks!r}")
        self.pixels = px
        self.looks = float(self.looks)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape


@dataclass
class OpticalGuide:
    """``M``-band guide stored band-first as ``(M, H, W)`` with values in [0, 1]."""

    planes: np.ndarray
    band_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        pl = np.asarray(self.planes, dtype=np.float64)
        if pl.ndim == 2:
            pl = pl[None]
        if pl.ndim != 3 or pl.size == 0:
            raise ValueError(f"guide must be (M, H, W) or (H, W), got shape {pl.shape}")
        if not np.all(np.isfinite(pl)):
            raise ValueError("guide contains NaN or Inf")
        if pl.min() < 0 or pl.max() > 1:
            raise ValueError("guide values must lie in [0, 1]; normalise first")
        self.planes = pl

    @property
    def bands(self) -> int:
        return self.planes.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.planes.shape[1:]

    @classmethod
    def from_unnormalized(cls, planes, band_names=None) -> "OpticalGuide":
        """Rescale each band to [0, 1] by its own min/max (constant bands map to 0)."""
        pl = np.asarray(planes, dtype=np.float64)
        if pl.ndim == 2:
            pl = pl[None]
        lo = pl.min(axis=(1, 2), keepdims=True)
        span = pl.max(axis=(1, 2), keepdims=True) - lo
        out = np.where(span > 0, (pl - lo) / np.where(span > 0, span, 1.0), 0.0)
        return cls(out, list(band_names or []))


def check_same_shape(sar: SarImage, guide: OpticalGuide) -> None:
    if sar.shape != guide.shape:
        raise ValueError(f"SAR {sar.shape} and guide {guide.shape} dimensions differ")
