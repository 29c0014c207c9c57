"""Pixel- and patch-wise dissimilarities in the SAR and optical domains.

Coordinates are ``(row, col)`` tuples. A patch is anchored at its top-left
pixel and covers ``side x side`` pixels; it must lie fully inside the image.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .rasters import OpticalGuide, SarImage

LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class PatchGeometry:
    side: int

    def __post_init__(self):
        if int(self.side) != self.side or self.side < 1:
            raise ValueError(f"patch side must be a positive integer, got {self.side!r}")

    @property
    def size(self) -> int:
        return self.side * self.side

    @cached_property
    def offsets(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.side) for j in range(self.side)]


def pixel_distance(z1, z2):
    """``log[(z1 + z2) / (2 sqrt(z1 z2))]``; works on scalars and arrays."""
    a = np.asarray(z1, dtype=np.float64)
    b = np.asarray(z2, dtype=np.float64)
    if np.any(a <= 0) or np.any(b <= 0):
        raise ValueError("pixel_distance requires strictly positive intensities")
    d = np.log((a + b) / (2.0 * np.sqrt(a * b)))
    d = np.maximum(d, 0.0)
    return float(d) if d.ndim == 0 else d


def speckle_free_distance(rho):
    """Distance of two noiseless pixels whose intensity ratio is ``rho**2``."""
    r = np.asarray(rho, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("rho must be positive")
    d = np.maximum(np.log(0.5 * r + 0.5 / r), 0.0)
    return float(d) if d.ndim == 0 else d


def _patch(arr: np.ndarray, at, side: int) -> np.ndarray:
    r, c = at
    h, w = arr.shape[-2:]
    if r < 0 or c < 0 or r + side > h or c + side > w:
        raise IndexError(f"patch at {tuple(at)} with side {side} falls outside {h}x{w} image")
    return arr[..., r:r + side, c:c + side]


def sar_patch_distance(sar: SarImage, s, t, geom: PatchGeometry, mu_D: float) -> float:
    """Normalised SAR patch distance; about 1 between same-signal patches."""
    ps = _patch(sar.pixels, s, geom.side)
    pt = _patch(sar.pixels, t, geom.side)
    if tuple(s) == tuple(t):
        return 0.0
    return float(np.sum(pixel_distance(ps, pt)) / (mu_D * geom.size))


def optical_patch_distance(guide: OpticalGuide, s, t, geom: PatchGeometry, bands: int | None = None) -> float:
    """Mean squared difference over all bands and patch pixels."""
    if bands is not None and bands != guide.bands:
        raise ValueError(f"guide has {guide.bands} bands, configuration expects {bands}")
    ps = _patch(guide.planes, s, geom.side)
    pt = _patch(guide.planes, t, geom.side)
    return float(np.sum((ps - pt) ** 2) / (guide.bands * geom.size))
