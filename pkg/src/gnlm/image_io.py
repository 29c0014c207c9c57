"""Raw float32 rasters with a JSON sidecar, plus PNG previews.

On-disk layout: ``<path>`` holds little-endian float32 samples, row-major,
band-sequential (all of band 0, then band 1, ...). ``<path>.json`` holds the
header::

    {"width": W, "height": H, "bands": M, "dtype": "f32le",
     "looks": 1.0, "band_names": ["r", "g", "b"]}

``looks`` and ``band_names`` are optional.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .rasters import OpticalGuide, SarImage

DTYPE_TAG = "f32le"
_DTYPE = np.dtype("<f4")


class RasterFormatError(ValueError):
    pass


@dataclass
class RasterHeader:
    width: int
    height: int
    bands: int = 1
    dtype: str = DTYPE_TAG
    looks: float | None = None
    band_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if min(self.width, self.height, self.bands) <= 0:
            raise RasterFormatError(f"raster dimensions must be positive: {self}")
        if self.dtype != DTYPE_TAG:
            raise RasterFormatError(f"unsupported dtype {self.dtype!r}; only {DTYPE_TAG!r} is supported")

    @property
    def nbytes(self) -> int:
        return self.width * self.height * self.bands * _DTYPE.itemsize


def sidecar(path) -> Path:
    return Path(str(path) + ".json")


def write_raster(path, data, looks: float | None = None, band_names=None) -> RasterHeader:
    arr = np.asarray(data)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3:
        raise RasterFormatError(f"raster must be (H, W) or (M, H, W), got shape {arr.shape}")
    m, h, w = arr.shape
    header = RasterHeader(width=w, height=h, bands=m, looks=looks, band_names=list(band_names or []))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(arr, dtype=_DTYPE).tobytes())
    sidecar(path).write_text(json.dumps(asdict(header), indent=2))
    return header


def read_header(path) -> RasterHeader:
    sc = sidecar(path)
    if not sc.exists():
        raise RasterFormatError(f"missing sidecar {sc}")
    try:
        meta = json.loads(sc.read_text())
        return RasterHeader(**meta)
    except (json.JSONDecodeError, TypeError) as exc:
        raise RasterFormatError(f"corrupt sidecar {sc}: {exc}") from exc


def read_raster(path, require_finite: bool = False) -> tuple[np.ndarray, RasterHeader]:
    """Return float32 samples shaped ``(H, W)`` for one band, else ``(M, H, W)``."""
    header = read_header(path)
    size = os.path.getsize(path)
    if size != header.nbytes:
        raise RasterFormatError(
            f"{path}: payload has {size} bytes, header implies {header.nbytes}"
        )
    arr = np.fromfile(path, dtype=_DTYPE).reshape(header.bands, header.height, header.width)
    if require_finite and not np.all(np.isfinite(arr)):
        raise RasterFormatError(f"{path}: payload contains NaN or Inf")
    return (arr[0] if header.bands == 1 else arr), header


def read_sar(path, looks: float | None = None) -> SarImage:
    arr, header = read_raster(path, require_finite=True)
    if arr.ndim != 2:
        raise RasterFormatError(f"{path}: SAR raster must have one band, found {header.bands}")
    L = looks if looks is not None else (header.looks or 1.0)
    return SarImage(arr.astype(np.float64), looks=L)


def read_guide(path) -> OpticalGuide:
    arr, header = read_raster(path, require_finite=True)
    return OpticalGuide(arr.astype(np.float64), band_names=header.band_names)


def write_sar(path, sar: SarImage) -> RasterHeader:
    return write_raster(path, sar.pixels, looks=sar.looks)


def write_guide(path, guide: OpticalGuide) -> RasterHeader:
    return write_raster(path, guide.planes, band_names=guide.band_names)


# Fixed colormap for predictor-count maps: dark blue -> blue -> cyan -> yellow -> red.
COUNT_COLORS = np.array([
    [0, 0, 128],
    [0, 0, 255],
    [0, 255, 255],
    [255, 255, 0],
    [255, 0, 0],
], dtype=np.float64)


def colorize_counts(counts, vmax: int) -> np.ndarray:
    """Map counts in ``[1, vmax]`` onto the fixed colormap (RGB uint8)."""
    c = np.asarray(counts, dtype=np.float64)
    t = np.clip((c - 1.0) / max(vmax - 1, 1), 0.0, 1.0) * (len(COUNT_COLORS) - 1)
    i = np.minimum(np.floor(t).astype(int), len(COUNT_COLORS) - 2)
    f = (t - i)[..., None]
    rgb = COUNT_COLORS[i] * (1 - f) + COUNT_COLORS[i + 1] * f
    return np.rint(rgb).astype(np.uint8)


def to_uint8(raster, mode: str = "linear", db_span: float = 30.0) -> np.ndarray:
    """Grey levels for one band.

    ``linear`` maps ``[min, max]`` to ``[0, 255]`` (constant input maps to 128).
    ``log`` maps ``[median * 10**(-span/20), median * 10**(span/20)]`` on a dB
    scale; nonpositive samples clamp to 0.
    """
    a = np.asarray(raster, dtype=np.float64)
    if mode == "linear":
        lo, hi = float(a.min()), float(a.max())
        if hi == lo:
            return np.full(a.shape, 128, dtype=np.uint8)
        g = (a - lo) / (hi - lo)
    elif mode == "log":
        pos = a[a > 0]
        med = float(np.median(pos)) if pos.size else 1.0
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(np.where(a > 0, a, 0.0) / med)
        g = (db + db_span) / (2.0 * db_span)
        g = np.where(a > 0, g, 0.0)
    else:
        raise ValueError(f"unknown mode {mode!r}; use 'linear' or 'log'")
    return np.rint(np.clip(g, 0.0, 1.0) * 255).astype(np.uint8)


def export_png(raster, path, mode: str = "linear", db_span: float = 30.0) -> None:
    a = np.asarray(getattr(raster, "pixels", getattr(raster, "planes", raster)))
    if a.ndim == 3 and a.shape[0] == 1:
        a = a[0]
    if a.ndim == 2:
        img = Image.fromarray(to_uint8(a, mode, db_span), mode="L")
    elif a.ndim == 3 and a.shape[0] == 3:
        rgb = np.rint(np.clip(np.moveaxis(a, 0, -1), 0, 1) * 255).astype(np.uint8)
        img = Image.fromarray(rgb, mode="RGB")
    else:
        raise ValueError(f"cannot export raster with shape {a.shape}; need 1 or 3 bands")
    img.save(path)


def export_count_png(counts, path, vmax: int) -> None:
    Image.fromarray(colorize_counts(counts, vmax), mode="RGB").save(path)
