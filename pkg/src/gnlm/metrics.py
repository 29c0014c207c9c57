"""No-reference quality measures for despeckled SAR images.

* ``enl``: equivalent number of looks, ``(mean / std)**2`` over a region
  assumed homogeneous.
* ``ris``: ratio-image structuredness. The ratio ``z / x_hat`` is quantised,
  the symmetric 4-neighbour co-occurrence matrix ``p(i, j)`` is built, and
  the Haralick homogeneity ``H = sum p(i, j) / (1 + (i - j)^2)`` is compared
  with ``H0`` computed from the product of the marginals:
  ``RIS = 100 (H - H0) / H0``. An i.i.d. ratio scores about 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RegionRect:
    x: int
    y: int
    width: int
    height: int

    def check(self, shape) -> None:
        h, w = shape
        if min(self.x, self.y) < 0 or self.width < 1 or self.height < 1:
            raise ValueError(f"invalid region {self}")
        if self.x + self.width > w or self.y + self.height > h:
            raise ValueError(f"region {self} not inside {h}x{w} image")
        if self.width * self.height < 16:
            raise ValueError(f"region {self} has fewer than 16 pixels")

    def slice(self, image: np.ndarray) -> np.ndarray:
        self.check(image.shape[-2:])
        return image[..., self.y:self.y + self.height, self.x:self.x + self.width]

    @classmethod
    def parse(cls, text: str) -> "RegionRect":
        """Parse ``x,y,width,height``."""
        try:
            x, y, w, h = (int(v) for v in text.split(","))
        except ValueError:
            raise ValueError(f"region must be 'x,y,width,height', got {text!r}") from None
        return cls(x, y, w, h)


@dataclass
class RatioImage:
    values: np.ndarray
    epsilon: float


class DegenerateRegionError(ValueError):
    pass


def enl(image, region: RegionRect | None = None) -> float:
    img = np.asarray(image, dtype=np.float64)
    vals = region.slice(img) if region is not None else img
    mean = vals.mean()
    std = vals.std()
    if std == 0:
        raise DegenerateRegionError("region is constant; ENL undefined")
    return float((mean / std) ** 2)


def ratio_image(original, filtered, epsilon: float | None = None) -> RatioImage:
    z = np.asarray(getattr(original, "pixels", original), dtype=np.float64)
    xh = np.asarray(filtered, dtype=np.float64)
    if z.shape != xh.shape:
        raise ValueError(f"original {z.shape} and filtered {xh.shape} dimensions differ")
    if epsilon is None:
        epsilon = 1e-8 * float(xh.mean())
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    r = z / np.maximum(xh, epsilon)
    # zero-intensity originals would give r == 0; keep the ratio strictly positive
    r = np.maximum(r, np.finfo(np.float64).tiny)
    return RatioImage(values=r, epsilon=float(epsilon))


def quantize(values: np.ndarray, levels: int, lo_pct: float = 1.0, hi_pct: float = 99.0) -> np.ndarray:
    """Equal-width bins between two percentiles; outliers go to the end bins."""
    lo, hi = np.percentile(values, [lo_pct, hi_pct])
    if not hi > lo:
        raise ValueError("ratio image quantises to a single bin")
    q = np.floor((values - lo) / (hi - lo) * levels)
    return np.clip(q, 0, levels - 1).astype(np.intp)


def cooccurrence(q: np.ndarray, levels: int) -> np.ndarray:
    """Symmetric joint histogram of horizontally and vertically adjacent pairs."""
    a = np.concatenate([q[:, :-1].ravel(), q[:-1, :].ravel()])
    b = np.concatenate([q[:, 1:].ravel(), q[1:, :].ravel()])
    m = np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels).astype(np.float64)
    m = m + m.T
    return m / m.sum()


def homogeneity(p: np.ndarray, literal: bool = False) -> tuple[float, float]:
    """Haralick homogeneity of ``p`` and of the product of its marginals.

    ``literal=True`` uses the denominator ``(i - j)^2 - 1`` exactly as printed
    in the original RIS definition; it is singular at ``|i - j| = 1``.
    """
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[0]
    i, j = np.indices((n, n))
    denom = (i - j) ** 2 - 1.0 if literal else 1.0 + (i - j) ** 2
    marg = p.sum(axis=1)
    p0 = np.outer(marg, marg)
    if literal and (np.any(p[denom == 0] > 0) or np.any(p0[denom == 0] > 0)):
        raise ValueError("literal homogeneity denominator is zero for adjacent levels with nonzero mass")
    kern = np.divide(1.0, denom, out=np.zeros_like(denom), where=denom != 0)
    return float(np.sum(p * kern)), float(np.sum(p0 * kern))


def ris_from_joint(p: np.ndarray, literal: bool = False) -> float:
    h, h0 = homogeneity(p, literal)
    return 100.0 * (h - h0) / h0


def ris(ratio, levels: int = 64, literal: bool = False) -> float:
    values = ratio.values if isinstance(ratio, RatioImage) else np.asarray(ratio, dtype=np.float64)
    if levels < 8:
        raise ValueError("levels must be at least 8")
    q = quantize(values, levels)
    return ris_from_joint(cooccurrence(q, levels), literal)


def psnr(reference, estimate, region: RegionRect | None = None, peak: float | None = None) -> float:
    """PSNR in dB; ``peak`` defaults to the reference maximum over the region."""
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if region is not None:
        ref, est = region.slice(ref), region.slice(est)
    mse = np.mean((ref - est) ** 2)
    peak = float(ref.max()) if peak is None else peak
    return float(10.0 * np.log10(peak * peak / mse))


def metrics_report(original, filtered, regions: dict[str, RegionRect] | None = None, levels: int = 64,
                   predictor_count: np.ndarray | None = None) -> dict:
    regions = regions or {}
    z = np.asarray(getattr(original, "pixels", original), dtype=np.float64)
    report = {
        "enl": {name: enl(filtered, reg) for name, reg in regions.items()},
        "enl_original": {name: enl(z, reg) for name, reg in regions.items()},
        "ris": ris(ratio_image(z, filtered), levels),
        "levels": levels,
    }
    if predictor_count is not None:
        pc = np.asarray(predictor_count)
        report["predictor_count"] = {
            "min": int(pc.min()), "max": int(pc.max()), "mean": float(pc.mean()),
            "unfiltered_fraction": float(np.mean(pc <= 1)),
        }
    return report
