"""Synthetic test scenes, multiplicative speckle and Monte-Carlo distance samples.

Scenes are piecewise-constant clean intensity maps drawn from simple shapes,
with a co-registered pseudo-optical guide that paints each shape with a
fixed colour. Regions are rendered in list order, later ones overwrite
earlier ones. Point reflectors brighten the SAR scene only. Mismatch
rectangles replace the guide with a constant, mimicking a change between
the optical and SAR acquisitions.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .distances import pixel_distance
from .rasters import OpticalGuide, SarImage
from .speckle_stats import distance_moments


@dataclass
class Rect:
    row: int
    col: int
    height: int
    width: int
    kind: str = "rect"

    def mask(self, h, w):
        m = np.zeros((h, w), dtype=bool)
        m[max(self.row, 0):self.row + self.height, max(self.col, 0):self.col + self.width] = True
        return m


@dataclass
class HalfPlane:
    """Pixels with ``normal[0] * row + normal[1] * col >= offset``.

    The default normal ``(0, 1)`` gives a vertical step edge at column ``offset``.
    """

    offset: float
    normal: tuple[float, float] = (0.0, 1.0)
    kind: str = "half-plane"

    def mask(self, h, w):
        rr, cc = np.indices((h, w))
        return self.normal[0] * rr + self.normal[1] * cc >= self.offset


@dataclass
class Road:
    """Polyline of ``(row, col)`` vertices widened to ``width`` pixels."""

    vertices: list[tuple[float, float]]
    width: float = 3.0
    kind: str = "polyline-road"

    def mask(self, h, w):
        rr, cc = np.indices((h, w), dtype=np.float64)
        dist = np.full((h, w), np.inf)
        for (r0, c0), (r1, c1) in zip(self.vertices[:-1], self.vertices[1:]):
            vr, vc = r1 - r0, c1 - c0
            seg2 = vr * vr + vc * vc
            u = np.zeros_like(rr) if seg2 == 0 else np.clip(((rr - r0) * vr + (cc - c0) * vc) / seg2, 0, 1)
            dist = np.minimum(dist, np.hypot(rr - (r0 + u * vr), cc - (c0 + u * vc)))
        return dist <= self.width / 2.0


SHAPES = {"rect": Rect, "half-plane": HalfPlane, "polyline-road": Road}


@dataclass
class Region:
    shape: Rect | HalfPlane | Road
    intensity: float
    guide: tuple[float, ...]


@dataclass
class Reflector:
    row: int
    col: int
    multiplier: float = 100.0
    size: int = 1


@dataclass
class SceneSpec:
    width: int
    height: int
    background: float = 1.0
    background_guide: tuple[float, ...] = (0.5, 0.5)
    regions: list[Region] = field(default_factory=list)
    reflectors: list[Reflector] = field(default_factory=list)
    mismatch_regions: list[Rect] = field(default_factory=list)
    mismatch_value: float = 0.5
    guide_noise: float = 0.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("scene dimensions must be positive")
        if self.background <= 0 or any(r.intensity <= 0 for r in self.regions):
            raise ValueError("clean intensities must be positive")
        cols = [self.background_guide] + [r.guide for r in self.regions]
        if len({len(c) for c in cols}) != 1:
            raise ValueError("all guide colours must have the same number of bands")
        if any(not 0 <= v <= 1 for c in cols for v in c) or not 0 <= self.mismatch_value <= 1:
            raise ValueError("guide values must lie in [0, 1]")
        if any(rf.multiplier <= 0 or rf.size < 1 for rf in self.reflectors):
            raise ValueError("reflectors need a positive multiplier and size")

    @property
    def bands(self) -> int:
        return len(self.background_guide)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        d = dict(d)
        regions = []
        for r in d.pop("regions", []):
            sh = dict(r["shape"])
            shape_cls = SHAPES[sh.pop("kind", "rect")]
            if shape_cls is Road:
                sh["vertices"] = [tuple(v) for v in sh["vertices"]]
            if "normal" in sh:
                sh["normal"] = tuple(sh["normal"])
            regions.append(Region(shape_cls(**sh), r["intensity"], tuple(r["guide"])))
        reflectors = [Reflector(**r) for r in d.pop("reflectors", [])]
        mismatch = [Rect(**{k: v for k, v in m.items() if k != "kind"}) for m in d.pop("mismatch_regions", [])]
        if "background_guide" in d:
            d["background_guide"] = tuple(d["background_guide"])
        return cls(regions=regions, reflectors=reflectors, mismatch_regions=mismatch, **d)


def two_region_mosaic(size: int = 128, low: float = 1.0, high: float = 4.0, edge: int | None = None) -> SceneSpec:
    """Vertical step edge between intensities ``low`` and ``high``."""
    edge = size // 2 if edge is None else edge
    return SceneSpec(
        width=size, height=size, background=low, background_guide=(0.2, 0.7),
        regions=[Region(HalfPlane(edge), high, (0.8, 0.3))],
    )


def _streams(seed):
    scene, speckle = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(scene), np.random.default_rng(speckle)


def generate_scene(spec: SceneSpec, seed=0) -> tuple[SarImage, OpticalGuide]:
    """Clean intensity image and guide; ``seed`` only drives guide noise."""
    h, w = spec.height, spec.width
    clean = np.full((h, w), float(spec.background))
    guide = np.empty((spec.bands, h, w))
    guide[:] = np.asarray(spec.background_guide, dtype=np.float64)[:, None, None]
    for region in spec.regions:
        m = region.shape.mask(h, w)
        clean[m] = region.intensity
        guide[:, m] = np.asarray(region.guide, dtype=np.float64)[:, None]
    for rf in spec.reflectors:
        clean[max(rf.row, 0):rf.row + rf.size, max(rf.col, 0):rf.col + rf.size] *= rf.multiplier
    if spec.guide_noise > 0:
        rng, _ = _streams(seed)
        guide = np.clip(guide + rng.normal(0.0, spec.guide_noise, guide.shape), 0.0, 1.0)
    for mr in spec.mismatch_regions:
        guide[:, mr.mask(h, w)] = spec.mismatch_value
    return SarImage(clean), OpticalGuide(guide)


def gamma_speckle(shape, looks: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean Gamma(``looks``) samples."""
    return rng.gamma(shape=looks, scale=1.0 / looks, size=shape)


def apply_speckle(clean, looks: float, seed=0) -> SarImage:
    """``z = x * u`` with ``u`` i.i.d. unit-mean Gamma of shape ``looks``."""
    x = np.asarray(getattr(clean, "pixels", clean), dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("clean intensities must be positive")
    _, rng = _streams(seed)
    return SarImage(x * gamma_speckle(x.shape, looks, rng), looks=looks)


@dataclass
class MonteCarloResult:
    samples: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    looks: float
    rho: float
    patch_size: int
    normalized: bool

    def density(self) -> np.ndarray:
        return self.counts / (self.counts.sum() * np.diff(self.edges))


def mc_distance_samples(looks: float, rho: float, patch_size: int, n_samples: int, seed=0,
                        bins=100, normalize: bool | None = None, chunk: int = 1 << 20) -> MonteCarloResult:
    """Distances between speckled pixels/patches with intensity ratio ``rho**2``.

    Each sample compares ``rho**2 * u1`` with ``u2`` over ``patch_size``
    independent pixel pairs and averages the pixel distances. By default a
    single pixel gives the raw distance, while patches are divided by the
    same-signal mean so that equal-signal patches average 1.
    """
    if n_samples < 10_000:
        raise ValueError("n_samples must be at least 1e4")
    if rho <= 0 or patch_size < 1:
        raise ValueError("rho and patch_size must be positive")
    normalize = patch_size > 1 if normalize is None else normalize
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    out = np.empty(n_samples)
    per = max(1, chunk // patch_size)
    for start in range(0, n_samples, per):
        n = min(per, n_samples - start)
        u1 = gamma_speckle((n, patch_size), looks, rng)
        u2 = gamma_speckle((n, patch_size), looks, rng)
        out[start:start + n] = pixel_distance(rho * rho * u1, u2).mean(axis=1)
    if normalize:
        out /= distance_moments(looks).mean
    counts, edges = np.histogram(out, bins=bins)
    return MonteCarloResult(out, counts, edges, float(looks), float(rho), int(patch_size), bool(normalize))


def overlap_coefficient(a: np.ndarray, b: np.ndarray, bins=200) -> float:
    """Shared area of two empirical densities on a common binning."""
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    edges = np.linspace(lo, hi, bins + 1)
    pa, _ = np.histogram(a, edges)
    pb, _ = np.histogram(b, edges)
    return float(np.minimum(pa / pa.sum(), pb / pb.sum()).sum())


def best_split_error(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Threshold minimising the misclassification of ``a`` (below) vs ``b`` (above).

    Returns ``(threshold, error_rate)`` over the pooled samples.
    """
    pooled = np.concatenate([a, b])
    labels = np.concatenate([np.zeros(len(a), bool), np.ones(len(b), bool)])
    order = np.argsort(pooled, kind="stable")
    lab = labels[order]
    # threshold after position i: errors = b below + a above
    b_below = np.cumsum(lab)
    a_above = len(a) - np.cumsum(~lab)
    err = b_below + a_above
    i = int(np.argmin(err))
    thr = 0.5 * (pooled[order[i]] + pooled[order[min(i + 1, len(pooled) - 1)]])
    return float(thr), float(err[i] / len(pooled))
