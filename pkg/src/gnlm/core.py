"""Optical-guided patch-wise nonlocal means with a SAR reliability test.

For every target patch anchored at ``t`` the filter

1. computes the normalised SAR distance ``d_S(s, t)`` and the optical
   distance ``d_O(s, t)`` to every candidate ``s`` in a square search window;
2. keeps candidates with ``d_S < T`` (the target itself always passes);
3. if more than ``s0`` survive, keeps the ``s0`` with smallest ``d_O``
   (ties: nearer to the anchor, then raster order);
4. averages the surviving noisy patches with weights
   ``exp(-lam * (gamma * d_S + (1 - gamma) * d_O))`` normalised to one.

Overlapping patch estimates are averaged uniformly per pixel. The output is
a convex combination of SAR input values; the guide only steers weights.

The implementation is offset-major: for each search offset the pixel
distance map is computed once for a band of anchor rows and box-summed into
patch distances, so cost is ``O(search^2 * pixels * patch)`` additions with a
single logarithm per pixel pair.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import speckle_stats
from .distances import LOG2
from .rasters import OpticalGuide, SarImage, check_same_shape

log = logging.getLogger(__name__)

# optical distances are ranked at this resolution so that mathematically
# tied patches do not get split by summation-order rounding
RANK_DECIMALS = 12

PRESETS = {
    "sharp": dict(lam=0.002, gamma=0.15, k_sigma=2.0, s0=256),
    "smooth": dict(lam=0.004, gamma=0.15, k_sigma=2.0, s0=None),
}


@dataclass(frozen=True)
class FilterConfig:
    """All knobs of the guided NLM filter.

    ``threshold`` overrides ``k_sigma`` when given (``math.inf`` disables the
    test). ``s0=None`` means no cap. ``intensity_floor=None`` clamps at
    ``1e-8`` times the image mean.
    """

    patch_side: int = 8
    search_side: int = 39
    lam: float = 0.002
    gamma: float = 0.15
    k_sigma: float = 2.0
    threshold: float | None = None
    s0: int | None = 256
    anchor_step: int = 1
    intensity_floor: float | None = None
    optical_range: float = 255.0
    band_rows: int = 8

    def __post_init__(self):
        if int(self.patch_side) != self.patch_side or self.patch_side < 1:
            raise ValueError("patch_side must be a positive integer")
        if int(self.search_side) != self.search_side or self.search_side < 1 or self.search_side % 2 == 0:
            raise ValueError("search_side must be a positive odd integer")
        if self.patch_side > self.search_side:
            raise ValueError("patch_side must not exceed search_side")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.threshold is None:
            if not self.k_sigma >= 0:
                raise ValueError("k_sigma must be nonnegative")
        elif not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.s0 is not None:
            if int(self.s0) != self.s0 or self.s0 < 1:
                raise ValueError("s0 must be a positive integer or None")
            if self.s0 > self.search_side ** 2:
                raise ValueError("s0 must not exceed search_side**2")
        if int(self.anchor_step) != self.anchor_step or not 1 <= self.anchor_step <= self.patch_side:
            raise ValueError("anchor_step must be an integer in [1, patch_side]")
        if self.intensity_floor is not None and not self.intensity_floor > 0:
            raise ValueError("intensity_floor must be positive")
        if not self.optical_range > 0:
            raise ValueError("optical_range must be positive")
        if self.band_rows < 1:
            raise ValueError("band_rows must be positive")

    @classmethod
    def preset(cls, name: str, **overrides) -> "FilterConfig":
        try:
            base = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        merged = {**base, **overrides}
        side = merged.get("search_side", cls.search_side)
        # the preset cap is a no-op once it reaches the window size
        if "s0" not in overrides and merged["s0"] is not None and merged["s0"] >= side * side:
            merged["s0"] = None
        return cls(**merged)

    @property
    def patch_size(self) -> int:
        return self.patch_side * self.patch_side

    @property
    def search_size(self) -> int:
        return self.search_side * self.search_side

    def resolve_threshold(self, looks: float) -> float:
        if self.threshold is not None:
            return float(self.threshold)
        return speckle_stats.threshold(looks, self.patch_size, self.k_sigma)

    def with_(self, **kw) -> "FilterConfig":
        return replace(self, **kw)


@dataclass
class Candidate:
    position: tuple[int, int]
    d_sar: float
    d_opt: float
    passed_test: bool
    capped: bool
    weight: float


@dataclass
class PredictorSet:
    anchor: tuple[int, int]
    candidates: list[Candidate]

    @property
    def n_passed(self) -> int:
        return sum(c.passed_test for c in self.candidates)

    @property
    def survivors(self) -> list[Candidate]:
        return [c for c in self.candidates if c.weight > 0]


@dataclass
class FilterOutput:
    filtered: np.ndarray
    predictor_count: np.ndarray
    anchor_rows: np.ndarray
    anchor_cols: np.ndarray
    threshold: float
    config: FilterConfig
    unfiltered_mask: np.ndarray = field(init=False)

    def __post_init__(self):
        self.unfiltered_mask = self.predictor_count <= 1


def anchor_positions(n: int, patch_side: int, step: int) -> np.ndarray:
    """Anchor coordinates along one axis; the last anchor touches the border."""
    last = n - patch_side
    if last < 0:
        raise ValueError(f"image side {n} smaller than patch side {patch_side}")
    pos = list(range(0, last + 1, step))
    if pos[-1] != last:
        pos.append(last)
    return np.asarray(pos, dtype=np.intp)


def candidate_offsets(anchor, config: FilterConfig, dims) -> list[tuple[int, int]]:
    """In-bounds candidate positions of the search window centred on ``anchor``."""
    h, w = dims
    r, c = anchor
    p = config.patch_side
    if r < 0 or c < 0 or r + p > h or c + p > w:
        raise IndexError(f"anchor patch at {tuple(anchor)} falls outside {h}x{w} image")
    half = config.search_side // 2
    return [
        (r + dy, c + dx)
        for dy in range(-half, half + 1)
        for dx in range(-half, half + 1)
        if 0 <= r + dy <= h - p and 0 <= c + dx <= w - p
    ]


def clamp_intensities(pixels: np.ndarray, floor: float | None) -> np.ndarray:
    if floor is None:
        mean = float(pixels.mean())
        floor = 1e-8 * mean if mean > 0 else 1e-30
    return np.maximum(pixels, floor)


def apply_cap(passed: np.ndarray, d_opt: np.ndarray, secondary: np.ndarray, s0: int) -> np.ndarray:
    """Keep at most ``s0`` passing candidates per row, smallest ``d_opt`` first.

    Ties on ``d_opt`` go to the smaller ``secondary`` key, then the lower
    column index (raster order of the candidate). The filter uses the squared
    spatial offset as secondary key: breaking ties with ``d_S`` would select
    patches whose speckle happens to resemble the target's, which biases the
    estimate whenever the guide is flat.
    """
    keep = passed.copy()
    over = np.flatnonzero(passed.sum(axis=1) > s0)
    if over.size == 0:
        return keep
    ps = passed[over]
    key = np.where(ps, d_opt[over], np.inf)
    kth = np.partition(key, s0 - 1, axis=1)[:, s0 - 1:s0]
    less = key < kth
    eq = key == kth
    need = s0 - less.sum(axis=1, keepdims=True)
    sel = less.copy()

    tie = (eq.sum(axis=1, keepdims=True) > need)[:, 0]
    simple = ~tie
    sel[simple] |= eq[simple]
    if tie.any():
        eq_t, need_t = eq[tie], need[tie]
        key2 = np.where(eq_t, np.broadcast_to(secondary, passed.shape)[over][tie], np.inf)
        kth2 = np.take_along_axis(np.sort(key2, axis=1), need_t - 1, axis=1)
        less2 = key2 < kth2
        eq2 = key2 == kth2
        need2 = need_t - less2.sum(axis=1, keepdims=True)
        first = eq2 & (np.cumsum(eq2, axis=1) <= need2)
        sel[tie] |= less2 | first
    keep[over] = sel
    return keep


def normalized_weights(select: np.ndarray, d_sar: np.ndarray, d_opt: np.ndarray, lam: float, gamma: float) -> np.ndarray:
    """Weights over the selected candidates of each row, summing to one."""
    with np.errstate(invalid="ignore"):
        expo = -lam * (gamma * d_sar + (1.0 - gamma) * d_opt)
    expo = np.where(select, expo, -np.inf)
    expo -= expo.max(axis=1, keepdims=True)
    w = np.exp(expo)
    w /= w.sum(axis=1, keepdims=True)
    return w


def _box_rows(a: np.ndarray, p: int) -> np.ndarray:
    """``out[i] = sum_{k<p} a[i + k]`` along axis 0."""
    n = a.shape[0] - p + 1
    out = a[:n].copy()
    for k in range(1, p):
        out += a[k:k + n]
    return out


def _box_cols(a: np.ndarray, p: int) -> np.ndarray:
    n = a.shape[1] - p + 1
    out = a[:, :n].copy()
    for k in range(1, p):
        out += a[:, k:k + n]
    return out


def _spread_rows(a: np.ndarray, p: int) -> np.ndarray:
    """Adjoint of :func:`_box_rows`."""
    out = np.zeros((a.shape[0] + p - 1,) + a.shape[1:], dtype=a.dtype)
    n = a.shape[0]
    for k in range(p):
        out[k:k + n] += a
    return out


def _spread_cols(a: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros((a.shape[0], a.shape[1] + p - 1) + a.shape[2:], dtype=a.dtype)
    n = a.shape[1]
    for k in range(p):
        out[:, k:k + n] += a
    return out


class _Context:
    """Padded read-only buffers shared by all band workers."""

    def __init__(self, z: np.ndarray, guide: OpticalGuide, config: FilterConfig, T: float, mu_d: float):
        self.config = config
        self.T = T
        self.mu_d = mu_d
        self.h, self.w = z.shape
        self.half = config.search_side // 2
        hp = self.half
        self.z = z
        self.logz = np.log(z)
        self.zpad = np.pad(z, hp, constant_values=1.0)
        self.logzpad = np.pad(self.logz, hp, constant_values=0.0)
        self.opt = guide.planes
        self.optpad = np.pad(guide.planes, ((0, 0), (hp, hp), (hp, hp)), constant_values=0.0)
        self.rows = anchor_positions(self.h, config.patch_side, config.anchor_step)
        self.cols = anchor_positions(self.w, config.patch_side, config.anchor_step)
        self.use_guide = config.gamma < 1.0
        dy, dx = np.mgrid[-hp:hp + 1, -hp:hp + 1]
        self.offset_r2 = (dy * dy + dx * dx).ravel().astype(np.float64)


def _band_distances(ctx: _Context, rows: np.ndarray):
    """SAR and optical patch distances for the anchors of one band.

    Returns arrays shaped ``(n_anchors, search**2)`` in candidate raster
    order plus the validity mask.
    """
    cfg = ctx.config
    p = cfg.patch_side
    hp = ctx.half
    s1 = cfg.search_side
    r0 = int(rows[0])
    n_r = int(rows[-1]) - r0 + p
    local = rows - r0
    cols = ctx.cols
    nar, nac = len(rows), len(cols)
    dx = np.arange(-hp, hp + 1)

    d_sar = np.empty((nar, nac, s1, s1))
    d_opt = np.zeros((nar, nac, s1, s1))
    valid = np.empty((nar, nac, s1, s1), dtype=bool)
    col_ok = (cols[:, None] + dx[None, :] >= 0) & (cols[:, None] + dx[None, :] <= ctx.w - p)

    zt = ctx.z[r0:r0 + n_r, :, None]
    lzt = ctx.logz[r0:r0 + n_r, :, None]
    ot = ctx.opt[:, r0:r0 + n_r, :, None]
    norm_s = 1.0 / (ctx.mu_d * cfg.patch_size)
    norm_o = 1.0 / (ctx.opt.shape[0] * cfg.patch_size)

    for iy, dy in enumerate(range(-hp, hp + 1)):
        top = r0 + dy + hp
        zc = sliding_window_view(ctx.zpad[top:top + n_r], s1, axis=1)
        lzc = sliding_window_view(ctx.logzpad[top:top + n_r], s1, axis=1)
        pix = np.log(zt + zc)
        pix -= LOG2
        pix -= 0.5 * (lzt + lzc)
        np.maximum(pix, 0.0, out=pix)
        box = _box_cols(_box_rows(pix, p)[local], p)[:, cols]
        d_sar[:, :, iy, :] = box * norm_s

        if ctx.use_guide:
            oc = sliding_window_view(ctx.optpad[:, top:top + n_r], s1, axis=2)
            diff = ot - oc
            sq = np.einsum("mrcj,mrcj->rcj", diff, diff)
            box = _box_cols(_box_rows(sq, p)[local], p)[:, cols]
            d_opt[:, :, iy, :] = box * norm_o

        row_ok = (rows + dy >= 0) & (rows + dy <= ctx.h - p)
        valid[:, :, iy, :] = row_ok[:, None, None] & col_ok[None, :, :]

    d_sar[:, :, hp, hp] = 0.0
    d_opt[:, :, hp, hp] = 0.0
    n = nar * nac
    return d_sar.reshape(n, -1), d_opt.reshape(n, -1), valid.reshape(n, -1)


def _band_select(ctx: _Context, d_sar, d_opt, valid):
    cfg = ctx.config
    passed = valid & (d_sar < ctx.T)
    counts = passed.sum(axis=1)
    select = passed
    if cfg.s0 is not None and cfg.s0 < cfg.search_size:
        select = apply_cap(passed, np.round(d_opt, RANK_DECIMALS), ctx.offset_r2, cfg.s0)
    d_opt_eff = d_opt * cfg.optical_range ** 2 if ctx.use_guide else np.zeros_like(d_opt)
    w = normalized_weights(select, d_sar, d_opt_eff, cfg.lam, cfg.gamma)
    return w, counts


def _band_aggregate(ctx: _Context, rows: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted sums of candidate pixels over all patch estimates of the band."""
    cfg = ctx.config
    p = cfg.patch_side
    hp = ctx.half
    s1 = cfg.search_side
    r0 = int(rows[0])
    n_r = int(rows[-1]) - r0 + p
    local = rows - r0
    cols = ctx.cols
    nar, nac = len(rows), len(cols)
    w = w.reshape(nar, nac, s1, s1)
    num = np.zeros((n_r, ctx.w))
    grid = np.zeros((n_r - p + 1, ctx.w - p + 1, s1))
    for iy, dy in enumerate(range(-hp, hp + 1)):
        wy = w[:, :, iy, :]
        if not wy.any():
            continue
        grid[local[:, None], cols[None, :]] = wy
        cover = _spread_cols(_spread_rows(grid, p), p)
        top = r0 + dy + hp
        zc = sliding_window_view(ctx.zpad[top:top + n_r], s1, axis=1)
        num += np.einsum("rcj,rcj->rc", cover, zc)
    return num


def _run_band(ctx: _Context, rows: np.ndarray):
    d_sar, d_opt, valid = _band_distances(ctx, rows)
    w, counts = _band_select(ctx, d_sar, d_opt, valid)
    del d_sar, d_opt, valid
    num = _band_aggregate(ctx, rows, w)
    return num, counts.reshape(len(rows), len(ctx.cols))


def coverage(h: int, w: int, rows: np.ndarray, cols: np.ndarray, p: int) -> np.ndarray:
    """Number of patch estimates covering each pixel."""
    rc = np.zeros(h)
    cc = np.zeros(w)
    for k in range(p):
        np.add.at(rc, rows + k, 1.0)
        np.add.at(cc, cols + k, 1.0)
    return np.outer(rc, cc)


def filter(sar: SarImage, guide: OpticalGuide, config: FilterConfig | None = None, threads: int = 1) -> FilterOutput:
    """Despeckle ``sar`` using ``guide`` to rank and weight predictors.

    Work is split into fixed bands of anchor rows; each band writes a
    private accumulator and bands are merged in order, so the result is
    bit-identical for any ``threads``.
    """
    config = config or FilterConfig()
    check_same_shape(sar, guide)
    h, w = sar.shape
    if h < config.patch_side or w < config.patch_side:
        raise ValueError(f"image {h}x{w} smaller than patch side {config.patch_side}")

    z = clamp_intensities(sar.pixels, config.intensity_floor)
    mu_d = speckle_stats.distance_moments(sar.looks).mean
    T = config.resolve_threshold(sar.looks)
    ctx = _Context(z, guide, config, T, mu_d)

    bands = [ctx.rows[i:i + config.band_rows] for i in range(0, len(ctx.rows), config.band_rows)]
    log.debug("filtering %dx%d: %d anchors in %d bands, T=%.4f", h, w, len(ctx.rows) * len(ctx.cols), len(bands), T)

    num = np.zeros((h, w))
    counts = np.empty((len(ctx.rows), len(ctx.cols)), dtype=np.int64)

    def run(b):
        return _run_band(ctx, b)

    if threads > 1 and len(bands) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = pool.map(run, bands)
            _merge(results, bands, ctx, num, counts, config.band_rows)
    else:
        _merge(map(run, bands), bands, ctx, num, counts, config.band_rows)

    cov = coverage(h, w, ctx.rows, ctx.cols, config.patch_side)
    filtered = num / cov
    return FilterOutput(
        filtered=filtered,
        predictor_count=counts,
        anchor_rows=ctx.rows,
        anchor_cols=ctx.cols,
        threshold=T,
        config=config,
    )


def _merge(results, bands, ctx, num, counts, band_rows):
    p = ctx.config.patch_side
    for i, (b, (band_num, band_counts)) in enumerate(zip(bands, results)):
        r0 = int(b[0])
        num[r0:r0 + band_num.shape[0]] += band_num
        counts[i * band_rows:i * band_rows + len(b)] = band_counts


def select_predictors(sar: SarImage, guide: OpticalGuide, anchor, config: FilterConfig,
                      stats: speckle_stats.DistanceStats | None = None) -> PredictorSet:
    """Predictor selection for a single anchor, with full per-candidate detail."""
    check_same_shape(sar, guide)
    stats = stats or speckle_stats.distance_moments(sar.looks)
    z = clamp_intensities(sar.pixels, config.intensity_floor)
    p = config.patch_side
    r, c = anchor
    positions = candidate_offsets(anchor, config, sar.shape)
    target = z[r:r + p, c:c + p]
    otarget = guide.planes[:, r:r + p, c:c + p]
    d_sar = np.empty(len(positions))
    d_opt = np.empty(len(positions))
    for i, (sr, sc) in enumerate(positions):
        if (sr, sc) == (r, c):
            d_sar[i] = d_opt[i] = 0.0
            continue
        cand = z[sr:sr + p, sc:sc + p]
        pix = np.maximum(np.log((cand + target) / (2.0 * np.sqrt(cand * target))), 0.0)
        d_sar[i] = pix.sum() / (stats.mean * config.patch_size)
        d_opt[i] = np.sum((guide.planes[:, sr:sr + p, sc:sc + p] - otarget) ** 2) / (guide.bands * config.patch_size)

    T = config.resolve_threshold(sar.looks)
    passed = d_sar < T
    keep = passed.copy()
    # with gamma == 1 the guide is ignored entirely, ranking included
    d_opt_eff = d_opt if config.gamma < 1.0 else np.zeros_like(d_opt)
    if config.s0 is not None and passed.sum() > config.s0:
        r2 = np.array([(pr - r) ** 2 + (pc - c) ** 2 for pr, pc in positions], dtype=np.float64)
        order = np.lexsort((np.arange(len(positions)), r2, np.round(d_opt_eff, RANK_DECIMALS)))
        ranked = [i for i in order if passed[i]]
        keep[:] = False
        keep[ranked[:config.s0]] = True
    w = normalized_weights(keep[None], d_sar[None], d_opt_eff[None] * config.optical_range ** 2,
                           config.lam, config.gamma)[0]
    cands = [
        Candidate((int(pr), int(pc)), float(ds), float(do), bool(ok), bool(ok and not kp), float(wi))
        for (pr, pc), ds, do, ok, kp, wi in zip(positions, d_sar, d_opt, passed, keep, w)
    ]
    return PredictorSet(anchor=(int(r), int(c)), candidates=cands)


def count_raster(output: FilterOutput, shape) -> np.ndarray:
    """Predictor counts placed at their anchor pixels; -1 where no anchor sits."""
    out = np.full(shape, -1, dtype=np.int64)
    out[np.ix_(output.anchor_rows, output.anchor_cols)] = output.predictor_count
    return out
