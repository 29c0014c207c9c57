"""Slow reference implementations used only as test oracles.

Nothing here imports the package's filter code paths; distances, the
selection rule and the aggregation are written out with plain loops.
"""
import math

import numpy as np
from scipy import special


def mu_d(looks):
    return special.digamma(2 * looks) - special.digamma(looks) - math.log(2.0)


def var_d(looks):
    return 0.5 * special.polygamma(1, looks) - special.polygamma(1, 2 * looks)


def anchors(n, p, step):
    pos = list(range(0, n - p + 1, step))
    if pos[-1] != n - p:
        pos.append(n - p)
    return pos


def brute_force_filter(z, guide, looks, patch, search, lam, gamma, T, s0, step=1, optical_range=255.0):
    """Direct nested-loop guided patch NLM with uniform aggregation.

    ``guide`` is ``(M, H, W)``; ``T=inf`` disables the test, ``s0=None`` the cap.
    The cap ranks by optical distance (rounded to 12 decimals), then squared
    offset, then raster index; weights use the unrounded optical distance.
    """
    z = np.asarray(z, dtype=np.float64)
    h, w = z.shape
    m = guide.shape[0]
    n = patch * patch
    mu = mu_d(looks)
    half = search // 2
    num = np.zeros((h, w))
    cnt = np.zeros((h, w))
    counts = {}
    for r in anchors(h, patch, step):
        for c in anchors(w, patch, step):
            tz = z[r:r + patch, c:c + patch]
            to = guide[:, r:r + patch, c:c + patch]
            cands = []
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    sr, sc = r + dy, c + dx
                    if not (0 <= sr <= h - patch and 0 <= sc <= w - patch):
                        continue
                    sz = z[sr:sr + patch, sc:sc + patch]
                    if (sr, sc) == (r, c):
                        ds = do = 0.0
                    else:
                        tot = 0.0
                        for a, b in zip(sz.ravel(), tz.ravel()):
                            tot += max(math.log((a + b) / (2.0 * math.sqrt(a * b))), 0.0)
                        ds = tot / (mu * n)
                        do = float(np.sum((guide[:, sr:sr + patch, sc:sc + patch] - to) ** 2)) / (m * n)
                    if gamma == 1.0:
                        do = 0.0
                    cands.append((round(do, 12), dy * dy + dx * dx, sr * w + sc, ds, sr, sc, do))
            passed = [cd for cd in cands if cd[3] < T]
            counts[(r, c)] = len(passed)
            if s0 is not None and len(passed) > s0:
                passed = sorted(passed)[:s0]
            ex = [-lam * (gamma * ds + (1 - gamma) * do * optical_range ** 2) for *_, ds, _, _, do in passed]
            top = max(ex)
            wts = [math.exp(e - top) for e in ex]
            tot = sum(wts)
            est = np.zeros((patch, patch))
            for wt, (*_, sr, sc, _) in zip(wts, passed):
                est += (wt / tot) * z[sr:sr + patch, sc:sc + patch]
            num[r:r + patch, c:c + patch] += est
            cnt[r:r + patch, c:c + patch] += 1
    return num / cnt, counts
