"""Statistics of the log-ratio distance between two speckle samples.

For two independent unit-mean Gamma(L) variates ``X, Y`` the distance

    D = log[(X + Y) / (2 sqrt(X Y))]

has density ``p_D(d) = C(L) exp(-2 L d) / sqrt(1 - exp(-2 d))`` with
``C(L) = Gamma(2L) / [2^(L-1) Gamma(L)]^2``, and

    E[D]   = psi0(2L) - psi0(L) - log 2
    VAR[D] = psi1(L) / 2 - psi1(2L)

These give the normalisation of the patch distance and the reliability
threshold ``T = 1 + k sigma_P`` used by the filter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate, special

# Bernoulli numbers B_2 .. B_20 for the asymptotic series.
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
)
_SHIFT_CUTOFF = 10.0


@dataclass(frozen=True)
class SpeckleModel:
    """Fully developed speckle with ``looks`` (Gamma shape, may be non-integer)."""

    looks: float

    def __post_init__(self):
        if not (self.looks > 0 and math.isfinite(self.looks)):
            raise ValueError(f"looks must be a positive finite number, got {self.looks!r}")


@dataclass(frozen=True)
class DistanceStats:
    mean: float
    variance: float
    looks: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def _as_model(model) -> SpeckleModel:
    if isinstance(model, SpeckleModel):
        return model
    return SpeckleModel(float(model))


def polygamma(order: int, x: float) -> float:
    """Digamma (``order=0``) or trigamma (``order=1``) of a positive real.

    The argument is shifted above a cutoff with the recurrence
    ``psi_m(x) = psi_m(x + 1) - (-1)^m m! / x^(m+1)`` and the
    Bernoulli asymptotic series is summed there.
    """
    if order not in (0, 1):
        raise ValueError(f"unsupported polygamma order {order!r}; expected 0 or 1")
    x = float(x)
    if not (x > 0 and math.isfinite(x)):
        raise ValueError(f"polygamma argument must be positive and finite, got {x!r}")

    acc = 0.0
    while x < _SHIFT_CUTOFF:
        acc += 1.0 / x if order == 0 else 1.0 / (x * x)
        x += 1.0

    inv2 = 1.0 / (x * x)
    if order == 0:
        # psi(x) ~ log x - 1/(2x) - sum B_2k / (2k x^2k)
        series = 0.0
        power = inv2
        for k, b in enumerate(_BERNOULLI, start=1):
            series += b / (2 * k) * power
            power *= inv2
        return math.log(x) - 0.5 / x - series - acc

    # psi1(x) ~ 1/x + 1/(2x^2) + sum B_2k / x^(2k+1)
    series = 0.0
    power = inv2 / x
    for b in _BERNOULLI:
        series += b * power
        power *= inv2
    return 1.0 / x + 0.5 * inv2 + series + acc


def log_normalizer(model) -> float:
    """``log C(L)`` computed through log-gamma to stay finite for large L."""
    L = _as_model(model).looks
    return math.lgamma(2 * L) - 2.0 * ((L - 1.0) * math.log(2.0) + math.lgamma(L))


def distance_pdf(d: float, model) -> float:
    """Density of the same-signal pixel distance; ``inf`` at ``d == 0``."""
    model = _as_model(model)
    d = float(d)
    if d < 0 or math.isnan(d):
        raise ValueError(f"distance must be nonnegative, got {d!r}")
    if d == 0.0:
        return math.inf
    L = model.looks
    # 1 - exp(-2d) via expm1 keeps precision for tiny d
    return math.exp(log_normalizer(model) - 2.0 * L * d) / math.sqrt(-math.expm1(-2.0 * d))


def distance_moments(model) -> DistanceStats:
    model = _as_model(model)
    L = model.looks
    mean = polygamma(0, 2 * L) - polygamma(0, L) - math.log(2.0)
    variance = 0.5 * polygamma(1, L) - polygamma(1, 2 * L)
    return DistanceStats(mean=mean, variance=variance, looks=L)


def patch_sigma(model, patch_size: int) -> float:
    """Std of the normalised patch distance over ``patch_size`` pixels (mean is 1)."""
    if int(patch_size) != patch_size or patch_size < 1:
        raise ValueError(f"patch_size must be a positive integer, got {patch_size!r}")
    st = distance_moments(model)
    return st.std / (st.mean * math.sqrt(patch_size))


def threshold(model, patch_size: int, k: float) -> float:
    """Reliability threshold ``1 + k * sigma_P``."""
    if not k >= 0:
        raise ValueError(f"k must be nonnegative, got {k!r}")
    if math.isinf(k):
        return math.inf
    return 1.0 + k * patch_sigma(model, patch_size)


def upper_limit(model, eps: float = 1e-15) -> float:
    """Distance beyond which the density drops below ``eps``.

    For ``d >= 1`` the square-root factor is bounded by 1.08, so solving
    ``C exp(-2Ld) = eps`` (plus a margin) is sufficient.
    """
    L = _as_model(model).looks
    d = (log_normalizer(model) - math.log(eps)) / (2.0 * L)
    return max(d, 1.0) + 1.0


def _pdf_sq(s: float, model: SpeckleModel) -> float:
    # density in s with d = s**2; the d^-1/2 endpoint singularity cancels
    if s == 0.0:
        return 2.0 * math.exp(log_normalizer(model)) / math.sqrt(2.0)
    return 2.0 * s * distance_pdf(s * s, model)


def tail_probability_quad(model, d0: float) -> float:
    """``P(D > d0)`` by adaptive quadrature of the density."""
    model = _as_model(model)
    if d0 < 0:
        raise ValueError(f"d0 must be nonnegative, got {d0!r}")
    hi = upper_limit(model)
    if d0 >= hi:
        return 0.0
    val, _ = integrate.quad(
        _pdf_sq, math.sqrt(d0), math.sqrt(hi), args=(model,),
        epsabs=1e-12, epsrel=1e-12, limit=200,
    )
    return min(max(val, 0.0), 1.0)


def tail_probability(model, d0: float) -> float:
    """``P(D > d0)`` in closed form.

    With ``y = exp(-2d)`` the tail integral becomes a regularised incomplete
    beta function, ``I_y(L, 1/2)``; for ``L = 1`` this is
    ``1 - sqrt(1 - exp(-2 d0))``.
    """
    model = _as_model(model)
    d0 = float(d0)
    if d0 < 0 or math.isnan(d0):
        raise ValueError(f"d0 must be nonnegative, got {d0!r}")
    if d0 == 0.0:
        return 1.0
    return float(special.betainc(model.looks, 0.5, math.exp(-2.0 * d0)))


def pdf_integral(model) -> float:
    """Total mass of the density over ``[0, inf)``; should be 1."""
    return tail_probability_quad(model, 0.0)


def gaussian_rejection_fraction(k: float) -> float:
    """Fraction of good predictors lost at ``T = 1 + k sigma_P`` (Gaussian approx.)."""
    if math.isinf(k):
        return 0.0
    return 0.5 * math.erfc(k / math.sqrt(2.0))


def summary(looks: float, patch_side: int, k: float, tail_points=(0.1, 0.2, 0.5)) -> dict:
    """Everything the ``stats`` subcommand reports."""
    model = SpeckleModel(looks)
    st = distance_moments(model)
    n = patch_side * patch_side
    return {
        "looks": model.looks,
        "patch_side": patch_side,
        "patch_size": n,
        "k": k,
        "mu_D": st.mean,
        "sigma_D": st.std,
        "var_D": st.variance,
        "sigma_P": patch_sigma(model, n),
        "T": threshold(model, n, k),
        "good_predictor_rejection": gaussian_rejection_fraction(k),
        "tail_probability": {f"{d:g}": tail_probability(model, d) for d in tail_points},
    }
