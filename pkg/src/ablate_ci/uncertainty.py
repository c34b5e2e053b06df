"""Standard error of the mean, Student-t quantiles, and confidence intervals.

The default variance estimator divides by n (the maximum-likelihood form);
the conventional unbiased n-1 divisor is available but is not the default.
Intervals default to Student-t with n-1 degrees of freedom; ``normal`` uses
the standard-normal quantile instead (the familiar 1.96 shortcut at 95%,
a good approximation once n reaches about 100).

The t quantile is computed in-house by inverting the t CDF, which reduces
to the regularized incomplete beta function.  The incomplete beta uses the
modified Lentz continued fraction; the inversion is a bracketed bisection
on the CDF, monotone and safe for every df >= 1.  Accuracy is limited only
by float64 evaluation of the CDF (abs error ~1e-10 at the usual levels).

For the rv formulation the K > 1 cross-product samples are not fully
independent; treating them as n = N*K samples is an explicit modeling
assumption, and results carry a note when it is in play.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from statistics import NormalDist

import numpy as np

from .core import InsufficientSamplesError, InvalidArgumentError
from .estimator import SampleSequence

CI_METHODS = ("student_t", "normal")
VARIANCE_METHODS = ("mle", "unbiased")

_LENTZ_TINY = 1e-300
_LENTZ_EPS = 3e-16
_LENTZ_MAX_ITER = 2000


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz scheme)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _LENTZ_TINY:
        d = _LENTZ_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _LENTZ_MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _LENTZ_TINY:
            d = _LENTZ_TINY
        c = 1.0 + aa / c
        if abs(c) < _LENTZ_TINY:
            c = _LENTZ_TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _LENTZ_TINY:
            d = _LENTZ_TINY
        c = 1.0 + aa / c
        if abs(c) < _LENTZ_TINY:
            c = _LENTZ_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _LENTZ_EPS:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0.0 or b <= 0.0:
        raise InvalidArgumentError("incomplete beta requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise InvalidArgumentError("incomplete beta requires x in [0, 1]")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # pick the branch where the continued fraction converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_cdf(t: float, df: int) -> float:
    """CDF of Student's t with ``df`` degrees of freedom at ``t``."""
    df = _check_df(df)
    if not math.isfinite(t):
        raise InvalidArgumentError("t must be finite")
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(0.5 * df, 0.5, x)
    return 1.0 - tail if t > 0.0 else tail


def _check_df(df: int) -> int:
    if int(df) != df or int(df) < 1:
        raise InvalidArgumentError("degrees of freedom must be an integer >= 1")
    return int(df)


@lru_cache(maxsize=512)
def t_quantile(p: float, df: int) -> float:
    """Value q with CDF_t(q; df) = p, by bracketed bisection of the CDF.

    Exact at p = 0.5 and antisymmetric by construction:
    t_quantile(p, df) == -t_quantile(1 - p, df).
    """
    df = _check_df(df)
    if not (math.isfinite(p) and 0.0 < p < 1.0):
        raise InvalidArgumentError("quantile level p must be in (0, 1)")
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile(1.0 - p, df)

    lo = 0.0
    hi = 1.0
    while student_t_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e300:
            raise ArithmeticError("t quantile bracket expansion failed")
    # bisection: monotone CDF, so this converges unconditionally
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if student_t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def normal_quantile(p: float) -> float:
    """Standard-normal quantile (inverse CDF)."""
    if not (math.isfinite(p) and 0.0 < p < 1.0):
        raise InvalidArgumentError("quantile level p must be in (0, 1)")
    return NormalDist().inv_cdf(p)


def _as_values(samples: SampleSequence | np.ndarray) -> np.ndarray:
    values = samples.values if isinstance(samples, SampleSequence) else samples
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InvalidArgumentError("no samples given")
    if not np.isfinite(arr).all():
        raise InvalidArgumentError("samples contain non-finite values")
    return arr


def mle_variance(samples: SampleSequence | np.ndarray) -> float:
    """Maximum-likelihood variance: mean squared deviation, divisor n."""
    arr = _as_values(samples)
    mean = math.fsum(arr) / arr.size
    return math.fsum((arr - mean) ** 2) / arr.size


def unbiased_variance(samples: SampleSequence | np.ndarray) -> float:
    """Sample variance with the n-1 divisor; requires n >= 2."""
    arr = _as_values(samples)
    if arr.size < 2:
        raise InsufficientSamplesError("unbiased variance needs n >= 2")
    mean = math.fsum(arr) / arr.size
    return math.fsum((arr - mean) ** 2) / (arr.size - 1)


def sem(samples: SampleSequence | np.ndarray, variance: str = "mle") -> float:
    """Standard error of the mean: sqrt(variance / n)."""
    arr = _as_values(samples)
    if variance == "mle":
        var = mle_variance(arr)
    elif variance == "unbiased":
        var = unbiased_variance(arr)
    else:
        raise InvalidArgumentError(
            f"unknown variance method {variance!r}; expected one of {VARIANCE_METHODS}"
        )
    return math.sqrt(var / arr.size)


@dataclass(frozen=True)
class Interval:
    """Point estimate with its SEM and a symmetric confidence interval."""

    point: float
    sem: float
    ci_low: float
    ci_high: float


def confidence_interval(
    samples: SampleSequence | np.ndarray,
    level: float = 0.95,
    method: str = "student_t",
    variance: str = "mle",
) -> Interval:
    """Symmetric two-sided interval around the sample mean.

    Half-width is quantile((1+level)/2) times the SEM, where the quantile
    comes from Student's t with n-1 degrees of freedom (default) or from
    the standard normal.  Needs n >= 2; the spread of one sample is
    degenerate.
    """
    arr = _as_values(samples)
    if arr.size < 2:
        raise InsufficientSamplesError(
            f"confidence interval needs n >= 2 samples, got {arr.size}"
        )
    if not (math.isfinite(level) and 0.0 < level < 1.0):
        raise InvalidArgumentError("confidence level must be in (0, 1)")
    if method not in CI_METHODS:
        raise InvalidArgumentError(
            f"unknown CI method {method!r}; expected one of {CI_METHODS}"
        )
    point = math.fsum(arr) / arr.size
    scale = sem(arr, variance=variance)
    p = 0.5 * (1.0 + level)
    q = t_quantile(p, arr.size - 1) if method == "student_t" else normal_quantile(p)
    half = q * scale
    return Interval(point=point, sem=scale, ci_low=point - half, ci_high=point + half)


@dataclass(frozen=True)
class ImportanceEstimate:
    """One feature's importance under one CI formulation, with provenance.

    ``seed`` is the derived per-feature table seed actually used for the
    draws, not the run's master seed.  ``n_samples`` is N*K for rv and K
    for fd.
    """

    feature_index: int
    feature_name: str
    point: float
    sem: float
    ci_low: float
    ci_high: float
    confidence_level: float
    formulation: str
    n_samples: int
    K: int
    mode: str
    seed: int
    ci_method: str

    def __post_init__(self) -> None:
        if not self.ci_low <= self.point <= self.ci_high:
            raise InvalidArgumentError("interval must bracket the point estimate")
