"""Limiting-law machinery for the score-ratio asymptotics.

The score ratio converges to a random rescaling distributed as
sqrt(n / chi2_n).  This module provides the chi-square CDF (via the
regularized lower incomplete gamma, implemented with the classic
series / continued-fraction split), the CDF and quantiles of the
rescaling law, and a one-sample Kolmogorov-Smirnov test against any
reference CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.optimize import brentq

# Relative termination for the incomplete-gamma series and continued
# fraction; both converge well past this for a <= 5e3, x <= 1e6.
_GAMMA_TOL = 1e-14
_GAMMA_MAX_ITER = 10_000

# Asymptotic two-sided Kolmogorov critical constant at alpha = 0.01.
KS_CRITICAL_CONSTANT_01 = 1.628

# Below this value of sqrt(M) * D the truncated Kolmogorov series is
# useless, but the true survival value is 1 to four decimals already.
_KS_SERIES_FLOOR = 0.3
_KS_SERIES_TERMS = 100


@dataclass(frozen=True)
class RLaw:
    """Law of the limiting score rescaling sqrt(n / chi2_n)."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"degrees of freedom must be >= 1, got {self.n}")

    def cdf(self, r):
        return r_cdf(r, self)

    def quantile(self, p: float) -> float:
        return r_quantile(p, self)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        """Monte Carlo draws sqrt(n / chi2_n)."""
        chi2 = rng.chisquare(self.n, size=size)
        return np.sqrt(self.n / chi2)


@dataclass(frozen=True)
class KsOutcome:
    """Result of a one-sample Kolmogorov-Smirnov test."""

    statistic: float
    sample_size: int
    critical_value_01: float
    rejected_at_01: bool
    p_value_approx: float


def _lower_gamma_series(a: float, x: np.ndarray) -> np.ndarray:
    """Regularized P(a, x) by power series; requires x < a + 1."""
    out = np.zeros_like(x)
    active = x > 0
    if not active.any():
        return out
    xs = x[active]
    term = np.full_like(xs, 1.0 / a)
    total = term.copy()
    ap = a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term = term * xs / ap
        total += term
        if np.all(np.abs(term) < np.abs(total) * _GAMMA_TOL):
            break
    else:
        raise ArithmeticError(f"incomplete gamma series failed to converge (a={a})")
    log_prefix = -xs + a * np.log(xs) - math.lgamma(a)
    out[active] = total * np.exp(log_prefix)
    return out


def _upper_gamma_cf(a: float, x: np.ndarray) -> np.ndarray:
    """Regularized Q(a, x) by Lentz continued fraction; requires x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = np.full_like(x, 1.0 / tiny)
    dd = 1.0 / b
    h = dd.copy()
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - a)
        b = b + 2.0
        dd = an * dd + b
        dd[np.abs(dd) < tiny] = tiny
        c = b + an / c
        c[np.abs(c) < tiny] = tiny
        dd = 1.0 / dd
        delta = dd * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _GAMMA_TOL):
            break
    else:
        raise ArithmeticError(
            f"incomplete gamma continued fraction failed to converge (a={a})"
        )
    log_prefix = -x + a * np.log(x) - math.lgamma(a)
    return np.exp(log_prefix) * h


def _regularized_lower_gamma(a: float, x: np.ndarray) -> np.ndarray:
    """P(a, x) for scalar a > 0 and an array of x >= 0."""
    p = np.empty_like(x)
    series = x < a + 1.0
    if series.any():
        p[series] = _lower_gamma_series(a, x[series])
    if (~series).any():
        p[~series] = 1.0 - _upper_gamma_cf(a, x[~series])
    return np.clip(p, 0.0, 1.0)


def chi_square_cdf(x, n: int):
    """CDF of the chi-square distribution with n degrees of freedom.

    Accepts a scalar or array of x >= 0; computed as the regularized lower
    incomplete gamma P(n/2, x/2).
    """
    if n < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {n}")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError("chi-square CDF is only defined for x >= 0")
    result = _regularized_lower_gamma(n / 2.0, np.atleast_1d(arr) / 2.0)
    if arr.ndim == 0:
        return float(result[0])
    return result.reshape(arr.shape)


def r_cdf(r, law: RLaw):
    """CDF of the rescaling law: P(sqrt(n / chi2_n) <= r).

    By the monotone map this equals 1 - F_chi2(n / r**2).  Accepts a scalar
    or array of r > 0.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("the rescaling law lives on r > 0")
    result = 1.0 - chi_square_cdf(law.n / np.atleast_1d(arr) ** 2, law.n)
    if arr.ndim == 0:
        return float(result[0])
    return result.reshape(arr.shape)


def r_quantile(p: float, law: RLaw) -> float:
    """Inverse of r_cdf via bracketed root-finding."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must be in (0, 1), got {p}")
    lo, hi = 0.5, 2.0
    while r_cdf(lo, law) > p:
        lo *= 0.5
        if lo < 1e-150:
            raise ArithmeticError("quantile bracketing failed at the lower end")
    while r_cdf(hi, law) < p:
        hi *= 2.0
        if hi > 1e150:
            raise ArithmeticError("quantile bracketing failed at the upper end")
    return float(brentq(lambda r: r_cdf(r, law) - p, lo, hi, xtol=1e-13, rtol=8.9e-16))


def _kolmogorov_survival(t: float) -> float:
    """Two-sided Kolmogorov survival function, truncated alternating series."""
    if t < _KS_SERIES_FLOOR:
        return 1.0
    k = np.arange(1, _KS_SERIES_TERMS + 1)
    terms = (-1.0) ** (k - 1) * np.exp(-2.0 * (k * t) ** 2)
    return float(np.clip(2.0 * terms.sum(), 0.0, 1.0))


def ks_test(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> KsOutcome:
    """One-sample two-sided Kolmogorov-Smirnov test.

    ``cdf`` must accept a numpy array and return the reference CDF values.
    The decision at alpha = 0.01 uses the asymptotic critical value
    1.628 / sqrt(M); the approximate p-value comes from the Kolmogorov
    series at sqrt(M) * D.
    """
    s = np.asarray(samples, dtype=float).ravel()
    m = s.size
    if m < 10:
        raise ValueError(f"KS test needs at least 10 samples, got {m}")
    if not np.all(np.isfinite(s)):
        raise ValueError("samples contain NaN or Inf entries")
    xs = np.sort(s)
    f = np.asarray(cdf(xs), dtype=float)
    i = np.arange(1, m + 1)
    d_plus = np.max(i / m - f)
    d_minus = np.max(f - (i - 1) / m)
    stat = float(max(d_plus, d_minus))
    critical = KS_CRITICAL_CONSTANT_01 / math.sqrt(m)
    return KsOutcome(
        statistic=stat,
        sample_size=m,
        critical_value_01=critical,
        rejected_at_01=stat > critical,
        p_value_approx=_kolmogorov_survival(math.sqrt(m) * stat),
    )
