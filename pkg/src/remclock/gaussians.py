"""Gaussian tail machinery.

All landscape scale computations run through the upper tail
G(x) = 1 - Phi(x) of the standard normal. Products like b_n * G(r_n)
need full relative accuracy for tails as deep as exp(-beta^2 n), far
below what the linear-space complement 1 - ndtr(x) can deliver, so the
primary surface here is the log tail, evaluated through the scaled
complementary error function (no cancellation, valid for every x).

The classical asymptotic expansion of the tail is kept alongside as an
independent route; tests play the two against each other.
"""

from __future__ import annotations

import numpy as np
from scipy import special

_LOG_HALF = float(np.log(0.5))
_SQRT2 = float(np.sqrt(2.0))
_LOG_SQRT_2PI = 0.5 * float(np.log(2.0 * np.pi))

# erfcx(t) overflows like exp(t^2) for large negative t; below this the
# hazard falls back to the log-space ratio.
_LOWER_BRANCH = -8.0

_SPLITTER = 134217729.0  # 2^27 + 1, Veltkamp split constant


def _square_dd(x: np.ndarray):
    """x*x as an exact double-double pair (s, e) with x*x = s + e."""
    c = _SPLITTER * x
    hi = c - (c - x)
    lo = x - hi
    s = x * x
    e = ((hi * hi - s) + 2.0 * hi * lo) + lo * lo
    return s, e


def _log_tail_upper(x: np.ndarray) -> np.ndarray:
    # log(1 - Phi(x)) = log(erfcx(x/sqrt2)/2) - x^2/2. Only valid
    # without cancellation for x >= 0 (for x < 0 the erfcx log grows
    # like +x^2/2 and the subtraction would cancel). The x^2 rounding
    # error alone would cost ~ulp(x^2/2) absolute, which the split
    # square removes; the remaining error is the final rounding.
    s, e = _square_dd(x)
    return (np.log(0.5 * special.erfcx(x / _SQRT2)) - 0.5 * e) - 0.5 * s


def log_gaussian_tail(x):
    """log(1 - Phi(x)) for any finite real x, elementwise.

    Relative accuracy of the log is a few ulp across the whole line,
    which pins the tail itself to full relative accuracy wherever it is
    representable at all.
    """
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    hi = x >= 0.0
    out[hi] = _log_tail_upper(x[hi])
    if not hi.all():
        lo = ~hi
        # 1 - Phi(x) = 1 - Q(-x) with Q(-x) <= 1/2; log1p keeps all
        # digits, and the upper formula is evaluated at -x > 0 where it
        # is cancellation-free.
        out[lo] = np.log1p(-np.exp(_log_tail_upper(-x[lo])))
    return out[0] if scalar else out


def gaussian_tail(x):
    """1 - Phi(x), elementwise.

    Underflows to 0.0 once the true value drops below the smallest
    subnormal (x above roughly 38.5); use log_gaussian_tail when that
    regime matters.
    """
    return np.exp(log_gaussian_tail(x))


def log_phi(x):
    """log of the standard normal density."""
    x = np.asarray(x, dtype=np.float64)
    return -0.5 * x * x - _LOG_SQRT_2PI


def tail_series(x, terms: int = 6):
    """Asymptotic tail expansion phi(x)/x * sum_k (-1)^k (2k-1)!!/x^{2k}.

    Valid for large x (truncation error below the first omitted term).
    Kept as an independent check on the erfcx route; not used in the
    scale solvers.
    """
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0):
        raise ValueError("tail_series requires x > 0")
    acc = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(1, terms):
        term = term * (-(2 * k - 1)) / (x * x)
        acc = acc + term
    return np.exp(log_phi(x)) / x * acc


def hazard(x):
    """phi(x) / (1 - Phi(x)), the Gaussian hazard rate, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    hi = x >= _LOWER_BRANCH
    # phi/G = sqrt(2/pi) / erfcx(x/sqrt2), exact in the upper range
    out[hi] = np.sqrt(2.0 / np.pi) / special.erfcx(x[hi] / _SQRT2)
    if not hi.all():
        lo = ~hi
        out[lo] = np.exp(log_phi(x[lo]) - log_gaussian_tail(x[lo]))
    return out[0] if scalar else out


def tail_inverse_log(c):
    """Solve log(1 - Phi(z)) = c for z, elementwise.

    Accepts any c < 0. Warm-started from the normal quantile where the
    probability is representable and from the asymptotic expansion in
    the deep tail, then polished by Newton steps on the log tail (the
    derivative is minus the hazard rate). Final residual is a few ulp
    of c.
    """
    c = np.asarray(c, dtype=np.float64)
    scalar = c.ndim == 0
    c = np.atleast_1d(c).astype(np.float64)
    if np.any(c >= 0):
        raise ValueError("log tail values must be negative")
    z = np.empty_like(c)
    # Three warm-start regimes. Near c=0 the tail is close to 1 and
    # 1 - e^c needs expm1; for moderately deep c the symmetric form
    # -ndtri(e^c) avoids the complement rounding to exactly 1; beyond
    # float range for e^c the asymptotic expansion takes over.
    near = c > -0.5
    deep = c < -700.0
    mid = ~(near | deep)
    if np.any(near):
        z[near] = special.ndtri(-np.expm1(c[near]))
    if np.any(mid):
        z[mid] = -special.ndtri(np.exp(c[mid]))
    if np.any(deep):
        u = -2.0 * c[deep]
        z[deep] = np.sqrt(u - np.log(2.0 * np.pi * u))
    for _ in range(4):
        z = z + (log_gaussian_tail(z) - c) / hazard(z)
    return z[0] if scalar else z
