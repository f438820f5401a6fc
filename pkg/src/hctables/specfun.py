"""Special functions, distribution tails and random streams.

Tail probabilities are returned as natural logarithms so that values far
below the double-precision underflow threshold stay representable.

Binomial probabilities use Loader's saddle-point expansion of the mass
function (``stirlerr`` and ``bd0``), which keeps the relative error of each
term near machine precision even for ``n`` in the millions.  Tails are summed
from the side that does not contain the mode, with a geometric bound on the
truncated remainder, and the complementary tail is obtained with ``log1p``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DomainError, ParameterError

__all__ = [
    "binom_logpmf",
    "binom_tail",
    "binom_log_rows",
    "lambert_w_m1",
    "lambert_w0",
    "poisson_sample",
    "poisson_draws",
    "poisson_chernoff_log_bound",
    "normal_sf",
    "make_rng",
]

_LN_2PI = math.log(2.0 * math.pi)
_INV_E = math.exp(-1.0)

# Terms beyond exp(-40) of the running sum are below half an ulp.
_TAIL_CUTOFF = 40.0


def _stirlerr(n):
    """log(n!) - log(sqrt(2 pi n) (n/e)^n) for integer n >= 1."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n <= 15
    if np.any(small):
        ns = n[small]
        out[small] = special.gammaln(ns + 1.0) - 0.5 * np.log(2.0 * np.pi * ns) - ns * np.log(ns) + ns
    big = ~small
    if np.any(big):
        nb = n[big]
        n2 = 1.0 / (nb * nb)
        series = (1.0 / 12 - n2 * (1.0 / 360 - n2 * (1.0 / 1260 - n2 * (1.0 / 1680 - n2 / 1188)))) / nb
        out[big] = series
    return out


def _bd0(x, m):
    """Deviance term x*log(x/m) + m - x, stable when x is close to m."""
    x = np.asarray(x, dtype=float)
    m = np.asarray(m, dtype=float)
    x, m = np.broadcast_arrays(x, m)
    out = np.empty(x.shape)
    near = np.abs(x - m) < 0.1 * (x + m)
    if np.any(near):
        xn, mn = x[near], m[near]
        v = (xn - mn) / (xn + mn)
        s = (xn - mn) * v
        ej = 2.0 * xn * v
        v2 = v * v
        for j in range(1, 40):
            ej = ej * v2
            s = s + ej / (2 * j + 1)
        out[near] = s
    far = ~near
    if np.any(far):
        xf, mf = x[far], m[far]
        out[far] = xf * np.log(xf / mf) + mf - xf
    return out


def binom_logpmf(k, n: int, p: float, q: float | None = None):
    """Log of the Bin(n, p) mass at ``k`` (vectorized over ``k``).

    ``q`` may be passed explicitly when ``1 - p`` would lose precision.
    """
    if q is None:
        q = 1.0 - p
    k = np.asarray(k, dtype=float)
    scalar = k.ndim == 0
    k = np.atleast_1d(k)
    out = np.full(k.shape, -np.inf)
    if n == 0:
        out[k == 0] = 0.0
        return float(out[0]) if scalar else out
    if p == 0.0 or q == 0.0:
        out[k == (0 if p == 0.0 else n)] = 0.0
        return float(out[0]) if scalar else out
    out[k == 0] = n * math.log(q)
    out[k == n] = n * math.log(p)
    inner = (k > 0) & (k < n)
    if np.any(inner):
        ki = k[inner]
        lc = (
            _stirlerr(np.full_like(ki, n)) - _stirlerr(ki) - _stirlerr(n - ki)
            - _bd0(ki, n * p) - _bd0(n - ki, n * q)
        )
        lf = _LN_2PI + np.log(ki) + np.log1p(-ki / n)
        out[inner] = lc - 0.5 * lf
    return float(out[0]) if scalar else out


def _logsumexp(a: np.ndarray) -> float:
    top = float(np.max(a))
    if top == -np.inf:
        return -np.inf
    return top + math.log(float(np.sum(np.exp(a - top))))


def _log_left_sum(n: int, p: float, q: float, k: int) -> float:
    """log Pr(Bin(n,p) <= k) for k strictly below floor((n+1)p).

    Terms grow with j up to k, so the sum starts at k and walks down in
    blocks until the geometric remainder bound is negligible.
    """
    width = 64
    while True:
        j0 = max(0, k - width + 1)
        terms = binom_logpmf(np.arange(j0, k + 1), n, p, q)
        total = _logsumexp(terms)
        if j0 == 0:
            return total
        ratio = j0 * q / ((n - j0 + 1) * p)
        bound = terms[0] + math.log(ratio) - math.log1p(-ratio)
        if bound < total - _TAIL_CUTOFF:
            return total
        width *= 4


def _log_lower(n: int, p: float, q: float, k: int) -> float:
    if k >= n:
        return 0.0
    if k < 0:
        return -np.inf
    mode = math.floor((n + 1) * p)
    if k < mode:
        return _log_left_sum(n, p, q, k)
    # complement: Pr(B >= k+1) = Pr(Bin(n, q) <= n-k-1), which sits left of its mode
    upper = _log_left_sum(n, q, p, n - k - 1)
    return math.log1p(-math.exp(upper))


def binom_tail(n: int, p: float, k: int, side: str = "lower") -> float:
    """Natural log of a binomial tail probability.

    Parameters
    ----------
    n : int
        Number of trials, ``n >= 0``.
    p : float
        Success probability in (0, 1).
    k : int
        Tail boundary, ``0 <= k <= n``.
    side : {"lower", "upper"}
        ``"lower"`` gives log Pr(Bin(n,p) <= k); ``"upper"`` gives
        log Pr(Bin(n,p) >= k).

    Returns
    -------
    float
        The log-probability (``0.0`` for a certain event).
    """
    n = _as_count(n, "n")
    k = _as_count(k, "k")
    if not 0.0 < p < 1.0:
        raise ParameterError(f"p must lie in (0, 1), got {p!r}")
    if k > n:
        raise ParameterError(f"k={k} exceeds n={n}")
    q = 1.0 - p
    if side == "lower":
        return _log_lower(n, p, q, k)
    if side == "upper":
        return _log_lower(n, q, p, n - k)
    raise ParameterError(f"side must be 'lower' or 'upper', got {side!r}")


def binom_log_rows(n: int, p: float):
    """Mass, lower-cumulative and upper-cumulative log tables for Bin(n, p).

    Returns three arrays of length ``n + 1``: ``log f(j)``,
    ``log Pr(B <= j)`` and ``log Pr(B >= j)``.  Cumulative sums run from the
    respective ends, so each is accurate on the tail it is used for.
    """
    logf = binom_logpmf(np.arange(n + 1), n, p)
    log_lo = np.logaddexp.accumulate(logf)
    log_hi = np.logaddexp.accumulate(logf[::-1])[::-1]
    return logf, log_lo, log_hi


def _as_count(v, name: str) -> int:
    if isinstance(v, (bool, np.bool_)):
        raise ParameterError(f"{name} must be an integer")
    try:
        iv = int(v)
    except (TypeError, ValueError):
        raise ParameterError(f"{name} must be an integer, got {v!r}") from None
    if iv != v or iv < 0:
        raise ParameterError(f"{name} must be a non-negative integer, got {v!r}")
    return iv


# --- Lambert W -------------------------------------------------------------


def _halley_w(x: float, w: float, lo: float, hi: float) -> float:
    """Refine w*exp(w) = x by Halley steps kept inside [lo, hi]."""
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= 1e-15 * abs(x):
            break
        # keep the bracket: w*e^w is decreasing on (-inf,-1], increasing on [-1,inf)
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if not lo <= w_new <= hi:
            w_new = 0.5 * (w + (lo if w_new < lo else hi))
        if w_new == w:
            break
        w = w_new
    return w


def lambert_w_m1(x: float) -> float:
    """Lower real branch W_{-1}: the solution ``y <= -1`` of ``y*exp(y) = x``.

    Defined for ``x`` in [-1/e, 0).  The starting point is the branch-point
    series in ``p = -sqrt(2(1 + e x))`` when ``x < -0.25``, otherwise the
    logarithmic asymptote ``L1 - L2 + L2/L1``; Halley iteration follows.
    """
    x = float(x)
    if not (-_INV_E - 1e-15 <= x < 0.0) or math.isnan(x):
        raise DomainError(f"lambert_w_m1 is defined on [-1/e, 0), got {x!r}")
    if x <= -_INV_E:
        return -1.0
    if x < -0.25:
        p = -math.sqrt(2.0 * (1.0 + math.e * x))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1
    w = min(w, -1.0)
    lo = min(w, -1.0) * 2.0 - 10.0
    return _halley_w(x, w, lo, -1.0)


def lambert_w0(x: float) -> float:
    """Principal real branch W_0 for ``x >= -1/e`` (solution ``y >= -1``)."""
    x = float(x)
    if not x >= -_INV_E - 1e-15:
        raise DomainError(f"lambert_w0 is defined on [-1/e, inf), got {x!r}")
    if x <= -_INV_E:
        return -1.0
    if x == 0.0:
        return 0.0
    if x < -0.25:
        p = math.sqrt(2.0 * (1.0 + math.e * x))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    elif x < 3.0:
        w = x * (1.0 - x + 1.5 * x * x) if x < 0.5 else math.log1p(x) * 0.8
    else:
        l1 = math.log(x)
        l2 = math.log(l1)
        w = l1 - l2 + l2 / l1
    hi = max(w, 0.0) * 2.0 + 2.0 if x > 0 else 0.0
    return _halley_w(x, max(w, -1.0), -1.0, hi)


# --- Poisson ---------------------------------------------------------------


def poisson_sample(rate: float, rng: np.random.Generator) -> int:
    """One Poisson draw.

    Delegates to numpy's generator, which uses inversion for small rates and
    the PTRS transformed-rejection sampler for rates of 10 and above.
    """
    if not rate >= 0.0:
        raise ParameterError(f"Poisson rate must be non-negative, got {rate!r}")
    if rate == 0.0:
        return 0
    return int(rng.poisson(rate))


def poisson_draws(rates, rng: np.random.Generator) -> np.ndarray:
    """Independent Poisson draws, one per entry of ``rates``, in order."""
    rates = np.asarray(rates, dtype=float)
    if np.any(~(rates >= 0.0)):
        raise ParameterError("Poisson rates must be non-negative")
    return rng.poisson(rates).astype(np.int64)


def poisson_chernoff_log_bound(lam: float, x: float, side: str) -> float:
    """Chernoff bound ``-lam * h(x/lam)`` on a Poisson tail, h(u) = u log u - u + 1.

    ``side="upper"`` bounds log Pr(Pois(lam) >= x) for ``x > lam``;
    ``side="lower"`` bounds log Pr(Pois(lam) <= x) for ``0 <= x < lam``.
    ``x == lam`` returns 0.
    """
    if not lam > 0.0:
        raise ParameterError(f"lambda must be positive, got {lam!r}")
    if side == "upper":
        if x < lam:
            raise ParameterError("upper bound requires x >= lambda")
    elif side == "lower":
        if not 0.0 <= x <= lam:
            raise ParameterError("lower bound requires 0 <= x <= lambda")
    else:
        raise ParameterError(f"side must be 'lower' or 'upper', got {side!r}")
    u = x / lam
    h = 1.0 if u == 0.0 else u * math.log(u) - u + 1.0
    return -lam * h


# --- normal ----------------------------------------------------------------


def normal_sf(z):
    """Pr(N(0,1) >= z) via the complementary error function."""
    if np.ndim(z) == 0:
        return 0.5 * math.erfc(float(z) / math.sqrt(2.0))
    return 0.5 * special.erfc(np.asarray(z, dtype=float) / math.sqrt(2.0))


# --- random streams --------------------------------------------------------


def make_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for ``(master_seed, *key)``.

    The key tuple is used as a ``SeedSequence`` spawn key, whose hash mixes
    the 64-bit master seed with each index.  Streams for distinct keys are
    statistically independent, so work can be scheduled in any order.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))
