"""Per-category P-values for comparing two frequency tables.

For a category with counts ``(x, y)`` and ``n = x + y``, the binomial
allocation P-value measures how far ``x`` falls from ``n * p'`` under
``Bin(n, p')``.  With ``d = |x - n p'|`` the two-sided event is
``{B <= floor(n p' - d)}`` union ``{B >= ceil(n p' + d)}``, so the observed
value always belongs to its own tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import specfun
from .errors import DegenerateInputError, ParameterError, ShapeError

__all__ = [
    "CountTablePair",
    "PValueVector",
    "exact_binom_pvalue",
    "randomized_pvalue",
    "normal_two_sample_pvalue",
    "estimate_allocation_prob",
    "pvalue_vector",
]

# Support points within this distance of n*p' +- d count as atoms.
_ATOM_TOL = 1e-9

# P-values are reported on (0, 1]; anything that underflows is floored here.
TINY = np.finfo(float).tiny


@dataclass
class CountTablePair:
    """Two aligned count vectors.

    ``truth_mask`` marks perturbed categories in simulated data and is never
    read by any test statistic.  Integer tables must be non-negative;
    real-valued pairs (the normal model) may take any finite value.
    """

    x: np.ndarray
    y: np.ndarray
    truth_mask: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.asarray(self.x)
        self.y = np.asarray(self.y)
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ShapeError(f"tables must be 1-d of equal length, got {self.x.shape} and {self.y.shape}")
        if np.issubdtype(self.x.dtype, np.floating) or np.issubdtype(self.y.dtype, np.floating):
            if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
                raise ParameterError("observations must be finite")
        elif np.any(self.x < 0) or np.any(self.y < 0):
            raise ParameterError("counts must be non-negative")

    def __len__(self):
        return self.x.shape[0]


@dataclass
class PValueVector:
    values: np.ndarray
    kind: str
    pprime: float | None = None

    def __len__(self):
        return self.values.shape[0]


def _check_pprime(pprime: float) -> float:
    pprime = float(pprime)
    if not 0.0 < pprime < 1.0:
        raise ParameterError(f"pprime must lie in (0, 1), got {pprime!r}")
    return pprime


def _check_pair(x, y) -> tuple[int, int]:
    xi, yi = int(x), int(y)
    if xi != x or yi != y or xi < 0 or yi < 0:
        raise ParameterError(f"counts must be non-negative integers, got ({x!r}, {y!r})")
    return xi, yi


def _boundaries(x: int, n: int, pprime: float):
    """Tail boundaries (L, U) and atom flags for observed ``x`` out of ``n``."""
    center = n * pprime
    mirror = 2.0 * center - x
    if x <= center:
        lo = x
        hi = math.ceil(mirror - _ATOM_TOL)
        hi_atom = abs(hi - mirror) <= _ATOM_TOL
        lo_atom = True
    else:
        hi = x
        lo = math.floor(mirror + _ATOM_TOL)
        lo_atom = abs(lo - mirror) <= _ATOM_TOL
        hi_atom = True
    return lo, hi, lo_atom, hi_atom


def exact_binom_pvalue(x: int, y: int, pprime: float = 0.5) -> float:
    """Exact two-sided binomial allocation P-value of the pair ``(x, y)``.

    Returns ``Pr(|Bin(n, p') - n p'| >= |x - n p'|)`` with ``n = x + y``;
    an empty category (``n == 0``) gets 1.  For example ``(1, 5)`` gives
    14/64: the outcomes 0, 1, 5 and 6 of Bin(6, 1/2).
    """
    x, y = _check_pair(x, y)
    pprime = _check_pprime(pprime)
    n = x + y
    if n == 0:
        return 1.0
    lo, hi, _, _ = _boundaries(x, n, pprime)
    if lo >= hi:
        return 1.0
    log_lo = specfun.binom_tail(n, pprime, lo, "lower") if lo >= 0 else -np.inf
    log_hi = specfun.binom_tail(n, pprime, hi, "upper") if hi <= n else -np.inf
    return min(1.0, max(math.exp(np.logaddexp(log_lo, log_hi)), TINY))


def randomized_pvalue(x: int, y: int, pprime: float = 0.5, u: float = 0.0) -> float:
    """Randomized allocation P-value: strict tail plus ``u`` times the boundary atoms.

    For ``u`` uniform on [0, 1) the result is exactly uniform under the null
    (given ``n``) and never exceeds :func:`exact_binom_pvalue`.
    """
    x, y = _check_pair(x, y)
    pprime = _check_pprime(pprime)
    if not 0.0 <= u <= 1.0:
        raise ParameterError(f"u must lie in [0, 1], got {u!r}")
    n = x + y
    if n == 0:
        # a single-point distribution: the whole mass is the atom
        return max(u, TINY)
    logf, log_lo, log_hi = specfun.binom_log_rows(n, pprime)
    lo, hi, lo_atom, hi_atom = _boundaries(x, n, pprime)
    if lo >= hi:
        atom = math.exp(logf[x])
        return max(1.0 - atom + u * atom, TINY)
    strict = _tail(log_lo, lo - lo_atom) + _tail_hi(log_hi, hi + hi_atom, n)
    atoms = lo_atom * _mass(logf, lo, n) + hi_atom * _mass(logf, hi, n)
    return min(1.0, max(strict + u * atoms, TINY))


def _tail(log_lo, k):
    return 0.0 if k < 0 else math.exp(log_lo[k])


def _tail_hi(log_hi, k, n):
    return 0.0 if k > n else math.exp(log_hi[k])


def _mass(logf, k, n):
    return math.exp(logf[k]) if 0 <= k <= n else 0.0


def normal_two_sample_pvalue(x, y):
    """Two-sided P-value ``Pr(|N(0,1)| >= |y - x| / sqrt(2))``; vectorized."""
    diff = np.abs(np.asarray(y, dtype=float) - np.asarray(x, dtype=float)) / math.sqrt(2.0)
    out = 2.0 * specfun.normal_sf(diff)
    if np.ndim(out) == 0:
        return min(1.0, max(float(out), TINY))
    return np.clip(out, TINY, 1.0)


def estimate_allocation_prob(tables: CountTablePair) -> float:
    """Share of the pooled total that falls in the first table."""
    nx = float(np.sum(tables.x))
    ny = float(np.sum(tables.y))
    if nx + ny <= 0.0:
        raise DegenerateInputError("both tables have zero total count")
    return nx / (nx + ny)


# --- vectorized evaluation -------------------------------------------------


class _TailTable:
    """Padded log-tail tables of Bin(n, p') for n = 0..capacity.

    ``lo[n, k + 1] = log Pr(B <= k)`` for k = -1..n and
    ``hi[n, k] = log Pr(B >= k)`` for k = 0..n+1; out-of-support entries are
    ``-inf``.  Rows are filled lazily as larger ``n`` is requested.
    """

    MAX_ROWS = 1024

    def __init__(self, pprime: float):
        self.pprime = pprime
        self.size = 0
        self.lo = np.full((0, 0), -np.inf)
        self.hi = np.full((0, 0), -np.inf)
        self.f = np.full((0, 0), -np.inf)

    def ensure(self, n_max: int):
        if n_max < self.size or self.size >= self.MAX_ROWS:
            return
        new = min(max(2 * self.size, n_max + 1, 64), self.MAX_ROWS)
        cols = new + 2
        lo = np.full((new, cols), -np.inf)
        hi = np.full((new, cols), -np.inf)
        f = np.full((new, cols), -np.inf)
        if self.size:
            old_cols = self.size + 2
            lo[: self.size, :old_cols] = self.lo
            hi[: self.size, :old_cols] = self.hi
            f[: self.size, :old_cols] = self.f
        for n in range(self.size, new):
            logf, log_lo, log_hi = specfun.binom_log_rows(n, self.pprime)
            f[n, : n + 1] = logf
            lo[n, 1 : n + 2] = log_lo
            hi[n, : n + 1] = log_hi
        self.lo, self.hi, self.f, self.size = lo, hi, f, new


@lru_cache(maxsize=16)
def _table_for(pprime: float) -> _TailTable:
    return _TailTable(pprime)


def _lookup(table: _TailTable, n, k, which: str):
    """Gather log values at (n, k); rows past the table size are built on the fly."""
    out = np.full(n.shape, -np.inf)
    inside = n < table.size
    if which == "lo":
        out[inside] = table.lo[n[inside], k[inside] + 1]
    elif which == "hi":
        kk = np.minimum(k[inside], n[inside] + 1)
        out[inside] = table.hi[n[inside], kk]
    else:
        out[inside] = table.f[n[inside], k[inside]]
    if not np.all(inside):
        for nv in np.unique(n[~inside]):
            rows = specfun.binom_log_rows(int(nv), table.pprime)
            sel = (~inside) & (n == nv)
            ks = k[sel]
            if which == "lo":
                vals = np.where(ks < 0, -np.inf, rows[1][np.clip(ks, 0, nv)])
            elif which == "hi":
                vals = np.where(ks > nv, -np.inf, rows[2][np.clip(ks, 0, nv)])
            else:
                vals = rows[0][np.clip(ks, 0, nv)]
            out[sel] = vals
    return out


def _binomial_pvalues(x: np.ndarray, y: np.ndarray, pprime: float, u: np.ndarray | None):
    x = x.astype(np.int64)
    n = x + y.astype(np.int64)
    table = _table_for(pprime)
    table.ensure(int(n.max(initial=0)))

    center = n * pprime
    mirror = 2.0 * center - x
    below = x <= center
    hi_b = np.ceil(mirror - _ATOM_TOL).astype(np.int64)
    lo_b = np.floor(mirror + _ATOM_TOL).astype(np.int64)
    lo = np.where(below, x, lo_b)
    hi = np.where(below, hi_b, x)
    lo_atom = np.where(below, True, np.abs(lo - mirror) <= _ATOM_TOL)
    hi_atom = np.where(below, np.abs(hi - mirror) <= _ATOM_TOL, True)
    full = (lo >= hi) | (n == 0)
    lo_atom &= lo >= 0
    hi_atom &= hi <= n
    lo = np.clip(lo, -1, n)
    hi = np.clip(hi, 0, n + 1)

    if u is None:
        logp = np.logaddexp(_lookup(table, n, lo, "lo"), _lookup(table, n, hi, "hi"))
        p = np.exp(logp)
        p[full] = 1.0
        return np.clip(p, TINY, 1.0)

    strict = np.exp(_lookup(table, n, lo - lo_atom, "lo")) + np.exp(_lookup(table, n, hi + hi_atom, "hi"))
    atoms = (
        lo_atom * np.exp(_lookup(table, n, np.clip(lo, 0, n), "f")) * (lo >= 0)
        + hi_atom * np.exp(_lookup(table, n, np.clip(hi, 0, n), "f")) * (hi <= n)
    )
    p = strict + u * atoms
    if np.any(full):
        # only the observed atom is on the boundary
        fx = np.exp(_lookup(table, n[full], x[full], "f"))
        p[full] = 1.0 - fx + u[full] * fx
    return np.clip(p, TINY, 1.0)


def pvalue_vector(
    tables: CountTablePair,
    mode: str = "exact",
    pprime: float | str = 0.5,
    rng: np.random.Generator | None = None,
) -> PValueVector:
    """P-values for every category of ``tables``.

    Parameters
    ----------
    tables : CountTablePair
    mode : {"exact", "randomized", "normal"}
        ``"normal"`` treats the entries as real-valued observations with unit
        variance and ignores ``pprime``.
    pprime : float or "auto"
        Allocation probability; ``"auto"`` uses the pooled-total estimate.
    rng : numpy Generator
        Required for ``"randomized"``; exactly ``N`` uniforms are drawn, in
        category order.
    """
    if len(tables) == 0:
        raise ShapeError("tables must have at least one category")
    if mode == "normal":
        return PValueVector(normal_two_sample_pvalue(tables.x, tables.y), "normal", None)
    if mode not in ("exact", "randomized"):
        raise ParameterError(f"unknown P-value mode {mode!r}")
    if isinstance(pprime, str):
        if pprime != "auto":
            raise ParameterError(f"pprime must be a number or 'auto', got {pprime!r}")
        pprime = estimate_allocation_prob(tables)
    pprime = _check_pprime(pprime)
    if not (np.issubdtype(tables.x.dtype, np.integer) and np.issubdtype(tables.y.dtype, np.integer)):
        x, y = tables.x, tables.y
        if np.any(x != np.round(x)) or np.any(y != np.round(y)) or np.any(x < 0) or np.any(y < 0):
            raise ParameterError("binomial P-values need non-negative integer counts")
    u = None
    if mode == "randomized":
        if rng is None:
            raise ParameterError("randomized P-values need a random stream")
        u = rng.random(len(tables))
    vals = _binomial_pvalues(np.asarray(tables.x), np.asarray(tables.y), pprime, u)
    return PValueVector(vals, mode, pprime)
