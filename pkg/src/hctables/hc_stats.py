"""Global statistics that combine per-category P-values."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError

__all__ = ["HCConfig", "HCResult", "hc_statistic", "hc_components", "min_p_statistic"]


@dataclass(frozen=True)
class HCConfig:
    """``gamma0`` is the fraction of smallest P-values searched for the maximum."""

    gamma0: float = 0.10

    def __post_init__(self):
        if not 0.0 < self.gamma0 <= 1.0:
            raise ParameterError(f"gamma0 must lie in (0, 1], got {self.gamma0!r}")

    def search_range(self, n: int) -> int:
        # at least the first order statistic is always examined
        return max(1, min(n, math.floor(self.gamma0 * n + 1e-9)))


@dataclass(frozen=True)
class HCResult:
    value: float
    argmax_index: int
    threshold_pvalue: float
    degenerate: bool = False


def _as_pvalues(pvalues) -> np.ndarray:
    values = getattr(pvalues, "values", pvalues)
    p = np.asarray(values, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ShapeError("need a non-empty 1-d vector of P-values")
    return p


def hc_components(sorted_p: np.ndarray, n_total: int) -> np.ndarray:
    """Component scores ``sqrt(N) (i/N - p_(i)) / sqrt(p_(i)(1 - p_(i)))``.

    ``sorted_p`` holds the smallest order statistics in ascending order;
    entries equal to 1 get ``-inf``.
    """
    i = np.arange(1, sorted_p.size + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = math.sqrt(n_total) * (i / n_total - sorted_p) / np.sqrt(sorted_p * (1.0 - sorted_p))
    z[sorted_p >= 1.0] = -np.inf
    return z


def hc_statistic(pvalues, config: HCConfig = HCConfig()) -> HCResult:
    """Higher Criticism of a P-value vector.

    Scores are evaluated at ranks ``1..floor(gamma0 N)`` (at least rank 1);
    ranks whose P-value equals 1 are skipped.  If nothing qualifies the
    result is ``HCResult(0.0, 0, 1.0, degenerate=True)``.
    """
    p = _as_pvalues(pvalues)
    n = p.size
    k = config.search_range(n)
    head = np.sort(np.partition(p, k - 1)[:k]) if k < n else np.sort(p)
    z = hc_components(head, n)
    j = int(np.argmax(z))
    if z[j] == -np.inf:
        return HCResult(0.0, 0, 1.0, degenerate=True)
    return HCResult(float(z[j]), j + 1, float(head[j]))


def min_p_statistic(pvalues) -> float:
    """Smallest P-value (the Bonferroni / min-P statistic)."""
    return float(np.min(_as_pvalues(pvalues)))
