"""Phase-transition curves in the (beta, r) plane and the exponents behind them.

``beta`` is the rarity exponent (a fraction ``N**-beta`` of categories is
perturbed) and ``r`` the intensity.  The low-counts curves are driven by

    alpha_low(q, r) = q * (log(2q / (r log 2)) - 1) / log 2 + r / 2,

and the min-P boundary solves ``alpha_low(1, r) = 1 - beta``.  Writing
``s = r log(2) / 2`` this becomes ``s - log(s) = 1 + (1 - beta) log 2``, so
``-s = W(-2**(beta - 1) / e)``.  The relevant root is the one with ``s <= 1``
(the exponent formula is only meaningful while the perturbed Poisson mean sits
below the detection threshold), i.e. the principal branch ``W_0``; it rises
continuously from ``sqrt(2)/log 2`` at ``beta_0`` to ``2/log 2`` at
``beta = 1``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .specfun import lambert_w0

__all__ = [
    "BETA0_HIGH",
    "BETA0_LOW",
    "CURVES",
    "rho_high",
    "rho_low",
    "rho_bonf_high",
    "rho_bonf_low",
    "rho_one_sample",
    "alpha_star",
    "xi",
    "xi_star",
    "curve_table",
]

LN2 = math.log(2.0)
SQRT2 = math.sqrt(2.0)

BETA0_HIGH = 0.75
BETA0_LOW = 0.5 + (SQRT2 - 1.0) / (SQRT2 * LN2)
R_KINK_LOW = SQRT2 / LN2


def _check_beta(beta: float, name: str) -> float:
    beta = float(beta)
    if not 0.5 <= beta <= 1.0:
        raise DomainError(f"{name} is defined for beta in [1/2, 1], got {beta!r}")
    return beta


def rho_one_sample(beta: float) -> float:
    beta = _check_beta(beta, "rho_one_sample")
    if beta <= 0.75:
        return beta - 0.5
    return (1.0 - math.sqrt(1.0 - beta)) ** 2


def rho_high(beta: float) -> float:
    """HC boundary for high counts: twice the one-sample boundary."""
    return 2.0 * rho_one_sample(beta)


def rho_bonf_high(beta: float) -> float:
    beta = _check_beta(beta, "rho_bonf_high")
    return 2.0 * (1.0 - math.sqrt(1.0 - beta)) ** 2


def rho_bonf_low(beta: float) -> float:
    beta = _check_beta(beta, "rho_bonf_low")
    w = lambert_w0(-(2.0 ** (beta - 1.0)) / math.e)
    return -2.0 * w / LN2


def rho_low(beta: float) -> float:
    """HC boundary for low counts: linear up to ``BETA0_LOW``, min-P curve after."""
    beta = _check_beta(beta, "rho_low")
    if beta <= BETA0_LOW:
        return 2.0 * (1.0 + SQRT2) * (beta - 0.5)
    return rho_bonf_low(beta)


def _check_regime(regime: str) -> str:
    if regime not in ("high", "low"):
        raise DomainError(f"regime must be 'high' or 'low', got {regime!r}")
    return regime


def alpha_star(regime: str, q: float, r: float) -> float:
    """Exponent of ``Pr(pi_i <= N**-q)`` for a perturbed category.

    In the high regime the value is clamped to 0 for ``q <= r/2``, where the
    perturbed category falls below the threshold with non-vanishing
    probability.
    """
    _check_regime(regime)
    if not (q > 0 and r > 0):
        raise DomainError(f"alpha_star needs q > 0 and r > 0, got q={q!r}, r={r!r}")
    if regime == "high":
        if q <= r / 2:
            return 0.0
        return (math.sqrt(q) - math.sqrt(r / 2)) ** 2
    return q * (math.log(2 * q / (r * LN2)) - 1.0) / LN2 + r / 2


def xi(regime: str, q: float, beta: float, r: float) -> float:
    return (q + 1) / 2 - beta - alpha_star(regime, q, r)


def xi_star(regime: str, beta: float, r: float) -> tuple[float, float]:
    """Closed-form ``max_{0 <= q <= 1} xi(q, beta, r)`` and its maximizer."""
    _check_regime(regime)
    if not r > 0:
        raise DomainError(f"xi_star needs r > 0, got {r!r}")
    if regime == "high":
        if r < 0.5:
            return (1 + r) / 2 - beta, 2 * r
        # for r > 2 the clamp in alpha_star leaves 1 - beta
        return 1 - beta - alpha_star("high", 1.0, r), 1.0
    if r < R_KINK_LOW:
        return (SQRT2 - 1) / 2 * r - beta + 0.5, r * LN2 / SQRT2
    return -beta - r / 2 + (math.log(r) + 1 + math.log(LN2)) / LN2, 1.0


CURVES = {
    "high": rho_high,
    "low": rho_low,
    "bonf-high": rho_bonf_high,
    "bonf-low": rho_bonf_low,
    "one-sample": rho_one_sample,
}


def curve_table(curve: str, betas) -> np.ndarray:
    """Rows ``(beta, rho(beta))`` for one of the names in :data:`CURVES`."""
    try:
        fn = CURVES[curve]
    except KeyError:
        raise DomainError(f"unknown curve {curve!r}; choose from {sorted(CURVES)}") from None
    betas = np.asarray(betas, dtype=float).ravel()
    return np.column_stack([betas, [fn(b) for b in betas]]) if betas.size else np.empty((0, 2))
