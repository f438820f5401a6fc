"""Rare/weak two-sample models: baselines, perturbations and samplers.

Within one call the samplers draw from the supplied generator in a fixed
order (first sample, latent labels, second sample), each as one vectorized
call in category order, so a given stream always yields the same tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .pvalues import CountTablePair
from .specfun import poisson_draws

__all__ = [
    "Baseline",
    "RareWeakParams",
    "baseline_rates",
    "perturbed_rates",
    "sample_null",
    "sample_alt",
    "sample_normal_pair",
    "regime_diagnostic",
]

NULL, PLUS, MINUS = 0, 1, 2


@dataclass(frozen=True)
class Baseline:
    """Baseline category frequencies.

    ``kind`` is ``"uniform"``, ``"zipf"`` (Zipf-Mandelbrot, ``P_i`` proportional
    to ``(i + k)**-xi``) or ``"custom"`` (``rates`` renormalized).
    """

    kind: str = "uniform"
    k: float = 0.0
    xi: float = 2.0
    rates: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "zipf", "custom"):
            raise ParameterError(f"unknown baseline kind {self.kind!r}")
        if self.kind == "zipf":
            if not self.xi > 1:
                raise ParameterError(f"Zipf-Mandelbrot exponent must exceed 1, got {self.xi!r}")
            if not self.k > -1:
                raise ParameterError(f"Zipf-Mandelbrot shift must exceed -1, got {self.k!r}")
        if self.kind == "custom" and self.rates is None:
            raise ParameterError("custom baseline needs rates")


def baseline_rates(baseline: Baseline, N: int) -> np.ndarray:
    if N < 1:
        raise ParameterError(f"N must be at least 1, got {N!r}")
    if baseline.kind == "uniform":
        return np.full(N, 1.0 / N)
    if baseline.kind == "zipf":
        w = (np.arange(1, N + 1) + baseline.k) ** (-baseline.xi)
    else:
        w = np.asarray(baseline.rates, dtype=float)
        if w.shape != (N,):
            raise ParameterError(f"custom rates have length {w.size}, expected {N}")
        if np.any(w < 0) or not np.sum(w) > 0:
            raise ParameterError("custom rates must be non-negative with a positive sum")
    return w / math.fsum(w)


def perturbed_rates(P, mu):
    """Hellinger perturbations ``Q+- = max(sqrt(P) +- sqrt(mu), 0)**2``."""
    sp = np.sqrt(np.asarray(P, dtype=float))
    sm = math.sqrt(mu)
    q_plus = (sp + sm) ** 2
    q_minus = np.maximum(sp - sm, 0.0) ** 2
    if np.ndim(q_plus) == 0:
        return float(q_plus), float(q_minus)
    return q_plus, q_minus


@dataclass
class RareWeakParams:
    """One point of the rare/weak model.

    The perturbation size ``mu = r log(N) / (2 n)`` is calibrated with
    ``n = min(n_x, n_y)``.
    """

    N: int
    n_x: float
    n_y: float
    beta: float
    r: float
    baseline: Baseline = field(default_factory=Baseline)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be a positive integer, got {self.N!r}")
        self.N = int(self.N)
        if not (self.n_x > 0 and self.n_y > 0):
            raise ParameterError("sample sizes must be positive")
        if not 0.0 < self.beta < 1.0:
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta!r}")
        if not self.r >= 0.0:
            raise ParameterError(f"r must be non-negative, got {self.r!r}")

    @classmethod
    def from_exponent(cls, N: int, gamma: float, beta: float, r: float, baseline: Baseline = Baseline()):
        """Equal sample sizes ``n = N**gamma``."""
        n = float(N) ** gamma
        return cls(N, n, n, beta, r, baseline)

    @property
    def n(self) -> float:
        return min(self.n_x, self.n_y)

    @property
    def eps(self) -> float:
        return float(self.N) ** (-self.beta)

    @property
    def mu(self) -> float:
        return self.r * math.log(self.N) / (2.0 * self.n)

    def rates(self) -> np.ndarray:
        return baseline_rates(self.baseline, self.N)


def _labels(params: RareWeakParams, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(params.N)
    half = params.eps / 2.0
    lab = np.full(params.N, NULL, dtype=np.int8)
    lab[u < 2 * half] = MINUS
    lab[u < half] = PLUS
    return lab


def sample_null(params: RareWeakParams, rng: np.random.Generator) -> CountTablePair:
    P = params.rates()
    x = poisson_draws(params.n_x * P, rng)
    y = poisson_draws(params.n_y * P, rng)
    return CountTablePair(x, y, np.zeros(params.N, dtype=bool))


def sample_alt(params: RareWeakParams, rng: np.random.Generator) -> CountTablePair:
    """Second table drawn from the three-component mixture, one latent label per category."""
    P = params.rates()
    q_plus, q_minus = perturbed_rates(P, params.mu)
    x = poisson_draws(params.n_x * P, rng)
    lab = _labels(params, rng)
    rate = np.where(lab == PLUS, q_plus, np.where(lab == MINUS, q_minus, P))
    y = poisson_draws(params.n_y * rate, rng)
    return CountTablePair(x, y, lab != NULL)


def sample_normal_pair(params: RareWeakParams, hypothesis: str, rng: np.random.Generator) -> CountTablePair:
    """Two-sample normal means analogue with unit variances.

    Means are the variance-stabilized rates ``2 sqrt(n P_i)``; perturbed
    categories of the second sample are shifted by ``+-sqrt(2 r log N)``.
    """
    if hypothesis not in ("null", "alt"):
        raise ParameterError(f"hypothesis must be 'null' or 'alt', got {hypothesis!r}")
    nu = 2.0 * np.sqrt(params.n * params.rates())
    x = nu + rng.standard_normal(params.N)
    if hypothesis == "null":
        y = nu + rng.standard_normal(params.N)
        return CountTablePair(x, y, np.zeros(params.N, dtype=bool))
    lab = _labels(params, rng)
    shift = math.sqrt(2.0 * params.r * math.log(params.N))
    mean = nu + shift * ((lab == PLUS).astype(float) - (lab == MINUS))
    y = mean + rng.standard_normal(params.N)
    return CountTablePair(x, y, lab != NULL)


def regime_diagnostic(params: RareWeakParams) -> tuple[float, float]:
    """Smallest and largest ``n P_i / log(N)`` (natural log).

    Large values indicate the high-counts regime, small values the low-counts
    regime.
    """
    ratio = params.n * params.rates() / math.log(params.N)
    return float(ratio.min()), float(ratio.max())
