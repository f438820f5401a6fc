"""Monte-Carlo power grids and empirical phase transitions.

Every replicate owns a random stream derived from
``(master_seed, phase, beta_index, r_index, replicate, substream)`` through
:func:`hctables.specfun.make_rng`.  Results are collected by index, so the
output does not depend on the number of worker processes or their
scheduling.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .errors import ParameterError
from .hc_stats import HCConfig, hc_statistic, min_p_statistic
from .model import Baseline, RareWeakParams, sample_alt, sample_normal_pair, sample_null
from .pvalues import pvalue_vector
from .specfun import binom_tail, make_rng

__all__ = [
    "SimConfig",
    "PowerGrid",
    "StripFit",
    "LogisticFit",
    "statistic_score",
    "null_scores",
    "null_critical_value",
    "power_at",
    "is_substantial",
    "fit_logistic",
    "empirical_transition",
    "run_grid",
]

PHASE_NULL = 0
PHASE_ALT = 1
PHASE_CHECK = 2  # fresh null draws for level checks

_NULL_BLOCK = 50


@dataclass
class SimConfig:
    """Settings for one phase-diagram experiment.

    Sample sizes are either given directly (``n_x``, ``n_y``) or as
    ``n = N**gamma`` for both.  ``pprime=None`` uses the known allocation
    probability ``n_x / (n_x + n_y)``; ``"auto"`` estimates it per replicate.
    """

    N: int = 10_000
    beta_grid: tuple = (0.55, 0.65, 0.75, 0.85)
    r_grid: tuple = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    gamma: float | None = 1.4
    n_x: float | None = None
    n_y: float | None = None
    M: int = 1000
    alpha: float = 0.05
    delta: float = 0.05
    statistic: str = "hc"
    gamma0: float = 0.10
    pvalue_mode: str = "exact"
    pprime: float | str | None = None
    model: str = "poisson"
    master_seed: int = 0
    baseline: Baseline = field(default_factory=Baseline)

    def __post_init__(self):
        self.beta_grid = tuple(float(b) for b in self.beta_grid)
        self.r_grid = tuple(float(r) for r in self.r_grid)
        if self.M < 2:
            raise ParameterError(f"M must be at least 2, got {self.M}")
        for name in ("alpha", "delta"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ParameterError(f"{name} must lie in (0, 1), got {v!r}")
        for name in ("beta_grid", "r_grid"):
            g = getattr(self, name)
            if not g or any(b <= a for a, b in zip(g, g[1:])):
                raise ParameterError(f"{name} must be non-empty and strictly increasing")
        if self.statistic not in ("hc", "minp"):
            raise ParameterError(f"statistic must be 'hc' or 'minp', got {self.statistic!r}")
        if self.pvalue_mode not in ("exact", "randomized"):
            raise ParameterError(f"pvalue_mode must be 'exact' or 'randomized', got {self.pvalue_mode!r}")
        if self.model not in ("poisson", "normal"):
            raise ParameterError(f"model must be 'poisson' or 'normal', got {self.model!r}")
        if self.n_x is None or self.n_y is None:
            if self.gamma is None:
                raise ParameterError("give either gamma or both n_x and n_y")
            n = float(self.N) ** self.gamma
            self.n_x = n if self.n_x is None else self.n_x
            self.n_y = n if self.n_y is None else self.n_y
        HCConfig(self.gamma0)

    @property
    def larger_is_extreme(self) -> bool:
        return self.statistic == "hc"

    def params(self, beta: float, r: float) -> RareWeakParams:
        return RareWeakParams(self.N, self.n_x, self.n_y, beta, r, self.baseline)

    def allocation(self):
        if self.pprime is None:
            return self.n_x / (self.n_x + self.n_y)
        return self.pprime

    def to_dict(self) -> dict:
        d = asdict(self)
        d["baseline"] = asdict(self.baseline)
        return d


@dataclass
class PowerGrid:
    beta: np.ndarray
    r: np.ndarray
    power: np.ndarray
    k: np.ndarray
    substantial: np.ndarray
    M: int
    critical_value: float | None = None

    def __len__(self):
        return self.beta.shape[0]


@dataclass
class LogisticFit:
    theta0: float
    theta1: float
    r_star: float
    separated: bool
    degenerate: bool = False
    iterations: int = 0


@dataclass
class StripFit:
    beta: float
    theta0: float
    theta1: float
    r_star: float
    separated: bool
    degenerate: bool = False


# --- replicates ------------------------------------------------------------


def statistic_score(config: SimConfig, tables, rng_u=None) -> float:
    """Statistic oriented so that larger means stronger evidence.

    HC is returned as is; min-P is negated.
    """
    mode = "normal" if config.model == "normal" else config.pvalue_mode
    pprime = config.allocation()
    pv = pvalue_vector(tables, mode, pprime, rng_u)
    if config.statistic == "hc":
        return hc_statistic(pv, HCConfig(config.gamma0)).value
    return -min_p_statistic(pv)


def _native(config: SimConfig, score: float) -> float:
    return score if config.larger_is_extreme else -score


def _replicate(config: SimConfig, phase: int, bi: int, ri: int, rep: int) -> float:
    rng = make_rng(config.master_seed, phase, bi, ri, rep, 0)
    rng_u = make_rng(config.master_seed, phase, bi, ri, rep, 1)
    if phase == PHASE_ALT:
        params = config.params(config.beta_grid[bi], config.r_grid[ri])
    else:
        # beta and r do not enter the null model
        params = config.params(config.beta_grid[0], 0.0)
    if config.model == "normal":
        tables = sample_normal_pair(params, "alt" if phase == PHASE_ALT else "null", rng)
    elif phase == PHASE_ALT:
        tables = sample_alt(params, rng)
    else:
        tables = sample_null(params, rng)
    return statistic_score(config, tables, rng_u)


def _null_block(args):
    config, phase, start, stop = args
    return [_replicate(config, phase, 0, 0, rep) for rep in range(start, stop)]


def _alt_cell(args):
    config, bi, ri = args
    return [_replicate(config, PHASE_ALT, bi, ri, rep) for rep in range(config.M)]


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def null_scores(config: SimConfig, workers: int = 1, phase: int = PHASE_NULL, M: int | None = None) -> np.ndarray:
    """Oriented statistic on ``M`` null replicates (``config.M`` by default)."""
    M = config.M if M is None else M
    tasks = [(config, phase, s, min(s + _NULL_BLOCK, M)) for s in range(0, M, _NULL_BLOCK)]
    out = _map(_null_block, tasks, workers)
    return np.array([v for block in out for v in block])


def _oriented_quantile(scores: np.ndarray, alpha: float) -> float:
    rank = math.ceil((1.0 - alpha) * len(scores) - 1e-9)
    return float(np.sort(scores)[max(rank, 1) - 1])


def null_critical_value(config: SimConfig, workers: int = 1) -> float:
    """Empirical (1 - alpha) null quantile, in the statistic's own units.

    For min-P this is the alpha-quantile of the smallest P-value; the test
    rejects when the observed minimum falls strictly below it.
    """
    crit = _oriented_quantile(null_scores(config, workers), config.alpha)
    return _native(config, crit)


def _exceed_count(config: SimConfig, scores, crit_native: float) -> int:
    scores = np.asarray(scores)
    if config.larger_is_extreme:
        return int(np.sum(scores > crit_native))
    return int(np.sum(-scores < crit_native))


def power_at(config: SimConfig, beta: float, r: float, crit: float) -> tuple[float, int]:
    """Fraction of ``M`` alternative replicates at ``(beta, r)`` that reject.

    ``(beta, r)`` need not lie on the config grids; off-grid points get
    their own stream index.
    """
    try:
        bi = config.beta_grid.index(float(beta))
        ri = config.r_grid.index(float(r))
        cfg = config
    except ValueError:
        cfg = SimConfig(**{**_shallow(config), "beta_grid": (float(beta),), "r_grid": (float(r),)})
        bi = ri = 0
    k = _exceed_count(cfg, _alt_cell((cfg, bi, ri)), crit)
    return k / cfg.M, k


def _shallow(config: SimConfig) -> dict:
    return {f: getattr(config, f) for f in config.__dataclass_fields__}


def is_substantial(k: int, M: int, alpha: float, delta: float = 0.05) -> bool:
    """True when ``Pr(Bin(M, alpha) >= k) <= delta``."""
    if not 0 <= k <= M:
        raise ParameterError(f"exceed count {k} outside [0, {M}]")
    return binom_tail(M, alpha, k, "upper") <= math.log(delta)


# --- logistic fit ----------------------------------------------------------


def _loglik(theta, X, y):
    eta = X @ theta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logistic(r, flags, tol: float = 1e-8, max_iter: int = 100) -> LogisticFit:
    """Maximum-likelihood fit of ``Pr(flag) = 1 / (1 + exp(-(theta1 r + theta0)))``.

    Damped Newton on the log-likelihood.  When the classes are completely
    separated along ``r`` the MLE does not exist; the fit then reports the
    midpoint of the separating gap as ``r_star`` with NaN coefficients.
    Single-class or too-short inputs come back ``degenerate``.
    """
    r = np.asarray(r, dtype=float)
    y = np.asarray(flags, dtype=float)
    nan = float("nan")
    if r.size < 2 or y.size != r.size or np.all(y == y[0]):
        return LogisticFit(nan, nan, nan, separated=True, degenerate=True)
    r0, r1 = r[y == 0], r[y == 1]
    if r0.max() < r1.min():
        return LogisticFit(nan, nan, 0.5 * (r0.max() + r1.min()), separated=True)
    if r1.max() < r0.min():
        return LogisticFit(nan, nan, 0.5 * (r1.max() + r0.min()), separated=True)

    # centred design keeps the Hessian well conditioned
    center = float(r.mean())
    X = np.column_stack([np.ones_like(r), r - center])
    theta = np.zeros(2)
    ll = _loglik(theta, X, y)
    it = 0
    for it in range(1, max_iter + 1):
        prob = 1.0 / (1.0 + np.exp(-(X @ theta)))
        grad = X.T @ (y - prob)
        if np.linalg.norm(grad) <= tol:
            break
        w = prob * (1.0 - prob)
        H = (X * w[:, None]).T @ X
        step = np.linalg.solve(H + 1e-12 * np.eye(2), grad)
        t = 1.0
        while t > 1e-10:
            cand = theta + t * step
            ll_c = _loglik(cand, X, y)
            if ll_c >= ll:
                theta, ll = cand, ll_c
                break
            t *= 0.5
        else:
            break
    theta1 = float(theta[1])
    theta0 = float(theta[0] - theta1 * center)
    return LogisticFit(theta0, theta1, -theta0 / theta1, separated=False, iterations=it)


def empirical_transition(grid: PowerGrid) -> list[StripFit]:
    """Per-beta logistic fit of substantiality flags against ``r``.

    Strips keep their order of first appearance.  Strips that cannot be
    fitted are returned with ``degenerate=True`` and ``r_star`` NaN.
    """
    out = []
    betas = list(dict.fromkeys(np.asarray(grid.beta, dtype=float).tolist()))
    for b in betas:
        sel = grid.beta == b
        order = np.argsort(grid.r[sel], kind="stable")
        fit = fit_logistic(grid.r[sel][order], grid.substantial[sel][order].astype(float))
        out.append(StripFit(b, fit.theta0, fit.theta1, fit.r_star, fit.separated, fit.degenerate))
    return out


def transition_curve(fits: list[StripFit]) -> tuple[np.ndarray, np.ndarray]:
    """``(beta, r_star)`` over the strips that produced a transition point."""
    keep = [f for f in fits if not f.degenerate and np.isfinite(f.r_star)]
    return np.array([f.beta for f in keep]), np.array([f.r_star for f in keep])


# --- full grid -------------------------------------------------------------


def run_grid(config: SimConfig, workers: int = 1):
    """Calibrate one null critical value, then evaluate every grid cell.

    Returns ``(PowerGrid, list[StripFit], metadata)``.
    """
    t0 = time.perf_counter()
    crit = null_critical_value(config, workers)
    cells = [(config, bi, ri) for bi in range(len(config.beta_grid)) for ri in range(len(config.r_grid))]
    scores = _map(_alt_cell, cells, workers)
    k = np.array([_exceed_count(config, s, crit) for s in scores], dtype=np.int64)
    beta = np.array([config.beta_grid[bi] for _, bi, _ in cells])
    r = np.array([config.r_grid[ri] for _, _, ri in cells])
    subst = np.array([is_substantial(int(kk), config.M, config.alpha, config.delta) for kk in k])
    grid = PowerGrid(beta, r, k / config.M, k, subst, config.M, crit)
    fits = empirical_transition(grid)
    meta = {
        "tool": "hctables",
        "version": __version__,
        "master_seed": config.master_seed,
        "critical_value": crit,
        "cells": len(cells),
        "wall_clock_seconds": time.perf_counter() - t0,
        "config": config.to_dict(),
    }
    return grid, fits, meta
