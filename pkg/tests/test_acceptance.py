"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line and the summary is
repeated at the end of the pytest run.  The phase-diagram checks (7-9)
take a few minutes on one core.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from hctables.cli import main
from hctables.model import RareWeakParams, sample_null
from hctables.pvalues import exact_binom_pvalue, pvalue_vector
from hctables.simulate import PHASE_CHECK, SimConfig, null_critical_value, null_scores, run_grid
from hctables.specfun import lambert_w_m1, make_rng
from hctables.theory import BETA0_LOW, alpha_star, rho_bonf_low, rho_high, rho_low, xi_star

LN2 = math.log(2.0)
BETAS = tuple(np.round(np.arange(0.55, 0.851, 0.05), 2))
RS = tuple(np.round(np.arange(0.1, 3.001, 0.1), 2))
# P-value mode for the phase-diagram checks; see the README
PHASE_MODE = "randomized"
PHASE_SEED = 1


def phase_config(gamma, model="poisson"):
    return SimConfig(
        N=10_000, gamma=gamma, M=200, alpha=0.05, beta_grid=BETAS, r_grid=RS,
        pvalue_mode=PHASE_MODE, model=model, master_seed=PHASE_SEED,
    )


@pytest.fixture(scope="module")
def high_grid():
    return run_grid(phase_config(1.4))


def strip_rstar(fits):
    return {f.beta: f.r_star for f in fits if np.isfinite(f.r_star)}


# --- 1 ----------------------------------------------------------------------


def test_criterion_1_exact_pvalues(record):
    t0 = time.perf_counter()
    worst = 0.0
    for pprime in (Fraction(1, 2), Fraction(1, 4)):
        for n in range(0, 26):
            pmf = [math.comb(n, j) * pprime**j * (1 - pprime) ** (n - j) for j in range(n + 1)]
            for x in range(n + 1):
                d = abs(x - n * pprime)
                ref = float(sum(f for j, f in enumerate(pmf) if abs(j - n * pprime) >= d))
                worst = max(worst, abs(exact_binom_pvalue(x, n - x, float(pprime)) - ref))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and elapsed < 1.0
    record(1, ok, f"max error {worst:.2e}, {elapsed:.2f} s")
    assert ok


# --- 2 ----------------------------------------------------------------------


def test_criterion_2_randomized_uniformity(record):
    t0 = time.perf_counter()
    N = 10_000
    params = RareWeakParams.from_exponent(N, 1.4, 0.5, 0.0)
    tables = sample_null(params, make_rng(2, 0))
    rand = pvalue_vector(tables, "randomized", 0.5, make_rng(2, 1)).values
    exact = pvalue_vector(tables, "exact", 0.5).values
    D = stats.kstest(rand, "uniform").statistic
    dominated = bool(np.all(rand <= exact))
    elapsed = time.perf_counter() - t0
    ok = D < 1.63 / math.sqrt(N) and dominated and elapsed < 5.0
    record(2, ok, f"KS {D:.4f} vs {1.63 / math.sqrt(N):.4f}, dominated={dominated}, {elapsed:.2f} s")
    assert ok


# --- 3 ----------------------------------------------------------------------


def test_criterion_3_curve_anchors(record):
    t0 = time.perf_counter()
    a = rho_high(0.75) == 0.5
    b = abs(rho_low(BETA0_LOW) - math.sqrt(2) / LN2) <= 1e-9
    c = abs(rho_bonf_low(1.0) - 2 / LN2) <= 1e-9
    worst = max(abs(alpha_star("low", 1.0, rho_bonf_low(be)) - (1 - be)) for be in np.linspace(0.5, 1.0, 100))
    elapsed = time.perf_counter() - t0
    ok = a and b and c and worst <= 1e-10 and elapsed < 1.0
    record(3, ok, f"anchors {a},{b},{c}; max alpha residual {worst:.1e}")
    assert ok


# --- 4 ----------------------------------------------------------------------


def test_criterion_4_lambert_w_m1(record):
    t0 = time.perf_counter()
    xs = -np.exp(np.linspace(math.log(1e-8), -1.0, 1002)[1:-1])
    worst = 0.0
    for x in xs:
        w = lambert_w_m1(float(x))
        worst = max(worst, abs(w * math.exp(w) - x) / abs(x))
    branch = abs(lambert_w_m1(-1 / math.e) + 1.0)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and branch <= 1e-7 and elapsed < 1.0
    record(4, ok, f"{xs.size} points, max relative residual {worst:.1e}, |W(-1/e)+1| {branch:.1e}")
    assert ok


# --- 5 ----------------------------------------------------------------------


def grid_xi(regime, beta, r, q):
    """Independent numpy evaluation of the exponent on a q grid."""
    if regime == "high":
        a = np.where(q <= r / 2, 0.0, (np.sqrt(q) - np.sqrt(r / 2)) ** 2)
    else:
        a = q * (np.log(2 * q / (r * LN2)) - 1) / LN2 + r / 2
    return np.max((q + 1) / 2 - beta - a)


def test_criterion_5_xi_star(record):
    t0 = time.perf_counter()
    q = np.linspace(1e-4, 1.0, 10_000)
    worst = 0.0
    for regime in ("high", "low"):
        for beta in np.linspace(0.5, 1.0, 50):
            for r in np.linspace(0.05, 3.0, 50):
                worst = max(worst, abs(xi_star(regime, beta, r)[0] - grid_xi(regime, beta, r, q)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 2e-4 and elapsed < 10.0
    record(5, ok, f"max gap {worst:.1e}, {elapsed:.1f} s")
    assert ok


# --- 6 ----------------------------------------------------------------------


def test_criterion_6_hc_null(record):
    t0 = time.perf_counter()
    N = 10_000
    cfg = SimConfig(N=N, gamma=1.4, M=200, pvalue_mode="exact", gamma0=0.1, master_seed=6)
    scores = null_scores(cfg)
    bound = math.sqrt(4 * math.log(math.log(N)))
    frac = float(np.mean(scores <= bound))
    elapsed = time.perf_counter() - t0
    ok = frac >= 0.9 and elapsed < 120
    record(6, ok, f"{frac:.3f} of 200 replicates below {bound:.3f}, {elapsed:.0f} s")
    assert ok


# --- 7 ----------------------------------------------------------------------


def test_criterion_7_high_phase_diagram(record, high_grid):
    grid, fits, meta = high_grid
    bad_hi, bad_lo = [], []
    for b, r, p in zip(grid.beta, grid.r, grid.power):
        rho = rho_high(b)
        if r >= rho + 0.8 - 1e-9 and p < 0.9:
            bad_hi.append((b, r, p))
        if r <= max(rho - 0.3, 0.05) + 1e-9 and p > 0.3:
            bad_lo.append((b, r, p))
    rstar = strip_rstar(fits)
    dev = float(np.mean([abs(v - rho_high(b)) for b, v in rstar.items()])) if rstar else math.inf
    ok = not bad_hi and not bad_lo and dev <= 0.6 and len(rstar) >= len(BETAS) // 2 + 1
    worst = min(bad_hi, key=lambda t: t[2]) if bad_hi else None
    record(
        7, ok,
        f"{len(bad_hi)} cells below 0.9 above the curve"
        + (f" (worst beta={worst[0]}, r={worst[1]}, power={worst[2]:.2f})" if worst else "")
        + f", {len(bad_lo)} cells above 0.3 below it, mean |r*-rho| {dev:.3f} over {len(rstar)} strips,"
        f" {meta['wall_clock_seconds']:.0f} s",
    )
    assert ok


# --- 8 ----------------------------------------------------------------------


def test_criterion_8_low_phase_diagram(record):
    grid, fits, meta = run_grid(phase_config(0.8))
    rstar = {b: v for b, v in strip_rstar(fits).items() if 0.55 <= b <= 0.85}
    dev = float(np.mean([abs(v - rho_low(b)) for b, v in rstar.items()])) if rstar else math.inf
    ok = dev <= 0.9 and len(rstar) >= len(BETAS) // 2 + 1
    record(8, ok, f"mean |r*-rho_low| {dev:.3f} over {len(rstar)} strips, {meta['wall_clock_seconds']:.0f} s")
    assert ok


# --- 9 ----------------------------------------------------------------------


def test_criterion_9_normal_cross_check(record, high_grid):
    _, fits_normal, meta = run_grid(phase_config(1.4, model="normal"))
    a = strip_rstar(high_grid[1])
    b = strip_rstar(fits_normal)
    common = [be for be in a if be in b and 0.55 <= be <= 0.8]
    dev = float(np.mean([abs(a[be] - b[be]) for be in common])) if common else math.inf
    ok = dev <= 0.5 and len(common) >= 3
    record(9, ok, f"mean |r*_normal - r*_poisson| {dev:.3f} over {len(common)} strips")
    assert ok


# --- 10 ---------------------------------------------------------------------


@pytest.mark.parametrize("statistic", ["hc", "minp"])
def test_criterion_10_level_control(record, statistic):
    t0 = time.perf_counter()
    cfg = SimConfig(N=10_000, gamma=1.4, M=1000, alpha=0.05, statistic=statistic, master_seed=10)
    crit = null_critical_value(cfg)
    fresh = null_scores(cfg, phase=PHASE_CHECK)
    if statistic == "hc":
        rate = float(np.mean(fresh > crit))
    else:
        rate = float(np.mean(-fresh < crit))
    band = 3 * math.sqrt(cfg.alpha * (1 - cfg.alpha) / cfg.M)
    elapsed = time.perf_counter() - t0
    ok = abs(rate - cfg.alpha) <= band
    _LEVEL[statistic] = (ok, rate, elapsed)
    if len(_LEVEL) == 2:
        both = all(v[0] for v in _LEVEL.values())
        detail = ", ".join(f"{k} rate {v[1]:.3f}" for k, v in _LEVEL.items())
        record(10, both, f"{detail}, band 0.05 +- {band:.3f}")
    assert ok


_LEVEL: dict = {}


# --- 11 ---------------------------------------------------------------------


def test_criterion_11_determinism(record, tmp_path):
    cfg = tmp_path / "det.cfg"
    cfg.write_text(
        "N = 2000\ngamma = 1.4\nM = 50\nseed = 11\nbeta_grid = 0.55:0.85:0.1\nr_grid = 0:3:1\n"
        "pvalue_mode = randomized\n",
        encoding="utf-8",
    )
    outputs = {}
    for w in (1, 4, 8):
        d = tmp_path / f"w{w}"
        assert main(["simulate", str(cfg), "--out", str(d), "--workers", str(w)]) == 0
        outputs[w] = ((d / "power_grid.csv").read_bytes(), (d / "phase_fit.csv").read_bytes())
    again = tmp_path / "again"
    assert main(["simulate", str(cfg), "--out", str(again), "--workers", "1"]) == 0
    outputs["rerun"] = ((again / "power_grid.csv").read_bytes(), (again / "phase_fit.csv").read_bytes())
    ok = len(set(outputs.values())) == 1
    record(11, ok, "byte-identical CSVs for workers 1, 4, 8 and a rerun" if ok else "outputs differ")
    assert ok
