"""File formats: frequency tables, simulation configs and CSV outputs.

All CSV output is UTF-8 with LF line endings and a header row.  Floats are
written with ``repr``, the shortest string that round-trips, so files are
byte-identical across runs and platforms.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, TableFormatError
from .model import Baseline
from .pvalues import CountTablePair
from .simulate import PowerGrid, SimConfig, StripFit

POWER_GRID_COLUMNS = ("beta", "r", "power", "k", "substantial")
PHASE_FIT_COLUMNS = ("beta", "theta0", "theta1", "r_star", "separated")


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_csv(path, header, rows) -> None:
    """Write a header and rows; ``path`` may be a filename or an open text file."""
    if hasattr(path, "write"):
        _write_rows(path, header, rows)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _write_rows(fh, header, rows)


def _write_rows(fh, header, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows([fmt(v) for v in row] for row in rows)


# --- frequency tables ------------------------------------------------------


def read_table(path) -> dict[str, int]:
    """Read a two-column ``category,count`` file (comma or tab separated).

    Blank lines and lines starting with ``#`` are skipped.  A first row
    whose count field is not an integer is treated as a header.
    """
    counts: dict[str, int] = {}
    delim = None
    with open(path, encoding="utf-8") as fh:
        first = True
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if delim is None:
                delim = "\t" if "\t" in line else ","
            parts = next(csv.reader([line], delimiter=delim))
            if len(parts) != 2:
                raise TableFormatError(f"expected 2 fields, found {len(parts)}", path, lineno)
            cat, raw_count = parts[0].strip(), parts[1].strip()
            try:
                count = int(raw_count)
            except ValueError:
                if first:
                    first = False
                    continue
                raise TableFormatError(f"count {raw_count!r} is not an integer", path, lineno) from None
            first = False
            if count < 0:
                raise TableFormatError(f"negative count {count}", path, lineno)
            if cat in counts:
                raise TableFormatError(f"duplicate category {cat!r}", path, lineno)
            counts[cat] = count
    return counts


def align_tables(tx: dict[str, int], ty: dict[str, int]) -> tuple[list[str], CountTablePair]:
    """Union of categories (first-file order, then new ones), missing counts as 0."""
    cats = list(tx)
    cats += [c for c in ty if c not in tx]
    x = np.array([tx.get(c, 0) for c in cats], dtype=np.int64)
    y = np.array([ty.get(c, 0) for c in cats], dtype=np.int64)
    return cats, CountTablePair(x, y)


# --- simulation config -----------------------------------------------------

_INT_KEYS = {"N", "M", "seed"}
_FLOAT_KEYS = {"gamma", "n_x", "n_y", "alpha", "delta", "gamma0", "zipf_k", "zipf_xi"}
_STR_KEYS = {"statistic", "pvalue_mode", "model", "baseline", "pprime"}
_GRID_KEYS = {"beta_grid", "r_grid"}
CONFIG_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | _GRID_KEYS


def parse_grid(text: str) -> tuple[float, ...]:
    """``start:stop:step`` (stop included) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        if step <= 0 or stop < start:
            raise ValueError("grid needs step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(count))
    return tuple(float(t) for t in text.split(",") if t.strip())


def parse_config(text: str, source: str = "<config>") -> SimConfig:
    """Build a :class:`SimConfig` from ``key = value`` lines."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}", key)
        raw[key] = value

    values: dict = {}
    for key, value in raw.items():
        try:
            if key in _INT_KEYS:
                values[key] = int(value)
            elif key in _FLOAT_KEYS:
                values[key] = float(value)
            elif key in _GRID_KEYS:
                values[key] = parse_grid(value)
            else:
                values[key] = value
        except ValueError as exc:
            raise ConfigError(f"{source}: bad value for {key!r}: {value!r} ({exc})", key) from None

    baseline = Baseline()
    kind = values.pop("baseline", "uniform")
    zk = values.pop("zipf_k", 0.0)
    zxi = values.pop("zipf_xi", 2.0)
    pprime = values.pop("pprime", None)
    if pprime is not None and pprime != "auto":
        try:
            pprime = float(pprime)
        except ValueError:
            raise ConfigError(f"{source}: bad value for 'pprime': {pprime!r}", "pprime") from None
    try:
        baseline = Baseline(kind, zk, zxi)
        if "seed" in values:
            values["master_seed"] = values.pop("seed")
        return SimConfig(baseline=baseline, pprime=pprime, **values)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> SimConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), str(path))


# --- power grid / phase fit ------------------------------------------------


def write_power_grid(path, grid: PowerGrid) -> None:
    rows = zip(grid.beta, grid.r, grid.power, grid.k, grid.substantial)
    write_csv(path, POWER_GRID_COLUMNS, rows)


def _read_columns(path, required) -> dict[str, list[str]]:
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh if ln.strip()]
    if not lines:
        raise TableFormatError("empty CSV file", path)
    header = [h.strip() for h in lines[0].split(",")]
    for col in required:
        if col not in header:
            raise TableFormatError(f"missing column {col!r}", path, 1)
    cols: dict[str, list[str]] = {h: [] for h in header}
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise TableFormatError(f"expected {len(header)} fields, found {len(parts)}", path, lineno)
        for h, v in zip(header, parts):
            cols[h].append(v.strip())
    return cols


def read_power_grid(path) -> PowerGrid:
    cols = _read_columns(path, POWER_GRID_COLUMNS)
    try:
        beta = np.array([float(v) for v in cols["beta"]])
        r = np.array([float(v) for v in cols["r"]])
        power = np.array([float(v) for v in cols["power"]])
        k = np.array([int(v) for v in cols["k"]], dtype=np.int64)
        subst = np.array([_parse_flag(v) for v in cols["substantial"]], dtype=bool)
    except ValueError as exc:
        raise TableFormatError(f"bad value: {exc}", path) from None
    M = int(round(k.max() / power.max())) if power.size and power.max() > 0 else 0
    return PowerGrid(beta, r, power, k, subst, M)


def _parse_flag(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true"):
        return True
    if low in ("0", "false"):
        return False
    raise ValueError(f"not a flag: {v!r}")


def write_phase_fit(path, fits: list[StripFit]) -> None:
    rows = ((f.beta, f.theta0, f.theta1, f.r_star, f.separated) for f in fits)
    write_csv(path, PHASE_FIT_COLUMNS, rows)
