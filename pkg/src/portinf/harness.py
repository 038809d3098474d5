"""Data ingestion, feature preparation, and report rendering.

All lagging of features and volatility weights happens here, once,
before any moment matrix is formed; the estimation modules never shift
time themselves.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyPanel,
    ParseError,
    RankDeficientRegression,
    ShapeMismatch,
    ZeroVolatilityWindow,
)
from .moments import ReturnsPanel


@dataclass
class RollingVolSpec:
    """Trailing mean of cross-asset median absolute returns, then a delay."""

    window: int = 11
    lag: int = 1

    def __post_init__(self):
        if self.window < 1 or self.lag < 1:
            raise ShapeMismatch("window and lag must be positive")


@dataclass
class RunConfig:
    """Validated options for one command-line run."""

    command: str
    input_path: str | None = None
    asset_columns: list[str] = field(default_factory=list)
    feature_columns: list[str] = field(default_factory=list)
    date_column: str | None = None
    model: str = "constant"
    feature_lag: int = 1
    center_features: bool = False
    vol: RollingVolSpec | None = None
    hac: tuple[str, int | None] | None = None
    risk_budget: float | None = None
    rfr: float = 0.0
    seed: int | None = None
    suite: str | None = None
    trials: int | None = None
    sample_size: int | None = None
    a_file: str | None = None
    c_file: str | None = None
    t_file: str | None = None
    constraints_file: str | None = None
    fmt: str = "tsv"

    def __post_init__(self):
        if self.command == "simulate" and self.seed is None:
            raise ShapeMismatch("simulate requires a seed")
        if self.risk_budget is not None and self.risk_budget <= 0:
            raise ShapeMismatch("risk budget must be positive")
        if self.fmt not in ("tsv", "json"):
            raise ShapeMismatch(f"unknown format {self.fmt!r}")


@dataclass
class LoadedData:
    panel: ReturnsPanel
    features: np.ndarray | None
    n_dropped: int
    feature_names: list[str] = field(default_factory=list)


def load_csv(
    path: str,
    asset_columns: list[str],
    feature_columns: list[str] | None = None,
    date_column: str | None = None,
) -> LoadedData:
    """Read an aligned returns (and optional feature) panel from CSV.

    UTF-8, header row, decimal-point numbers. Rows with any missing or
    unparseable selected value are dropped and counted. Row order is
    preserved; non-increasing timestamps only warn.
    """
    feature_columns = feature_columns or []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise ParseError(f"{path}: no header row")
            missing = [c for c in asset_columns + feature_columns if c not in reader.fieldnames]
            if date_column and date_column not in reader.fieldnames:
                missing.append(date_column)
            if missing:
                raise ParseError(f"{path}: missing columns {missing}")
            rows, feats, stamps = [], [], []
            n_dropped = 0
            for lineno, rec in enumerate(reader, start=2):
                try:
                    vals = [float(rec[c]) for c in asset_columns]
                    fv = [float(rec[c]) for c in feature_columns]
                except (TypeError, ValueError):
                    n_dropped += 1
                    continue
                if not all(np.isfinite(vals)) or not all(np.isfinite(fv)):
                    n_dropped += 1
                    continue
                rows.append(vals)
                feats.append(fv)
                if date_column:
                    stamps.append(rec[date_column])
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not rows:
        raise EmptyPanel(f"{path}: no usable rows")
    if date_column and any(b <= a for a, b in zip(stamps, stamps[1:])):
        warnings.warn(f"{path}: timestamps are not strictly increasing", RuntimeWarning)
    panel = ReturnsPanel(np.array(rows), asset_names=list(asset_columns),
                         timestamps=stamps if date_column else None)
    features = np.array(feats) if feature_columns else None
    return LoadedData(panel, features, n_dropped, list(feature_columns))


def write_csv(path: str, values: np.ndarray, columns: list[str],
              timestamps: list | None = None, date_column: str = "date"):
    """Write a panel back out; the inverse of load_csv up to float text."""
    values = np.atleast_2d(values)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ([date_column] if timestamps is not None else []) + list(columns)
        writer.writerow(header)
        for i, row in enumerate(values):
            lead = [timestamps[i]] if timestamps is not None else []
            writer.writerow(lead + [repr(float(v)) for v in row])


def rolling_volatility(values: np.ndarray, spec: RollingVolSpec | None = None) -> np.ndarray:
    """Quietude weights: reciprocal trailing volatility, delayed.

    The volatility proxy at time i is the mean over the trailing window
    of the cross-asset median absolute return; the weight applies `lag`
    periods later. Entries before the first full window are NaN and must
    be dropped by the caller.
    """
    spec = spec or RollingVolSpec()
    values = np.atleast_2d(np.asarray(values, dtype=float))
    t = values.shape[0]
    if spec.window + spec.lag >= t:
        raise ShapeMismatch(f"window+lag must be below T={t}")
    med = np.median(np.abs(values), axis=1)
    weights = np.full(t, np.nan)
    for i in range(spec.window - 1, t):
        vol = med[i - spec.window + 1 : i + 1].mean()
        if vol < 1e-300:
            raise ZeroVolatilityWindow(f"volatility window ending at row {i} is zero")
        if i + spec.lag < t:
            weights[i + spec.lag] = 1.0 / vol
    return weights


def valid_weight_rows(weights: np.ndarray) -> np.ndarray:
    """Boolean mask of rows whose lagged weight is defined."""
    return np.isfinite(np.asarray(weights, dtype=float))


def britten_jones(values: np.ndarray) -> np.ndarray:
    """t-statistics from regressing the constant one vector on returns.

    No intercept; the coefficient t-statistics test the corresponding
    optimal-portfolio weights under Gaussian returns. Serves as the
    comparison oracle for the Wald z-scores.
    """
    x = np.atleast_2d(np.asarray(values, dtype=float))
    t, p = x.shape
    if t <= p:
        raise ShapeMismatch("need more observations than assets")
    gram = x.T @ x
    svals = np.linalg.svd(gram, compute_uv=False)
    if svals[-1] < 1e-12 * max(svals[0], 1e-300):
        raise RankDeficientRegression("returns matrix is rank deficient")
    y = np.ones(t)
    coef = np.linalg.solve(gram, x.T @ y)
    resid = y - x @ coef
    s2 = float(resid @ resid) / (t - p)
    se = np.sqrt(s2 * np.diag(np.linalg.inv(gram)))
    return coef / se


# --- report rendering ----------------------------------------------------

@dataclass
class ReportTable:
    title: str
    columns: list[str]
    rows: list[list]
    metadata: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def render_tsv(tables: list[ReportTable]) -> str:
    out = []
    for tbl in tables:
        out.append(f"# {tbl.title}")
        for k in sorted(tbl.metadata):
            out.append(f"# {k}={_fmt(tbl.metadata[k])}")
        out.append("\t".join(tbl.columns))
        for row in tbl.rows:
            out.append("\t".join(_fmt(v) for v in row))
        out.append("")
    return "\n".join(out)


def render_json(tables: list[ReportTable]) -> str:
    payload = [
        {
            "title": tbl.title,
            "metadata": tbl.metadata,
            "columns": tbl.columns,
            "rows": [[v if not isinstance(v, np.generic) else v.item() for v in row]
                     for row in tbl.rows],
        }
        for tbl in tables
    ]
    return json.dumps(payload, indent=2, sort_keys=True)


def report(tables: list[ReportTable], fmt: str = "tsv") -> str:
    if fmt == "tsv":
        return render_tsv(tables)
    if fmt == "json":
        return render_json(tables)
    raise ShapeMismatch(f"unknown format {fmt!r}")
