"""Command line interface.

Subcommands: infer, mglh, lrt, attribute, simulate, selftest.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np
from scipy import stats as spstats

from . import asymptotics, constraints, gaussian, harness, moments, simulate
from .errors import (
    EmptyPanel,
    NumericalError,
    ParseError,
    PortinfError,
)
from .harness import RollingVolSpec, RunConfig
from .kernels import MatrixShape, ivech, side_from_vech_len
from .mglh import STAT_NAMES, MglhSpec, mglh_asymptotic
from .moments import MomentLayout

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _split_csv_arg(text: str | None) -> list[str]:
    if not text:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _parse_hac(text: str) -> tuple[str, int | None]:
    if ":" in text:
        kernel, bw = text.split(":", 1)
        try:
            return kernel.strip().lower(), int(bw)
        except ValueError as exc:
            raise ParseError(f"bad HAC bandwidth in {text!r}") from exc
    return text.strip().lower(), None


def _load_matrix(path: str) -> np.ndarray:
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", ndmin=2))
    except (OSError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc


def build_parser() -> _Parser:
    parser = _Parser(prog="portinf",
                     description="Asymptotic inference for optimal portfolios")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_data_opts(p, features=True):
        p.add_argument("--input", required=True, help="CSV of per-period returns")
        p.add_argument("--assets", required=True, help="comma-separated asset columns")
        p.add_argument("--date-column", default=None)
        if features:
            p.add_argument("--features", default=None, help="comma-separated feature columns")
            p.add_argument("--feature-lag", type=int, default=1)
            p.add_argument("--center-features", action="store_true")
        p.add_argument("--vol-window", type=int, default=None,
                       help="trailing window for quietude weights")
        p.add_argument("--vol-lag", type=int, default=1)
        p.add_argument("--hac", default=None, metavar="KERNEL[:BW]",
                       help="bartlett or parzen, optional bandwidth")
        p.add_argument("--format", choices=("tsv", "json"), default="tsv")

    p_infer = sub.add_parser("infer", help="portfolio weights with standard errors")
    add_data_opts(p_infer)
    p_infer.add_argument("--model", choices=[m.value for m in constraints.ConditionalModel],
                         default="constant")
    p_infer.add_argument("--risk-budget", type=float, default=None)
    p_infer.add_argument("--rfr", type=float, default=0.0)

    p_mglh = sub.add_parser("mglh", help="multivariate linear hypothesis test")
    add_data_opts(p_mglh)
    p_mglh.add_argument("--A", required=True, dest="a_file", help="CSV contrast on assets")
    p_mglh.add_argument("--C", required=True, dest="c_file", help="CSV contrast on features")
    p_mglh.add_argument("--T", required=True, dest="t_file", help="CSV target matrix")

    p_lrt = sub.add_parser("lrt", help="likelihood-ratio test on trace constraints")
    add_data_opts(p_lrt, features=False)
    p_lrt.add_argument("--constraints", required=True,
                       help="CSV, one row per constraint: vech(A) then the target")

    p_attr = sub.add_parser("attribute", help="share of weight error from the precision matrix")
    add_data_opts(p_attr, features=False)

    p_sim = sub.add_parser("simulate", help="Monte Carlo validation of the asymptotic laws")
    p_sim.add_argument("--suite", required=True, choices=simulate.SUITES)
    p_sim.add_argument("--seed", required=True, type=int)
    p_sim.add_argument("--trials", type=int, default=None)
    p_sim.add_argument("--sample-size", type=int, default=None)

    sub.add_parser("selftest", help="quick internal consistency checks")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    vol = None
    if getattr(args, "vol_window", None) is not None:
        vol = RollingVolSpec(args.vol_window, args.vol_lag)
    hac = _parse_hac(args.hac) if getattr(args, "hac", None) else None
    return RunConfig(
        command=args.command,
        input_path=getattr(args, "input", None),
        asset_columns=_split_csv_arg(getattr(args, "assets", None)),
        feature_columns=_split_csv_arg(getattr(args, "features", None)),
        date_column=getattr(args, "date_column", None),
        model=getattr(args, "model", "constant"),
        feature_lag=getattr(args, "feature_lag", 1),
        center_features=getattr(args, "center_features", False),
        vol=vol,
        hac=hac,
        risk_budget=getattr(args, "risk_budget", None),
        rfr=getattr(args, "rfr", 0.0),
        seed=getattr(args, "seed", None),
        suite=getattr(args, "suite", None),
        trials=getattr(args, "trials", None),
        sample_size=getattr(args, "sample_size", None),
        a_file=getattr(args, "a_file", None),
        c_file=getattr(args, "c_file", None),
        t_file=getattr(args, "t_file", None),
        constraints_file=getattr(args, "constraints", None),
        fmt=getattr(args, "format", "tsv"),
    )


def _prepare(cfg: RunConfig, need_features: bool):
    """Load, weight, lag, and align the data per the run options."""
    loaded = harness.load_csv(cfg.input_path, cfg.asset_columns,
                              cfg.feature_columns or None, cfg.date_column)
    if loaded.n_dropped:
        print(f"dropped {loaded.n_dropped} rows with missing values", file=sys.stderr)
    values = loaded.panel.values
    t = values.shape[0]
    keep = np.ones(t, dtype=bool)

    weights = None
    if cfg.vol is not None:
        weights = harness.rolling_volatility(values, cfg.vol)
        keep &= harness.valid_weight_rows(weights)

    features = None
    if cfg.feature_columns:
        lag = cfg.feature_lag
        features = np.full_like(loaded.features, np.nan)
        if lag:
            features[lag:] = loaded.features[:-lag]
        else:
            features = loaded.features.copy()
        keep &= np.all(np.isfinite(features), axis=1)

    values = values[keep]
    if weights is not None:
        weights = weights[keep]
    if features is not None:
        features = features[keep]
        if cfg.center_features:
            features = features - features.mean(axis=0)
    if need_features and features is None:
        raise ParseError("this command needs --features")
    return values, features, weights


def _omega_for(rows, cfg: RunConfig):
    if cfg.hac:
        kernel, bw = cfg.hac
        return asymptotics.omega_hac(rows, kernel=kernel, bandwidth=bw)
    return asymptotics.omega_vanilla(rows)


def _two_sided_p(z: float) -> float:
    return float(2.0 * spstats.norm.sf(abs(z)))


def cmd_infer(cfg: RunConfig) -> int:
    model = constraints.ConditionalModel(cfg.model)
    need_features = model is constraints.ConditionalModel.BICONDITIONAL
    values, features, weights = _prepare(cfg, need_features)
    rows, layout, f_dim = constraints.conditional_rows(values, features, weights, model)
    tm = moments.sample_theta(rows, layout, f_dim=f_dim)
    om = _omega_for(rows, cfg)
    coef, dist = constraints.markowitz_coefficient(tm, om)
    z = asymptotics.wald_statistics(dist)
    se = dist.standard_errors()
    asset_names = cfg.asset_columns

    meta = {
        "model": model.value,
        "n_obs": tm.n_obs,
        "omega": om.estimator + (f":{om.kernel}:{om.bandwidth}" if om.estimator == "hac" else ""),
    }
    tables = []
    if f_dim == 1:
        rows_out = [
            [asset_names[i], float(coef[i, 0]), float(se[i]), float(z[i]), _two_sided_p(z[i])]
            for i in range(len(asset_names))
        ]
        if layout is MomentLayout.UNCONDITIONAL and cfg.risk_budget:
            est = moments.sr_optimal_portfolio(tm, cfg.risk_budget, cfg.rfr, asset_names)
            meta["snr_sq"] = est.snr_sq
            meta["objective"] = est.objective
            port_dist = asymptotics.portfolio_covariance(tm, om, cfg.risk_budget)
            pse = port_dist.standard_errors()
            for i, row in enumerate(rows_out):
                row.extend([float(est.weights[i]), float(pse[i])])
            if cfg.rfr > 0:
                meta["snr_se"] = float(
                    np.sqrt(asymptotics.snr_variance(tm, om, cfg.risk_budget, cfg.rfr)
                            / tm.n_obs))
            cols = ["asset", "markowitz", "se", "z", "p", "scaled_weight", "scaled_se"]
        else:
            cols = ["asset", "markowitz", "se", "z", "p"]
        tables.append(harness.ReportTable("portfolio", cols, rows_out, meta))
    else:
        rows_out = []
        k = 0
        for j in range(f_dim):
            for i in range(len(asset_names)):
                rows_out.append([asset_names[i], cfg.feature_columns[j], float(coef[i, j]),
                                 float(se[k]), float(z[k]), _two_sided_p(z[k])])
                k += 1
        tables.append(harness.ReportTable(
            "markowitz_coefficient",
            ["asset", "feature", "coefficient", "se", "z", "p"], rows_out, meta))
    print(harness.report(tables, cfg.fmt))
    return EXIT_OK


def cmd_mglh(cfg: RunConfig) -> int:
    values, features, weights = _prepare(cfg, need_features=True)
    rows, layout, f_dim = constraints.conditional_rows(
        values, features, weights, constraints.ConditionalModel.BICONDITIONAL)
    tm = moments.sample_theta(rows, layout, f_dim=f_dim)
    om = _omega_for(rows, cfg)
    spec = MglhSpec(_load_matrix(cfg.a_file), _load_matrix(cfg.c_file),
                    _load_matrix(cfg.t_file))
    res = mglh_asymptotic(tm, spec, om)
    rows_out = [
        [name, res.as_dict()[name], float(np.sqrt(res.variances[name] / tm.n_obs)),
         res.z_scores[name], _two_sided_p(res.z_scores[name])]
        for name in STAT_NAMES
    ]
    meta = {"n_obs": tm.n_obs, "note": res.note, "omega": om.estimator}
    tables = [harness.ReportTable("mglh", ["statistic", "value", "se", "z", "p"],
                                  rows_out, meta)]
    print(harness.report(tables, cfg.fmt))
    return EXIT_OK


def cmd_lrt(cfg: RunConfig) -> int:
    values, _, weights = _prepare(cfg, need_features=False)
    rows, layout, f_dim = constraints.conditional_rows(
        values, None, weights, constraints.ConditionalModel.CONSTANT_SR)
    tm = moments.sample_theta(rows, layout, f_dim=f_dim)
    raw = _load_matrix(cfg.constraints_file)
    m_len = raw.shape[1] - 1
    side = side_from_vech_len(m_len)
    if side != tm.dim:
        raise ParseError(
            f"constraint rows encode a {side}x{side} matrix, moments are {tm.dim}x{tm.dim}")
    mats = [ivech(row[:-1], MatrixShape.SYMMETRIC) for row in raw]
    cs = gaussian.TraceConstraintSet(mats, raw[:, -1])
    sol = gaussian.lrt_solve(tm, cs)
    meta = {"n_obs": tm.n_obs, "iterations": sol.iterations, "converged": sol.converged}
    rows_out = [["stat", sol.stat], ["dof", sol.dof],
                ["p_value", gaussian.lrt_pvalue(sol.stat, sol.dof)]]
    rows_out += [[f"lambda[{i}]", float(v)] for i, v in enumerate(sol.lam)]
    tables = [harness.ReportTable("lrt", ["quantity", "value"], rows_out, meta)]
    print(harness.report(tables, cfg.fmt))
    return EXIT_OK


def cmd_attribute(cfg: RunConfig) -> int:
    values, _, _ = _prepare(cfg, need_features=False)
    p = values.shape[1]

    def r2_for(vals, wts):
        rows, layout, f_dim = constraints.conditional_rows(
            vals, None, wts, constraints.ConditionalModel.CONSTANT_SR)
        tm = moments.sample_theta(rows, layout, f_dim=f_dim)
        om = _omega_for(rows, cfg)
        dist = asymptotics.theta_inverse_covariance(tm, om)
        return asymptotics.attribute_error(dist, p)

    vanilla = r2_for(values, None)
    spec = cfg.vol or RollingVolSpec()
    wts = harness.rolling_volatility(values, spec)
    mask = harness.valid_weight_rows(wts)
    weighted = r2_for(values[mask], wts[mask])
    rows_out = [
        [cfg.asset_columns[i], f"{100 * vanilla[i]:.1f}%", f"{100 * weighted[i]:.1f}%"]
        for i in range(p)
    ]
    meta = {"vol_window": spec.window, "vol_lag": spec.lag}
    tables = [harness.ReportTable("error_attribution",
                                  ["asset", "vanilla", "weighted"], rows_out, meta)]
    print(harness.report(tables, cfg.fmt))
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    rep = simulate.simulate_suite(cfg.suite, cfg.seed, cfg.trials, cfg.sample_size)
    sys.stdout.write(rep.render())
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def cmd_selftest(cfg: RunConfig) -> int:
    from . import selftest

    ok = selftest.run(verbose=True)
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "infer": cmd_infer,
        "mglh": cmd_mglh,
        "lrt": cmd_lrt,
        "attribute": cmd_attribute,
        "simulate": cmd_simulate,
        "selftest": cmd_selftest,
    }
    try:
        return handlers[args.command](config_from_args(args))
    except (ParseError, EmptyPanel) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PortinfError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
