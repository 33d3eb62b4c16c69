"""Command-line front end.

Subcommands ``fit``, ``select``, ``simulate``, ``bench`` and ``factors``.
Reports are JSON; tables are CSV unless ``--format json`` is given.  Every
report carries a ``provenance`` block.  Errors are printed to stderr as a
JSON object and mapped to exit codes: 2 configuration, 3 data,
4 numerical failure, 5 non-convergence (artifacts are still written).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import METHODS, ScenarioSpec, run_benchmark, worker_count
from .errors import ConvergenceWarning, DataError, InvalidArgumentError, SilfsError
from .factor_model import Dataset, default_r_star, gram_eigenvalues, select_num_factors
from .objective import SolverConfig
from .pipeline import SOLVERS, fit_solver, prepare, residual_scale
from .selection import PROBE_LAMBDA1, PROBE_LAMBDA2_FRACTION, select_model

__all__ = ["ingest_csv", "write_dataset_csv", "build_parser", "run", "main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_NOT_CONVERGED = 5

BENCH_COLUMNS = ["method", "RMSE_alpha", "RMSE_beta", "K_hat_mean", "Freq", "RI",
                 "Sensitivity", "Specificity", "failures"]


# ---------------------------------------------------------------- data io

def ingest_csv(path) -> Dataset:
    """Read a numeric CSV whose header starts with ``y``; other columns form X.

    Raises
    ------
    DataError
        On a missing file, missing ``y`` column, ragged row or a cell that
        is not a finite number.  Rows are counted as file lines (the header
        is row 1).
    """
    path = Path(path)
    try:
        handle = path.open(newline="")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        if header[0] != "y":
            raise DataError(f"{path}: first column must be named 'y', got {header[0]!r}")
        if len(header) < 2:
            raise DataError(f"{path}: no covariate columns after 'y'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, "
                                f"expected {len(header)}")
            values = []
            for col, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: cannot parse {cell!r} at row {lineno}, "
                                    f"col {col!r}") from None
                if not np.isfinite(v):
                    raise DataError(f"{path}: non-finite value {cell.strip()!r} at row "
                                    f"{lineno}, col {col!r}")
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    M = np.asarray(rows, dtype=float)
    return Dataset(M[:, 0].copy(), M[:, 1:].copy())


def _fmt(v):
    return repr(float(v))


def write_dataset_csv(path, dataset: Dataset):
    """Write ``y, x1..xp`` with round-trip exact float formatting."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y"] + [f"x{j + 1}" for j in range(dataset.p)])
        for yi, xi in zip(dataset.response, dataset.design):
            w.writerow([_fmt(yi)] + [_fmt(v) for v in xi])


def _write_json(path, obj):
    with Path(path).open("w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_table(path_stem, columns, rows, fmt):
    """Write ``rows`` (list of dicts) as ``<stem>.csv`` or ``<stem>.json``."""
    if fmt == "json":
        path = path_stem.with_suffix(".json")
        _write_json(path, [{c: r[c] for c in columns} for r in rows])
        return path
    path = path_stem.with_suffix(".csv")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if isinstance(r[c], (float, np.floating)) else r[c]
                        for c in columns])
    return path


# ----------------------------------------------------------- provenance

def _file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _provenance(args, extra=None):
    import numba
    import scipy

    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    block = {
        "tool": "silfs",
        "version": __version__,
        "command": args.command,
        "config": config,
        "seed": getattr(args, "seed", None),
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__, "numba": numba.__version__},
    }
    if getattr(args, "input", None):
        block["input_sha256"] = _file_digest(args.input)
    if extra:
        block.update(extra)
    return block


# --------------------------------------------------------------- parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidArgumentError(message)


def _int_list(text):
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text):
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def parse_scenario(text) -> ScenarioSpec:
    """``NAME[:key=value,...]``, e.g. ``A:a=3,n=100,p=50`` or ``toy:rho=0.9``."""
    name, _, rest = text.partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise InvalidArgumentError(f"scenario parameter {item!r} is not key=value")
        key = key.strip()
        if key in ("n", "p", "r", "s"):
            params[key] = int(value)
        elif key == "literal_phi":
            params[key] = value.strip().lower() in ("1", "true", "yes")
        else:
            params[key] = float(value)
    if name.upper() not in ("A", "B") and name.lower() not in ("collinearity", "toy"):
        raise InvalidArgumentError(f"unknown scenario {name!r}")
    return ScenarioSpec(name, params)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="silfs", description="Subgroup identification with latent factors.")
    parser.add_argument("--version", action="version", version=f"silfs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", required=True, help="CSV with header; first column 'y'")
        p.add_argument("--output", required=True, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="format of tabular artifacts (reports are always JSON)")

    def factor_opts(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--r", type=int, help="number of factors (0 skips the factor step)")
        g.add_argument("--r-auto", action="store_true", help="eigenvalue-ratio choice (default)")

    p = sub.add_parser("fit", help="fit at fixed K and penalty levels")
    common(p)
    factor_opts(p)
    p.add_argument("--solver", choices=sorted(SOLVERS), default="l2-ccd")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda1", type=float, default=PROBE_LAMBDA1)
    p.add_argument("--lambda2", type=float, default=None,
                   help=f"default {PROBE_LAMBDA2_FRACTION} * lambda_max")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("select", help="choose K by BIC and penalties by GCV")
    common(p)
    factor_opts(p)
    p.add_argument("--solver", choices=sorted(SOLVERS), default="l2-ccd")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--k-grid", type=_int_list, default=None, help="e.g. 1,2,3,4,5")
    g.add_argument("--k", type=int, default=None, help="fix K and only select penalties")
    p.add_argument("--lambda1", type=_float_list, default=None, help="lambda1 grid")
    p.add_argument("--lambda2", type=_float_list, default=None, help="lambda2 grid")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("simulate", help="write synthetic datasets")
    common(p, needs_input=False)
    p.add_argument("--scenario", required=True, help="NAME[:key=value,...]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bench", help="multi-replication benchmark")
    common(p, needs_input=False)
    factor_opts(p)
    p.add_argument("--scenario", required=True, help="NAME[:key=value,...]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--methods", default="SILFS-l2",
                   help=f"comma-separated subset of {','.join(METHODS)}")
    p.add_argument("--k-grid", type=_int_list, default=[1, 2, 3, 4, 5])
    p.add_argument("--lambda1", type=_float_list, default=None, help="lambda1 grid")
    p.add_argument("--lambda2", type=_float_list, default=None, help="lambda2 grid")
    p.add_argument("--timing", action="store_true",
                   help="add wall-clock columns (makes output run-dependent)")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("factors", help="number of factors and eigenvalue spectrum")
    common(p)
    factor_opts(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_factors)
    return parser


def _r_choice(args):
    return "auto" if getattr(args, "r", None) is None else args.r


def _output_dir(args):
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InvalidArgumentError(f"cannot create output directory {out}: {exc.strerror}")
    return out


# --------------------------------------------------------------- commands

def _fit_payload(fit):
    return {
        "solver": fit.solver,
        "K": fit.K,
        "alpha_hat": fit.alpha_hat,
        "gamma_hat": fit.gamma_hat,
        "theta_hat": fit.theta_hat,
        "beta_hat": fit.beta_hat,
        "labels": fit.labels,
        "objective_trace": fit.objective_trace,
        "converged": bool(fit.converged),
        "outer_iters": int(fit.outer_iters),
        "total_inner_iters": int(fit.total_inner_iters),
        "config": fit.config.to_dict() if fit.config is not None else None,
    }


def _write_labels(out, fit, fmt):
    rows = [{"subject": i + 1, "label": int(l)} for i, l in enumerate(fit.labels)]
    return _write_table(out / "labels", ["subject", "label"], rows, fmt)


def _cmd_fit(args):
    data = ingest_csv(args.input)
    out = _output_dir(args)
    prepared = prepare(data, r=_r_choice(args))
    lam2 = (PROBE_LAMBDA2_FRACTION * residual_scale(prepared) if args.lambda2 is None
            else args.lambda2)
    config = SolverConfig(lambda1=args.lambda1, lambda2=lam2)
    fit = fit_solver(prepared, args.k, config, args.solver)
    report = {
        "provenance": _provenance(args, {"n": data.n, "p": data.p,
                                         "r": prepared.decomposition.num_factors,
                                         "lambda_star": prepared.ridge.lambda_star}),
        "fit": _fit_payload(fit),
    }
    _write_json(out / "fit.json", report)
    _write_labels(out, fit, args.format)
    return EXIT_OK if fit.converged else EXIT_NOT_CONVERGED


def _cmd_select(args):
    data = ingest_csv(args.input)
    out = _output_dir(args)
    prepared = prepare(data, r=_r_choice(args))
    k_grid = [args.k] if args.k is not None else (args.k_grid or [1, 2, 3, 4, 5])
    report = select_model(prepared, k_grid, args.lambda1, args.lambda2,
                          solver=args.solver, workers=worker_count())
    payload = {
        "provenance": _provenance(args, {"n": data.n, "p": data.p,
                                         "r": prepared.decomposition.num_factors,
                                         "lambda_star": prepared.ridge.lambda_star}),
        "selection": report.to_dict(),
        "fit": _fit_payload(report.fit),
    }
    _write_json(out / "selection.json", payload)
    _write_labels(out, report.fit, args.format)
    return EXIT_OK if report.fit.converged else EXIT_NOT_CONVERGED


def _cmd_simulate(args):
    if args.reps < 1:
        raise InvalidArgumentError("--reps must be at least 1")
    scenario = parse_scenario(args.scenario)
    out = _output_dir(args)
    manifest = []
    for i in range(args.reps):
        seed = args.seed + i
        truth = scenario.draw(seed)
        stem = f"dataset_seed{seed}"
        write_dataset_csv(out / f"{stem}.csv", truth.dataset)
        _write_json(out / f"{stem}_truth.json", {
            "generator_tag": truth.generator_tag, "seed": seed,
            "true_alpha": truth.true_alpha, "true_beta": truth.true_beta,
            "true_labels": truth.true_labels, "true_factors": truth.true_factors,
        })
        manifest.append({"seed": seed, "data": f"{stem}.csv", "truth": f"{stem}_truth.json",
                         "generator_tag": truth.generator_tag})
    _write_json(out / "simulate.json", {"provenance": _provenance(args, {
        "scenario": scenario.to_dict()}), "datasets": manifest})
    return EXIT_OK


def _cmd_bench(args):
    scenario = parse_scenario(args.scenario)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    out = _output_dir(args)
    result = run_benchmark(scenario, args.reps, methods, seed0=args.seed,
                           k_grid=args.k_grid, r=_r_choice(args),
                           lambda1_grid=args.lambda1, lambda2_grid=args.lambda2,
                           workers=worker_count())
    columns = list(BENCH_COLUMNS) + (["wall_time_ms"] if args.timing else [])
    rows = []
    for rep in result.rows():
        d = rep.to_dict()
        rows.append({"method": rep.method, "RMSE_alpha": d["rmse_alpha"],
                     "RMSE_beta": d["rmse_beta"], "K_hat_mean": d["k_hat_mean"],
                     "Freq": rep.freq, "RI": d["rand_index"],
                     "Sensitivity": d["sensitivity"], "Specificity": d["specificity"],
                     "failures": rep.failures, "wall_time_ms": d["wall_time_ms"]})
    _write_table(out / "bench", columns, rows, args.format)
    reps = []
    for x in result.replications:
        d = x.to_dict()
        if not args.timing:
            d.pop("wall_time_ms")
        reps.append(d)
    summary = [{c: r[c] for c in columns} for r in rows]
    _write_json(out / "bench_report.json", {
        "provenance": _provenance(args, {"scenario": scenario.to_dict(),
                                         "seeds": [args.seed, args.seed + args.reps - 1]}),
        "summary": summary, "replications": reps})
    return EXIT_OK


def _cmd_factors(args):
    data = ingest_csv(args.input)
    out = _output_dir(args)
    eig = gram_eigenvalues(data)
    r_hat = select_num_factors(data) if args.r is None else args.r
    share = eig / eig.sum() if eig.sum() > 0 else np.zeros_like(eig)
    rows = [{"component": i + 1, "eigenvalue": float(e), "explained_variance": float(s),
             "cumulative": float(c)}
            for i, (e, s, c) in enumerate(zip(eig, share, np.cumsum(share)))]
    _write_table(out / "eigenvalues", ["component", "eigenvalue", "explained_variance",
                                       "cumulative"], rows, args.format)
    _write_json(out / "factors.json", {
        "provenance": _provenance(args, {"n": data.n, "p": data.p,
                                         "r_star": default_r_star(data.n, data.p)}),
        "r_hat": int(r_hat), "eigenvalues": eig, "explained_variance": share,
    })
    return EXIT_OK


# ------------------------------------------------------------------ entry

def _error_json(exc, code):
    return json.dumps({"error": {"type": type(exc).__name__, "message": str(exc),
                                 "exit_code": code}}, sort_keys=True)


def run(argv=None) -> int:
    """Parse ``argv``, execute the command and return the exit status."""
    try:
        args = build_parser().parse_args(argv)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            return args.func(args)
    except SilfsError as exc:
        code = exc.exit_code if exc.exit_code in (EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC) \
            else EXIT_NUMERIC
        print(_error_json(exc, code), file=sys.stderr)
        return code
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(_error_json(exc, EXIT_NUMERIC), file=sys.stderr)
        return EXIT_NUMERIC


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
