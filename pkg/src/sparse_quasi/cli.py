"""Command-line entry point: ``sparse-quasi <subcommand> ...``.

Exit codes: 0 success, 2 usage, 3 data, 4 oracle failure, 5 output not writable.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

from ._parallel import default_threads
from .errors import DataError, DimensionError, OracleFailure, RegistryError
from .kernel import KernelSpec
from .multiindex_grid import grid_table
from .multilevel import format_number
from .quadrature import export_rule
from .testbed import (
    BenchParams,
    benchmark_csv,
    benchmark_json,
    corpus,
    get_function,
    oracle_estimate,
    run_benchmark,
    run_metadata,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ORACLE, EXIT_OUTPUT = 0, 2, 3, 4, 5

# defaults < JSON config file < flags
DEFAULTS = {
    "method": "qmusik",
    "function": "P2d",
    "d": None,
    "n0": 1,
    "levels": 1,
    "rho": 0.4,
    "truncation": 0.0,
    "convention": "density",
    "eval_grid": None,
    "output": None,
    "format": "csv",
    "threads": None,
}

F4D_FLAG_TOL = 1e-7


class UsageError(Exception):
    pass


class OutputError(Exception):
    pass


@dataclass
class RunConfig:
    method: str
    function: str
    d: int | None
    n0: int
    levels: int
    rho: float
    truncation: float
    convention: str
    eval_grid: int | None
    output: str | None
    format: str
    threads: int

    def validate(self):
        if self.rho <= 0:
            raise UsageError("--rho must be positive")
        if self.levels < 0:
            raise UsageError("--levels must be >= 0")
        if self.n0 < 1:
            raise UsageError("--n0 must be >= 1")
        if self.threads < 1:
            raise UsageError("--threads must be >= 1")
        if self.eval_grid is not None and self.eval_grid < 2:
            raise UsageError("--eval-grid must be >= 2")
        if self.format not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        if self.truncation < 0:
            raise UsageError("--truncation must be >= 0")

    def spec(self) -> KernelSpec:
        return KernelSpec(rho=self.rho, truncation_threshold=self.truncation, convention=self.convention)

    def params(self) -> BenchParams:
        return BenchParams(
            n0=self.n0, levels=self.levels, spec=self.spec(),
            eval_grid=self.eval_grid, threads=self.threads,
        )


def _run_options(p: argparse.ArgumentParser, methods):
    # every default is None so that unset flags fall through to the config file
    p.add_argument("--config", help="JSON file with option values (flags override)")
    p.add_argument("--method", choices=methods, default=None)
    p.add_argument("--function", default=None, help="test function name, e.g. P2d")
    p.add_argument("--d", type=int, default=None, help="dimension (must match the function)")
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--levels", type=int, default=None, help="number of grid levels in the sweep")
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("--truncation", type=float, default=None, help="squared-exponent cutoff, 0 = exact")
    p.add_argument("--convention", choices=("density", "divisor"), default=None)
    p.add_argument("--eval-grid", dest="eval_grid", type=int, default=None)
    p.add_argument("--output", default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparse-quasi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grid-info", help="sparse grid sizes and nodes visited per level")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--output", default=None)

    i = sub.add_parser("interp", help="interpolation error sweep")
    _run_options(i, ("quasi", "ml_quasi", "qsik", "qmusik"))

    q = sub.add_parser("quad", help="quadrature error sweep")
    _run_options(q, ("quasi", "ml_quasi", "qsik", "qmusik", "quasi_quad", "ml_quasi_quad", "qsik_quad", "qmusik_quad"))

    e = sub.add_parser("export-rule", help="sparse quadrature nodes and signed weights")
    e.add_argument("--d", type=int, required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--rho", type=float, default=0.4)
    e.add_argument("--convention", choices=("density", "divisor"), default="density")
    e.add_argument("--output", default=None)

    o = sub.add_parser("oracle", help="reference integrals of the test functions")
    o.add_argument("--function", default=None, help="one function (default: whole corpus)")
    o.add_argument("--tol", type=float, default=1e-12)
    o.add_argument("--output", default=None)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = dict(DEFAULTS)
    values["threads"] = default_threads()
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for key in DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    try:
        cfg = RunConfig(
            method=str(values["method"]),
            function=str(values["function"]),
            d=None if values["d"] is None else int(values["d"]),
            n0=int(values["n0"]),
            levels=int(values["levels"]),
            rho=float(values["rho"]),
            truncation=float(values["truncation"]),
            convention=str(values["convention"]),
            eval_grid=None if values["eval_grid"] is None else int(values["eval_grid"]),
            output=values["output"],
            format=str(values["format"]),
            threads=int(values["threads"]),
        )
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad option value: {exc}") from exc
    cfg.validate()
    return cfg


def _emit(text: str, output: str | None):
    if output is None or output == "-":
        sys.stdout.write(text)
        return
    try:
        with open(output, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {output}: {exc}") from exc


def cmd_grid_info(args) -> str:
    if args.d < 2:
        raise UsageError("grid-info needs --d >= 2")
    if args.n < 1:
        raise UsageError("grid-info needs --n >= 1")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "sgs", "novs"])
    w.writerows(grid_table(args.n, args.d))
    return buf.getvalue()


def _run(cfg: RunConfig, method: str) -> str:
    f = get_function(cfg.function)
    if cfg.d is not None and cfg.d != f.dimension:
        raise DimensionError(f"{f.name} is {f.dimension}-dimensional, --d {cfg.d} given")
    params = cfg.params()
    rows = run_benchmark(method, f, params)
    if cfg.format == "json":
        return benchmark_json(rows, run_metadata(params, f.dimension, method)) + "\n"
    return benchmark_csv(rows)


def cmd_interp(cfg: RunConfig) -> str:
    return _run(cfg, cfg.method)


def cmd_quad(cfg: RunConfig) -> str:
    method = cfg.method if cfg.method.endswith("_quad") else cfg.method + "_quad"
    return _run(cfg, method)


def cmd_export_rule(args) -> str:
    if args.d < 2 or args.n < 1:
        raise UsageError("export-rule needs --d >= 2 and --n >= 1")
    if args.rho <= 0:
        raise UsageError("--rho must be positive")
    rule = export_rule(args.n, args.d, KernelSpec(rho=args.rho, convention=args.convention))
    points, weights = rule.materialize()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x_{p + 1}" for p in range(args.d)] + ["weight"])
    for x, wt in zip(points, weights):
        w.writerow([format_number(v) for v in x] + [format_number(wt)])
    return buf.getvalue()


def reference_resolution(value: float) -> float:
    """Half a unit in the last printed decimal of a reference constant."""
    text = repr(float(value))
    if "e" in text or "." not in text:
        return 0.0
    return 0.5 * 10.0 ** -len(text.split(".")[1])


def cmd_oracle(args) -> str:
    if args.tol <= 0:
        raise UsageError("--tol must be positive")
    funcs = [get_function(args.function)] if args.function else corpus()
    if args.function is None or args.function == "F4d":
        funcs.append(get_function("F4d_x4"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["function", "dimension", "value", "error_estimate", "reference", "difference", "status"])
    reference_f4d = get_function("F4d").exact_integral
    for f in funcs:
        est = oracle_estimate(f, args.tol)
        reference = f.exact_integral
        if f.name == "F4d_x4":
            reference = reference_f4d
        diff = None if reference is None else est.value - reference
        if diff is None:
            status = ""
        elif f.name.startswith("F4d"):
            status = "match" if abs(diff) <= F4D_FLAG_TOL else "flag"
        else:
            status = "match" if abs(diff) <= max(args.tol, reference_resolution(reference)) else "differs"
        w.writerow([
            f.name, f.dimension, format_number(est.value), format_number(est.error),
            format_number(reference), format_number(diff), status,
        ])
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "grid-info":
            _emit(cmd_grid_info(args), args.output)
        elif args.command == "export-rule":
            _emit(cmd_export_rule(args), args.output)
        elif args.command == "oracle":
            _emit(cmd_oracle(args), args.output)
        else:
            cfg = resolve_config(args)
            text = cmd_interp(cfg) if args.command == "interp" else cmd_quad(cfg)
            _emit(text, cfg.output)
    except (UsageError, RegistryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
