#!/usr/bin/env python3
"""
Padesum CLI Entry Point
=======================

Command-line interface providing the ``padesum`` command.

Subcommands:
    approx   build an exponential sum for a target and write its coefficients
    error    tabulate f, phi and f - phi from a coefficient file as CSV
    sweep    grid search over the segment parameters A and B
    gamma    evaluate the ln Gamma / ln G approximants
    cdf      distribution function of a law from a unit-step sum
    info     list the registered targets

Exit codes: 0 success, 1 usage or domain error, 2 numerical failure.
"""

import argparse
import json
import logging
import sys
import time
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import humanize
import mpmath
import pandas as pd
from mpmath import mp, mpc, mpf
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from . import __version__
from .config import load_config, resolve_jobs, setup_logging, target_x_max
from .errors import DomainError, PadesumError, UnknownTarget
from .expsum import (
    ErrorReport,
    ExpSum,
    Objective,
    SweepResult,
    approximate,
    cdf_from_laplace,
    eval_expsum,
    exponential_laplace,
    gamma_laplace,
    load_expsum,
    save_expsum,
    sweep,
)
from .gammaapp import GammaApproximant, ln_barnesG_hat, ln_gamma_hat
from .polyrat import PrecisionContext
from .schema import ApproxConfig, ConfigModel, RunManifest
from .targets import TARGET_PARAMS, TARGETS, get_target

logger = logging.getLogger(__name__)
console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
CSV_DIGITS = 20


class UsageError(Exception):
    """Bad flags detected after parsing."""


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -----------------------------------------------------------------------------
# Helpers
# -----------------------------------------------------------------------------

def parse_params(items: Optional[Sequence[str]]) -> Dict[str, str]:
    params: Dict[str, str] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--param expects key=value, got '{item}'")
        params[key.strip()] = value.strip()
    return params


def parse_range(text: str) -> List[str]:
    """``lo:hi:step`` (inclusive) or a single value, as decimal strings."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [str(Decimal(parts[0]))]
        if len(parts) != 3:
            raise UsageError(f"range must be lo:hi:step, got '{text}'")
        lo, hi, step = (Decimal(p) for p in parts)
    except InvalidOperation as exc:
        raise UsageError(f"range '{text}' is not decimal") from exc
    if step <= 0:
        raise UsageError(f"range step must be positive in '{text}'")
    if lo > hi:
        raise UsageError(f"empty range '{text}' (lo > hi)")
    values = []
    value = lo
    while value <= hi:
        values.append(str(value))
        value += step
    return values


def parse_complex(text: str) -> mpc:
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return mpc(mpf(parts[0]), 0)
        if len(parts) == 2:
            return mpc(mpf(parts[0]), mpf(parts[1]))
    except ValueError as exc:
        raise UsageError(f"--z expects 're,im', got '{text}'") from exc
    raise UsageError(f"--z expects 're,im', got '{text}'")


def parse_law(text: str) -> Callable[[mpc], mpc]:
    """``exp:RATE`` or ``gamma:SHAPE,RATE``."""
    kind, _, rest = text.partition(":")
    try:
        if kind == "exp":
            return exponential_laplace(rest or "1")
        if kind == "gamma":
            shape, _, rate = rest.partition(",")
            return gamma_laplace(shape, rate or "1")
    except ValueError as exc:
        raise UsageError(f"invalid law '{text}': {exc}") from exc
    raise UsageError(f"--law expects exp:RATE or gamma:SHAPE,RATE, got '{text}'")


def _fmt(value, digits: int = CSV_DIGITS) -> str:
    return mpmath.nstr(value, digits, min_fixed=0, max_fixed=0)


def write_csv(frame: pd.DataFrame, path: Path, manifest: RunManifest) -> None:
    """CSV with the manifest as a leading comment line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(f"# manifest: {manifest.model_dump_json(exclude_none=True)}\n")
        frame.to_csv(f, index=False)


def read_csv_manifest(path: Path) -> Dict[str, Any]:
    with open(path) as f:
        first = f.readline()
    if not first.startswith("# manifest: "):
        raise ValueError(f"{path} has no manifest line")
    return json.loads(first[len("# manifest: "):])


def print_summary(report: ErrorReport) -> None:
    console.print(report.summary(), soft_wrap=True, highlight=False, markup=False)
    for warning in report.warnings:
        err_console.print(f"[yellow]warning:[/yellow] {warning}", highlight=False)


def print_terms(s: ExpSum, limit: int = 40) -> None:
    table = Table(title=f"Exponential sum ({s.M} terms)", show_header=True)
    table.add_column("j", style="cyan", justify="right")
    table.add_column("c_j", style="green")
    table.add_column("lambda_j", style="green")
    for j, (c, lam) in enumerate(s.terms[:limit], start=1):
        table.add_row(str(j), mpmath.nstr(c, 12), mpmath.nstr(lam, 12))
    console.print(table)


def _config_model(cfg: ApproxConfig) -> ConfigModel:
    return ConfigModel(M=cfg.M, n_inf=cfg.n_inf, A=cfg.A, B=cfg.B)


def _digits(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    return args.digits if getattr(args, "digits", None) else int(config["precision"]["digits"])


def _metric_options(config: Dict[str, Any]) -> Dict[str, Any]:
    metrics = config["metrics"]
    return {
        "n_grid": int(metrics["n_grid"]),
        "metrics_digits": int(metrics["digits"]),
        "log_x_min": float(metrics["log_x_min"]),
        "use_symmetry": bool(config["quadrature"]["use_symmetry"]),
    }


# -----------------------------------------------------------------------------
# Commands
# -----------------------------------------------------------------------------

def cmd_approx(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    target = get_target(args.target, parse_params(args.param))
    cfg = ApproxConfig(M=args.M, n_inf=args.ninf, A=args.A, B=args.B, digits=_digits(args, config))
    jobs = resolve_jobs(args.jobs, config)
    x_max = args.xmax if args.xmax is not None else target_x_max(config, target.name, target.x_max)

    started = time.perf_counter()
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=err_console, transient=True) as progress:
        progress.add_task(f"Approximating {target.name} ({cfg.label()})", total=None)
        s, report = approximate(target, cfg, jobs=jobs, x_max=x_max, **_metric_options(config))
    if not args.quiet:
        err_console.print(f"[dim]Finished in {humanize.precisedelta(time.perf_counter() - started)}[/dim]")

    if args.out:
        manifest = RunManifest(
            command="approx",
            target=target.name,
            params=target.param_dict,
            config=_config_model(cfg),
            digits=cfg.digits,
            outputs=[str(args.out)],
        )
        save_expsum(s, args.out, manifest)
        err_console.print(f"[green]Wrote {s.M} terms to {args.out}[/green]")
    elif not args.quiet:
        print_terms(s)
    print_summary(report)
    return EXIT_OK


def cmd_error(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    s = load_expsum(args.coeffs)
    target = get_target(args.target, parse_params(args.param))
    x_max = mpf(args.xmax if args.xmax is not None else target_x_max(config, target.name, target.x_max))
    n = args.n or int(config["metrics"]["n_grid"])
    if n < 2 or x_max <= 0:
        raise UsageError("--n must be >= 2 and --xmax positive")
    f = target.user_function

    with PrecisionContext(int(config["metrics"]["digits"])):
        if args.logx:
            lo = mp.log(mpf(config["metrics"]["log_x_min"]))
            hi = mp.log(x_max)
            xs = [mp.exp(lo + (hi - lo) * i / (n - 1)) for i in range(n)]
        else:
            xs = [x_max * i / n for i in range(n + 1)]
        rows = []
        worst = mpf(0)
        for x in xs:
            fx = f(x)
            phi = eval_expsum(s, x)
            err = fx - phi
            worst = max(worst, abs(err))
            row = {"x": _fmt(x), "f": _fmt(fx), "phi": _fmt(phi), "err": _fmt(err)}
            if args.logx:
                row["ln_x"] = _fmt(mp.log(x))
            rows.append(row)

    columns = ["x", "f", "phi", "err"] + (["ln_x"] if args.logx else [])
    frame = pd.DataFrame(rows, columns=columns)
    manifest = RunManifest(
        command="error",
        target=target.name,
        params=target.param_dict,
        config=_config_model(s.config) if s.config else None,
        digits=s.digits,
        inputs=[str(args.coeffs)],
        outputs=[str(args.out)],
    )
    write_csv(frame, Path(args.out), manifest)
    console.print(f"max|err|={mpmath.nstr(worst, 6)} points={len(xs)}", soft_wrap=True, highlight=False)
    return EXIT_OK


def sweep_table(result: SweepResult) -> pd.DataFrame:
    records = [
        {
            "A": row.A,
            "B": row.B,
            "L1": mpmath.nstr(row.l1, 4) if row.l1 is not None else "",
            "Linf": mpmath.nstr(row.linf, 4) if row.linf is not None else "",
            "max|c|": mpmath.nstr(row.max_abs_c, 4) if row.max_abs_c is not None else "",
            "status": row.status,
        }
        for row in result.rows
    ]
    return pd.DataFrame(records, columns=["A", "B", "L1", "Linf", "max|c|", "status"])


def cmd_sweep(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    target = get_target(args.target, parse_params(args.param))
    a_grid = parse_range(args.A)
    b_grid = parse_range(args.B)
    try:
        objective = Objective.parse(args.objective)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    digits = _digits(args, config)
    # Bad M, n_inf or digits is a usage error; bad grid points become failed rows.
    ApproxConfig(M=args.M, n_inf=args.ninf, A="0", B="1", digits=digits)
    x_max = args.xmax if args.xmax is not None else target_x_max(config, target.name, target.x_max)

    started = time.perf_counter()
    with Progress(SpinnerColumn(), TextColumn("[progress.description]{task.description}"), console=err_console, transient=True) as progress:
        progress.add_task(f"Sweeping {len(a_grid) * len(b_grid)} configurations", total=None)
        result = sweep(
            target,
            args.M,
            args.ninf,
            a_grid,
            b_grid,
            objective,
            digits=digits,
            jobs=resolve_jobs(args.jobs, config),
            x_max=x_max,
            **_metric_options(config),
        )
    if not args.quiet:
        err_console.print(f"[dim]Sweep finished in {humanize.precisedelta(time.perf_counter() - started)}[/dim]")

    frame = sweep_table(result)
    table = Table(title=f"Sweep: {target.name} M={args.M} n_inf={args.ninf}", show_header=True)
    for column in frame.columns:
        table.add_column(column, style="cyan" if column in ("A", "B") else None)
    for record in frame.itertuples(index=False):
        table.add_row(*[str(v) for v in record])
    console.print(table)
    console.print(f"winner: A={result.config.A} B={result.config.B}", soft_wrap=True, highlight=False)
    print_summary(result.report)

    manifest = RunManifest(
        command="sweep",
        target=target.name,
        params=target.param_dict,
        config=_config_model(result.config),
        digits=digits,
        outputs=[str(p) for p in (args.out, args.table) if p],
    )
    if args.table:
        write_csv(frame, Path(args.table), manifest)
    if args.out:
        save_expsum(result.expsum, args.out, manifest)
    return EXIT_OK


def cmd_gamma(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    z = parse_complex(args.z)
    if z.real < mpf(3) / 2:
        raise DomainError(f"Re z must be >= 3/2, got {args.z}")
    s = load_expsum(args.coeffs)
    with PrecisionContext(max(s.digits, args.digits + 10)):
        g = GammaApproximant.from_expsum(s, estimate_bounds=args.bounds, x_max=float(config["gamma"]["x_max"]))
        fn = ln_gamma_hat if args.fn == "lngamma" else ln_barnesG_hat
        value = fn(g, z)
        text = mpmath.nstr(value.real, args.digits) if value.imag == 0 else mpmath.nstr(value, args.digits)
    console.print(text, soft_wrap=True, highlight=False)
    if args.bounds:
        console.print(f"eps1={mpmath.nstr(g.eps1, 4)} eps2={mpmath.nstr(g.eps2, 4)}", soft_wrap=True, highlight=False)
    return EXIT_OK


def cmd_cdf(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    s = load_expsum(args.coeffs)
    law = parse_law(args.law)
    with PrecisionContext(s.digits):
        for u in args.u:
            diagnostics: Dict[str, mpf] = {}
            value = cdf_from_laplace(s, law, mpf(u), diagnostics)
            console.print(
                f"u={u} P={mpmath.nstr(value, 15)} raw={mpmath.nstr(diagnostics['raw'], 15)}",
                soft_wrap=True,
                highlight=False,
            )
    return EXIT_OK


def cmd_info(args: argparse.Namespace, config: Dict[str, Any]) -> int:
    table = Table(title=f"Padesum {__version__} targets", show_header=True)
    table.add_column("Target", style="cyan", no_wrap=True)
    table.add_column("x_max", style="green")
    table.add_column("Transform")
    table.add_column("Parameters")
    for name in sorted(TARGETS):
        spec = get_target(name)
        params = ", ".join(f"{k}={v}" for k, v in TARGET_PARAMS.get(name, {}).items())
        table.add_row(name, str(target_x_max(config, name, spec.x_max)), spec.post_transform.value, params or "-")
    console.print(table)
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Dict[str, Any]], int]] = {
    "approx": cmd_approx,
    "error": cmd_error,
    "sweep": cmd_sweep,
    "gamma": cmd_gamma,
    "cdf": cmd_cdf,
    "info": cmd_info,
}


# -----------------------------------------------------------------------------
# Parser
# -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="Path to configuration file")
    common.add_argument("--jobs", type=int, default=None, help="Worker processes (0 = physical cores)")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="Minimal output")

    target_opts = argparse.ArgumentParser(add_help=False)
    target_opts.add_argument("--target", required=True, help="Target name (see 'padesum info')")
    target_opts.add_argument("--param", action="append", metavar="KEY=VALUE", help="Target parameter (repeatable)")
    target_opts.add_argument("--xmax", type=float, default=None, help="Error-grid truncation")

    parser = _Parser(
        prog="padesum",
        description="Padesum - exponential-sum approximation via multi-point Pade",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("approx", parents=[common, target_opts], help="Build an exponential sum")
    p.add_argument("--M", type=int, required=True, help="Number of terms")
    p.add_argument("--ninf", type=int, required=True, help="Coefficients matched at infinity")
    p.add_argument("--A", type=str, required=True, help="Real offset of the point segment")
    p.add_argument("--B", type=str, required=True, help="Imaginary half-height of the segment")
    p.add_argument("--digits", type=int, default=None, help="Working precision (default: EXPSUM_DIGITS or 100)")
    p.add_argument("--out", type=str, default=None, help="Coefficient JSON file")

    p = sub.add_parser("error", parents=[common, target_opts], help="Tabulate the error curve as CSV")
    p.add_argument("--coeffs", required=True, help="Coefficient JSON file")
    p.add_argument("--n", type=int, default=None, help="Number of grid intervals")
    p.add_argument("--out", required=True, help="CSV output file")
    p.add_argument("--logx", action="store_true", help="Logarithmic grid with an ln(x) column")

    p = sub.add_parser("sweep", parents=[common, target_opts], help="Grid search over A and B")
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--ninf", type=int, required=True)
    p.add_argument("--A", required=True, help="lo:hi:step")
    p.add_argument("--B", required=True, help="lo:hi:step")
    p.add_argument("--objective", default="l1", help="l1, linf or maxc:BOUND")
    p.add_argument("--digits", type=int, default=None)
    p.add_argument("--out", default=None, help="Winner coefficient JSON file")
    p.add_argument("--table", default=None, help="Sweep table CSV file")

    p = sub.add_parser("gamma", parents=[common], help="Evaluate ln Gamma / ln G approximants")
    p.add_argument("--coeffs", required=True, help="Gamma-kernel coefficient JSON file")
    p.add_argument("--fn", choices=["lngamma", "lnbarnesg"], default="lngamma")
    p.add_argument("--z", required=True, help="'re,im' with re >= 3/2")
    p.add_argument("--digits", type=int, default=20, help="Significant digits printed")
    p.add_argument("--bounds", action="store_true", help="Also estimate eps1 and eps2")

    p = sub.add_parser("cdf", parents=[common], help="Distribution function from a unit-step sum")
    p.add_argument("--coeffs", required=True, help="Unit-step coefficient JSON file")
    p.add_argument("--law", required=True, help="exp:RATE or gamma:SHAPE,RATE")
    p.add_argument("--u", required=True, nargs="+", help="Evaluation points (> 0)")

    sub.add_parser("info", parents=[common], help="List registered targets")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point for Padesum."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        err_console.print(f"[red]Configuration error: {exc}[/red]")
        return EXIT_USAGE
    if args.verbose:
        config["logging"]["level"] = "DEBUG"
    elif args.quiet:
        config["logging"]["level"] = "WARNING"
    setup_logging(config)

    try:
        return COMMANDS[args.command](args, config)
    except (UsageError, UnknownTarget, DomainError, ValidationError) as exc:
        err_console.print(f"[red]error:[/red] {exc}", highlight=False)
        return EXIT_USAGE
    except PadesumError as exc:
        err_console.print(Panel.fit(str(exc), title="Numerical failure", border_style="red"))
        return EXIT_NUMERIC
    except ValueError as exc:
        err_console.print(f"[red]error:[/red] {exc}", highlight=False)
        return EXIT_USAGE
    except KeyboardInterrupt:
        err_console.print("\nAborted.")
        return 130


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
