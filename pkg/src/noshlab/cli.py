"""Command-line interface: ``noshlab <command> ...``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Sequence

from . import __version__
from .dgp import BUILTIN_IDS, analytic_ace, classify, resolve_scenario, scoring_ace
from .errors import InputError, NoshLabError, NumericalError, SingularityError
from .ivest import IvKind, IvSpec, estimate, wald_from_summary
from .mc import McConfig, run_grid
from .numkit import Dataset

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
SUMMARY_COLUMNS = (
    "scenario", "n", "spec", "ace", "median_bias", "median_se",
    "coverage", "rejection_rate", "reps_used", "reps_failed",
)
REPS_COLUMNS = ("scenario", "n", "spec", "rep", "seed", "point", "se", "ci_low", "ci_high")
MIN_TABLE_REPS = 500


@dataclass
class OutputTable:
    """Rectangular table of cells rendered as csv, tsv or aligned text.

    Floats are written with ``digits`` significant digits; ``digits=None``
    writes the shortest round-tripping representation.
    """

    headers: Sequence[str]
    rows: list[list] = field(default_factory=list)
    digits: int | None = 6

    def __post_init__(self):
        self.headers = list(self.headers)
        for row in self.rows:
            self._check(row)

    def _check(self, row) -> None:
        if len(row) != len(self.headers):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.headers)} columns")

    def append(self, row: Sequence) -> None:
        row = list(row)
        self._check(row)
        self.rows.append(row)

    def cell(self, value) -> str:
        if isinstance(value, bool):
            return "true" if value else "false"
        if isinstance(value, float):
            if math.isnan(value):
                return "nan"
            return repr(float(value)) if self.digits is None else f"{value:.{self.digits}g}"
        if isinstance(value, IvKind):
            return value.value
        return str(value)

    def render(self, fmt: str = "csv") -> str:
        body = [[self.cell(v) for v in row] for row in self.rows]
        if fmt in ("csv", "tsv"):
            buf = io.StringIO()
            w = csv.writer(buf, delimiter="," if fmt == "csv" else "\t", lineterminator="\n")
            w.writerow(self.headers)
            w.writerows(body)
            return buf.getvalue()
        if fmt == "pretty":
            widths = [max([len(h)] + [len(r[j]) for r in body]) for j, h in enumerate(self.headers)]
            lines = ["  ".join(h.ljust(wd) for h, wd in zip(self.headers, widths)).rstrip()]
            lines.append("  ".join("-" * wd for wd in widths))
            numeric = [
                all(isinstance(row[j], (int, float)) and not isinstance(row[j], bool) for row in self.rows)
                for j in range(len(self.headers))
            ]
            for r in body:
                cells = [c.rjust(wd) if num else c.ljust(wd) for c, wd, num in zip(r, widths, numeric)]
                lines.append("  ".join(cells).rstrip())
            return "\n".join(lines) + "\n"
        raise ValueError(f"unknown format {fmt!r}")


def _emit(table: OutputTable, args) -> None:
    sys.stdout.write(table.render(args.format))


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def display_number(value: float, decimals: int = 2) -> str:
    """Round to ``decimals`` places and drop trailing zeros (``-1920.00`` -> ``-1920``)."""
    s = f"{value:.{decimals}f}"
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


# -- scenario -------------------------------------------------------------


def cmd_scenario(args) -> int:
    if args.action == "list":
        table = OutputTable(["id", "ace", "analytic_ace", "error_dist", "description"], digits=args.digits)
        for i in BUILTIN_IDS:
            cfg = resolve_scenario(i)
            table.append([i, scoring_ace(cfg), analytic_ace(cfg), cfg.error_dist.value, cfg.description])
        _emit(table, args)
        return EXIT_OK
    if args.ref is None:
        raise InputError(f"'scenario {args.action}' needs a scenario id or JSON path")
    cfg = resolve_scenario(args.ref)
    if args.action == "show":
        print(cfg.to_json())
        return EXIT_OK
    report = classify(cfg).as_dict()
    table = OutputTable(["assumption", "holds"], [[k, v] for k, v in report.items()])
    _emit(table, args)
    return EXIT_OK


# -- estimate -------------------------------------------------------------


def cmd_estimate(args) -> int:
    data = Dataset.read_csv(args.data)
    mods = None
    if args.u6 is not None or args.v6 is not None:
        if args.u6 is None or args.v6 is None:
            raise InputError("--u6 and --v6 must be given together")
        mods = (args.u6, args.v6)
    spec = IvSpec(args.spec, instrument=args.z, treatment=args.x, outcome=args.y, modifiers=mods)
    est = estimate(data, spec)
    table = OutputTable(["spec", "n", "point", "se", "ci_low", "ci_high"], digits=args.digits)
    table.append([spec.kind, data.n, est.point, est.se, est.ci_low, est.ci_high])
    _emit(table, args)
    return EXIT_OK


# -- wald-summary ---------------------------------------------------------


def cmd_wald_summary(args) -> int:
    point, (lo, hi) = wald_from_summary(args.itt, args.itt_ci, args.first_stage)
    d = args.decimals
    shown = f"{display_number(point, d)} ({display_number(lo, d)}, {display_number(hi, d)})"
    table = OutputTable(["point", "ci_low", "ci_high", "display"], [[point, lo, hi, shown]], digits=args.digits)
    _emit(table, args)
    return EXIT_OK


# -- simulate -------------------------------------------------------------


def _write_lines(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def summary_table(summaries) -> OutputTable:
    table = OutputTable(SUMMARY_COLUMNS, digits=None)
    for s in summaries:
        table.append([
            s.scenario, s.n, s.spec, s.ace, s.median_bias, s.median_se,
            s.coverage, s.rejection_rate, s.reps_used, s.reps_failed,
        ])
    return table


def _provenance(seed: int, reps: int) -> str:
    return f"# master_seed={seed} reps={reps} version={__version__}\n"


def _workers(args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("NOSH_LAB_WORKERS")
    if env is None or env == "":
        return 1
    try:
        return int(env)
    except ValueError:
        raise InputError(f"NOSH_LAB_WORKERS must be an integer, got {env!r}") from None


def cmd_simulate(args) -> int:
    config = McConfig(
        scenarios=[resolve_scenario(r) for r in args.scenario],
        sample_sizes=args.n,
        specs=args.spec,
        reps=args.reps,
        master_seed=args.seed,
        workers=_workers(args),
    )
    summaries, draws = run_grid(config, keep_reps=True)
    _write_lines(args.out, summary_table(summaries).render("csv") + _provenance(args.seed, args.reps))
    if args.keep_reps:
        reps = OutputTable(REPS_COLUMNS, digits=None)
        for s, d in zip(summaries, draws):
            for i in range(d.points.size):
                reps.append([
                    s.scenario, s.n, s.spec, i, int(d.seeds[i]),
                    float(d.points[i]), float(d.ses[i]), float(d.ci_low[i]), float(d.ci_high[i]),
                ])
        _write_lines(args.keep_reps, reps.render("csv"))
    for s in summaries:
        if s.unreliable:
            _warn(
                f"scenario {s.scenario}, n={s.n}, spec {s.spec.value}: "
                f"{s.reps_failed} of {s.reps} replications failed; cell is unreliable"
            )
    shown = summary_table(summaries)
    shown.digits = args.digits
    _emit(shown, args)
    return EXIT_OK


# -- reproduce-table ------------------------------------------------------


def cmd_reproduce_table(args) -> int:
    from .reproduce import reproduce

    if args.reps < MIN_TABLE_REPS:
        _warn(f"{args.reps} replications is below the recommended {MIN_TABLE_REPS}; tolerances will be wide")
    summaries, comparisons = reproduce(args.reps, args.seed, _workers(args))
    table = OutputTable(
        ["scenario", "n", "spec", "metric", "simulated", "reference", "abs_diff", "tolerance", "pass"],
        digits=None,
    )
    for c in comparisons:
        table.append([c.scenario, c.n, c.spec, c.metric, c.simulated, c.reference, c.abs_diff, c.tolerance, c.passed])
    _write_lines(args.out, table.render("csv") + _provenance(args.seed, args.reps))
    for s in summaries:
        if s.unreliable:
            _warn(f"scenario {s.scenario}, n={s.n}, spec {s.spec.value}: {s.reps_failed} failed replications")
    passed = sum(c.passed for c in comparisons)
    print(f"{passed}/{len(comparisons)} comparisons within tolerance; written to {args.out}")
    for c in comparisons:
        if not c.passed:
            print(
                f"  outside: scenario {c.scenario} n={c.n} spec {c.spec.value} {c.metric}: "
                f"{c.simulated:.4g} vs {c.reference:.4g} (tolerance {c.tolerance:.3g})"
            )
    return EXIT_OK


# -- parser ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 2 via InputError."""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _spec_arg(value: str) -> IvKind:
    try:
        return IvKind.parse(value)
    except InputError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "tsv", "pretty"), default="pretty", help="stdout table format")
    common.add_argument("--digits", type=int, default=6, help="significant digits for numbers on stdout")

    p = _Parser(prog="noshlab", description="IV estimation of average causal effects and its simulation study.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sc = sub.add_parser("scenario", parents=[common], help="inspect the built-in simulation scenarios")
    sc.add_argument("action", choices=("list", "show", "classify"))
    sc.add_argument("ref", nargs="?", help="scenario id (1-5) or path to a scenario JSON")
    sc.set_defaults(func=cmd_scenario)

    es = sub.add_parser("estimate", parents=[common], help="estimate the ACE on a CSV dataset")
    es.add_argument("--data", required=True, help="CSV file with a header row")
    es.add_argument("--z", required=True, help="instrument column")
    es.add_argument("--x", required=True, help="treatment column")
    es.add_argument("--y", required=True, help="outcome column")
    es.add_argument("--spec", required=True, type=_spec_arg, help="wald or 1-4")
    es.add_argument("--u6", help="first modifier column (TSLS 2-4)")
    es.add_argument("--v6", help="second modifier column (TSLS 2-4)")
    es.set_defaults(func=cmd_estimate)

    ws = sub.add_parser("wald-summary", parents=[common], help="Wald ratio from published summaries")
    ws.add_argument("--itt", type=float, required=True, help="intention-to-treat estimate")
    ws.add_argument("--itt-ci", type=float, nargs=2, metavar=("LO", "HI"), required=True)
    ws.add_argument("--first-stage", type=float, required=True, help="effect of the instrument on treatment")
    ws.add_argument("--decimals", type=int, default=2, help="decimals in the display column")
    ws.set_defaults(func=cmd_wald_summary)

    si = sub.add_parser("simulate", parents=[common], help="Monte Carlo sweep over scenarios, n and estimators")
    si.add_argument("--scenario", nargs="+", required=True, help="ids (1-5) or scenario JSON paths")
    si.add_argument("--n", nargs="+", type=int, required=True)
    si.add_argument("--spec", nargs="+", type=_spec_arg, required=True)
    si.add_argument("--reps", type=int, required=True)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--workers", type=int, default=None, help="processes (default: $NOSH_LAB_WORKERS or 1)")
    si.add_argument("--out", required=True, help="summary CSV path")
    si.add_argument("--keep-reps", metavar="PATH", help="also write per-replication estimates here")
    si.set_defaults(func=cmd_simulate)

    rt = sub.add_parser("reproduce-table", parents=[common], help="full grid compared with the reference table")
    rt.add_argument("--reps", type=int, default=2000)
    rt.add_argument("--seed", type=int, default=0)
    rt.add_argument("--workers", type=int, default=None, help="processes (default: $NOSH_LAB_WORKERS or 1)")
    rt.add_argument("--out", required=True, help="comparison CSV path")
    rt.set_defaults(func=cmd_reproduce_table)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SingularityError as exc:
        cols = f" (columns: {', '.join(exc.columns)})" if exc.columns else ""
        print(f"numerical error: {exc}{cols}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NoshLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
