"""Command-line interface.

Four subcommands, all deterministic given their inputs and ``--seed``:

* ``round``: one controlled rounding of a period's fair share table;
* ``roster``: draw a roster from a scheme (output is itself a roster file);
* ``run``: run one solution over a problem and report per-period tables,
  biases, and quota-violation statistics;
* ``compare``: replicate all three solutions and report per-period bias
  distribution summaries, plot-ready.

Exit codes: 0 success, 2 malformed input (bad flags or unparseable files,
reported with file and line), 3 out-of-range request (e.g. a period beyond
the horizon), 4 missing flag dependencies (e.g. government without a
roster).
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import __version__
from .analysis import summarize_biases, violation_stats
from .core import (
    BiasTable,
    FairShareTable,
    PeriodRangeError,
    ReservationProblem,
    ReservationTable,
    Roster,
    SolutionTrace,
    bias_of,
    build_fair_share_table,
    within_department_quota,
    within_university_quota,
)
from .fileio import (
    ParseError,
    parse_problem_file,
    parse_roster_file,
    parse_scheme_file,
    rational,
    roster_lines,
)
from .rng import ALGORITHM, SplitStream
from .rounding import controlled_round
from .solutions import RosterLengthError, SolutionConfig, run_solution
from .roster import draw_roster

__all__ = ["main"]

# Child-stream indices of the master seed, one per random consumer, so that
# e.g. adding replications never shifts another consumer's draws.
_SUB_PROPOSED, _SUB_GOVERNMENT, _SUB_COURT, _SUB_SYNTHESIZE = 0, 1, 2, 3

_TOTAL = "total"


class UsageError(Exception):
    """A flag combination the command cannot work with (exit code 4)."""


def _seed_type(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _metadata(seed: Optional[int]) -> dict:
    meta = {"package": f"reserve2d {__version__}", "generator": ALGORITHM}
    if seed is not None:
        meta["seed"] = seed
    return meta


def _fair_dict(fair: FairShareTable) -> dict:
    return {
        "departments": list(fair.departments),
        "categories": list(fair.categories),
        "entries": [[rational(v) for v in row] for row in fair.entries],
        "row_totals": list(fair.row_totals),
        "column_totals": [rational(v) for v in fair.column_totals],
        "grand_total": fair.grand_total,
    }


def _reservation_dict(res: ReservationTable) -> dict:
    return {
        "departments": list(res.departments),
        "categories": list(res.categories),
        "entries": [list(row) for row in res.entries],
        "row_totals": list(res.row_totals),
        "column_totals": list(res.column_totals),
        "grand_total": res.grand_total,
    }


def _bias_dict(bias: BiasTable) -> dict:
    return {
        "departments": list(bias.departments),
        "categories": list(bias.categories),
        "entries": [[rational(v) for v in row] for row in bias.entries],
    }


def _violation_fields(violations, max_possible: int) -> dict:
    magnitudes = [v.magnitude for v in violations]
    return {
        "count": len(violations),
        "max_possible": max_possible,
        "percentage": rational(Fraction(100 * len(violations), max_possible)),
        "cells": [
            {
                "department": v.department,
                "category": v.category,
                "reserved": v.reserved,
                "fair": rational(v.fair),
            }
            for v in violations
        ],
        "magnitudes": [rational(mag) for mag in magnitudes],
        "average_magnitude": rational(sum(magnitudes) / len(magnitudes))
        if magnitudes
        else None,
        "min_magnitude": rational(min(magnitudes)) if magnitudes else None,
        "max_magnitude": rational(max(magnitudes)) if magnitudes else None,
    }


def _table_rows(period, fair, res, bias) -> list[list]:
    """Long-format CSV rows for one period's tables."""
    rows = []
    depts, cats = fair.departments, fair.categories
    for i, d in enumerate(depts):
        for j, c in enumerate(cats):
            rows.append([period, "fair", d, c, float(fair.entries[i][j])])
            rows.append([period, "reservation", d, c, res.entries[i][j]])
            rows.append([period, "bias", d, c, float(bias.entries[i][j])])
        rows.append([period, "fair", d, _TOTAL, float(fair.row_totals[i])])
        rows.append([period, "reservation", d, _TOTAL, res.row_totals[i]])
        rows.append([period, "bias", d, _TOTAL, float(bias.entries[i][-1])])
    for j, c in enumerate(cats):
        rows.append([period, "fair", _TOTAL, c, float(fair.column_totals[j])])
        rows.append([period, "reservation", _TOTAL, c, res.column_totals[j]])
        rows.append([period, "bias", _TOTAL, c, float(bias.entries[-1][j])])
    rows.append([period, "fair", _TOTAL, _TOTAL, float(fair.grand_total)])
    rows.append([period, "reservation", _TOTAL, _TOTAL, res.grand_total])
    rows.append([period, "bias", _TOTAL, _TOTAL, float(bias.entries[-1][-1])])
    return rows


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    import csv
    import io

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return out.getvalue()


def _emit(text: str, output: Optional[str]) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _json_text(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _load_problem(args) -> ReservationProblem:
    scheme = parse_scheme_file(args.scheme)
    return parse_problem_file(args.problem, scheme)


def _cycled_roster(roster: Roster, needed: int) -> Roster:
    if len(roster) >= needed:
        return roster
    assignment = tuple(
        itertools.islice(itertools.cycle(roster.assignment), needed)
    )
    return Roster(
        categories=roster.categories,
        assignment=assignment,
        block_length=roster.block_length,
        extension_policy=roster.extension_policy,
    )


def _order_of(problem: ReservationProblem, name: str) -> tuple[str, ...]:
    if name == "input":
        return problem.departments
    if name == "alpha":
        return tuple(sorted(problem.departments))
    raise UsageError(f"unknown --order {name!r}; expected 'input' or 'alpha'")


# --- round ----------------------------------------------------------------


def _cmd_round(args) -> int:
    problem = _load_problem(args)
    fair = build_fair_share_table(problem, args.period)
    rounded = controlled_round(fair, SplitStream(args.seed))
    bias = bias_of(rounded, fair)
    dept = within_department_quota(rounded, fair)
    univ = within_university_quota(rounded, fair)
    m, n = len(fair.departments), len(fair.categories)
    if args.format == "json":
        report = {
            "command": "round",
            "metadata": _metadata(args.seed),
            "period": args.period,
            "fair_share": _fair_dict(fair),
            "reservation": _reservation_dict(rounded),
            "bias": _bias_dict(bias),
            "violations": {
                "department": _violation_fields(dept, m * n),
                "university": _violation_fields(univ, n),
            },
        }
        _emit(_json_text(report), args.output)
    else:
        rows = _table_rows(args.period, fair, rounded, bias)
        _emit(_csv_text(["period", "table", "department", "category", "value"], rows), args.output)
    return 0


# --- roster ---------------------------------------------------------------


def _cmd_roster(args) -> int:
    scheme = parse_scheme_file(args.scheme)
    roster = draw_roster(
        scheme,
        args.length,
        SplitStream(args.seed),
        args.policy,
        height=args.height,
    )
    if args.format == "json":
        report = {
            "command": "roster",
            "metadata": _metadata(args.seed),
            "block_length": roster.block_length,
            "extension_policy": roster.extension_policy,
            "categories": list(roster.categories),
            "assignment": list(roster.assignment),
        }
        _emit(_json_text(report), args.output)
    else:
        _emit(roster_lines(roster), args.output)
    return 0


# --- run ------------------------------------------------------------------


def _solution_config(args, problem: ReservationProblem) -> tuple[SolutionConfig, Optional[int]]:
    order = _order_of(problem, args.order)
    if args.solution == "proposed":
        if args.seed is None:
            raise UsageError("the proposed solution requires --seed")
        return SolutionConfig("proposed", height=args.height), args.seed
    if args.roster is None:
        raise UsageError(f"the {args.solution} solution requires --roster")
    roster = parse_roster_file(args.roster, problem.scheme.categories)
    needed = (
        sum(map(sum, problem.vacancies))
        if args.solution == "government"
        else max(problem.cumulative_vacancies(problem.periods))
    )
    if args.cycle_roster:
        roster = _cycled_roster(roster, needed)
    return SolutionConfig(args.solution, roster=roster, order=order), args.seed


def _cmd_run(args) -> int:
    problem = _load_problem(args)
    config, seed = _solution_config(args, problem)
    trace = run_solution(problem, config, seed)
    periods = []
    csv_rows = []
    for t in range(1, problem.periods + 1):
        fair, reserved = trace.periods[t - 1]
        bias = bias_of(reserved, fair)
        dept_stats = violation_stats(trace, "department", t)
        univ_stats = violation_stats(trace, "university", t)
        periods.append(
            {
                "period": t,
                "fair_share": _fair_dict(fair),
                "reservation": _reservation_dict(reserved),
                "bias": _bias_dict(bias),
                "violations": {
                    "department": _violation_fields(
                        dept_stats.violations, dept_stats.max_possible
                    ),
                    "university": _violation_fields(
                        univ_stats.violations, univ_stats.max_possible
                    ),
                },
            }
        )
        csv_rows.extend(_table_rows(t, fair, reserved, bias))
        for stats in (dept_stats, univ_stats):
            csv_rows.append(
                [t, "violations", stats.scope, "count", stats.count]
            )
            csv_rows.append(
                [t, "violations", stats.scope, "max_possible", stats.max_possible]
            )
            csv_rows.append(
                [t, "violations", stats.scope, "percentage", float(stats.percentage)]
            )
    if args.format == "json":
        report = {
            "command": "run",
            "metadata": _metadata(seed),
            "solution": args.solution,
            "order": list(_order_of(problem, args.order)),
            "periods": periods,
        }
        _emit(_json_text(report), args.output)
    else:
        _emit(
            _csv_text(["period", "table", "department", "category", "value"], csv_rows),
            args.output,
        )
    return 0


# --- compare ----------------------------------------------------------------


def _synthesize_problem(args, scheme) -> ReservationProblem:
    stream = SplitStream(args.seed).child(_SUB_SYNTHESIZE)
    lo_m, hi_m = args.departments_range
    lo_q, hi_q = args.vacancies_range
    if lo_m < 2 or hi_m < lo_m:
        raise UsageError("--departments-range needs 2 <= LO <= HI")
    if lo_q < 0 or hi_q < lo_q:
        raise UsageError("--vacancies-range needs 0 <= LO <= HI")
    m = lo_m + stream.randrange(hi_m - lo_m + 1)
    departments = tuple(f"d{i}" for i in range(1, m + 1))
    vacancies = tuple(
        tuple(lo_q + stream.randrange(hi_q - lo_q + 1) for _ in range(m))
        for _ in range(args.periods)
    )
    return ReservationProblem(departments, scheme, vacancies)


def _biases_by_period(trace: SolutionTrace) -> dict[tuple[int, str], list[Fraction]]:
    out: dict[tuple[int, str], list[Fraction]] = {}
    for t, (fair, reserved) in enumerate(trace.periods, start=1):
        bias = bias_of(reserved, fair)
        out.setdefault((t, "department"), []).extend(
            v for row in bias.internal for v in row
        )
        out.setdefault((t, "university"), []).extend(bias.column_total_biases)
    return out


def _cmd_compare(args) -> int:
    scheme = parse_scheme_file(args.scheme)
    if args.synthesize:
        if args.problem is not None:
            raise UsageError("--synthesize replaces the problem file; drop the positional argument")
        problem = _synthesize_problem(args, scheme)
    else:
        if args.problem is None:
            raise UsageError("compare needs a problem file (or --synthesize)")
        problem = parse_problem_file(args.problem, scheme)

    roster = None
    if args.roster is not None:
        roster = parse_roster_file(args.roster, scheme.categories)
        needed = sum(map(sum, problem.vacancies))
        if args.cycle_roster:
            roster = _cycled_roster(roster, needed)
    order = _order_of(problem, args.order)

    master = SplitStream(args.seed)
    samples: dict[tuple[str, int, str], list[Fraction]] = {}
    for kind, sub in (
        ("proposed", _SUB_PROPOSED),
        ("government", _SUB_GOVERNMENT),
        ("court", _SUB_COURT),
    ):
        config = SolutionConfig(
            kind,
            roster=roster if kind != "proposed" else None,
            order=order if kind == "government" else None,
            height=args.height,
        )
        deterministic = kind != "proposed" and roster is not None
        runs = 1 if deterministic else args.replications
        stream = master.child(sub)
        for r in range(runs):
            trace = run_solution(problem, config, stream.child(r).key)
            for (t, scope), values in _biases_by_period(trace).items():
                samples.setdefault((kind, t, scope), []).extend(values)

    statistics = (
        "minimum",
        "q1",
        "median",
        "q3",
        "maximum",
        "lower_adjacent",
        "upper_adjacent",
    )
    series = []
    for (kind, t, scope), values in sorted(
        samples.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])
    ):
        summary = summarize_biases(values, t, scope)
        series.append((kind, summary))

    if args.format == "json":
        report = {
            "command": "compare",
            "metadata": _metadata(args.seed),
            "replications": args.replications,
            "synthesized": bool(args.synthesize),
            "problem": {
                "departments": list(problem.departments),
                "categories": list(scheme.categories),
                "periods": problem.periods,
                "vacancies": [list(row) for row in problem.vacancies],
            },
            "series": [
                {
                    "solution": kind,
                    "period": s.period,
                    "scope": s.scope,
                    "count": s.count,
                    **{stat: rational(getattr(s, stat)) for stat in statistics},
                }
                for kind, s in series
            ],
        }
        _emit(_json_text(report), args.output)
    else:
        rows = []
        for kind, s in series:
            for stat in statistics:
                rows.append([kind, s.period, s.scope, stat, float(getattr(s, stat))])
        _emit(
            _csv_text(["solution", "period", "scope", "statistic", "value"], rows),
            args.output,
        )
    return 0


# --- parser -----------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reserve2d",
        description="Two-dimensional reservation tables: rounding, rosters, solutions, comparisons.",
    )
    parser.add_argument("--version", action="version", version=f"reserve2d {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = {"--scheme": dict(required=True, help="scheme CSV (category,numerator,denominator)")}

    p_round = sub.add_parser("round", help="one controlled rounding of a fair share table")
    p_round.add_argument("problem", help="problem CSV (department,period,vacancies)")
    p_round.add_argument("--scheme", **common["--scheme"])
    p_round.add_argument("-t", "--period", type=_positive_int, required=True)
    p_round.add_argument("--seed", type=_seed_type, required=True)
    p_round.add_argument("--format", choices=("json", "csv"), default="json")
    p_round.add_argument("-o", "--output")
    p_round.set_defaults(func=_cmd_round)

    p_roster = sub.add_parser("roster", help="draw a roster from a scheme")
    p_roster.add_argument("scheme", help="scheme CSV (category,numerator,denominator)")
    p_roster.add_argument("--length", type=_positive_int, required=True)
    p_roster.add_argument("--seed", type=_seed_type, required=True)
    p_roster.add_argument(
        "--policy",
        choices=("independent-blocks", "repeat-block"),
        default="independent-blocks",
    )
    p_roster.add_argument("--height", type=_positive_int, default=None)
    p_roster.add_argument("--format", choices=("csv", "json"), default="csv")
    p_roster.add_argument("-o", "--output")
    p_roster.set_defaults(func=_cmd_roster)

    p_run = sub.add_parser("run", help="run one solution over a problem")
    p_run.add_argument("problem")
    p_run.add_argument("--scheme", **common["--scheme"])
    p_run.add_argument(
        "--solution", choices=("government", "court", "proposed"), required=True
    )
    p_run.add_argument("--roster", help="roster CSV (required for government/court)")
    p_run.add_argument("--cycle-roster", action="store_true",
                       help="tile the roster if it is shorter than the run needs")
    p_run.add_argument("--seed", type=_seed_type, default=None)
    p_run.add_argument("--order", choices=("input", "alpha"), default="input")
    p_run.add_argument("--height", type=_positive_int, default=None)
    p_run.add_argument("--format", choices=("json", "csv"), default="json")
    p_run.add_argument("-o", "--output")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="compare bias distributions of all three solutions")
    p_cmp.add_argument("problem", nargs="?", default=None)
    p_cmp.add_argument("--scheme", **common["--scheme"])
    p_cmp.add_argument("--roster", help="fixed roster for government/court (else drawn per replication)")
    p_cmp.add_argument("--cycle-roster", action="store_true")
    p_cmp.add_argument("--replications", type=_positive_int, default=1000)
    p_cmp.add_argument("--seed", type=_seed_type, required=True)
    p_cmp.add_argument("--order", choices=("input", "alpha"), default="input")
    p_cmp.add_argument("--height", type=_positive_int, default=None)
    p_cmp.add_argument("--synthesize", action="store_true",
                       help="generate a random problem instead of reading one")
    p_cmp.add_argument("--periods", type=_positive_int, default=9)
    p_cmp.add_argument("--departments-range", type=int, nargs=2, default=(8, 50),
                       metavar=("LO", "HI"))
    p_cmp.add_argument("--vacancies-range", type=int, nargs=2, default=(1, 30),
                       metavar=("LO", "HI"))
    p_cmp.add_argument("--format", choices=("csv", "json"), default="csv")
    p_cmp.add_argument("-o", "--output")
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except PeriodRangeError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except RosterLengthError as err:
        print(f"error: {err} (--cycle-roster tiles a shorter roster)", file=sys.stderr)
        return 4
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
