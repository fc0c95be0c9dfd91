"""Roster-based reservation solutions and their Monte-Carlo estimates.

Three ways of turning a roster into reservation tables:

* ``run_government``: one global roster for the whole institution.  Each
  period, departments consume consecutive roster positions in a fixed
  pooling order, and the global position index carries over across periods.
* ``run_court``: every department consumes its *own copy* of one common
  roster, at positions cumulative-vacancies+1 .. cumulative-vacancies'.
* ``run_proposed``: like court, but each department follows an independent
  random roster drawn from the scheme, so every department's reservations
  stay within its own quota surely while every entry remains unbiased.

``estimate_expected_table`` replicates a solution and reports per-entry
means with standard errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import sqrt
from typing import Optional, Sequence

from .core import (
    ReservationProblem,
    ReservationTable,
    Roster,
    SolutionTrace,
    build_fair_share_table,
)
from .rng import SplitStream
from .roster import draw_roster

__all__ = [
    "RosterLengthError",
    "SolutionConfig",
    "EstimatedTable",
    "run_government",
    "run_court",
    "run_proposed",
    "estimate_expected_table",
]


class RosterLengthError(ValueError):
    """The supplied roster is shorter than the positions the run consumes."""


def _check_roster(problem: ReservationProblem, roster: Roster) -> None:
    if set(roster.categories) != set(problem.scheme.categories):
        raise ValueError(
            "roster categories do not match the scheme: "
            f"{sorted(roster.categories)} vs {sorted(problem.scheme.categories)}"
        )


def _require_length(roster: Roster, needed: int, label: str) -> None:
    if len(roster) < needed:
        raise RosterLengthError(
            f"{label} needs {needed} roster positions, roster has {len(roster)}"
        )


def _segment_counts(
    roster: Roster, start: int, stop: int, categories: Sequence[str]
) -> list[int]:
    """Category counts over 1-based roster positions start+1 .. stop."""
    seg = roster.assignment[start:stop]
    return [seg.count(c) for c in categories]


def _trace(
    problem: ReservationProblem,
    label: str,
    cumulative: Sequence[Sequence[Sequence[int]]],
    seed: Optional[int] = None,
) -> SolutionTrace:
    periods = []
    for t in range(1, problem.periods + 1):
        fair = build_fair_share_table(problem, t)
        reserved = ReservationTable.from_entries(
            problem.departments, problem.scheme.categories, cumulative[t - 1]
        )
        periods.append((fair, reserved))
    return SolutionTrace(problem, label, tuple(periods), seed)


def run_government(
    problem: ReservationProblem,
    roster: Roster,
    order: Optional[Sequence[str]] = None,
) -> SolutionTrace:
    """Pooled solution: one roster consumed institution-wide.

    ``order`` fixes which department takes which consecutive positions
    within a period (default: the problem's department order); the global
    roster index continues across periods.  Raises
    :class:`RosterLengthError` if the roster runs out.
    """
    _check_roster(problem, roster)
    if order is None:
        order = problem.departments
    else:
        order = tuple(order)
        if sorted(order) != sorted(problem.departments):
            raise ValueError(
                f"order must be a permutation of the departments, got {order}"
            )
    _require_length(roster, sum(map(sum, problem.vacancies)), "government run")
    cats = problem.scheme.categories
    m = len(problem.departments)
    counts = [[0] * len(cats) for _ in range(m)]
    cumulative = []
    position = 0
    for t in range(1, problem.periods + 1):
        for dept in order:
            i = problem.departments.index(dept)
            q = problem.vacancies[t - 1][i]
            seg = _segment_counts(roster, position, position + q, cats)
            position += q
            for j, c in enumerate(seg):
                counts[i][j] += c
        cumulative.append([row[:] for row in counts])
    return _trace(problem, "government", cumulative)


def run_court(problem: ReservationProblem, roster: Roster) -> SolutionTrace:
    """Per-department solution: every department reads its own copy of ``roster``."""
    _check_roster(problem, roster)
    final = problem.cumulative_vacancies(problem.periods)
    _require_length(roster, max(final), "court run")
    cats = problem.scheme.categories
    m = len(problem.departments)
    counts = [[0] * len(cats) for _ in range(m)]
    cumulative = []
    previous = [0] * m
    for t in range(1, problem.periods + 1):
        current = problem.cumulative_vacancies(t)
        for i in range(m):
            seg = _segment_counts(roster, previous[i], current[i], cats)
            for j, c in enumerate(seg):
                counts[i][j] += c
        previous = list(current)
        cumulative.append([row[:] for row in counts])
    return _trace(problem, "court", cumulative)


def run_proposed(
    problem: ReservationProblem, seed: int, *, height: Optional[int] = None
) -> SolutionTrace:
    """Independent random roster per department, consumed court-style.

    Department i follows a roster drawn from child stream i of the master
    seed, with length equal to its final cumulative vacancies; each
    department therefore satisfies its own quota in every period surely,
    and every table entry is an unbiased draw around its fair share.
    """
    master = SplitStream(seed)
    scheme = problem.scheme
    final = problem.cumulative_vacancies(problem.periods)
    rosters = [
        draw_roster(scheme, final[i], master.child(i), height=height)
        for i in range(len(problem.departments))
    ]
    cats = scheme.categories
    m = len(problem.departments)
    counts = [[0] * len(cats) for _ in range(m)]
    cumulative = []
    previous = [0] * m
    for t in range(1, problem.periods + 1):
        current = problem.cumulative_vacancies(t)
        for i in range(m):
            seg = _segment_counts(rosters[i], previous[i], current[i], cats)
            for j, c in enumerate(seg):
                counts[i][j] += c
        previous = list(current)
        cumulative.append([row[:] for row in counts])
    return _trace(problem, "proposed", cumulative, seed)


@dataclass(frozen=True)
class SolutionConfig:
    """Which solution to run and with what inputs.

    ``roster`` is required by government and court runs unless replications
    are meant to draw a fresh roster each time (roster=None); ``order`` only
    applies to government; ``height`` overrides the block height used for
    drawn rosters.
    """

    kind: str
    roster: Optional[Roster] = None
    order: Optional[tuple[str, ...]] = None
    height: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("government", "court", "proposed"):
            raise ValueError(
                f"unknown solution kind {self.kind!r}; expected "
                "'government', 'court', or 'proposed'"
            )


def run_solution(
    problem: ReservationProblem, config: SolutionConfig, seed: Optional[int] = None
) -> SolutionTrace:
    """Run one solution described by ``config`` (seed used where random)."""
    if config.kind == "proposed":
        if seed is None:
            raise ValueError("the proposed solution needs a seed")
        return run_proposed(problem, seed, height=config.height)
    roster = config.roster
    if roster is None:
        if seed is None:
            raise ValueError(
                f"the {config.kind} solution needs a roster or a seed to draw one"
            )
        total = sum(map(sum, problem.vacancies))
        roster = draw_roster(
            problem.scheme, total, SplitStream(seed), height=config.height
        )
    if config.kind == "government":
        return run_government(problem, roster, config.order)
    return run_court(problem, roster)


@dataclass(frozen=True)
class EstimatedTable:
    """Monte-Carlo means and standard errors of a reservation table."""

    departments: tuple[str, ...]
    categories: tuple[str, ...]
    period: int
    kind: str
    replications: int
    seed: int
    mean_entries: tuple[tuple[Fraction, ...], ...]
    se_entries: tuple[tuple[float, ...], ...]
    mean_column_totals: tuple[Fraction, ...]
    se_column_totals: tuple[float, ...]


def _mean_se(total: int, total_sq: int, count: int) -> tuple[Fraction, float]:
    mean = Fraction(total, count)
    if count < 2:
        return mean, 0.0
    var = (Fraction(total_sq) - count * mean * mean) / (count - 1)
    return mean, sqrt(max(0.0, float(var) / count))


def estimate_expected_table(
    problem: ReservationProblem,
    t: int,
    config: SolutionConfig,
    replications: int,
    seed: int,
) -> EstimatedTable:
    """Mean and standard error of each entry of the period-t table.

    Replication r runs the solution with seed child(r) of the master seed;
    a government/court run with a fixed roster is deterministic, so it is
    computed once and reported with zero standard errors.
    """
    problem.check_period(t)
    if replications < 1:
        raise ValueError(f"need at least one replication, got {replications}")
    m, n = len(problem.departments), len(problem.scheme.categories)
    master = SplitStream(seed)

    deterministic = config.kind in ("government", "court") and config.roster is not None
    runs = 1 if deterministic else replications

    sums = [[0] * n for _ in range(m)]
    sq = [[0] * n for _ in range(m)]
    col_sums = [0] * n
    col_sq = [0] * n
    for r in range(runs):
        trace = run_solution(problem, config, master.child(r).key)
        reserved = trace.reservation(t)
        for i in range(m):
            for j in range(n):
                z = reserved.entries[i][j]
                sums[i][j] += z
                sq[i][j] += z * z
        for j in range(n):
            z = reserved.column_totals[j]
            col_sums[j] += z
            col_sq[j] += z * z

    means, ses = [], []
    for i in range(m):
        row_m, row_s = [], []
        for j in range(n):
            mean, se = _mean_se(sums[i][j], sq[i][j], runs)
            row_m.append(mean)
            row_s.append(se)
        means.append(tuple(row_m))
        ses.append(tuple(row_s))
    col_means, col_ses = [], []
    for j in range(n):
        mean, se = _mean_se(col_sums[j], col_sq[j], runs)
        col_means.append(mean)
        col_ses.append(se)
    return EstimatedTable(
        departments=problem.departments,
        categories=problem.scheme.categories,
        period=t,
        kind=config.kind,
        replications=runs,
        seed=seed,
        mean_entries=tuple(means),
        se_entries=tuple(ses),
        mean_column_totals=tuple(col_means),
        se_column_totals=tuple(col_ses),
    )
