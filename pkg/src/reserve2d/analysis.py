"""Quota-violation statistics, bias summaries, and stress diagnostics.

Tools for judging how a solution's reservation tables track fair shares:

* :func:`violation_stats` counts and sizes the quota violations in a
  trace's final tables, per scope (department entries or university column
  totals);
* :func:`bias_trace` summarizes the distribution of biases per period and
  scope with exact five-number summaries and Tukey adjacent values;
* :func:`tail_diagnostic` Monte-Carlo estimates the tails of a category's
  column-total deviation under the per-department lottery and reports them
  alongside the exponential tail bounds exp(-b^2/(3x)) (upper) and
  exp(-b^2/(2x)) (lower), where x is the fair column total;
* :func:`adversarial_sequence` builds the three-department vacancy sequence
  that forces any sequential seat-by-seat assignment respecting the
  university quota into department-level biases that grow linearly in time.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import exp, sqrt
from typing import Callable, Optional, Sequence, Union

from .core import (
    FairShareTable,
    ReservationProblem,
    ReservationScheme,
    ReservationTable,
    SolutionTrace,
    QuotaViolation,
    bias_of,
    build_fair_share_table,
    within_department_quota,
    within_university_quota,
)
from .rng import ALGORITHM, SplitStream
from .roster import _draw_positions

__all__ = [
    "ViolationStats",
    "BiasSummary",
    "TailDiagnostic",
    "AdversarialRun",
    "violation_stats",
    "bias_trace",
    "tail_diagnostic",
    "adversarial_sequence",
    "prefer_first_category",
]


@dataclass(frozen=True)
class ViolationStats:
    """Quota violations of a trace's final reservation table, one scope."""

    scope: str  # "department" | "university"
    period: int
    violations: tuple[QuotaViolation, ...]
    max_possible: int

    @property
    def count(self) -> int:
        return len(self.violations)

    @property
    def percentage(self) -> Fraction:
        return Fraction(100 * self.count, self.max_possible)

    @property
    def magnitudes(self) -> tuple[Fraction, ...]:
        return tuple(v.magnitude for v in self.violations)

    @property
    def average_magnitude(self) -> Optional[Fraction]:
        if not self.violations:
            return None
        return sum(self.magnitudes) / self.count

    @property
    def min_magnitude(self) -> Optional[Fraction]:
        return min(self.magnitudes) if self.violations else None

    @property
    def max_magnitude(self) -> Optional[Fraction]:
        return max(self.magnitudes) if self.violations else None


def violation_stats(
    trace: SolutionTrace, scope: str, t: Optional[int] = None
) -> ViolationStats:
    """Violation count/percentage/magnitudes at period ``t`` (default: final).

    ``max_possible`` is the number of checked positions: m*n department
    entries, or n column totals.
    """
    if t is None:
        t = trace.problem.periods
    trace.problem.check_period(t)
    fair, reserved = trace.periods[t - 1]
    m, n = len(fair.departments), len(fair.categories)
    if scope == "department":
        violations = within_department_quota(reserved, fair)
        max_possible = m * n
    elif scope == "university":
        violations = within_university_quota(reserved, fair)
        max_possible = n
    else:
        raise ValueError(f"unknown scope {scope!r}; expected 'department' or 'university'")
    return ViolationStats(scope, t, tuple(violations), max_possible)


def _median(sorted_values: Sequence[Fraction]) -> Fraction:
    k = len(sorted_values)
    mid = k // 2
    if k % 2:
        return sorted_values[mid]
    return Fraction(sorted_values[mid - 1] + sorted_values[mid], 2)


@dataclass(frozen=True)
class BiasSummary:
    """Exact five-number summary (Tukey hinges) of one period's biases."""

    period: int
    scope: str
    count: int
    minimum: Fraction
    q1: Fraction
    median: Fraction
    q3: Fraction
    maximum: Fraction
    lower_adjacent: Fraction
    upper_adjacent: Fraction


def summarize_biases(values: Sequence[Fraction], period: int, scope: str) -> BiasSummary:
    """Five-number summary with Tukey hinges and 1.5*IQR adjacent values."""
    if not values:
        raise ValueError("cannot summarize an empty bias sample")
    data = sorted(Fraction(v) for v in values)
    k = len(data)
    half = (k + 1) // 2
    q1, q3 = _median(data[:half]), _median(data[-half:])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - Fraction(3, 2) * iqr, q3 + Fraction(3, 2) * iqr
    return BiasSummary(
        period=period,
        scope=scope,
        count=k,
        minimum=data[0],
        q1=q1,
        median=_median(data),
        q3=q3,
        maximum=data[-1],
        lower_adjacent=min(v for v in data if v >= lo_fence),
        upper_adjacent=max(v for v in data if v <= hi_fence),
    )


def bias_trace(trace: SolutionTrace) -> tuple[BiasSummary, ...]:
    """Per-period bias distributions, department scope then university scope.

    Department-scope samples are the m*n internal bias entries; university
    scope the n column-total biases.
    """
    out = []
    for t, (fair, reserved) in enumerate(trace.periods, start=1):
        bias = bias_of(reserved, fair)
        internal = [v for row in bias.internal for v in row]
        out.append(summarize_biases(internal, t, "department"))
        out.append(summarize_biases(list(bias.column_total_biases), t, "university"))
    return tuple(out)


@dataclass(frozen=True)
class TailDiagnostic:
    """Empirical tail frequencies of one category's column-total deviation.

    For each b in the grid, ``upper_frequency`` estimates
    P(deviation >= b) and ``lower_frequency`` P(deviation <= -b) under the
    per-department lottery; ``upper_bound``/``lower_bound`` are the
    corresponding exponential bounds.  ``adequate_resolution`` flags whether
    the replication count can resolve the smallest reported bound (its
    binomial standard error stays below a quarter of the bound); it is
    reported, not enforced.
    """

    category: str
    period: int
    fair_total: Fraction
    b_grid: tuple[Fraction, ...]
    upper_frequency: tuple[Fraction, ...]
    lower_frequency: tuple[Fraction, ...]
    upper_bound: tuple[float, ...]
    lower_bound: tuple[float, ...]
    replications: int
    seed: int
    generator: str
    adequate_resolution: bool


def tail_diagnostic(
    problem: ReservationProblem,
    category: Union[str, int],
    t: int,
    replications: int,
    b_grid: Sequence,
    seed: int,
    *,
    height: Optional[int] = None,
) -> TailDiagnostic:
    """Estimate both tails of a column-total deviation under the lottery.

    Replication r replays exactly the draws ``run_proposed`` would make with
    seed child(r): department i's roster comes from stream child(r).child(i).
    The deviation is the category's reserved column total at period ``t``
    minus its fair share x; bounds are exp(-b^2/(3x)) and exp(-b^2/(2x)).
    """
    problem.check_period(t)
    if replications < 1:
        raise ValueError(f"need at least one replication, got {replications}")
    cats = problem.scheme.categories
    j = cats.index(category) if isinstance(category, str) else category
    if not 0 <= j < len(cats):
        raise ValueError(f"category index {j} out of range")
    cat = cats[j]
    grid = tuple(sorted(Fraction(b) for b in b_grid))
    if not grid or grid[0] <= 0:
        raise ValueError("the b grid must contain positive thresholds")

    fair = build_fair_share_table(problem, t)
    x = fair.column_totals[j]
    cumulative = problem.cumulative_vacancies(t)
    m = len(problem.departments)

    master = SplitStream(seed)
    deviations = []
    for r in range(replications):
        rep = master.child(r)
        total = 0
        for i in range(m):
            if cumulative[i] == 0:
                continue
            positions, _ = _draw_positions(
                problem.scheme, cumulative[i], rep.child(i), "independent-blocks", height
            )
            total += positions.count(cat)
        deviations.append(total - x)

    n_reps = len(deviations)
    upper = tuple(
        Fraction(sum(1 for d in deviations if d >= b), n_reps) for b in grid
    )
    lower = tuple(
        Fraction(sum(1 for d in deviations if d <= -b), n_reps) for b in grid
    )
    upper_bound = tuple(exp(-float(b * b / (3 * x))) for b in grid)
    lower_bound = tuple(exp(-float(b * b / (2 * x))) for b in grid)
    smallest = min(upper_bound[-1], lower_bound[-1])
    adequate = sqrt(smallest / n_reps) < smallest / 4
    return TailDiagnostic(
        category=cat,
        period=t,
        fair_total=x,
        b_grid=grid,
        upper_frequency=upper,
        lower_frequency=lower,
        upper_bound=upper_bound,
        lower_bound=lower_bound,
        replications=n_reps,
        seed=seed,
        generator=ALGORITHM,
        adequate_resolution=adequate,
    )


# --- adversarial vacancy sequences ---------------------------------------

_ADVERSARIAL_DEPARTMENTS = ("d1", "d2", "d3")
_ADVERSARIAL_CATEGORIES = ("c1", "c2")

DecideCallback = Callable[[int, str, FairShareTable, ReservationTable], str]


def prefer_first_category(
    period: int, department: str, fair: FairShareTable, reserved: ReservationTable
) -> str:
    """Pick the first category (in scheme order) the university quota allows.

    Brute-forces the candidate categories one by one; suits
    :func:`adversarial_sequence`, whose periods place exactly one seat.
    """
    i = fair.departments.index(department)
    for j, cat in enumerate(fair.categories):
        entries = [list(row) for row in reserved.entries]
        entries[i][j] += 1
        trial = ReservationTable.from_entries(
            reserved.departments, reserved.categories, entries
        )
        if not within_university_quota(trial, fair):
            return cat
    raise ValueError(
        f"no category keeps the university quota at period {period}"
    )


@dataclass(frozen=True)
class AdversarialRun:
    """The realized adversarial problem, its trace, and the seat decisions."""

    problem: ReservationProblem
    trace: SolutionTrace
    decisions: tuple[tuple[int, str, str], ...]  # (period, department, category)


def adversarial_sequence(periods: int, decide: DecideCallback) -> AdversarialRun:
    """Adaptive vacancy sequence that defeats seat-by-seat assignment.

    Three departments share a two-category half/half scheme.  Odd periods
    hand one vacancy to d3; the following even period hands one vacancy to
    d1 if d3's seat went to the first category, else to d2.  ``decide`` is
    called once per period with the period, the department holding the
    vacancy, the fair share table including that vacancy, and the
    reservations so far; it must return the category for the new seat.  Any
    callback that keeps the university quota ends up pushing some
    department's bias to grow linearly along the odd periods.

    Raises ValueError if the callback's choice violates the university
    quota.
    """
    if periods < 1:
        raise ValueError(f"need at least one period, got {periods}")
    scheme = ReservationScheme(
        _ADVERSARIAL_CATEGORIES, (Fraction(1, 2), Fraction(1, 2))
    )
    depts = _ADVERSARIAL_DEPARTMENTS
    counts = [[0, 0] for _ in depts]
    vacancy_rows: list[tuple[int, int, int]] = []
    decisions = []
    pairs = []
    d3_last_choice = None
    for s in range(1, periods + 1):
        if s % 2:
            i = 2
        else:
            i = 0 if d3_last_choice == _ADVERSARIAL_CATEGORIES[0] else 1
        vacancy_rows.append(tuple(1 if k == i else 0 for k in range(3)))
        problem_so_far = ReservationProblem(depts, scheme, vacancy_rows)
        fair = build_fair_share_table(problem_so_far, s)
        before = ReservationTable.from_entries(
            depts, scheme.categories, [row[:] for row in counts]
        )
        choice = decide(s, depts[i], fair, before)
        if choice not in scheme.categories:
            raise ValueError(f"callback returned unknown category {choice!r}")
        counts[i][scheme.categories.index(choice)] += 1
        reserved = ReservationTable.from_entries(
            depts, scheme.categories, [row[:] for row in counts]
        )
        if within_university_quota(reserved, fair):
            raise ValueError(
                f"callback violated the university quota at period {s}: "
                f"placing the {depts[i]!r} seat in {choice!r} leaves column "
                "totals outside floor/ceil of the fair shares"
            )
        decisions.append((s, depts[i], choice))
        pairs.append((fair, reserved))
        if s % 2:
            d3_last_choice = choice
    problem = ReservationProblem(depts, scheme, vacancy_rows)
    trace = SolutionTrace(problem, "adversarial", tuple(pairs))
    return AdversarialRun(problem, trace, tuple(decisions))
