"""Acceptance suite: ten end-to-end checks, one test per criterion.

``pytest -v tests/test_acceptance.py`` prints one pass/fail line per
criterion.  Where a criterion carries a runtime budget the test asserts it
with a monotonic clock around the computation.  Every Monte Carlo check
runs under a fixed seed, so each run is reproducible bit for bit; expected
frequencies are checked against independently computed references (exact
binomial sums, frozen tables) rather than against the code under test.
"""

import json
import math
import time
from fractions import Fraction

import numpy as np

from reserve2d import (
    ReservationProblem,
    ReservationScheme,
    SplitStream,
    bias_of,
    build_fair_share_table,
    controlled_round,
    draw_roster,
    prefer_first_category,
    run_court,
    run_government,
    run_proposed,
    tail_diagnostic,
    within_department_quota,
    within_university_quota,
)
from reserve2d.analysis import adversarial_sequence
from reserve2d.cli import main
from reserve2d.rounding import FractionCycle, decompose_once, extend_table
from reserve2d.roster import draw_block

from conftest import ForcedRng, mod3_roster

F = Fraction

GOVERNMENT_TABLES = (
    ((0, 2), (1, 0), (0, 2), (1, 0)),
    ((0, 4), (2, 0), (0, 4), (2, 0)),
    ((0, 6), (3, 0), (0, 6), (3, 0)),
)
COURT_TABLES = (
    ((0, 2), (0, 1), (0, 2), (0, 1)),
    ((1, 3), (0, 2), (1, 3), (0, 2)),
    ((2, 4), (1, 2), (2, 4), (1, 2)),
)


def test_criterion_01_worked_example_tables(four_dept_problem):
    """Government and court runs on the running example reproduce all six
    reservation tables exactly; < 1 s."""
    start = time.monotonic()
    roster = mod3_roster(18)
    government = run_government(four_dept_problem, roster)
    court = run_court(four_dept_problem, roster)
    assert tuple(res.entries for _, res in government.periods) == GOVERNMENT_TABLES
    assert tuple(res.entries for _, res in court.periods) == COURT_TABLES
    elapsed = time.monotonic() - start
    assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_criterion_02_fair_share_tables(two_dept_problem):
    """The 10%-scheme two-department fair share tables come out exactly,
    margins included; < 1 s."""
    start = time.monotonic()
    first = build_fair_share_table(two_dept_problem, 1)
    second = build_fair_share_table(two_dept_problem, 2)
    assert first.entries == ((F(9, 10), F(81, 10)), (F(4, 5), F(36, 5)))
    assert first.row_totals == (9, 8)
    assert first.column_totals == (F(17, 10), F(153, 10))
    assert second.entries == ((F(13, 5), F(117, 5)), (F(3, 2), F(27, 2)))
    assert second.row_totals == (26, 15)
    assert second.column_totals == (F(41, 10), F(369, 10))
    elapsed = time.monotonic() - start
    assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_criterion_03_rounding_quota_safety():
    """1,000 random single-period problems (m, n <= 6, vacancies <= 20,
    random rational schemes): every controlled rounding stays within both
    quota rules; zero failures; < 30 s."""
    start = time.monotonic()
    stream = SplitStream(20260819)
    for index in range(1000):
        sub = stream.child(index)
        m = 2 + sub.randrange(5)
        n = 2 + sub.randrange(5)
        weights = [1 + sub.randrange(9) for _ in range(n)]
        total = sum(weights)
        scheme = ReservationScheme(
            tuple(f"c{j}" for j in range(1, n + 1)),
            tuple(F(w, total) for w in weights),
        )
        problem = ReservationProblem(
            tuple(f"d{i}" for i in range(1, m + 1)),
            scheme,
            (tuple(sub.randrange(21) for _ in range(m)),),
        )
        fair = build_fair_share_table(problem, 1)
        rounded = controlled_round(fair, sub.child(0))
        assert within_department_quota(rounded, fair) == []
        assert within_university_quota(rounded, fair) == []
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"took {elapsed:.1f}s"


def test_criterion_04_rounding_unbiasedness(two_dept_problem):
    """100,000 roundings of the first-period 10%-scheme table: every
    entry's empirical mean sits within 3 standard errors of its fair
    share (column totals included); < 60 s."""
    start = time.monotonic()
    fair = build_fair_share_table(two_dept_problem, 1)
    replications = 100_000
    master = SplitStream(8675309)
    cells = [[0, 0], [0, 0]]
    squares = [[0, 0], [0, 0]]
    columns = [0, 0]
    column_squares = [0, 0]
    for r in range(replications):
        rounded = controlled_round(fair, master.child(r))
        for i in (0, 1):
            for j in (0, 1):
                value = rounded.entries[i][j]
                cells[i][j] += value
                squares[i][j] += value * value
        for j in (0, 1):
            total = rounded.column_totals[j]
            columns[j] += total
            column_squares[j] += total * total

    def assert_unbiased(total, square_total, target):
        mean = total / replications
        variance = square_total / replications - mean * mean
        se = math.sqrt(variance / replications)
        assert se > 0
        assert abs(mean - float(target)) < 3 * se

    for i in (0, 1):
        for j in (0, 1):
            assert_unbiased(cells[i][j], squares[i][j], fair.entries[i][j])
    for j in (0, 1):
        assert_unbiased(columns[j], column_squares[j], fair.column_totals[j])
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_criterion_05_decomposition_identity(three_dept_problem, third_scheme):
    """Every iteration of both randomized algorithms satisfies
    beta*V1 + (1-beta)*V2 = V as an exact rational identity, re-verified
    here from the materialized branches; the known 8-cycle on the
    three-department example splits with probabilities exactly 1/3, 2/3."""
    fair = build_fair_share_table(three_dept_problem, 1)
    steps = []
    controlled_round(fair, SplitStream(424242), on_step=steps.append)
    assert steps, "the example is fractional, so at least one step runs"
    for step in steps:
        beta = step.probability
        assert 0 < beta < 1
        for vrow, orow, erow in zip(
            step.table.entries, step.raise_odd.entries, step.raise_even.entries
        ):
            for v, odd, even in zip(vrow, orow, erow):
                assert beta * odd + (1 - beta) * even == v

    flow_steps = []
    draw_block(third_scheme, None, SplitStream(97), on_step=flow_steps.append)
    assert flow_steps
    for step in flow_steps:
        beta = step.probability
        assert 0 < beta < 1
        for edge, forward, backward in zip(
            step.network.edges,
            step.raise_forward.edges,
            step.raise_backward.edges,
        ):
            assert beta * forward.flow + (1 - beta) * backward.flow == edge.flow

    eight_cycle = FractionCycle(
        ((0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 1), (3, 1), (3, 0))
    )
    captured = []
    decompose_once(
        extend_table(fair), eight_cycle, ForcedRng(True), on_step=captured.append
    )
    (step,) = captured
    assert step.probability == F(1, 3)
    assert 1 - step.probability == F(2, 3)


def test_criterion_06_roster_prefix_quota(third_scheme):
    """10,000 rosters of length 300 under the one-third scheme: every
    prefix count stays within one seat of q/3, and each position's
    marginal frequency of the reserved category sits within 3 standard
    errors of 1/3; < 60 s."""
    start = time.monotonic()
    replications, length = 10_000, 300
    master = SplitStream(5551212)
    hits = np.empty((replications, length), dtype=np.int8)
    for r in range(replications):
        roster = draw_roster(scheme=third_scheme, length=length, rng=master.child(r))
        hits[r] = np.fromiter(
            (category == "c1" for category in roster.assignment),
            dtype=np.int8,
            count=length,
        )
    prefix = np.cumsum(hits, axis=1, dtype=np.int64)
    q = np.arange(1, length + 1, dtype=np.int64)
    # |count - q/3| < 1 in exact integers: |3*count - q| <= 2
    assert int(np.abs(3 * prefix - q).max()) <= 2

    marginal = hits.mean(axis=0)
    se = np.sqrt(marginal * (1 - marginal) / replications)
    assert np.all(np.abs(marginal - 1 / 3) < 3 * se)
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_criterion_07_proposed_quota_guarantee(four_dept_problem):
    """10,000 seeded runs of the per-department lottery on the running
    example produce zero department-quota violations in all periods;
    < 60 s."""
    start = time.monotonic()
    master = SplitStream(123456)
    for r in range(10_000):
        trace = run_proposed(four_dept_problem, master.child(r).key)
        for fair, reserved in trace.periods:
            assert within_department_quota(reserved, fair) == []
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_criterion_08_column_total_tails():
    """100 one-vacancy departments under the half/half scheme, 100,000
    replications: the reserved column total's deviation from 50 obeys the
    exponential tail bounds (within 3 binomial standard errors), and the
    empirical tails match the exact Binomial(100, 1/2) oracle two-sided;
    < 120 s."""
    start = time.monotonic()
    scheme = ReservationScheme(("c1", "c2"), (F(1, 2), F(1, 2)))
    problem = ReservationProblem(
        tuple(f"d{i}" for i in range(1, 101)), scheme, ((1,) * 100,)
    )
    replications = 100_000
    grid = (2, 4, 6, 8, 10)
    diagnostic = tail_diagnostic(problem, "c1", 1, replications, grid, seed=77)
    assert diagnostic.fair_total == 50

    # each department's single seat goes to c1 independently with
    # probability 1/2, so the column total is exactly Binomial(100, 1/2)
    weights = [math.comb(100, k) for k in range(101)]
    scale = 2**100

    for b, upper, lower, upper_bound, lower_bound in zip(
        grid,
        diagnostic.upper_frequency,
        diagnostic.lower_frequency,
        diagnostic.upper_bound,
        diagnostic.lower_bound,
    ):
        assert upper_bound == math.exp(-(b**2) / 150)
        assert lower_bound == math.exp(-(b**2) / 100)
        for frequency, bound in ((upper, upper_bound), (lower, lower_bound)):
            se = math.sqrt(float(frequency) * (1 - float(frequency)) / replications)
            assert float(frequency) <= bound + 3 * se

        exact_upper = F(sum(weights[50 + b :]), scale)
        exact_lower = F(sum(weights[: 50 - b + 1]), scale)
        for frequency, exact in ((upper, exact_upper), (lower, exact_lower)):
            se = math.sqrt(float(exact) * (1 - float(exact)) / replications)
            assert abs(float(frequency - exact)) < 3 * se
    elapsed = time.monotonic() - start
    assert elapsed < 120.0, f"took {elapsed:.1f}s"


def test_criterion_09_adversarial_bias_growth():
    """The adaptive vacancy sequence against the quota-respecting greedy
    callback drives some department bias to magnitude 2 over 8 periods,
    strictly increasing step by step; < 10 s."""
    start = time.monotonic()
    run = adversarial_sequence(8, prefer_first_category)
    maxima = []
    for fair, reserved in run.trace.periods:
        bias = bias_of(reserved, fair)
        maxima.append(max(abs(v) for row in bias.internal for v in row))
    assert maxima == [F(1, 2), F(1, 2), F(1), F(1), F(3, 2), F(3, 2), F(2), F(2)]
    construction = maxima[0::2]  # the odd periods place the forcing seat
    assert all(a < b for a, b in zip(construction, construction[1:]))
    assert maxima[-1] >= 2
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"took {elapsed:.1f}s"


def test_criterion_10_solution_comparison(tmp_path, four_dept_problem):
    """The comparison experiment at its default synthesis ranges: the
    lottery's department biases stay strictly inside (-1, 1) in every
    period, while the pooled-roster baseline's maximum |bias| grows
    without bound on the running example."""
    scheme_path = tmp_path / "scheme.csv"
    scheme_path.write_text("category,numerator,denominator\nc1,1,3\nc2,2,3\n")
    out_path = tmp_path / "compare.json"
    code = main(
        [
            "compare",
            "--scheme",
            str(scheme_path),
            "--synthesize",
            "--replications",
            "20",
            "--seed",
            "20260819",
            "--format",
            "json",
            "-o",
            str(out_path),
        ]
    )
    assert code == 0
    report = json.loads(out_path.read_text())
    assert report["synthesized"] is True
    assert 8 <= len(report["problem"]["departments"]) <= 50
    assert report["problem"]["periods"] == 9
    proposed = [
        entry
        for entry in report["series"]
        if entry["solution"] == "proposed" and entry["scope"] == "department"
    ]
    assert sorted(entry["period"] for entry in proposed) == list(range(1, 10))
    for entry in proposed:
        assert F(entry["minimum"]) > -1
        assert F(entry["maximum"]) < 1

    government = run_government(four_dept_problem, mod3_roster(18))
    maxima = [bias_of(res, fair).max_magnitude for fair, res in government.periods]
    assert maxima == [F(2, 3), F(4, 3), F(2)]
    assert all(a < b for a, b in zip(maxima, maxima[1:]))
