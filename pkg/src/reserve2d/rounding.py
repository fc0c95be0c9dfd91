"""Controlled rounding of fair share tables.

A fair share table has integer row totals but generally fractional entries
and column totals.  Appending one synthetic row with entries
``(1 - frac(column_sum)) mod 1`` makes every column total integral while
keeping every row total integral, so in the extended table each row and
column either contains no fractional cell or at least two.  That guarantees
a cycle of fractional cells along which entries can be alternately raised
and lowered without touching any line total.

Each rounding step picks such a cycle, labels its cells odd/even along the
cycle, and moves all odd cells up and even cells down by the largest step
d+ that keeps every cell within floor/ceil of itself — or odd cells down
and even cells up by the analogous d−.  Choosing the first branch with
probability d−/(d− + d+) makes the pre-step table the exact mixture of the
two outcomes, so every entry's expectation is preserved while at least one
cell becomes integral.  After at most as many steps as there were
fractional cells the table is integral; dropping the synthetic row leaves a
reservation table that meets both the per-department and the
university-level quotas by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .core import FairShareTable, ReservationTable

__all__ = [
    "ExtendedTable",
    "FractionCycle",
    "DecompositionStep",
    "extend_table",
    "find_fraction_cycle",
    "decompose_once",
    "controlled_round",
]


@dataclass(frozen=True)
class ExtendedTable:
    """A fair share table plus the synthetic balancing row (always last).

    Every row and column sums to an integer; entries evolve during rounding
    but the link to the source table is kept for provenance.
    """

    source: FairShareTable
    entries: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self):
        m, n = len(self.source.departments), len(self.source.categories)
        if len(self.entries) != m + 1 or any(len(r) != n for r in self.entries):
            raise ValueError(
                f"extended table must be {m + 1} x {n} (source rows plus one synthetic row)"
            )
        for r, row in enumerate(self.entries):
            if any(v < 0 for v in row):
                raise ValueError(f"row {r} has a negative entry")
            if sum(row).denominator != 1:
                raise ValueError(f"row {r} does not sum to an integer")
        for j in range(n):
            col = sum(row[j] for row in self.entries)
            if col.denominator != 1:
                raise ValueError(f"column {j} does not sum to an integer")

    @property
    def is_integral(self) -> bool:
        return all(v.denominator == 1 for row in self.entries for v in row)

    def fraction_cells(self) -> tuple[tuple[int, int], ...]:
        """Row-major coordinates of the fractional entries."""
        return tuple(
            (i, j)
            for i, row in enumerate(self.entries)
            for j, v in enumerate(row)
            if v.denominator != 1
        )


def extend_table(fair: FairShareTable) -> ExtendedTable:
    """Append the synthetic row that makes every column total integral."""
    synthetic = tuple((1 - (total % 1)) % 1 for total in fair.column_totals)
    return ExtendedTable(fair, fair.entries + (synthetic,))


@dataclass(frozen=True)
class FractionCycle:
    """An even alternating cycle of distinct cells.

    Consecutive cells share a row then a column, alternating; the closing
    pair (last, first) shares a column.  Cells at even positions (0-based)
    are the cycle's *odd* cells: the ones a raise-odd step moves up.
    """

    cells: tuple[tuple[int, int], ...]

    def __post_init__(self):
        cells = self.cells
        if len(cells) < 4 or len(cells) % 2:
            raise ValueError(
                f"a cycle needs an even number (>= 4) of cells, got {len(cells)}"
            )
        if len(set(cells)) != len(cells):
            raise ValueError("cycle cells must be distinct")
        for s in range(len(cells)):
            a, b = cells[s], cells[(s + 1) % len(cells)]
            if s % 2 == 0:
                if a[0] != b[0]:
                    raise ValueError(
                        f"cells {a} and {b} must share a row (step {s} is a row step)"
                    )
            elif a[1] != b[1]:
                raise ValueError(
                    f"cells {a} and {b} must share a column (step {s} is a column step)"
                )

    @property
    def odd_cells(self) -> tuple[tuple[int, int], ...]:
        return self.cells[0::2]

    @property
    def even_cells(self) -> tuple[tuple[int, int], ...]:
        return self.cells[1::2]


def find_fraction_cycle(table: ExtendedTable) -> Optional[FractionCycle]:
    """Deterministic cycle of fractional cells, or None if none remain.

    The walk starts at the row-major-smallest fractional cell and alternates
    row and column moves, always to the smallest fractional cell on the
    current line other than the cell it arrived by; it closes at the first
    line revisited and discards the prefix walked before that line.  Because
    every line's total is integral, any line holding one fractional cell
    holds two, so the walk cannot stall.  The cycle is normalized to start
    at its row-major-smallest cell, moving along that cell's row first.
    """
    fractions = table.fraction_cells()
    if not fractions:
        return None
    by_row: dict[int, list[tuple[int, int]]] = {}
    by_col: dict[int, list[tuple[int, int]]] = {}
    for cell in fractions:
        by_row.setdefault(cell[0], []).append(cell)
        by_col.setdefault(cell[1], []).append(cell)

    start = fractions[0]
    # Line nodes: ("r", index) or ("c", index).  The first move runs along
    # the starting cell's row, so the walk begins at its column node.
    node = ("c", start[1])
    seen = {node: 0}
    nodes = [node]
    edges: list[tuple[int, int]] = []
    arrived_by: Optional[tuple[int, int]] = None
    while True:
        kind, index = nodes[-1]
        line = by_row[index] if kind == "r" else by_col[index]
        cell = next(c for c in line if c != arrived_by)
        nxt = ("c", cell[1]) if kind == "r" else ("r", cell[0])
        edges.append(cell)
        if nxt in seen:
            cycle = edges[seen[nxt]:]
            break
        seen[nxt] = len(nodes)
        nodes.append(nxt)
        arrived_by = cell

    anchor = min(range(len(cycle)), key=lambda s: cycle[s])
    cycle = cycle[anchor:] + cycle[:anchor]
    if cycle[0][0] != cycle[1][0]:  # first step must run along the anchor's row
        cycle = [cycle[0]] + cycle[:0:-1]
    return FractionCycle(tuple(cycle))


@dataclass(frozen=True)
class DecompositionStep:
    """One randomized rounding step with both branches materialized.

    The pre-step table equals probability * raise_odd +
    (1 - probability) * raise_even entry by entry; validated exactly.
    """

    table: ExtendedTable
    cycle: FractionCycle
    d_plus: Fraction
    d_minus: Fraction
    probability: Fraction
    raise_odd: ExtendedTable
    raise_even: ExtendedTable
    branch: str
    result: ExtendedTable

    def __post_init__(self):
        if self.d_plus <= 0 or self.d_minus <= 0:
            raise ValueError("both adjustments must be positive")
        if self.probability != self.d_minus / (self.d_minus + self.d_plus):
            raise ValueError("branch probability must equal d-/(d- + d+)")
        if self.branch not in ("raise-odd", "raise-even"):
            raise ValueError(f"unknown branch {self.branch!r}")
        expected = self.raise_odd if self.branch == "raise-odd" else self.raise_even
        if self.result is not expected:
            raise ValueError("result must be the branch named by 'branch'")
        beta = self.probability
        for v_row, odd_row, even_row in zip(
            self.table.entries, self.raise_odd.entries, self.raise_even.entries
        ):
            for v, o, e in zip(v_row, odd_row, even_row):
                if beta * o + (1 - beta) * e != v:
                    raise ValueError("branches do not mix back to the source table")


def _shifted(table: ExtendedTable, cycle: FractionCycle, delta: Fraction) -> ExtendedTable:
    """Odd cells moved by +delta, even cells by -delta."""
    grid = [list(row) for row in table.entries]
    for i, j in cycle.odd_cells:
        grid[i][j] += delta
    for i, j in cycle.even_cells:
        grid[i][j] -= delta
    return ExtendedTable(table.source, tuple(tuple(row) for row in grid))


def decompose_once(
    table: ExtendedTable,
    cycle: Optional[FractionCycle],
    rng,
    *,
    on_step: Optional[Callable[[DecompositionStep], None]] = None,
) -> ExtendedTable:
    """One randomized step along a cycle (default: the deterministic one).

    Strictly reduces the number of fractional cells, never moves an entry
    outside floor/ceil of its current (hence original) value, and leaves
    every line total unchanged; the expectation of the result is the input.
    """
    if cycle is None:
        cycle = find_fraction_cycle(table)
        if cycle is None:
            raise ValueError("table is already integral; nothing to decompose")
    d_plus = d_minus = None
    for s, (i, j) in enumerate(cycle.cells):
        v = table.entries[i][j]
        if v.denominator == 1:
            raise RuntimeError(
                f"internal error: degenerate cycle (cell ({i}, {j}) is integral)"
            )
        room_up = (v.numerator // v.denominator + 1) - v
        room_down = v - v.numerator // v.denominator
        up, down = (room_up, room_down) if s % 2 == 0 else (room_down, room_up)
        d_plus = up if d_plus is None else min(d_plus, up)
        d_minus = down if d_minus is None else min(d_minus, down)
    probability = Fraction(d_minus, d_minus + d_plus)
    raise_odd = _shifted(table, cycle, d_plus)
    raise_even = _shifted(table, cycle, -d_minus)
    take_odd = rng.bernoulli(probability)
    step = DecompositionStep(
        table=table,
        cycle=cycle,
        d_plus=d_plus,
        d_minus=d_minus,
        probability=probability,
        raise_odd=raise_odd,
        raise_even=raise_even,
        branch="raise-odd" if take_odd else "raise-even",
        result=raise_odd if take_odd else raise_even,
    )
    if on_step is not None:
        on_step(step)
    return step.result


def controlled_round(
    fair: FairShareTable,
    rng,
    *,
    on_step: Optional[Callable[[DecompositionStep], None]] = None,
) -> ReservationTable:
    """Round a fair share table to an integer table, unbiasedly.

    Every entry of the result is floor or ceil of its fair share, row totals
    are preserved exactly, column totals land within floor/ceil of the fair
    column totals, and the expectation of every entry (margins included) is
    the fair share itself.
    """
    table = extend_table(fair)
    budget = len(table.fraction_cells())
    for _ in range(budget):
        cycle = find_fraction_cycle(table)
        if cycle is None:
            break
        before = len(table.fraction_cells())
        table = decompose_once(table, cycle, rng, on_step=on_step)
        if len(table.fraction_cells()) >= before:
            raise RuntimeError(
                "internal error: rounding step failed to reduce fractional cells"
            )
    if not table.is_integral:
        raise RuntimeError("internal error: rounding did not terminate in budget")
    return ReservationTable.from_entries(
        fair.departments,
        fair.categories,
        tuple(tuple(int(v) for v in row) for row in table.entries[:-1]),
    )
