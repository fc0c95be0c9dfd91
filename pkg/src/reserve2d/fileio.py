"""File formats: problem, scheme, and roster CSVs; JSON/CSV reports.

Input formats (all CSV with a mandatory header):

* problem file, header ``department,period,vacancies``: one row per
  department/period pair with vacancies to fill; missing pairs default to
  zero, and the periods present must be contiguous starting at 1.
  Department order in the file is the problem's department order.
* scheme file, header ``category,numerator,denominator``: one row per
  category with its fraction as an integer ratio; the denominator may be
  left empty to give the fraction in the numerator column as an exact
  decimal or ``p/q`` string.
* roster file, header ``index,category``: positions 1..L in order.

Reports are plain dicts ready for ``json.dumps``; exact rationals are
rendered as ``"p/q"`` strings (integers stay integers) so reports
round-trip losslessly and rerunning a command reproduces them byte for
byte.
"""

from __future__ import annotations

import csv
import io
from fractions import Fraction
from typing import Optional, Sequence, Union

from .core import ReservationProblem, ReservationScheme, Roster

__all__ = [
    "ParseError",
    "parse_problem_file",
    "parse_scheme_file",
    "parse_roster_file",
    "roster_lines",
    "rational",
    "parse_rational",
]


class ParseError(ValueError):
    """An input file does not follow its format; carries path and line."""

    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


def _read_rows(path: str, expected_header: Sequence[str]) -> list[tuple[int, list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise ParseError(path, 0, f"cannot read file: {err.strerror or err}") from err
    stripped = [
        (lineno, [field.strip() for field in row])
        for lineno, row in enumerate(rows, start=1)
        if any(field.strip() for field in row)
    ]
    if not stripped:
        raise ParseError(path, 1, "file is empty")
    header_line, header = stripped[0]
    if [h.lower() for h in header] != list(expected_header):
        raise ParseError(
            path,
            header_line,
            f"expected header {','.join(expected_header)!r}, got {','.join(header)!r}",
        )
    return stripped[1:]


def _parse_int(path: str, line: int, text: str, what: str, minimum: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ParseError(path, line, f"{what} must be an integer, got {text!r}") from None
    if value < minimum:
        raise ParseError(path, line, f"{what} must be >= {minimum}, got {value}")
    return value


def parse_problem_file(path: str, scheme: ReservationScheme) -> ReservationProblem:
    """Read a vacancies CSV into a problem over the given scheme."""
    rows = _read_rows(path, ("department", "period", "vacancies"))
    departments: list[str] = []
    cells: dict[tuple[str, int], int] = {}
    max_period = 0
    for lineno, row in rows:
        if len(row) != 3:
            raise ParseError(path, lineno, f"expected 3 fields, got {len(row)}")
        dept, period_text, vac_text = row
        if not dept:
            raise ParseError(path, lineno, "department identifier is empty")
        period = _parse_int(path, lineno, period_text, "period", 1)
        vacancies = _parse_int(path, lineno, vac_text, "vacancies", 0)
        if dept not in departments:
            departments.append(dept)
        if (dept, period) in cells:
            raise ParseError(
                path, lineno, f"duplicate row for department {dept!r}, period {period}"
            )
        cells[(dept, period)] = vacancies
        max_period = max(max_period, period)
    if max_period == 0:
        raise ParseError(path, rows[-1][0] if rows else 1, "no vacancy rows found")
    periods_present = {p for _, p in cells}
    missing = set(range(1, max_period + 1)) - periods_present
    if missing:
        raise ParseError(
            path,
            rows[-1][0],
            f"periods must be contiguous 1..{max_period}; missing {sorted(missing)}",
        )
    vacancies = tuple(
        tuple(cells.get((d, t), 0) for d in departments)
        for t in range(1, max_period + 1)
    )
    try:
        return ReservationProblem(departments, scheme, vacancies)
    except ValueError as err:
        raise ParseError(path, rows[-1][0], str(err)) from err


def parse_rational(text: str) -> Fraction:
    """Exact rational from a 'p/q' string or a decimal literal as printed."""
    return Fraction(text)


def parse_scheme_file(path: str) -> ReservationScheme:
    """Read a scheme CSV into a reservation scheme."""
    rows = _read_rows(path, ("category", "numerator", "denominator"))
    categories: list[str] = []
    fractions: list[Fraction] = []
    for lineno, row in rows:
        if len(row) != 3:
            raise ParseError(path, lineno, f"expected 3 fields, got {len(row)}")
        cat, num_text, den_text = row
        if not cat:
            raise ParseError(path, lineno, "category identifier is empty")
        if cat in categories:
            raise ParseError(path, lineno, f"duplicate category {cat!r}")
        if den_text:
            numerator = _parse_int(path, lineno, num_text, "numerator", 1)
            denominator = _parse_int(path, lineno, den_text, "denominator", 1)
            fraction = Fraction(numerator, denominator)
        else:
            try:
                fraction = parse_rational(num_text)
            except (ValueError, ZeroDivisionError):
                raise ParseError(
                    path, lineno, f"cannot parse fraction {num_text!r}"
                ) from None
        categories.append(cat)
        fractions.append(fraction)
    try:
        return ReservationScheme(categories, fractions)
    except ValueError as err:
        raise ParseError(path, rows[-1][0], str(err)) from err


def parse_roster_file(
    path: str, categories: Optional[Sequence[str]] = None
) -> Roster:
    """Read a roster CSV (positions 1..L in order).

    When ``categories`` is given (normally the scheme's), every position
    must use one of them and the roster carries that full category list;
    otherwise the categories are the distinct ones appearing.
    """
    rows = _read_rows(path, ("index", "category"))
    known = set(categories) if categories is not None else None
    assignment: list[str] = []
    for lineno, row in rows:
        if len(row) != 2:
            raise ParseError(path, lineno, f"expected 2 fields, got {len(row)}")
        index = _parse_int(path, lineno, row[0], "index", 1)
        if index != len(assignment) + 1:
            raise ParseError(
                path, lineno, f"expected index {len(assignment) + 1}, got {index}"
            )
        if not row[1]:
            raise ParseError(path, lineno, "category identifier is empty")
        if known is not None and row[1] not in known:
            raise ParseError(
                path, lineno,
                f"unknown category {row[1]!r}; scheme has {sorted(known)}",
            )
        assignment.append(row[1])
    if not assignment:
        raise ParseError(path, 1, "roster has no positions")
    cats = tuple(categories) if categories is not None else tuple(dict.fromkeys(assignment))
    return Roster(categories=cats, assignment=tuple(assignment))


def roster_lines(roster: Roster) -> str:
    """Render a roster in its file format (one line per position)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["index", "category"])
    for position, category in enumerate(roster.assignment, start=1):
        writer.writerow([position, category])
    return out.getvalue()


def rational(value: Union[int, Fraction]) -> Union[int, str]:
    """JSON-friendly exact rendering: ints stay ints, else 'p/q'."""
    f = Fraction(value)
    if f.denominator == 1:
        return int(f)
    return f"{f.numerator}/{f.denominator}"
