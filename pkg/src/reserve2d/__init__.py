"""Two-dimensional reservation tables.

Exact fair-share accounting for vacancies split across departments and
beneficiary categories, controlled rounding into reservation tables that
meet both department and university quotas, unbiased roster lotteries, the
pooled (government) and per-department (court) roster baselines, and
analysis tools for quota violations and biases.
"""

from .core import (
    BiasTable,
    FairShareTable,
    PeriodRangeError,
    QuotaViolation,
    ReservationProblem,
    ReservationScheme,
    ReservationTable,
    Roster,
    SolutionTrace,
    bias_of,
    build_fair_share_table,
    is_monotone,
    within_department_quota,
    within_university_quota,
)
from .rounding import (
    DecompositionStep,
    ExtendedTable,
    FractionCycle,
    controlled_round,
    decompose_once,
    extend_table,
    find_fraction_cycle,
)
from .roster import (
    FlowEdge,
    FlowNetwork,
    FlowStep,
    IntegralBlock,
    SchemeTable,
    build_flow_network,
    build_scheme_table,
    decompose_flow_once,
    draw_block,
    draw_roster,
    find_flow_cycle,
    minimal_height,
)
from .solutions import (
    EstimatedTable,
    RosterLengthError,
    SolutionConfig,
    estimate_expected_table,
    run_court,
    run_government,
    run_proposed,
    run_solution,
)
from .analysis import (
    AdversarialRun,
    BiasSummary,
    TailDiagnostic,
    ViolationStats,
    adversarial_sequence,
    bias_trace,
    prefer_first_category,
    tail_diagnostic,
    violation_stats,
)
from .rng import ALGORITHM, SplitStream

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ALGORITHM",
    "SplitStream",
    "BiasTable",
    "FairShareTable",
    "PeriodRangeError",
    "QuotaViolation",
    "ReservationProblem",
    "ReservationScheme",
    "ReservationTable",
    "Roster",
    "SolutionTrace",
    "bias_of",
    "build_fair_share_table",
    "is_monotone",
    "within_department_quota",
    "within_university_quota",
    "DecompositionStep",
    "ExtendedTable",
    "FractionCycle",
    "controlled_round",
    "decompose_once",
    "extend_table",
    "find_fraction_cycle",
    "FlowEdge",
    "FlowNetwork",
    "FlowStep",
    "IntegralBlock",
    "SchemeTable",
    "build_flow_network",
    "build_scheme_table",
    "decompose_flow_once",
    "draw_block",
    "draw_roster",
    "find_flow_cycle",
    "minimal_height",
    "EstimatedTable",
    "RosterLengthError",
    "SolutionConfig",
    "estimate_expected_table",
    "run_court",
    "run_government",
    "run_proposed",
    "run_solution",
    "AdversarialRun",
    "BiasSummary",
    "TailDiagnostic",
    "ViolationStats",
    "adversarial_sequence",
    "bias_trace",
    "prefer_first_category",
    "tail_diagnostic",
    "violation_stats",
]
