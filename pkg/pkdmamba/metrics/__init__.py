from .costs import (
    FLOPS_CONVENTION,
    CostReport,
    FlopsBreakdown,
    accuracy,
    cost_report,
    cumulative_flops_fraction,
    flops_breakdown,
    flops_estimate,
    param_count,
)
from .reporting import emit_report, read_csv, write_csv, write_eval, write_round_log

__all__ = [
    "FLOPS_CONVENTION",
    "CostReport",
    "FlopsBreakdown",
    "accuracy",
    "cost_report",
    "cumulative_flops_fraction",
    "flops_breakdown",
    "flops_estimate",
    "param_count",
    "emit_report",
    "read_csv",
    "write_csv",
    "write_eval",
    "write_round_log",
]
