"""Per-island economic dispatch and cost accounting."""
from .economic import (
    BalanceResult,
    CostComparison,
    DispatchResult,
    IslandReport,
    balance_check,
    compare_to_nominal,
    economic_dispatch,
    ensure_operating_point,
    evaluate_island,
    loaded_lines,
    nominal_dispatch,
    pre_event_flows,
)
