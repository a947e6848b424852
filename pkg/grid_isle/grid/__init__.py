"""Grid data model and partition bookkeeping."""
from .partition import (
    Partition,
    SideCapacity,
    connected_components,
    cut_corridors,
    cut_set,
    partition_capacities,
    side_capacity,
)
from .topology import (
    SCHEMA_VERSION,
    Bus,
    CostSegment,
    Generator,
    GridTopology,
    Line,
    Load,
    emit_case,
    load_case,
)
