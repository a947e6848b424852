"""Healthy/unhealthy bookkeeping over a topology."""
from dataclasses import asdict, dataclass
from typing import Iterable

from .topology import BusId, GridTopology, Line


@dataclass(frozen=True)
class Partition:
    """Split of the buses into a healthy and an unhealthy side."""

    healthy: frozenset[BusId]
    unhealthy: frozenset[BusId]

    @classmethod
    def from_unhealthy(
        cls, topology: GridTopology, unhealthy: Iterable[BusId]
    ) -> "Partition":
        """Build a partition whose healthy side is every other bus."""
        unhealthy = frozenset(unhealthy)
        return cls.of(topology, frozenset(topology.bus_ids) - unhealthy, unhealthy)

    @classmethod
    def of(
        cls,
        topology: GridTopology,
        healthy: Iterable[BusId],
        unhealthy: Iterable[BusId],
    ) -> "Partition":
        """Build and validate a partition of the topology's buses."""
        healthy, unhealthy = frozenset(healthy), frozenset(unhealthy)
        if healthy & unhealthy:
            raise ValueError(f"Buses on both sides: {sorted(healthy & unhealthy)}")
        if healthy | unhealthy != set(topology.bus_ids):
            missing = set(topology.bus_ids) - (healthy | unhealthy)
            extra = (healthy | unhealthy) - set(topology.bus_ids)
            raise ValueError(
                f"Partition does not cover the buses (missing {sorted(missing)}, "
                f"unknown {sorted(extra)})"
            )
        return cls(healthy, unhealthy)

    def swapped(self) -> "Partition":
        """The same split with the side labels exchanged."""
        return Partition(self.unhealthy, self.healthy)


@dataclass(frozen=True)
class SideCapacity:
    """Capacity and demand sums over one side of a partition."""

    p_gen_max: float = 0.0
    p_dem: float = 0.0
    q_gen_max: float = 0.0
    q_dem: float = 0.0

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        return asdict(self)


def side_capacity(topology: GridTopology, buses: Iterable[BusId]) -> SideCapacity:
    """Sum generator maxima and demands over `buses`."""
    buses = set(buses)
    gens = topology.generators_at(buses)
    loads = topology.loads_at(buses)
    return SideCapacity(
        p_gen_max=sum(g.p_max for g in gens),
        p_dem=sum(d.p_agg for d in loads),
        q_gen_max=sum(g.q_capacity for g in gens),
        q_dem=sum(d.q_agg for d in loads),
    )


def partition_capacities(
    topology: GridTopology, partition: Partition
) -> dict[str, SideCapacity]:
    """Per-side capacity summary keyed by `healthy` and `unhealthy`."""
    return {
        "healthy": side_capacity(topology, partition.healthy),
        "unhealthy": side_capacity(topology, partition.unhealthy),
    }


def cut_set(topology: GridTopology, partition: Partition) -> list[Line]:
    """Lines with exactly one endpoint on the healthy side."""
    return [
        ln
        for ln in topology.lines
        if (ln.from_bus in partition.healthy) != (ln.to_bus in partition.healthy)
    ]


def cut_corridors(topology: GridTopology, partition: Partition) -> set[str]:
    """Corridor labels of the cut set, parallel circuits collapsed."""
    return {ln.corridor for ln in cut_set(topology, partition)}


def connected_components(
    buses: Iterable[BusId], lines: Iterable[Line]
) -> list[frozenset[BusId]]:
    """Connected components of the graph, ordered by their smallest bus id."""
    parent = {b: b for b in buses}

    def find(b: BusId) -> BusId:
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        return b

    for ln in lines:
        ri, rj = find(ln.from_bus), find(ln.to_bus)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    groups: dict[BusId, set[BusId]] = {}
    for b in parent:
        groups.setdefault(find(b), set()).add(b)
    return sorted((frozenset(g) for g in groups.values()), key=min)
