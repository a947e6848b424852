"""Per-island economic dispatch, load shedding and cost accounting."""
import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import csr_matrix

from ..errors import CriticalityError, DispatchInfeasibleError
from ..grid.partition import SideCapacity, side_capacity
from ..grid.topology import BusId, Generator, GridTopology, Line

logger = logging.getLogger(__name__)

TOL = 1e-9


@dataclass(frozen=True)
class DispatchResult:
    """Generator outputs, line flows and served demand of a dispatch."""

    dispatch: dict[str, float]
    flows: dict[str, float]
    served: dict[str, float]
    cost_usd: float

    @property
    def served_mw(self) -> float:
        """Total served demand."""
        return sum(self.served.values())


@dataclass(frozen=True)
class BalanceResult:
    """Real-power balance of an island with proportional shedding."""

    served: dict[str, float]
    p_gen_max: float
    p_dem: float
    served_mw: float
    shed_mw: float
    shed_fraction: float
    shed_bound: float


@dataclass
class IslandReport:
    """Capacities, dispatch, shedding and costs of one island."""

    island_id: str
    buses: list[BusId]
    capacity: SideCapacity
    dispatch: dict[str, float]
    cost_usd: float
    served_mw: float
    shed_mw: float
    shed_fraction: float
    shed_bound: float
    shed_cost_usd: float = 0.0
    startup_usd: float = 0.0
    disconnected_lines: list[str] = field(default_factory=list)
    healthy: Optional[bool] = None

    @property
    def operating_cost_usd(self) -> float:
        """Generation cost plus the cost of curtailed demand."""
        return self.cost_usd + self.shed_cost_usd

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        out = asdict(self)
        out["operating_cost_usd"] = self.operating_cost_usd
        return out


@dataclass(frozen=True)
class CostComparison:
    """Operating cost before and after islanding."""

    pre_usd: float
    post_usd: float

    @property
    def delta_usd(self) -> float:
        """Cost increase caused by islanding."""
        return self.post_usd - self.pre_usd

    @property
    def percent(self) -> float:
        """Increase relative to the pre-event cost, in percent."""
        return 100 * self.delta_usd / self.pre_usd if self.pre_usd else 0.0

    def to_dict(self) -> dict:
        """Convert to a dictionary."""
        return dict(
            pre_usd=self.pre_usd,
            post_usd=self.post_usd,
            delta_usd=self.delta_usd,
            percent=self.percent,
        )


def _pieces(gen: Generator) -> list[tuple[float, float]]:
    # Units without a cost curve produce for free up to their nameplate
    return gen.segments() or [(gen.p_max, 0.0)]


def economic_dispatch(
    topology: GridTopology,
    buses: Optional[Iterable[BusId]] = None,
    served: Optional[dict[str, float]] = None,
    committed: Optional[Iterable[str]] = None,
    lines: Optional[Iterable[str]] = None,
    shed_price: Optional[float] = None,
) -> DispatchResult:
    """Minimum-cost dispatch of an island as a linear program.

    Each generator output is split into its cost segments, so convex curves
    fill their cheapest pieces first. Flows on the island's closed lines stay
    within their directional limits and every bus balances.

    Args:
        topology: The grid.
        buses: Buses of the island; None means the whole grid.
        served: Demand to meet per load id in MW; defaults to the full demand.
        committed: Ids of the generators allowed to run; defaults to every
            generator in the island.
        lines: Ids of the closed lines; defaults to every line inside the island.
        shed_price: If given, loads may be curtailed down to their critical
            floor at this price per MWh instead of being served exactly.

    Raises:
        DispatchInfeasibleError: If the committed minimum outputs exceed the
            demand, the capacity falls short of it, or the line limits prevent
            a balanced dispatch.
    """
    island = set(topology.bus_ids if buses is None else buses)
    gens = topology.generators_at(island)
    if committed is not None:
        on = set(committed)
        gens = [g for g in gens if g.id in on]
    loads = topology.loads_at(island)
    target = {d.id: d.p_agg for d in loads}
    if served is not None:
        target.update({k: v for k, v in served.items() if k in target})
    if lines is None:
        used: list[Line] = topology.lines_within(island)
    else:
        closed = set(lines)
        used = [ln for ln in topology.lines_within(island) if ln.id in closed]

    demand = sum(target.values())
    p_min = sum(g.p_min for g in gens)
    if shed_price is None:
        if p_min > demand + TOL:
            raise DispatchInfeasibleError(
                f"Committed minimum output {p_min:.1f} MW exceeds the demand "
                f"{demand:.1f} MW; decommit units"
            )
        if sum(g.p_max for g in gens) < demand - TOL:
            raise DispatchInfeasibleError(
                f"Committed capacity {sum(g.p_max for g in gens):.1f} MW cannot "
                f"meet the demand {demand:.1f} MW"
            )

    # Columns: cost segments, line flows, then flexible loads
    cost, lo, hi, owner = [], [], [], []
    for g in gens:
        for width, price in _pieces(g):
            cost.append(price)
            lo.append(0.0)
            hi.append(width)
            owner.append(g)
    n_seg = len(cost)
    for ln in used:
        cost.append(0.0)
        lo.append(ln.p_min)
        hi.append(ln.p_max)
    n_flex = len(loads) if shed_price is not None else 0
    for d in loads[:n_flex]:
        cost.append(-shed_price)
        lo.append(min(d.theta_d * d.p_agg, target[d.id]))
        hi.append(target[d.id])
    n = len(cost)
    if n == 0:
        return DispatchResult({}, {}, target, 0.0)

    bus_row = {b: r for r, b in enumerate(sorted(island))}
    a_eq = np.zeros((len(bus_row), n))
    b_eq = np.zeros(len(bus_row))
    for k, g in enumerate(owner):
        a_eq[bus_row[g.bus], k] = 1.0
    for k, ln in enumerate(used, start=n_seg):
        a_eq[bus_row[ln.to_bus], k] += 1.0
        a_eq[bus_row[ln.from_bus], k] -= 1.0
    for k, d in enumerate(loads):
        if k < n_flex:
            a_eq[bus_row[d.bus], n_seg + len(used) + k] = -1.0
        else:
            b_eq[bus_row[d.bus]] += target[d.id]

    a_ub = np.zeros((len(gens), n))
    b_ub = np.array([-g.p_min for g in gens])
    for k, g in enumerate(owner):
        a_ub[gens.index(g), k] = -1.0

    res = linprog(
        np.asarray(cost),
        A_ub=csr_matrix(a_ub) if len(gens) else None,
        b_ub=b_ub if len(gens) else None,
        A_eq=csr_matrix(a_eq),
        b_eq=b_eq,
        bounds=np.column_stack([lo, hi]),
        method="highs-ds",
    )
    if res.status != 0:
        raise DispatchInfeasibleError(
            f"No balanced dispatch within the line limits of {len(island)} buses "
            f"({res.message})"
        )

    x = res.x
    out = {g.id: 0.0 for g in topology.generators_at(island)}
    for k, g in enumerate(owner):
        out[g.id] += float(x[k])
    flows = {ln.id: float(x[n_seg + k]) for k, ln in enumerate(used)}
    result_served = dict(target)
    for k, d in enumerate(loads[:n_flex]):
        result_served[d.id] = float(x[n_seg + len(used) + k])
    gen_cost = sum(g.cost(max(out[g.id], 0.0)) for g in gens)
    return DispatchResult(out, flows, result_served, gen_cost)


def nominal_dispatch(topology: GridTopology) -> DispatchResult:
    """Economic dispatch of the whole grid with every unit committed."""
    return economic_dispatch(topology)


def ensure_operating_point(topology: GridTopology) -> GridTopology:
    """Fill missing pre-event outputs from the nominal economic dispatch."""
    if all(g.p0 is not None for g in topology.generators):
        return topology
    logger.info("Pre-event operating point missing; using the nominal dispatch")
    dispatch = nominal_dispatch(topology).dispatch
    missing = {g.id: dispatch[g.id] for g in topology.generators if g.p0 is None}
    return topology.with_operating_point(missing)


def pre_event_flows(topology: GridTopology) -> dict[str, float]:
    """Line flows of the pre-event operating point.

    The injections (pre-event outputs minus demand) are routed as a DC power
    flow whose susceptances are the squared line ratings, which is the flow with
    the least summed squared loading. Demand is scaled to the total pre-event
    output when the two differ, as in a sub-topology.
    """
    topology = ensure_operating_point(topology)
    bus_row = {b: r for r, b in enumerate(topology.bus_ids)}
    gen = np.zeros(len(bus_row))
    load = np.zeros(len(bus_row))
    for g in topology.generators:
        gen[bus_row[g.bus]] += g.p0
    for d in topology.loads:
        load[bus_row[d.bus]] += d.p_agg
    if load.sum() > TOL:
        load *= gen.sum() / load.sum()
    elif gen.sum() > TOL:
        logger.warning("No demand to route the pre-event output to")
        return {ln.id: 0.0 for ln in topology.lines}

    incidence = np.zeros((len(bus_row), len(topology.lines)))
    weight = np.zeros(len(topology.lines))
    for k, ln in enumerate(topology.lines):
        incidence[bus_row[ln.to_bus], k] = 1.0
        incidence[bus_row[ln.from_bus], k] = -1.0
        weight[k] = max(ln.p_max, -ln.p_min) ** 2

    laplacian = (incidence * weight) @ incidence.T
    potential = np.linalg.pinv(laplacian) @ (load - gen)
    flows = weight * (incidence.T @ potential)
    return {ln.id: float(f) for ln, f in zip(topology.lines, flows)}


def loaded_lines(
    topology: GridTopology,
    fraction: float,
    flows: Optional[dict[str, float]] = None,
) -> set[str]:
    """Ids of lines loaded at or above `fraction` of their directional rating."""
    if flows is None:
        flows = pre_event_flows(topology)
    out = set()
    for ln in topology.lines:
        f = flows.get(ln.id, 0.0)
        rating = ln.p_max if f >= 0 else -ln.p_min
        if rating > 0 and abs(f) >= fraction * rating - 1e-6:
            out.add(ln.id)
    return out


def balance_check(
    topology: GridTopology,
    buses: Iterable[BusId],
    committed: Optional[Iterable[str]] = None,
) -> BalanceResult:
    """Serve `min(demand, capacity)` with shedding spread proportionally above floors.

    Every load keeps its critical floor; the remaining shortfall is taken from
    the non-critical parts of all loads in proportion to their size.

    Raises:
        CriticalityError: If the critical demand exceeds the island capacity.
    """
    island = set(buses)
    gens = topology.generators_at(island)
    if committed is not None:
        on = set(committed)
        gens = [g for g in gens if g.id in on]
    loads = topology.loads_at(island)

    p_cap = sum(g.p_max for g in gens)
    p_dem = sum(d.p_agg for d in loads)
    floor = sum(d.theta_d * d.p_agg for d in loads)
    if floor > p_cap + TOL:
        raise CriticalityError(
            f"Critical demand {floor:.1f} MW exceeds the island capacity "
            f"{p_cap:.1f} MW"
        )

    headroom = p_dem - floor
    frac = 1.0 if headroom <= TOL else (min(p_dem, p_cap) - floor) / headroom
    frac = float(np.clip(frac, 0.0, 1.0))
    served = {
        d.id: d.theta_d * d.p_agg + frac * (1 - d.theta_d) * d.p_agg for d in loads
    }
    served_mw = sum(served.values())
    shed = p_dem - served_mw
    return BalanceResult(
        served=served,
        p_gen_max=p_cap,
        p_dem=p_dem,
        served_mw=served_mw,
        shed_mw=shed,
        shed_fraction=shed / p_dem if p_dem > 0 else 0.0,
        shed_bound=max(0.0, p_dem - p_cap) / p_dem if p_dem > 0 else 0.0,
    )


def evaluate_island(
    topology: GridTopology,
    buses: Iterable[BusId],
    island_id: str = "1",
    committed: Optional[Iterable[str]] = None,
    lines: Optional[Iterable[str]] = None,
    disconnected: Sequence[str] = (),
    healthy: Optional[bool] = None,
) -> IslandReport:
    """Balance, dispatch and cost one island.

    The proportional shedding of `balance_check` sets the demand of the
    dispatch. If the line limits cannot carry it, the island is re-dispatched
    with curtailment priced at the case's shedding price.

    Raises:
        CriticalityError: If the critical demand exceeds the island capacity.
        DispatchInfeasibleError: If no dispatch exists even with curtailment.
    """
    buses = sorted(set(buses))
    committed = None if committed is None else list(committed)
    balance = balance_check(topology, buses, committed)
    try:
        result = economic_dispatch(topology, buses, balance.served, committed, lines)
    except CriticalityError:
        raise
    except DispatchInfeasibleError as e:
        logger.warning(f"Island {island_id}: {e}; curtailing at the shedding price")
        result = economic_dispatch(
            topology,
            buses,
            None,
            committed,
            lines,
            shed_price=topology.shed_usd_per_mwh,
        )

    served_mw = result.served_mw
    shed = max(balance.p_dem - served_mw, 0.0)
    startup = sum(
        g.startup_usd
        for g in topology.generators_at(buses)
        if g.p0 == 0 and result.dispatch.get(g.id, 0.0) > TOL
    )
    report = IslandReport(
        island_id=island_id,
        buses=buses,
        capacity=side_capacity(topology, buses),
        dispatch=result.dispatch,
        cost_usd=result.cost_usd,
        served_mw=served_mw,
        shed_mw=shed,
        shed_fraction=shed / balance.p_dem if balance.p_dem > 0 else 0.0,
        shed_bound=balance.shed_bound,
        shed_cost_usd=shed * topology.shed_usd_per_mwh,
        startup_usd=startup,
        disconnected_lines=sorted(disconnected),
        healthy=healthy,
    )
    logger.debug(
        f"Island {island_id}: {len(buses)} buses, cost ${report.cost_usd:.2f}, "
        f"shed {100 * report.shed_fraction:.1f}%"
    )
    return report


def compare_to_nominal(
    pre: Union[IslandReport, Sequence[IslandReport], float],
    post: Union[IslandReport, Sequence[IslandReport]],
) -> CostComparison:
    """Compare summed operating costs before and after islanding."""

    def total(reports) -> float:
        if isinstance(reports, (int, float)):
            return float(reports)
        if isinstance(reports, IslandReport):
            reports = [reports]
        return sum(r.operating_cost_usd for r in reports)

    return CostComparison(total(pre), total(post))
