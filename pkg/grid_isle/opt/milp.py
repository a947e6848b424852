"""Construction of the controlled-islanding mixed-integer program."""
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

import numpy as np
from numpy.typing import NDArray
from scipy.sparse import csr_matrix

from ..dispatch.economic import ensure_operating_point, loaded_lines
from ..grid.topology import BusId, GridTopology

logger = logging.getLogger(__name__)

# Pre-event loading at which a line counts as instability-prone
OVERLOAD_FRACTION = 0.95

# Constraint families, in the order their relaxation is tried when diagnosing
# infeasibility. The critical floor is a variable bound, not a row.
RELAXATION_ORDER = (
    "critical_floor",
    "generator_margin",
    "line_limit",
    "partition_coupling",
)
# Rows dropped when a family is relaxed
RELAXED_ROWS = {
    "generator_margin": {"generator_margin"},
    "line_limit": {"line_limit"},
    "partition_coupling": {"partition_coupling", "uncertain_line"},
}


def generator_window(
    p0: float, p_min: float, p_max: float, chi: float
) -> tuple[float, float]:
    """Output window of a committed unit around its pre-event point."""
    lo = p0 * (1 - chi * (p0 - p_min))
    hi = p0 * (1 + chi * (p_max - p0))
    lo, hi = max(lo, p_min), min(hi, p_max)
    return lo, max(lo, hi)


@dataclass
class _Rows:
    """Sparse row accumulator."""

    data: list[float] = field(default_factory=list)
    rows: list[int] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    names: list[str] = field(default_factory=list)
    families: list[str] = field(default_factory=list)

    def add(self, name: str, family: str, coefs: dict[int, float], rhs: float):
        row = len(self.rhs)
        for col, val in coefs.items():
            if val != 0:
                self.rows.append(row)
                self.cols.append(col)
                self.data.append(val)
        self.rhs.append(rhs)
        self.names.append(name)
        self.families.append(family)

    def matrix(self, n_cols: int) -> csr_matrix:
        return csr_matrix(
            (self.data, (self.rows, self.cols)), shape=(len(self.rhs), n_cols)
        )


@dataclass
class MilpInstance:
    """Variables, constraints and objective of one islanding problem.

    Columns are ordered h (buses), w (lines), phi (generators), followed by the
    continuous p (generators), flow (lines), beta (loads) and z (loads). The
    objective is maximized; `constant` holds the part independent of the
    variables so that `c @ x + constant` is the reported objective.
    """

    topology: GridTopology
    anomalous: frozenset[BusId]
    uncertain: frozenset[str]
    lambdas: tuple[float, float, float]
    psi: dict[str, float]
    var_names: list[str]
    c: NDArray[np.float64]
    constant: float
    a_ub: csr_matrix
    b_ub: NDArray[np.float64]
    ub_names: list[str]
    ub_families: list[str]
    a_eq: csr_matrix
    b_eq: NDArray[np.float64]
    eq_names: list[str]
    lb: NDArray[np.float64]
    ub: NDArray[np.float64]
    window: dict[str, tuple[float, float]]
    h_index: dict[BusId, int]
    w_index: dict[str, int]
    phi_index: dict[str, int]
    p_index: dict[str, int]
    flow_index: dict[str, int]
    beta_index: dict[str, int]
    z_index: dict[str, int]

    @property
    def n_vars(self) -> int:
        """Number of columns."""
        return len(self.c)

    @property
    def n_binaries(self) -> int:
        """Number of binary columns, which come first."""
        return len(self.h_index) + len(self.w_index) + len(self.phi_index)

    def binary_family(self, col: int) -> str:
        """Family name of a binary column."""
        if col < len(self.h_index):
            return "h"
        if col < len(self.h_index) + len(self.w_index):
            return "w"
        return "phi"

    def objective(self, x: NDArray[np.float64]) -> float:
        """Objective value of a full assignment."""
        return float(self.c @ x + self.constant)

    def allowed_lines(self, h: dict[BusId, float]) -> dict[str, bool]:
        """Whether each line may be closed under a fixed bus labelling."""
        out = {}
        for ln in self.topology.lines:
            hi, hj = round(h[ln.from_bus]), round(h[ln.to_bus])
            if ln.id in self.uncertain:
                out[ln.id] = hi == 0 and hj == 0
            else:
                out[ln.id] = hi == hj
        return out


def build_milp(
    topology: GridTopology,
    anomalous_buses: Iterable[BusId],
    lambdas: tuple[float, float, float] = (1.0, 1.0, 1.0),
    psi: Union[None, float, dict[str, float]] = None,
    uncertain: Optional[Iterable[str]] = None,
    overload_fraction: Optional[float] = OVERLOAD_FRACTION,
    flows: Optional[dict[str, float]] = None,
) -> MilpInstance:
    """Encode the islanding problem for `topology`.

    Args:
        topology: The grid. Generators without a pre-event output get one from
            the nominal economic dispatch.
        anomalous_buses: Buses anchored to the unhealthy side.
        lambdas: Weights of served load, disconnected lines and disconnected
            generators.
        psi: Service weight of loads left on the unhealthy side, either one value
            for every load or a per-load override of the case values.
        uncertain: Line ids that must open when touching the healthy side. None
            uses the flags set in the case document. Lines incident to anomalous
            buses and loaded lines are always added.
        overload_fraction: Flag lines loaded at or above this fraction of their
            rating in the pre-event flow. None turns the rule off.
        flows: Pre-event line flows, e.g. those of the full grid when
            `topology` is one of its islands. Defaults to `pre_event_flows`.

    Raises:
        ValueError: If an anomalous bus or an uncertain line does not exist, or
            a weight is not positive.
    """
    anomalous = frozenset(anomalous_buses)
    missing = anomalous - set(topology.bus_ids)
    if missing:
        raise ValueError(f"Anomalous buses not in the topology: {sorted(missing)}")
    if len(lambdas) != 3 or min(lambdas) <= 0:
        raise ValueError(f"Objective weights must be three positive values: {lambdas}")

    topology = ensure_operating_point(topology)

    if uncertain is None:
        flagged = {ln.id for ln in topology.lines if ln.uncertain}
    else:
        flagged = set(uncertain)
        unknown = flagged - {ln.id for ln in topology.lines}
        if unknown:
            raise ValueError(f"Unknown uncertain lines: {sorted(unknown)}")
    flagged |= {
        ln.id
        for ln in topology.lines
        if ln.from_bus in anomalous or ln.to_bus in anomalous
    }
    if overload_fraction is not None:
        if not 0 < overload_fraction <= 1:
            raise ValueError(f"overload_fraction {overload_fraction} is not in (0, 1]")
        loaded = loaded_lines(topology, overload_fraction, flows)
        logger.debug(f"Lines at {overload_fraction:.0%} of rating: {sorted(loaded)}")
        flagged |= loaded

    if psi is None:
        psi_map = {d.id: d.psi_d for d in topology.loads}
    elif isinstance(psi, dict):
        psi_map = {d.id: psi.get(d.id, d.psi_d) for d in topology.loads}
    else:
        psi_map = {d.id: float(psi) for d in topology.loads}
    if any(not 0 <= v <= 1 for v in psi_map.values()):
        raise ValueError("psi must lie in [0, 1]")

    names: list[str] = []

    def columns(prefix: str, keys: list) -> dict:
        start = len(names)
        names.extend(f"{prefix}_{k}" for k in keys)
        return {k: start + i for i, k in enumerate(keys)}

    buses = topology.bus_ids
    line_ids = [ln.id for ln in topology.lines]
    gen_ids = [g.id for g in topology.generators]
    load_ids = [d.id for d in topology.loads]
    h_idx = columns("h", buses)
    w_idx = columns("w", line_ids)
    phi_idx = columns("phi", gen_ids)
    p_idx = columns("p", gen_ids)
    f_idx = columns("flow", line_ids)
    beta_idx = columns("beta", load_ids)
    z_idx = columns("z", load_ids)
    n = len(names)

    lb, ub = np.zeros(n), np.ones(n)
    for b in anomalous:
        ub[h_idx[b]] = 0.0

    window = {}
    ineq = _Rows()
    for g in topology.generators:
        lo, hi = generator_window(g.p0, g.p_min, g.p_max, g.chi_g)
        window[g.id] = (lo, hi)
        ub[p_idx[g.id]] = hi
        p, phi = p_idx[g.id], phi_idx[g.id]
        ineq.add(f"gen_hi_{g.id}", "generator_margin", {p: 1, phi: -hi}, 0)
        ineq.add(f"gen_lo_{g.id}", "generator_margin", {p: -1, phi: lo}, 0)

    for ln in topology.lines:
        f, w = f_idx[ln.id], w_idx[ln.id]
        lb[f], ub[f] = ln.p_min, ln.p_max
        ineq.add(f"line_hi_{ln.id}", "line_limit", {f: 1, w: -ln.p_max}, 0)
        ineq.add(f"line_lo_{ln.id}", "line_limit", {f: -1, w: ln.p_min}, 0)

        hi, hj = h_idx[ln.from_bus], h_idx[ln.to_bus]
        if ln.id in flagged:
            ineq.add(f"open_i_{ln.id}", "uncertain_line", {w: 1, hi: 1}, 1)
            ineq.add(f"open_j_{ln.id}", "uncertain_line", {w: 1, hj: 1}, 1)
        else:
            ineq.add(f"cut_ij_{ln.id}", "partition_coupling", {w: 1, hi: 1, hj: -1}, 1)
            ineq.add(f"cut_ji_{ln.id}", "partition_coupling", {w: 1, hi: -1, hj: 1}, 1)

    for d in topology.loads:
        b, z, h = beta_idx[d.id], z_idx[d.id], h_idx[d.bus]
        lb[b] = d.theta_d
        ineq.add(f"z_beta_{d.id}", "served_product", {z: 1, b: -1}, 0)
        ineq.add(f"z_h_{d.id}", "served_product", {z: 1, h: -1}, 0)
        ineq.add(f"z_lo_{d.id}", "served_product", {b: 1, h: 1, z: -1}, 1)

    eq = _Rows()
    for bus in buses:
        coefs: dict[int, float] = {}
        for g in topology.generators_at([bus]):
            coefs[p_idx[g.id]] = 1.0
        for ln in topology.lines:
            if ln.to_bus == bus:
                coefs[f_idx[ln.id]] = coefs.get(f_idx[ln.id], 0.0) + 1.0
            elif ln.from_bus == bus:
                coefs[f_idx[ln.id]] = coefs.get(f_idx[ln.id], 0.0) - 1.0
        for d in topology.loads_at([bus]):
            coefs[beta_idx[d.id]] = -d.p_agg
        eq.add(f"balance_{bus}", "power_balance", coefs, 0.0)

    lam1, lam2, lam3 = lambdas
    c = np.zeros(n)
    constant = 0.0
    for d in topology.loads:
        c[beta_idx[d.id]] += lam1 * d.p_agg * psi_map[d.id]
        c[z_idx[d.id]] += lam1 * d.p_agg * (1 - psi_map[d.id])
    for ln in topology.lines:
        if ln.id not in flagged:
            c[w_idx[ln.id]] += lam2 * ln.omega_l
            constant -= lam2 * ln.omega_l
    for g in topology.generators:
        c[phi_idx[g.id]] += lam3 * g.omega_g
        constant -= lam3 * g.omega_g

    instance = MilpInstance(
        topology=topology,
        anomalous=anomalous,
        uncertain=frozenset(flagged),
        lambdas=(lam1, lam2, lam3),
        psi=psi_map,
        var_names=names,
        c=c,
        constant=constant,
        a_ub=ineq.matrix(n),
        b_ub=np.asarray(ineq.rhs, dtype=np.float64),
        ub_names=ineq.names,
        ub_families=ineq.families,
        a_eq=eq.matrix(n),
        b_eq=np.asarray(eq.rhs, dtype=np.float64),
        eq_names=eq.names,
        lb=lb,
        ub=ub,
        window=window,
        h_index=h_idx,
        w_index=w_idx,
        phi_index=phi_idx,
        p_index=p_idx,
        flow_index=f_idx,
        beta_index=beta_idx,
        z_index=z_idx,
    )
    logger.debug(
        f"Built MILP: {n} variables ({instance.n_binaries} binary), "
        f"{len(instance.b_ub)} inequalities, {len(instance.b_eq)} equalities, "
        f"{len(flagged)} uncertain lines"
    )
    return instance


def dump_lp(instance: MilpInstance) -> str:
    """Human-readable LP-format listing of the instance."""

    def expr(coefs: list[tuple[float, str]]) -> str:
        return " ".join(f"{v:+.6g} {name}" for v, name in coefs) or "0"

    def row_terms(mat: csr_matrix, r: int) -> list[tuple[float, str]]:
        lo, hi = mat.indptr[r], mat.indptr[r + 1]
        return [
            (float(v), instance.var_names[c])
            for c, v in zip(mat.indices[lo:hi], mat.data[lo:hi])
        ]

    obj = [(float(v), instance.var_names[i]) for i, v in enumerate(instance.c) if v]
    lines = [
        f"\\ {instance.topology.name}: anomalous buses {sorted(instance.anomalous)}",
        f"\\ lambdas {instance.lambdas}, objective constant {instance.constant:+.6g}",
        "Maximize",
        f" obj: {expr(obj)}",
        "Subject To",
    ]
    for r, name in enumerate(instance.ub_names):
        lines.append(
            f" {name}: {expr(row_terms(instance.a_ub, r))} <= {instance.b_ub[r]:.6g}"
        )
    for r, name in enumerate(instance.eq_names):
        lines.append(
            f" {name}: {expr(row_terms(instance.a_eq, r))} = {instance.b_eq[r]:.6g}"
        )
    lines.append("Bounds")
    for i, name in enumerate(instance.var_names):
        lines.append(f" {instance.lb[i]:.6g} <= {name} <= {instance.ub[i]:.6g}")
    lines.append("Binaries")
    lines.extend(f" {name}" for name in instance.var_names[: instance.n_binaries])
    lines.append("End")
    return "\n".join(lines) + "\n"
