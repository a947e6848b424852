"""Immutable grid data model and case-document ingestion."""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Optional, Union

from ..errors import CaseSchemaError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "grid-isle/1"
DEFAULT_PSI = 0.5
DEFAULT_SHED_USD_PER_MWH = 75.0

BusId = int


@dataclass(frozen=True)
class Bus:
    """A network node."""

    id: BusId


@dataclass(frozen=True)
class CostSegment:
    """One piece of a piecewise-linear cost curve, valid up to `mw_upto`."""

    mw_upto: float
    usd_per_mwh: float


@dataclass(frozen=True)
class Line:
    """A branch between two buses with directional real-power limits."""

    id: str
    from_bus: BusId
    to_bus: BusId
    p_min: float
    p_max: float
    omega_l: float = 1.0
    uncertain: bool = False

    @property
    def corridor(self) -> str:
        """Label shared by parallel circuits, smaller bus id first."""
        i, j = sorted((self.from_bus, self.to_bus))
        return f"{i}-{j}"

    def other(self, bus: BusId) -> BusId:
        """The endpoint opposite to `bus`."""
        return self.to_bus if bus == self.from_bus else self.from_bus


@dataclass(frozen=True)
class Generator:
    """A dispatchable unit with a convex piecewise-linear cost curve."""

    id: str
    bus: BusId
    p_min: float
    p_max: float
    p0: Optional[float]
    chi_g: float
    omega_g: float = 1.0
    cost_curve: tuple[CostSegment, ...] = ()
    startup_usd: float = 0.0
    shutdown_usd: float = 0.0
    q_max: Optional[float] = None

    @property
    def q_capacity(self) -> float:
        """Reactive capability, defaulting to the real-power nameplate."""
        return self.p_max if self.q_max is None else self.q_max

    def segments(self) -> list[tuple[float, float]]:
        """(width MW, $/MWh) pieces clipped to the nameplate range [0, p_max]."""
        pieces, lo = [], 0.0
        for seg in self.cost_curve:
            hi = min(seg.mw_upto, self.p_max)
            if hi > lo:
                pieces.append((hi - lo, seg.usd_per_mwh))
                lo = hi
        return pieces

    def cost(self, p: float) -> float:
        """Hourly cost in $ of producing `p` MW."""
        total, remaining = 0.0, p
        for width, price in self.segments():
            used = min(width, max(remaining, 0.0))
            total += used * price
            remaining -= used
        return total


@dataclass(frozen=True)
class Load:
    """An aggregate demand with a critical floor that must always be served."""

    id: str
    bus: BusId
    p_agg: float
    q_agg: float = 0.0
    theta_d: float = 0.0
    psi_d: float = DEFAULT_PSI


@dataclass(frozen=True)
class GridTopology:
    """Buses, lines, generators and loads of a case."""

    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    name: str = ""
    shed_usd_per_mwh: float = DEFAULT_SHED_USD_PER_MWH
    _line_index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        """Check the referential invariants."""
        bus_ids = [b.id for b in self.buses]
        if len(set(bus_ids)) != len(bus_ids):
            raise ValueError("Bus ids must be unique")
        line_ids = [ln.id for ln in self.lines]
        if len(set(line_ids)) != len(line_ids):
            raise ValueError("Line ids must be unique")

        known = set(bus_ids)
        for ln in self.lines:
            if ln.from_bus == ln.to_bus:
                raise ValueError(f"Line '{ln.id}' is a self-loop")
            if ln.from_bus not in known or ln.to_bus not in known:
                raise ValueError(f"Line '{ln.id}' references an unknown bus")
        for item in (*self.generators, *self.loads):
            if item.bus not in known:
                raise ValueError(f"'{item.id}' is attached to unknown bus {item.bus}")

        object.__setattr__(self, "_line_index", {ln.id: ln for ln in self.lines})

    @property
    def bus_ids(self) -> list[BusId]:
        """Bus ids in case order."""
        return [b.id for b in self.buses]

    def line(self, line_id: str) -> Line:
        """Look up a line by id."""
        return self._line_index[line_id]

    def generators_at(self, buses: Iterable[BusId]) -> list[Generator]:
        """Generators attached to any of `buses`."""
        buses = set(buses)
        return [g for g in self.generators if g.bus in buses]

    def loads_at(self, buses: Iterable[BusId]) -> list[Load]:
        """Loads attached to any of `buses`."""
        buses = set(buses)
        return [d for d in self.loads if d.bus in buses]

    def lines_within(self, buses: Iterable[BusId]) -> list[Line]:
        """Lines with both endpoints in `buses`."""
        buses = set(buses)
        return [ln for ln in self.lines if ln.from_bus in buses and ln.to_bus in buses]

    def lines_by_corridor(self, corridors: Iterable[str]) -> list[Line]:
        """Lines whose corridor label is in `corridors`; raises on unknown labels."""
        wanted = set(corridors)
        found = [ln for ln in self.lines if ln.corridor in wanted]
        missing = wanted - {ln.corridor for ln in found}
        if missing:
            raise ValueError(f"Unknown line corridors: {sorted(missing)}")
        return found

    def subtopology(self, buses: Iterable[BusId], name: Optional[str] = None):
        """Restrict the case to `buses`, keeping the lines fully inside them.

        Weights keep their values from the parent case.
        """
        keep = set(buses)
        missing = keep - set(self.bus_ids)
        if missing:
            raise ValueError(f"Unknown buses: {sorted(missing)}")

        return GridTopology(
            buses=tuple(b for b in self.buses if b.id in keep),
            lines=tuple(self.lines_within(keep)),
            generators=tuple(self.generators_at(keep)),
            loads=tuple(self.loads_at(keep)),
            name=name or f"{self.name} [{len(keep)} buses]",
            shed_usd_per_mwh=self.shed_usd_per_mwh,
        )

    def with_uncertain(self, line_ids: Iterable[str]) -> "GridTopology":
        """Copy of the topology where exactly `line_ids` are flagged uncertain."""
        flagged = set(line_ids)
        unknown = flagged - set(self._line_index)
        if unknown:
            raise ValueError(f"Unknown lines: {sorted(unknown)}")

        lines = tuple(replace(ln, uncertain=ln.id in flagged) for ln in self.lines)
        return replace(self, lines=lines)

    def with_operating_point(self, p0: dict[str, float]) -> "GridTopology":
        """Copy of the topology with the pre-event outputs replaced from `p0`."""
        gens = tuple(replace(g, p0=p0.get(g.id, g.p0)) for g in self.generators)
        return replace(self, generators=gens)


def _path(*parts: Union[str, int]) -> str:
    out = ""
    for part in parts:
        out += f"[{part}]" if isinstance(part, int) else (f".{part}" if out else part)
    return out


def _require(doc: dict, key: str, path: str, kind: type = float) -> Any:
    if key not in doc:
        raise CaseSchemaError(_path(path, key), "missing required field")
    return _coerce(doc[key], _path(path, key), kind)


def _coerce(value: Any, path: str, kind: type) -> Any:
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise CaseSchemaError(path, f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise CaseSchemaError(path, f"expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, (str, int)) or isinstance(value, bool):
            raise CaseSchemaError(path, f"expected a string id, got {value!r}")
        return str(value)
    if kind is bool:
        if not isinstance(value, bool):
            raise CaseSchemaError(path, f"expected a boolean, got {value!r}")
        return value
    raise TypeError(f"Unsupported field kind {kind}")


def _optional(doc: dict, key: str, path: str, default: Any, kind: type = float):
    if doc.get(key) is None:
        return default
    return _coerce(doc[key], _path(path, key), kind)


def _records(doc: dict, key: str) -> list[dict]:
    records = doc.get(key)
    if not isinstance(records, list) or not records:
        raise CaseSchemaError(key, "expected a non-empty list")
    for i, rec in enumerate(records):
        if not isinstance(rec, dict):
            raise CaseSchemaError(_path(key, i), "expected an object")
    return records


def _parse_cost_curve(raw: Any, path: str, p_max: float) -> tuple[CostSegment, ...]:
    if not isinstance(raw, list) or not raw:
        raise CaseSchemaError(path, "expected a non-empty list of cost segments")

    segments = []
    for k, seg in enumerate(raw):
        seg_path = _path(path, k)
        if not isinstance(seg, dict):
            raise CaseSchemaError(seg_path, "expected an object")
        segments.append(
            CostSegment(
                mw_upto=_require(seg, "mw_upto", seg_path),
                usd_per_mwh=_require(seg, "usd_per_mwh", seg_path),
            )
        )

    prev = CostSegment(0.0, float("-inf"))
    for k, seg in enumerate(segments):
        if seg.mw_upto <= prev.mw_upto:
            raise CaseSchemaError(
                _path(path, k, "mw_upto"), "breakpoints must be strictly increasing"
            )
        if seg.usd_per_mwh < prev.usd_per_mwh or seg.usd_per_mwh < 0:
            raise CaseSchemaError(
                _path(path, k, "usd_per_mwh"),
                "cost curve must be convex and nondecreasing",
            )
        prev = seg
    if segments[-1].mw_upto < p_max:
        raise CaseSchemaError(path, f"segments end before p_max_mw={p_max}")
    return tuple(segments)


def load_case(source: Union[dict, str, Path]) -> GridTopology:
    """Validate a case document and build its topology.

    Args:
        source: The parsed document, or a path to a JSON file holding it.

    Returns:
        The validated topology. Line and generator weights default to the rating
        or nameplate and are normalized so that their maximum is one.

    Raises:
        CaseSchemaError: If a field is missing, mistyped or inconsistent. The
            error message starts with the path of the offending field.
    """
    if isinstance(source, (str, Path)):
        with open(source) as f:
            doc = json.load(f)
    else:
        doc = source
    if not isinstance(doc, dict) or not doc:
        raise CaseSchemaError("$", "expected a non-empty case document")

    schema = doc.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise CaseSchemaError("schema", f"unsupported schema '{schema}'")

    buses = []
    for i, rec in enumerate(_records(doc, "buses")):
        buses.append(Bus(_require(rec, "id", _path("buses", i), int)))
    bus_ids = {b.id for b in buses}
    if len(bus_ids) != len(buses):
        raise CaseSchemaError("buses", "bus ids must be unique")

    def _bus_ref(rec: dict, key: str, path: str) -> BusId:
        bus = _require(rec, key, path, int)
        if bus not in bus_ids:
            raise CaseSchemaError(_path(path, key), f"bus {bus} does not exist")
        return bus

    lines, ratings, line_weights = [], [], []
    for i, rec in enumerate(_records(doc, "lines")):
        path = _path("lines", i)
        line_id = _require(rec, "id", path, str)
        i_bus, j_bus = _bus_ref(rec, "from", path), _bus_ref(rec, "to", path)
        if i_bus == j_bus:
            raise CaseSchemaError(_path(path, "to"), "self-loops are not allowed")
        p_min, p_max = _require(rec, "p_min_mw", path), _require(rec, "p_max_mw", path)
        if not p_min <= 0 <= p_max:
            raise CaseSchemaError(path, "limits must satisfy p_min_mw <= 0 <= p_max_mw")
        weight = _optional(rec, "weight", path, None)
        if weight is not None and weight <= 0:
            raise CaseSchemaError(_path(path, "weight"), "weights must be positive")
        uncertain = _optional(rec, "uncertain", path, False, bool)
        lines.append((line_id, i_bus, j_bus, p_min, p_max, uncertain))
        ratings.append(max(p_max, -p_min))
        line_weights.append(weight)
    if len({rec[0] for rec in lines}) != len(lines):
        raise CaseSchemaError("lines", "line ids must be unique")

    line_raw = [r if w is None else w for r, w in zip(ratings, line_weights)]
    line_scale = max(line_raw) or 1.0
    line_objs = tuple(
        Line(lid, i_bus, j_bus, p_min, p_max, raw / line_scale, uncertain)
        for (lid, i_bus, j_bus, p_min, p_max, uncertain), raw in zip(lines, line_raw)
    )

    gen_fields = []
    for i, rec in enumerate(_records(doc, "generators")):
        path = _path("generators", i)
        gen_id = _require(rec, "id", path, str)
        bus = _bus_ref(rec, "bus", path)
        p_min, p_max = _require(rec, "p_min_mw", path), _require(rec, "p_max_mw", path)
        if not 0 <= p_min <= p_max:
            raise CaseSchemaError(path, "limits must satisfy 0 <= p_min_mw <= p_max_mw")
        p0 = _optional(rec, "p0_mw", path, None)
        if p0 is not None and not p_min <= p0 <= p_max:
            raise CaseSchemaError(
                _path(path, "p0_mw"), "must lie within [p_min_mw, p_max_mw]"
            )
        chi = _require(rec, "chi_per_mw", path)
        if chi < 0:
            raise CaseSchemaError(_path(path, "chi_per_mw"), "must be nonnegative")
        curve = _parse_cost_curve(
            rec.get("cost_segments"), _path(path, "cost_segments"), p_max
        )
        weight = _optional(rec, "weight", path, None)
        if weight is not None and weight <= 0:
            raise CaseSchemaError(_path(path, "weight"), "weights must be positive")
        gen_fields.append(
            dict(
                id=gen_id,
                bus=bus,
                p_min=p_min,
                p_max=p_max,
                p0=p0,
                chi_g=chi,
                omega_g=p_max if weight is None else weight,
                cost_curve=curve,
                startup_usd=_optional(rec, "startup_usd", path, 0.0),
                shutdown_usd=_optional(rec, "shutdown_usd", path, 0.0),
                q_max=_optional(rec, "q_max_mvar", path, None),
            )
        )
    if len({g["id"] for g in gen_fields}) != len(gen_fields):
        raise CaseSchemaError("generators", "generator ids must be unique")
    gen_scale = max(g["omega_g"] for g in gen_fields) or 1.0
    generators = tuple(
        Generator(**{**g, "omega_g": g["omega_g"] / gen_scale}) for g in gen_fields
    )

    loads = []
    for i, rec in enumerate(doc.get("loads") or []):
        path = _path("loads", i)
        if not isinstance(rec, dict):
            raise CaseSchemaError(path, "expected an object")
        theta = _require(rec, "critical_fraction", path)
        psi = _optional(rec, "psi", path, DEFAULT_PSI)
        if not 0 <= theta <= 1:
            raise CaseSchemaError(_path(path, "critical_fraction"), "must be in [0, 1]")
        if not 0 <= psi <= 1:
            raise CaseSchemaError(_path(path, "psi"), "must be in [0, 1]")
        p_agg = _require(rec, "p_mw", path)
        if p_agg < 0:
            raise CaseSchemaError(_path(path, "p_mw"), "must be nonnegative")
        loads.append(
            Load(
                id=_require(rec, "id", path, str),
                bus=_bus_ref(rec, "bus", path),
                p_agg=p_agg,
                q_agg=_optional(rec, "q_mva", path, 0.0),
                theta_d=theta,
                psi_d=psi,
            )
        )
    if len({d.id for d in loads}) != len(loads):
        raise CaseSchemaError("loads", "load ids must be unique")

    topology = GridTopology(
        buses=tuple(buses),
        lines=line_objs,
        generators=generators,
        loads=tuple(loads),
        name=str(doc.get("name", "")),
        shed_usd_per_mwh=_optional(
            doc, "shed_usd_per_mwh", "", DEFAULT_SHED_USD_PER_MWH
        ),
    )
    logger.debug(
        f"Loaded case '{topology.name}': {len(buses)} buses, {len(line_objs)} lines, "
        f"{len(generators)} generators, {len(loads)} loads"
    )
    return topology


def emit_case(topology: GridTopology) -> dict:
    """Serialize a topology back to a `grid-isle/1` case document."""
    return {
        "schema": SCHEMA_VERSION,
        "name": topology.name,
        "shed_usd_per_mwh": topology.shed_usd_per_mwh,
        "buses": [{"id": b.id} for b in topology.buses],
        "lines": [
            {
                "id": ln.id,
                "from": ln.from_bus,
                "to": ln.to_bus,
                "p_min_mw": ln.p_min,
                "p_max_mw": ln.p_max,
                "weight": ln.omega_l,
                "uncertain": ln.uncertain,
            }
            for ln in topology.lines
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "p_min_mw": g.p_min,
                "p_max_mw": g.p_max,
                "p0_mw": g.p0,
                "q_max_mvar": g.q_max,
                "chi_per_mw": g.chi_g,
                "weight": g.omega_g,
                "cost_segments": [
                    {"mw_upto": s.mw_upto, "usd_per_mwh": s.usd_per_mwh}
                    for s in g.cost_curve
                ],
                "startup_usd": g.startup_usd,
                "shutdown_usd": g.shutdown_usd,
            }
            for g in topology.generators
        ],
        "loads": [
            {
                "id": d.id,
                "bus": d.bus,
                "p_mw": d.p_agg,
                "q_mva": d.q_agg,
                "critical_fraction": d.theta_d,
                "psi": d.psi_d,
            }
            for d in topology.loads
        ],
    }
