import copy

import pytest

from grid_isle.errors import CaseSchemaError
from grid_isle.grid.topology import GridTopology, emit_case, load_case


def test_rts24_counts(rts24: GridTopology):
    assert len(rts24.buses) == 24
    assert len(rts24.lines) == 38
    assert len(rts24.generators) == 32
    assert len(rts24.loads) == 17


def test_empty_document_is_rejected():
    with pytest.raises(CaseSchemaError):
        load_case({})


def test_dangling_bus_reference(rts24_doc: dict):
    doc = copy.deepcopy(rts24_doc)
    doc["lines"][0]["to"] = 99
    with pytest.raises(CaseSchemaError, match="bus 99 does not exist") as info:
        load_case(doc)
    assert info.value.path == "lines[0].to"


def test_missing_field_names_its_path(two_bus_doc: dict):
    doc = copy.deepcopy(two_bus_doc)
    del doc["generators"][0]["chi_per_mw"]
    with pytest.raises(CaseSchemaError, match=r"generators\[0\]\.chi_per_mw"):
        load_case(doc)


def test_nonconvex_cost_curve_is_rejected(two_bus_doc: dict):
    doc = copy.deepcopy(two_bus_doc)
    doc["generators"][0]["cost_segments"] = [
        {"mw_upto": 50.0, "usd_per_mwh": 30.0},
        {"mw_upto": 100.0, "usd_per_mwh": 10.0},
    ]
    with pytest.raises(CaseSchemaError, match="convex"):
        load_case(doc)


def test_emit_case_reloads_to_the_same_topology(rts24: GridTopology):
    assert load_case(emit_case(rts24)) == rts24


def test_weights_are_normalized(rts24: GridTopology):
    assert max(ln.omega_l for ln in rts24.lines) == pytest.approx(1.0)
    assert max(g.omega_g for g in rts24.generators) == pytest.approx(1.0)
    assert all(0 < ln.omega_l <= 1 for ln in rts24.lines)


def test_subtopology_keeps_inner_lines(rts24: GridTopology):
    sub = rts24.subtopology([2, 4, 7, 8, 9])
    assert sorted(sub.bus_ids) == [2, 4, 7, 8, 9]
    assert {ln.corridor for ln in sub.lines} == {"2-4", "4-9", "7-8", "8-9"}
    assert all(g.bus in {2, 4, 7, 8, 9} for g in sub.generators)
    assert sub.shed_usd_per_mwh == rts24.shed_usd_per_mwh

    with pytest.raises(ValueError):
        rts24.subtopology([1, 99])


def test_lines_by_corridor(rts24: GridTopology):
    assert [ln.corridor for ln in rts24.lines_by_corridor(["1-2"])] == ["1-2"]
    with pytest.raises(ValueError, match="Unknown line corridors"):
        rts24.lines_by_corridor(["1-24"])


def test_piecewise_cost(two_bus: GridTopology):
    gen = two_bus.generators[0]
    assert gen.cost(10.0) == pytest.approx(200.0)
    assert gen.cost(0.0) == 0.0


def test_with_uncertain_flags_exactly_the_given_lines(rts24: GridTopology):
    flagged = rts24.with_uncertain(["L07"])
    assert [ln.id for ln in flagged.lines if ln.uncertain] == ["L07"]
    with pytest.raises(ValueError):
        rts24.with_uncertain(["nope"])
