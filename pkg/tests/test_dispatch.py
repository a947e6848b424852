from dataclasses import replace

import pytest

from grid_isle.dispatch.economic import (
    balance_check,
    compare_to_nominal,
    economic_dispatch,
    evaluate_island,
    loaded_lines,
    nominal_dispatch,
    pre_event_flows,
)
from grid_isle.errors import CriticalityError, DispatchInfeasibleError
from grid_isle.grid.topology import (
    Bus,
    CostSegment,
    Generator,
    GridTopology,
    Load,
    Line,
    load_case,
)


def single_bus(load_mw: float) -> GridTopology:
    """Two units with convex curves sharing one bus."""
    return GridTopology(
        buses=(Bus(1),),
        lines=(),
        generators=(
            Generator(
                "A",
                1,
                0.0,
                60.0,
                30.0,
                0.01,
                cost_curve=(CostSegment(20.0, 10.0), CostSegment(60.0, 35.0)),
            ),
            Generator(
                "B",
                1,
                0.0,
                50.0,
                30.0,
                0.01,
                cost_curve=(CostSegment(30.0, 18.0), CostSegment(50.0, 22.0)),
            ),
        ),
        loads=(Load("D", 1, load_mw, theta_d=0.2),),
        name="single-bus",
    )


def test_toy_dispatch_costs_200(two_bus: GridTopology):
    result = economic_dispatch(two_bus, served={"D2": 10.0})
    assert result.dispatch["G1"] == pytest.approx(10.0)
    assert result.flows["L1"] == pytest.approx(10.0)
    assert result.cost_usd == pytest.approx(200.0)


@pytest.mark.parametrize("load_mw", [5.0, 25.0, 48.0, 71.0, 110.0])
def test_dispatch_matches_grid_search(load_mw: float):
    topology = single_bus(load_mw)
    a, b = topology.generators
    best = min(
        a.cost(pa) + b.cost(load_mw - pa)
        for pa in (float(k) for k in range(0, 61))
        if 0 <= load_mw - pa <= b.p_max
    )
    result = economic_dispatch(topology)
    assert result.cost_usd == pytest.approx(best)
    assert sum(result.dispatch.values()) == pytest.approx(load_mw)


def test_dispatch_is_monotone_in_demand():
    costs = [
        economic_dispatch(single_bus(100.0), served={"D": mw}).cost_usd
        for mw in range(0, 101, 10)
    ]
    assert all(x <= y + 1e-9 for x, y in zip(costs, costs[1:]))


def test_dispatch_infeasibility(two_bus: GridTopology):
    with pytest.raises(DispatchInfeasibleError, match="cannot meet"):
        economic_dispatch(two_bus, served={"D2": 150.0})

    stiff = replace(two_bus, generators=(replace(two_bus.generators[0], p_min=20.0),))
    with pytest.raises(DispatchInfeasibleError, match="decommit"):
        economic_dispatch(stiff, served={"D2": 10.0})


def test_balance_with_surplus(two_bus: GridTopology):
    balance = balance_check(two_bus, [1, 2])
    assert balance.shed_mw == 0.0
    assert balance.shed_bound == 0.0
    assert balance.served == {"D2": 50.0}


def test_proportional_shedding_keeps_floors():
    topology = single_bus(150.0)
    # 110 MW of capacity, 30 MW critical
    balance = balance_check(topology, [1])
    assert balance.served_mw == pytest.approx(110.0)
    assert balance.shed_fraction == pytest.approx(40 / 150)
    assert balance.shed_bound == pytest.approx(40 / 150)
    assert balance.served["D"] >= 0.2 * 150.0


def test_critical_demand_above_capacity(two_bus_doc: dict):
    load = {"id": "D2", "bus": 2, "p_mw": 150.0, "critical_fraction": 0.9}
    topology = load_case({**two_bus_doc, "loads": [load]})
    with pytest.raises(CriticalityError, match="exceeds the island capacity"):
        balance_check(topology, [1, 2])
    with pytest.raises(CriticalityError):
        evaluate_island(topology, [1, 2])


def test_shed_bound_of_rts24_island(rts24: GridTopology):
    balance = balance_check(rts24, [2, 4, 7, 8, 9])
    assert balance.p_gen_max == pytest.approx(502.0)
    assert balance.p_dem == pytest.approx(642.0)
    assert balance.shed_bound == pytest.approx(0.218, abs=5e-4)


def test_island_report_conserves_power(two_bus: GridTopology):
    report = evaluate_island(two_bus, [1, 2], island_id="1", healthy=True)
    assert sum(report.dispatch.values()) == pytest.approx(report.served_mw)
    assert report.served_mw == pytest.approx(50.0)
    assert report.shed_mw == pytest.approx(0.0)
    assert report.cost_usd == pytest.approx(1000.0)
    assert report.operating_cost_usd == pytest.approx(1000.0)
    assert report.to_dict()["capacity"]["p_gen_max"] == pytest.approx(100.0)


def test_line_limit_forces_priced_curtailment(two_bus: GridTopology, caplog):
    line = replace(two_bus.lines[0], p_min=-30.0, p_max=30.0)
    weak = replace(two_bus, lines=(line,))
    report = evaluate_island(weak, [1, 2])
    assert report.served_mw == pytest.approx(30.0)
    assert report.shed_mw == pytest.approx(20.0)
    assert report.shed_cost_usd == pytest.approx(20.0 * weak.shed_usd_per_mwh)
    assert report.cost_usd == pytest.approx(600.0)
    assert "curtailing" in caplog.text


def test_startup_cost_of_a_cold_unit(two_bus: GridTopology):
    cold = replace(
        two_bus,
        generators=(replace(two_bus.generators[0], p0=0.0, startup_usd=500.0),),
    )
    assert evaluate_island(cold, [1, 2]).startup_usd == 500.0
    assert evaluate_island(two_bus, [1, 2]).startup_usd == 0.0


def test_compare_identical_dispatch(two_bus: GridTopology):
    report = evaluate_island(two_bus, [1, 2])
    comparison = compare_to_nominal(report, [report])
    assert comparison.delta_usd == 0.0
    assert comparison.percent == 0.0
    assert compare_to_nominal(800.0, report).percent == pytest.approx(25.0)


def test_rts24_nominal_cost(rts24: GridTopology):
    result = nominal_dispatch(rts24)
    assert result.served_mw == pytest.approx(2850.0)
    assert sum(result.dispatch.values()) == pytest.approx(2850.0)
    assert result.cost_usd == pytest.approx(36418.68, rel=0.05)


def triangle(load_mw: float) -> GridTopology:
    lines = tuple(
        Line(f"L{i}{j}", i, j, -100.0, 100.0) for i, j in [(1, 2), (2, 3), (1, 3)]
    )
    return GridTopology(
        buses=tuple(Bus(i) for i in range(1, 4)),
        lines=lines,
        generators=(Generator("G1", 1, 0.0, 100.0, 30.0, 0.01),),
        loads=(Load("D3", 3, load_mw),),
    )


def test_pre_event_flows_split_over_parallel_paths():
    flows = pre_event_flows(triangle(30.0))
    assert flows == pytest.approx({"L12": 10.0, "L23": 10.0, "L13": 20.0})

    # Demand is scaled to the 30 MW the unit was producing
    assert pre_event_flows(triangle(60.0)) == pytest.approx(flows)


def test_pre_event_flows_of_a_single_line(two_bus: GridTopology):
    assert pre_event_flows(two_bus) == pytest.approx({"L1": 50.0})


def test_loaded_lines_use_the_directional_rating():
    topology = triangle(30.0)
    assert loaded_lines(topology, 0.95) == set()
    assert loaded_lines(topology, 0.2) == {"L13"}
    assert loaded_lines(topology, 0.1) == {"L12", "L23", "L13"}

    reverse = {"L12": 0.0, "L23": 0.0, "L13": -20.0}
    squeezed = replace(topology.lines[2], p_min=-20.0)
    narrow = replace(topology, lines=topology.lines[:2] + (squeezed,))
    assert loaded_lines(narrow, 0.95, reverse) == {"L13"}
    assert loaded_lines(topology, 0.95, reverse) == set()


def test_rts24_radial_export_is_fully_loaded(rts24: GridTopology):
    flows = pre_event_flows(rts24)
    assert flows["L11"] == pytest.approx(175.0, abs=1e-6)
    assert "L11" in loaded_lines(rts24, 0.95)
