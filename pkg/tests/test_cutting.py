import json

import networkx as nx
import numpy as np
import pytest
from helpers import random_circuit, random_cut_plan
from hypothesis import given, settings
from hypothesis import strategies as st

from qcut.circuit import Circuit, Gate, GateKind, fig5_circuit, ghz, hwea, qft
from qcut.cutting import (
    CutPlan,
    CutPoint,
    CyclicPlanError,
    PlanError,
    apply_manual_cuts,
    build_wire_graph,
    plan_cuts,
    restitch,
)
from qcut.oracle import simulate

FIG5_CUT = CutPoint(1, 3, "A")  # after T on the wire carrying X, H, T


def _gate_keys(g):
    return {k for _, _, k in g.edges(keys=True)}


def test_ghz3_wire_graph():
    g = build_wire_graph(ghz(3))
    # q0 and q2 are split once, q1 twice
    assert g.number_of_nodes() == 7
    assert _gate_keys(g) == {1, 2}
    assert nx.is_connected(g)
    assert g.nodes[(0, 0)]["gates"] == [0]


def test_single_qubit_wire_graph():
    c = Circuit(1, (Gate(GateKind.H, (0,)), Gate(GateKind.T, (0,))))
    g = build_wire_graph(c)
    assert list(g.nodes) == [(0, 0)]
    assert g.number_of_edges() == 0
    assert g.nodes[(0, 0)]["gates"] == [0, 1]


def test_fig5_node_a_separates_the_factors():
    c = fig5_circuit()
    g = build_wire_graph(c)
    node_a = (1, 0)
    assert g.nodes[node_a]["gates"] == [1, 2, 3]
    rest = g.copy()
    rest.remove_node(node_a)
    assert nx.is_connected(rest)
    # removing A leaves its gates in their own cluster, matching the manual cut
    plan = apply_manual_cuts(c, [FIG5_CUT])
    assert [list(s.gate_positions) for s in plan.subcircuits] == [[1, 2, 3], [0, 4, 5, 6, 7, 8]]


def test_fig5_manual_cut():
    plan = apply_manual_cuts(fig5_circuit(), [FIG5_CUT])
    assert plan.num_cuts == 1 and len(plan.subcircuits) == 2
    red, blue = plan.subcircuits
    assert [g.kind for g in red.gates] == [GateKind.X, GateKind.H, GateKind.T]
    assert red.output_edges == [(0, "A")] and red.input_edges == []
    assert blue.input_edges == [(1, "A")]
    assert blue.dims == ["A", "q0", "q1"]
    assert plan.widths == [1, 2]


def test_no_cuts_needed():
    c = hwea(4, 2)
    plan = plan_cuts(c, 5)
    assert plan.num_cuts == 0 and len(plan.subcircuits) == 1
    assert plan.subcircuits[0].gates == c.gates


def test_empty_manual_cut_list():
    c = qft(3)
    plan = apply_manual_cuts(c, [])
    assert len(plan.subcircuits) == 1
    assert plan.subcircuits[0].as_circuit().gates == c.gates


def test_zigzag_cycle_rejected():
    # q1 leaves the first CNOT's block and must come back for the third gate
    c = Circuit(2, (
        Gate(GateKind.CNOT, (0, 1)),
        Gate(GateKind.H, (1,)),
        Gate(GateKind.CNOT, (0, 1)),
    ))
    with pytest.raises(CyclicPlanError):
        apply_manual_cuts(c, [CutPoint(1, 0)])


def test_zigzag_between_two_subcircuits():
    c = Circuit(3, (
        Gate(GateKind.CNOT, (0, 1)),
        Gate(GateKind.CNOT, (1, 2)),
        Gate(GateKind.CNOT, (0, 1)),
    ))
    # cutting q1 both ways: {0,1}-block -> {1,2}-block -> back into the {0,1}-block
    with pytest.raises(CyclicPlanError):
        apply_manual_cuts(c, [CutPoint(1, 0), CutPoint(1, 1)])


@pytest.mark.parametrize("cut", [CutPoint(5, 0), CutPoint(0, 99), CutPoint(1, 0)])
def test_invalid_cut_points(cut):
    with pytest.raises(PlanError):
        apply_manual_cuts(ghz(3), [cut])


def test_duplicate_cut_rejected():
    with pytest.raises(PlanError):
        apply_manual_cuts(ghz(3), [CutPoint(1, 1), CutPoint(1, 1, "z")])


def test_plan_cuts_rejects_narrow_budget():
    with pytest.raises(PlanError):
        plan_cuts(ghz(4), 1)


def _check_plan_invariants(plan: CutPlan):
    produced = [v for s in plan.subcircuits for _, v in s.output_edges]
    consumed = [v for s in plan.subcircuits for _, v in s.input_edges]
    # each cut variable has exactly one producer and one consumer
    assert sorted(produced) == sorted(consumed) == sorted(c.var_id for c in plan.cut_points)
    for s in plan.subcircuits:
        assert not {v for _, v in s.input_edges} & {v for _, v in s.output_edges}
    # producers come before consumers
    seen = set()
    for s in plan.subcircuits:
        assert {v for _, v in s.input_edges} <= seen
        seen |= {v for _, v in s.output_edges}
    positions = sorted(p for s in plan.subcircuits for p in s.gate_positions)
    assert positions == list(range(len(plan.circuit.gates)))
    terminals = sorted(s.ends[i] for s in plan.subcircuits for i in s.terminal_qubits)
    assert terminals == sorted(plan.query_vars)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 9), st.integers(2, 5))
def test_plan_cuts_respects_width(seed, n, width):
    c = random_circuit(np.random.default_rng(seed), n, 3 * n)
    plan = plan_cuts(c, width)
    assert max(plan.widths) <= width
    _check_plan_invariants(plan)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_restitch_is_equivalent(seed, n):
    rng = np.random.default_rng(seed)
    plan = random_cut_plan(rng, n, 4 * n)
    _check_plan_invariants(plan)
    again = restitch(plan)
    assert again == plan.circuit
    a, b = simulate(again).amplitudes, simulate(plan.circuit).amplitudes
    assert np.allclose(a, b, atol=1e-9)


def test_hwea_width_budget():
    plan = plan_cuts(hwea(8, 2, seed=5), 5)
    assert max(plan.widths) <= 5
    _check_plan_invariants(plan)


def test_hwea_cut_count_grows_linearly_with_depth():
    counts = [plan_cuts(hwea(8, d), 5).num_cuts for d in (1, 2, 3, 4)]
    steps = np.diff(counts)
    assert np.all(steps == steps[0]), f"cut counts {counts}"


def test_plan_json_round_trip():
    plan = plan_cuts(hwea(6, 2, seed=1), 4)
    data = json.loads(json.dumps(plan.to_dict()))
    assert data["cuts"][0].keys() == {"qubit", "position", "var"}
    assert {"inputs", "outputs", "gates"} <= data["subcircuits"][0].keys()
    again = CutPlan.from_dict(data)
    assert again == plan


def test_planning_is_deterministic():
    c = hwea(10, 3, seed=2)
    assert plan_cuts(c, 4) == plan_cuts(c, 4)
