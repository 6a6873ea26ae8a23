# tests/test_transpiler.py - Noise-Aware Compilation Tests

import networkx as nx
import numpy as np
import pytest

from circuits import CX, MEASURE, SINGLE_QUBIT, CircuitBuilder, benchmark_suite, build_benchmark
from errors import CapacityError
from fleet import snapshot_at
from transpiler import (
    SWAP_CX_LABEL,
    Mapping,
    compile_for,
    compiled_to_dict,
    critical_path,
    extract_features,
    layout,
    route,
    shortest_path,
)
from utils.validation import normalize_edge


def assert_coupling_valid(cc, machine):
    for gate in cc.physical_gates:
        if gate.kind == CX:
            assert normalize_edge(*gate.operands) in machine.coupling, f"{gate} not on a coupling edge"


class TestLayout:
    """Test the greedy noise-aware layout."""

    def test_injective(self, small_fleet):
        """Test that distinct logical qubits get distinct physical qubits."""
        for machine in small_fleet:
            s = machine.snapshots[0]
            for circuit in benchmark_suite():
                mapping = layout(circuit, machine, s)
                assert len(set(mapping.logical_to_physical)) == circuit.width
                assert all(0 <= p < machine.n_qubits for p in mapping.logical_to_physical)

    def test_capacity(self, machine_factory):
        """Test that a circuit wider than the machine is rejected."""
        with pytest.raises(CapacityError):
            layout(build_benchmark('bv'), machine_factory(), machine_factory().snapshots[0])

    def test_busiest_pair_on_best_edge(self, machine_factory):
        """Test that the busiest logical pair lands on the lowest-error edge."""
        machine = machine_factory('line3', 3, ((0, 1), (1, 2)))
        snapshot = machine.snapshots[0]
        snapshot.cx_error[(0, 1)] = 0.05
        snapshot.cx_error[(1, 2)] = 0.001
        circuit = CircuitBuilder('pair', 2).cx(0, 1).cx(0, 1).build([0, 1])

        mapping = layout(circuit, machine, snapshot)

        assert set(mapping.logical_to_physical) == {1, 2}

    def test_deterministic(self, small_fleet, toffoli):
        """Test that layout is a pure function of its inputs."""
        machine = small_fleet[0]
        s = machine.snapshots[0]
        assert layout(toffoli, machine, s) == layout(toffoli, machine, s)


class TestRoute:
    """Test SWAP routing."""

    def test_adjacent_needs_no_swap(self, line_machine):
        """Test that a CX on an edge is emitted unchanged."""
        circuit = CircuitBuilder('pair', 2).cx(0, 1).build([0, 1])
        cc = route(circuit, Mapping((0, 1)), line_machine)
        assert cc.swap_count == 0
        assert [g.kind for g in cc.physical_gates] == [CX, MEASURE, MEASURE]

    def test_distance_three_inserts_two_swaps(self, line_machine):
        """Test that qubits three hops apart need two SWAPs (six CX)."""
        circuit = CircuitBuilder('far', 2).cx(0, 1).build([0, 1])
        cc = route(circuit, Mapping((0, 3)), line_machine)

        assert cc.swap_count == 2
        assert sum(1 for g in cc.physical_gates if g.label == SWAP_CX_LABEL) == 6
        assert cc.final_mapping == Mapping((2, 3))
        assert_coupling_valid(cc, line_machine)

    def test_measurements_follow_final_mapping(self, line_machine):
        """Test that measurements are moved with their logical qubits."""
        circuit = CircuitBuilder('far', 2).cx(0, 1).build([0])
        cc = route(circuit, Mapping((0, 3)), line_machine)
        assert cc.measured_physical == frozenset({2})

    def test_shortest_path_lexicographic(self, small_fleet):
        """Test that the chosen path is a shortest path and the smallest of them."""
        machine = small_fleet[0]
        for src, dst in [(0, machine.n_qubits - 1), (machine.n_qubits - 1, 0)]:
            path = shortest_path(machine, src, dst)
            candidates = sorted(nx.all_shortest_paths(machine.graph, src, dst))
            assert path == candidates[0]

    def test_random_compiles_coupling_valid(self, small_fleet):
        """Test 1000 random compile calls produce only coupling-valid CX gates."""
        rng = np.random.default_rng(42)
        suite = benchmark_suite()
        for _ in range(1000):
            machine = small_fleet[int(rng.integers(len(small_fleet)))]
            circuit = suite[int(rng.integers(len(suite)))]
            t = float(rng.uniform(0, machine.horizon_end))
            cc, _ = compile_for(circuit, machine, t)
            assert_coupling_valid(cc, machine)
            assert len(cc.measured_physical) == len(circuit.measured_qubits)

    def test_gate_count_accounts_for_swaps(self, small_fleet):
        """Test that routing only adds three CX per SWAP."""
        machine = small_fleet[0]
        for circuit in benchmark_suite():
            cc, _ = compile_for(circuit, machine, 0)
            assert len(cc.physical_gates) == len(circuit.gates) + 3 * cc.swap_count


class TestCriticalPath:
    """Test critical path extraction."""

    def test_chain(self):
        """Test that a serial chain is its own critical path."""
        c = CircuitBuilder('chain', 3).cx(0, 1).cx(1, 2).build([2])
        assert critical_path(c.gates) == [0, 1, 2]

    def test_tie_picks_smallest_index(self):
        """Test that equal-length paths resolve to the smallest gate index."""
        c = CircuitBuilder('twin', 4).cx(0, 1).cx(2, 3).build([0, 2])
        assert critical_path(c.gates) == [0, 2]

    def test_length_equals_depth(self, small_fleet):
        """Test that the critical path is as long as the compiled depth."""
        machine = small_fleet[1]
        for circuit in benchmark_suite():
            cc, _ = compile_for(circuit, machine, 0)
            assert len(critical_path(cc.physical_gates)) == cc.depth

    def test_empty(self):
        """Test an empty gate list."""
        assert critical_path([]) == []


class TestFeatures:
    """Test post-compilation feature extraction."""

    def test_uniform_errors(self, line_machine):
        """Test features on a machine with identical errors everywhere."""
        circuit = CircuitBuilder('pair', 2).gate('h', 0).cx(0, 1).build([0, 1])
        cc = route(circuit, Mapping((0, 1)), line_machine)
        features = extract_features(cc, line_machine.snapshots[0])

        assert features.depth == 3
        assert features.avg_cx_error == pytest.approx(0.01)
        assert features.avg_cx_critical_path_error == pytest.approx(0.01)
        assert features.avg_readout_error == pytest.approx(0.02)

    def test_no_cx(self, line_machine):
        """Test that a CX-free circuit has zero CX features."""
        circuit = CircuitBuilder('h', 1).gate('h', 0).build([0])
        cc = route(circuit, Mapping((4,)), line_machine)
        features = extract_features(cc, line_machine.snapshots[0])
        assert features.avg_cx_error == 0.0
        assert features.avg_cx_critical_path_error == 0.0

    def test_compile_uses_active_cycle(self, small_fleet, toffoli):
        """Test that compile_for records the cycle active at t."""
        machine = small_fleet[0]
        t = machine.snapshots[2].valid_from + 10
        cc, _ = compile_for(toffoli, machine, t)
        assert cc.cycle_index == snapshot_at(machine, t).cycle_index == 2

    def test_export(self, small_fleet, toffoli):
        """Test the compiled-circuit document."""
        cc, _ = compile_for(toffoli, small_fleet[0], 0)
        doc = compiled_to_dict(cc)
        assert doc['machine_id'] == small_fleet[0].id
        assert len(doc['gates']) == len(cc.physical_gates)
        assert len(doc['mapping']) == toffoli.width
        assert doc['swap_count'] == cc.swap_count
        assert all(g['kind'] in (CX, SINGLE_QUBIT, MEASURE) for g in doc['gates'])
