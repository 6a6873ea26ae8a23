# qcloud-lab/transpiler.py - Noise-Aware Compilation

"""Greedy noise-aware layout, shortest-path SWAP routing and feature extraction.

The scheduler only consumes the features of the compiled circuit, so any
deterministic noise-aware heuristic is enough here.
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

from circuits import CX, MEASURE, SWAP, Circuit, Gate, asap_layers
from errors import CapacityError
from fleet import CalibrationSnapshot, Machine, snapshot_at
from utils.validation import normalize_edge

logger = logging.getLogger(__name__)

SWAP_CX_LABEL = 'swap_cx'


@dataclass(frozen=True)
class Mapping:
    logical_to_physical: Tuple[int, ...]

    def __getitem__(self, logical: int) -> int:
        return self.logical_to_physical[logical]

    def __len__(self) -> int:
        return len(self.logical_to_physical)


@dataclass(frozen=True)
class CompiledCircuit:
    machine_id: str
    cycle_index: int
    name: str
    physical_gates: Tuple[Gate, ...]
    depth: int
    measured_physical: FrozenSet[int]
    initial_mapping: Mapping
    final_mapping: Mapping
    swap_count: int = 0

    @property
    def cx_gates(self) -> List[Gate]:
        return [g for g in self.physical_gates if g.kind == CX]


@dataclass(frozen=True)
class FeatureVector:
    depth: int
    avg_cx_error: float
    avg_cx_critical_path_error: float
    avg_readout_error: float

    NAMES = ('depth', 'avg_cx_error', 'avg_cx_critical_path_error', 'avg_readout_error')

    def as_tuple(self) -> Tuple[float, ...]:
        return (float(self.depth), self.avg_cx_error, self.avg_cx_critical_path_error, self.avg_readout_error)


def interaction_counts(c: Circuit) -> Counter:
    """Number of two-qubit interactions per unordered logical pair."""
    counts = Counter()
    for gate in c.gates:
        if gate.kind in (CX, SWAP):
            counts[normalize_edge(*gate.operands)] += 1
    return counts


def layout(c: Circuit, m: Machine, s: CalibrationSnapshot) -> Mapping:
    """Greedy placement of busy logical pairs onto the lowest-error edges.

    Pairs are taken in descending interaction count. A pair with both qubits
    unplaced goes onto the best free edge touching the placed region (any free
    edge if none touches it); a pair with one qubit placed extends along the
    best free neighbouring edge. Whatever is left goes onto the free qubits with
    the lowest readout error.
    """
    if c.width > m.n_qubits:
        raise CapacityError(f"circuit '{c.name}' needs {c.width} qubits, {m.id} has {m.n_qubits}")

    placement: Dict[int, int] = {}
    used = set()
    edges_by_error = sorted(m.coupling, key=lambda e: (s.cx_error[e], e))
    pairs = sorted(interaction_counts(c).items(), key=lambda kv: (-kv[1], kv[0]))

    def touches_region(edge) -> bool:
        return any(nb in used for q in edge for nb in m.graph.neighbors(q))

    for (la, lb), _ in pairs:
        if la in placement and lb in placement:
            continue

        if la not in placement and lb not in placement:
            free = [e for e in edges_by_error if e[0] not in used and e[1] not in used]
            if not free:
                continue
            if used:
                adjacent = [e for e in free if touches_region(e)]
                free = adjacent or free
            pa, pb = free[0]
            placement[la], placement[lb] = pa, pb
            used.update((pa, pb))
            continue

        placed, other = (la, lb) if la in placement else (lb, la)
        anchor = placement[placed]
        options = sorted(
            (s.cx_error[normalize_edge(anchor, nb)], nb)
            for nb in m.graph.neighbors(anchor)
            if nb not in used
        )
        if options:
            placement[other] = options[0][1]
            used.add(options[0][1])

    by_readout = sorted((p for p in range(m.n_qubits) if p not in used), key=lambda p: (s.readout_error[p], p))
    remaining = iter(by_readout)
    for logical in range(c.width):
        if logical not in placement:
            placement[logical] = next(remaining)

    return Mapping(tuple(placement[q] for q in range(c.width)))


def shortest_path(m: Machine, src: int, dst: int) -> List[int]:
    """Lexicographically smallest shortest path from src to dst."""
    dist = m.distances
    path = [src]
    node = src
    while node != dst:
        node = min(nb for nb in m.graph.neighbors(node) if dist[nb][dst] == dist[node][dst] - 1)
        path.append(node)
    return path


def route(c: Circuit, mapping: Mapping, m: Machine, cycle_index: int = 0) -> CompiledCircuit:
    """Insert SWAPs so that every CX lands on a coupling edge.

    The first operand walks toward the second; each SWAP is emitted as three CX.
    """
    l2p = list(mapping.logical_to_physical)
    p2l = {p: q for q, p in enumerate(l2p)}
    out: List[Gate] = []
    swaps = 0

    def emit_swap(u: int, v: int):
        out.append(Gate(CX, (u, v), SWAP_CX_LABEL))
        out.append(Gate(CX, (v, u), SWAP_CX_LABEL))
        out.append(Gate(CX, (u, v), SWAP_CX_LABEL))
        lu, lv = p2l.get(u), p2l.get(v)
        p2l.pop(u, None)
        p2l.pop(v, None)
        if lu is not None:
            l2p[lu] = v
            p2l[v] = lu
        if lv is not None:
            l2p[lv] = u
            p2l[u] = lv

    def bring_adjacent(a: int, b: int):
        nonlocal swaps
        pa, pb = l2p[a], l2p[b]
        if m.are_adjacent(pa, pb):
            return
        path = shortest_path(m, pa, pb)
        for u, v in zip(path[:-2], path[1:-1]):
            emit_swap(u, v)
            swaps += 1

    for gate in c.gates:
        if gate.kind == CX:
            a, b = gate.operands
            bring_adjacent(a, b)
            out.append(Gate(CX, (l2p[a], l2p[b]), gate.label))
        elif gate.kind == SWAP:
            a, b = gate.operands
            bring_adjacent(a, b)
            emit_swap(l2p[a], l2p[b])
        else:
            out.append(Gate(gate.kind, (l2p[gate.operands[0]],), gate.label))

    gates = tuple(out)
    measured = frozenset(g.operands[0] for g in gates if g.kind == MEASURE)
    depth = max(asap_layers(gates), default=0)
    if swaps:
        logger.debug(f"Routed {c.name} on {m.id}: {swaps} SWAP(s) inserted")

    return CompiledCircuit(
        machine_id=m.id,
        cycle_index=cycle_index,
        name=c.name,
        physical_gates=gates,
        depth=depth,
        measured_physical=measured,
        initial_mapping=mapping,
        final_mapping=Mapping(tuple(l2p)),
        swap_count=swaps,
    )


def critical_path(gates: Sequence[Gate]) -> List[int]:
    """Indices of the gates on one longest ASAP path.

    Ties pick the smallest gate index, both for the path's last gate and for
    each predecessor.
    """
    if not gates:
        return []
    last_gate: Dict[int, int] = {}
    layer: List[int] = []
    parent: List[Optional[int]] = []
    for i, gate in enumerate(gates):
        preds = sorted({last_gate[q] for q in gate.operands if q in last_gate})
        best = None
        for p in preds:
            if best is None or layer[p] > layer[best]:
                best = p
        layer.append(1 + (layer[best] if best is not None else 0))
        parent.append(best)
        for q in gate.operands:
            last_gate[q] = i

    top = max(layer)
    node = layer.index(top)
    path = []
    while node is not None:
        path.append(node)
        node = parent[node]
    return path[::-1]


def extract_features(cc: CompiledCircuit, s: CalibrationSnapshot) -> FeatureVector:
    cx_errors = [s.cx_error[normalize_edge(*g.operands)] for g in cc.cx_gates]
    avg_cx = sum(cx_errors) / len(cx_errors) if cx_errors else 0.0

    path = critical_path(cc.physical_gates)
    path_errors = [
        s.cx_error[normalize_edge(*cc.physical_gates[i].operands)]
        for i in path
        if cc.physical_gates[i].kind == CX
    ]
    avg_path = sum(path_errors) / len(path_errors) if path_errors else 0.0

    readout = [s.readout_error[q] for q in sorted(cc.measured_physical)]
    avg_readout = sum(readout) / len(readout) if readout else 0.0

    return FeatureVector(cc.depth, avg_cx, avg_path, avg_readout)


def compile_for(c: Circuit, m: Machine, t: float) -> Tuple[CompiledCircuit, FeatureVector]:
    """Compile against the snapshot active at t and extract its features."""
    if c.width > m.n_qubits:
        raise CapacityError(f"circuit '{c.name}' needs {c.width} qubits, {m.id} has {m.n_qubits}")
    s = snapshot_at(m, t)
    mapping = layout(c, m, s)
    cc = route(c, mapping, m, cycle_index=s.cycle_index)
    return cc, extract_features(cc, s)


def compiled_to_dict(cc: CompiledCircuit) -> dict:
    return {
        'name': cc.name,
        'width': len(cc.initial_mapping),
        'gates': [{'kind': g.kind, 'label': g.label, 'operands': list(g.operands)} for g in cc.physical_gates],
        'measured': sorted(cc.measured_physical),
        'machine_id': cc.machine_id,
        'cycle_index': cc.cycle_index,
        'mapping': list(cc.initial_mapping.logical_to_physical),
        'final_mapping': list(cc.final_mapping.logical_to_physical),
        'depth': cc.depth,
        'swap_count': cc.swap_count,
    }
