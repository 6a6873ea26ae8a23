# qcloud-lab/circuits.py - Logical Circuits and Benchmarks

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from errors import CircuitError

logger = logging.getLogger(__name__)

SINGLE_QUBIT = 'single_qubit'
CX = 'cx'
SWAP = 'swap'
MEASURE = 'measure'

GATE_ARITY = {SINGLE_QUBIT: 1, CX: 2, SWAP: 2, MEASURE: 1}


@dataclass(frozen=True)
class Gate:
    kind: str
    operands: Tuple[int, ...]
    label: str = ''

    def __post_init__(self):
        arity = GATE_ARITY.get(self.kind)
        if arity is None:
            raise CircuitError(f"unknown gate kind '{self.kind}'")
        if len(self.operands) != arity:
            raise CircuitError(f"{self.kind} gate needs {arity} operand(s), got {len(self.operands)}")
        if arity == 2 and self.operands[0] == self.operands[1]:
            raise CircuitError(f"{self.kind} gate operands must be distinct, got {self.operands}")
        if any(q < 0 for q in self.operands):
            raise CircuitError(f"negative qubit index in {self.operands}")

    @property
    def is_two_qubit(self) -> bool:
        return len(self.operands) == 2


@dataclass(frozen=True)
class Circuit:
    """Logical circuit. Hashable, so compiled results can be cached by value."""

    name: str
    width: int
    gates: Tuple[Gate, ...]
    measured_qubits: FrozenSet[int]

    def __post_init__(self):
        if self.width < 1:
            raise CircuitError(f"circuit '{self.name}' must have positive width")
        for gate in self.gates:
            if any(q >= self.width for q in gate.operands):
                raise CircuitError(f"circuit '{self.name}': gate {gate} touches a qubit >= width {self.width}")
        if not self.measured_qubits:
            raise CircuitError(f"circuit '{self.name}' measures no qubits")
        if any(q >= self.width or q < 0 for q in self.measured_qubits):
            raise CircuitError(f"circuit '{self.name}': measured qubit out of range")

        seen_measure = False
        for gate in self.gates:
            if gate.kind == MEASURE:
                seen_measure = True
            elif seen_measure:
                raise CircuitError(f"circuit '{self.name}': measure gates must come last")

    @property
    def cx_count(self) -> int:
        return sum(1 for g in self.gates if g.kind == CX)


class CircuitBuilder:
    """Small helper for writing benchmark generators."""

    def __init__(self, name: str, width: int):
        self.name = name
        self.width = width
        self._gates: List[Gate] = []

    def gate(self, label: str, q: int) -> 'CircuitBuilder':
        self._gates.append(Gate(SINGLE_QUBIT, (q,), label))
        return self

    def cx(self, control: int, target: int) -> 'CircuitBuilder':
        self._gates.append(Gate(CX, (control, target), 'cx'))
        return self

    def toffoli(self, c1: int, c2: int, target: int) -> 'CircuitBuilder':
        """Standard 6-CX decomposition."""
        self.gate('h', target)
        self.cx(c2, target).gate('tdg', target)
        self.cx(c1, target).gate('t', target)
        self.cx(c2, target).gate('tdg', target)
        self.cx(c1, target).gate('t', c2).gate('t', target)
        self.gate('h', target)
        self.cx(c1, c2).gate('t', c1).gate('tdg', c2)
        self.cx(c1, c2)
        return self

    def build(self, measured: Iterable[int]) -> Circuit:
        measured = sorted(set(measured))
        gates = list(self._gates) + [Gate(MEASURE, (q,), 'measure') for q in measured]
        return Circuit(self.name, self.width, tuple(gates), frozenset(measured))


# --- benchmark generators ---

def _bits(value: Union[str, int], length: int, param: str) -> List[int]:
    """Accept a bitstring or an integer and return `length` bits, qubit 0 first."""
    if isinstance(value, str):
        if len(value) != length or any(ch not in '01' for ch in value):
            raise CircuitError(f"'{param}' must be a {length}-bit string, got '{value}'")
        return [int(ch) for ch in value]
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2 ** length:
        raise CircuitError(f"'{param}' must be an integer in [0, {2 ** length}), got {value!r}")
    return [(value >> i) & 1 for i in range(length)]


def _toffoli(params) -> Circuit:
    b = CircuitBuilder('toffoli', 3)
    for q, bit in enumerate(_bits(params.get('controls', '11'), 2, 'controls')):
        if bit:
            b.gate('x', q)
    b.toffoli(0, 1, 2)
    return b.build(range(3))


def _hsp(params) -> Circuit:
    """Two-bit hidden subgroup (Simon) instance: qubits 0-1 data, 2-3 oracle register."""
    secret = _bits(params.get('secret', '11'), 2, 'secret')
    b = CircuitBuilder('hsp', 4)
    b.gate('h', 0).gate('h', 1)
    b.cx(0, 2).cx(1, 3)
    if any(secret):
        pivot = secret.index(1)
        for j, bit in enumerate(secret):
            if bit:
                b.cx(pivot, 2 + j)
    b.gate('h', 0).gate('h', 1)
    return b.build([0, 1])


def _bv(params) -> Circuit:
    hidden = _bits(params.get('hidden', '1011'), 4, 'hidden')
    b = CircuitBuilder('bv', 5)
    ancilla = 4
    b.gate('x', ancilla).gate('h', ancilla)
    for q in range(4):
        b.gate('h', q)
    for q, bit in enumerate(hidden):
        if bit:
            b.cx(q, ancilla)
    for q in range(4):
        b.gate('h', q)
    return b.build(range(4))


def _linear_solver(params) -> Circuit:
    """HHL-shaped 2x2 solver: qubit 0 ancilla, qubit 1 clock, qubit 2 input."""
    b = CircuitBuilder('linear_solver', 3)
    b.gate('ry', 2)
    # phase estimation
    b.gate('h', 1)
    b.cx(1, 2).gate('rz', 2).cx(1, 2)
    b.gate('h', 1)
    # eigenvalue inversion
    b.gate('ry', 0)
    b.cx(1, 0).gate('ry', 0).cx(1, 0)
    # uncompute
    b.gate('h', 1)
    b.cx(1, 2).gate('rz', 2).cx(1, 2)
    b.gate('h', 1)
    return b.build([0, 2])


def _qaoa(params) -> Circuit:
    reps = params.get('reps', 1)
    if not isinstance(reps, int) or reps < 1:
        raise CircuitError(f"'reps' must be a positive integer, got {reps!r}")
    b = CircuitBuilder('qaoa', 4)
    for q in range(4):
        b.gate('h', q)
    ring = [(0, 1), (1, 2), (2, 3), (3, 0)]
    for _ in range(reps):
        for u, v in ring:
            b.cx(u, v).gate('rz', v).cx(u, v)
        for q in range(4):
            b.gate('rx', q)
    return b.build(range(4))


def _entangler_pairs(width: int, entanglement: str, rep: int) -> List[Tuple[int, int]]:
    if entanglement == 'full':
        return [(i, j) for i in range(width) for j in range(i + 1, width)]
    if entanglement == 'sca':
        # shifted circular alternating
        ring = [((i - 1) % width, i) for i in range(width)]
        shift = rep % width
        pairs = ring[shift:] + ring[:shift]
        if rep % 2 == 1:
            pairs = [(v, u) for u, v in pairs]
        return pairs
    raise CircuitError(f"unknown entanglement '{entanglement}'")


def _vqe_su2(params) -> Circuit:
    width = params.get('width', 4)
    if width not in (4, 6):
        raise CircuitError(f"vqe_su2 width must be 4 or 6, got {width!r}")
    defaults = {4: (4, 'full'), 6: (3, 'sca')}
    reps = params.get('reps', defaults[width][0])
    entanglement = params.get('entanglement', defaults[width][1])
    if not isinstance(reps, int) or reps < 1:
        raise CircuitError(f"'reps' must be a positive integer, got {reps!r}")

    b = CircuitBuilder(f'vqe_su2_{width}', width)
    for rep in range(reps):
        for q in range(width):
            b.gate('ry', q).gate('rz', q)
        for u, v in _entangler_pairs(width, entanglement, rep):
            b.cx(u, v)
    for q in range(width):
        b.gate('ry', q).gate('rz', q)
    return b.build(range(width))


def _repetition_encoder(params) -> Circuit:
    """Three-qubit repetition code on 0-2 with syndrome ancillas 3 and 4."""
    logical = params.get('logical', 1)
    if logical not in (0, 1):
        raise CircuitError(f"'logical' must be 0 or 1, got {logical!r}")
    b = CircuitBuilder('repetition_encoder', 5)
    if logical:
        b.gate('x', 0)
    b.cx(0, 1).cx(0, 2)
    b.cx(0, 3).cx(1, 3)
    b.cx(1, 4).cx(2, 4)
    return b.build(range(5))


def _ripple_adder(params) -> Circuit:
    """Two-bit Cuccaro adder. Layout: c0, b0, a0, b1, a1, z."""
    a_bits = _bits(params.get('a', 1), 2, 'a')
    b_bits = _bits(params.get('b', 3), 2, 'b')
    c0, b0, a0, b1, a1, z = range(6)
    b = CircuitBuilder('ripple_adder', 6)
    for q, bit in ((a0, a_bits[0]), (a1, a_bits[1]), (b0, b_bits[0]), (b1, b_bits[1])):
        if bit:
            b.gate('x', q)

    def maj(x, y, w):
        b.cx(w, y).cx(w, x).toffoli(x, y, w)

    def uma(x, y, w):
        b.toffoli(x, y, w).cx(w, x).cx(x, y)

    maj(c0, b0, a0)
    maj(a0, b1, a1)
    b.cx(a1, z)
    uma(a0, b1, a1)
    uma(c0, b0, a0)
    return b.build([b0, b1, z])


BENCHMARKS = {
    'toffoli': _toffoli,
    'hsp': _hsp,
    'bv': _bv,
    'linear_solver': _linear_solver,
    'qaoa': _qaoa,
    'vqe_su2': _vqe_su2,
    'repetition_encoder': _repetition_encoder,
    'ripple_adder': _ripple_adder,
}

# The nine evaluation instances; VQE appears at both sizes.
BENCHMARK_SUITE: Tuple[Tuple[str, Dict[str, int]], ...] = (
    ('toffoli', {}),
    ('hsp', {}),
    ('bv', {}),
    ('linear_solver', {}),
    ('qaoa', {}),
    ('vqe_su2', {'width': 4}),
    ('vqe_su2', {'width': 6}),
    ('repetition_encoder', {}),
    ('ripple_adder', {}),
)


def build_benchmark(name: str, params: Optional[Mapping] = None) -> Circuit:
    """Build one of the benchmark circuits, decomposed to single-qubit and CX gates."""
    generator = BENCHMARKS.get(name)
    if generator is None:
        raise CircuitError(f"unknown benchmark '{name}'")
    circuit = generator(dict(params or {}))
    logger.debug(f"Built benchmark {name}: width {circuit.width}, {len(circuit.gates)} gates")
    return circuit


def benchmark_suite() -> List[Circuit]:
    return [build_benchmark(name, params) for name, params in BENCHMARK_SUITE]


def asap_layers(gates: Sequence[Gate]) -> List[int]:
    """Layer (1-based) of each gate under as-soon-as-possible scheduling."""
    last_layer: Dict[int, int] = {}
    layers = []
    for gate in gates:
        layer = 1 + max((last_layer.get(q, 0) for q in gate.operands), default=0)
        for q in gate.operands:
            last_layer[q] = layer
        layers.append(layer)
    return layers


def circuit_stats(c: Circuit) -> Tuple[int, int, int, int]:
    """Return (width, total_gates, cx_count, logical_depth)."""
    layers = asap_layers(c.gates)
    return c.width, len(c.gates), c.cx_count, max(layers, default=0)


# --- JSON export/import ---

def circuit_to_dict(c: Circuit) -> dict:
    return {
        'name': c.name,
        'width': c.width,
        'gates': [{'kind': g.kind, 'label': g.label, 'operands': list(g.operands)} for g in c.gates],
        'measured': sorted(c.measured_qubits),
    }


def circuit_from_dict(data: Mapping) -> Circuit:
    try:
        gates = tuple(Gate(g['kind'], tuple(int(q) for q in g['operands']), g.get('label', '')) for g in data['gates'])
        return Circuit(data['name'], int(data['width']), gates, frozenset(int(q) for q in data['measured']))
    except (KeyError, TypeError, ValueError) as e:
        raise CircuitError(f"malformed circuit document: {e!r}") from e
