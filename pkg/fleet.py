# qcloud-lab/fleet.py - Quantum Machine Fleet

"""Machines, their calibration cycles, and synthetic fleet generation.

Time is integer seconds from simulation epoch 0. Calibration windows are
half-open: a boundary belongs to the cycle that starts there.
"""

import bisect
import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from errors import (
    ConfigError,
    FleetParseError,
    FleetValidationError,
    MissingArtifactError,
    MixedPeriodError,
    OutOfRangeError,
)
from utils.serialization import dumps_json
from utils.validation import (
    edge_key,
    is_non_negative_int,
    is_positive_int,
    is_probability,
    is_seed,
    normalize_edge,
    parse_edge_key,
)

logger = logging.getLogger(__name__)

DEFAULT_CALIBRATION_PERIOD = 86400  # calibrated once a day

Edge = Tuple[int, int]


@dataclass(frozen=True)
class CalibrationSnapshot:
    """Error rates of one machine for one calibration cycle."""

    cycle_index: int
    valid_from: int
    cx_error: Mapping[Edge, float]
    readout_error: Tuple[float, ...]
    single_qubit_error: Tuple[float, ...]


@dataclass(frozen=True)
class Machine:
    """A fleet member: topology plus one snapshot per calibration cycle."""

    id: str
    n_qubits: int
    coupling: FrozenSet[Edge]
    calibration_period: int = DEFAULT_CALIBRATION_PERIOD
    calibration_offset: int = 0
    snapshots: Tuple[CalibrationSnapshot, ...] = ()
    is_public: bool = False

    def __post_init__(self):
        validate_machine(self)

    @cached_property
    def graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n_qubits))
        g.add_edges_from(self.coupling)
        return g

    @cached_property
    def distances(self) -> Dict[int, Dict[int, int]]:
        """All-pairs hop distances on the coupling graph."""
        return {src: dict(lengths) for src, lengths in nx.all_pairs_shortest_path_length(self.graph)}

    @cached_property
    def _valid_from(self) -> List[int]:
        return [s.valid_from for s in self.snapshots]

    @property
    def first_boundary(self) -> int:
        return self.calibration_offset if self.calibration_offset > 0 else self.calibration_period

    @property
    def horizon_end(self) -> int:
        """End (exclusive) of the last modelled calibration cycle."""
        return cycle_start(len(self.snapshots), self.calibration_period, self.calibration_offset)

    def are_adjacent(self, a: int, b: int) -> bool:
        return normalize_edge(a, b) in self.coupling

    def boundaries(self, until: float) -> List[int]:
        """Calibration boundaries in (0, until]."""
        result = []
        t = self.first_boundary
        while t <= until:
            result.append(t)
            t += self.calibration_period
        return result


@dataclass(frozen=True)
class FleetSpec:
    """Parameters for a synthetic fleet."""

    machine_count: int = 26
    qubit_count_choices: Tuple[int, ...] = (1, 5, 7, 16, 27, 65)
    readout_range: Tuple[float, float] = (0.01, 0.12)
    cx_range: Tuple[float, float] = (0.006, 0.06)
    sq_range: Tuple[float, float] = (0.0002, 0.002)
    cycles: int = 74
    calibration_period: int = DEFAULT_CALIBRATION_PERIOD
    stagger: bool = False
    rng_seed: int = 2021
    quality_spread: float = 0.5

    def __post_init__(self):
        if not is_positive_int(self.machine_count):
            raise ConfigError("machine_count must be a positive integer", field='fleet.machine_count')
        if not self.qubit_count_choices or not all(is_positive_int(q) for q in self.qubit_count_choices):
            raise ConfigError("qubit_count_choices must be positive integers", field='fleet.qubit_count_choices')
        for name in ('readout_range', 'cx_range', 'sq_range'):
            low, high = getattr(self, name)
            if not (is_probability(low) and is_probability(high)) or low > high:
                raise ConfigError(f"{name} must satisfy 0 <= min <= max < 1", field=f'fleet.{name}')
        if not is_positive_int(self.cycles):
            raise ConfigError("cycles must be a positive integer", field='fleet.cycles')
        if not is_positive_int(self.calibration_period):
            raise ConfigError("calibration_period must be a positive integer", field='fleet.calibration_period')
        if not is_seed(self.rng_seed):
            raise ConfigError("rng_seed must be a 64-bit non-negative integer", field='fleet.rng_seed')
        if not 0.0 < self.quality_spread <= 1.0:
            raise ConfigError("quality_spread must be in (0, 1]", field='fleet.quality_spread')


def cycle_start(cycle_index: int, period: int, offset: int) -> int:
    """Start of a cycle. Cycle 0 always starts at epoch 0."""
    if cycle_index == 0:
        return 0
    first = offset if offset > 0 else period
    return first + (cycle_index - 1) * period


def validate_machine(machine: Machine) -> None:
    """Check every Machine/CalibrationSnapshot invariant, naming the offending field."""
    mid = machine.id
    if not isinstance(mid, str) or not mid:
        raise FleetValidationError(mid, 'id', "must be a non-empty string")
    if not is_positive_int(machine.n_qubits):
        raise FleetValidationError(mid, 'n_qubits', "must be a positive integer")
    if not is_positive_int(machine.calibration_period):
        raise FleetValidationError(mid, 'calibration_period', "must be a positive integer")
    if not is_non_negative_int(machine.calibration_offset) or machine.calibration_offset >= machine.calibration_period:
        raise FleetValidationError(mid, 'calibration_offset', "must satisfy 0 <= offset < period")

    for a, b in machine.coupling:
        if a >= b or b >= machine.n_qubits or a < 0:
            raise FleetValidationError(mid, 'coupling', f"edge ({a}, {b}) is not an ordered pair of qubits < {machine.n_qubits}")

    g = nx.Graph()
    g.add_nodes_from(range(machine.n_qubits))
    g.add_edges_from(machine.coupling)
    if not nx.is_connected(g):
        raise FleetValidationError(mid, 'coupling', "coupling graph is not connected")

    if not machine.snapshots:
        raise FleetValidationError(mid, 'snapshots', "at least one calibration snapshot is required")

    for index, snapshot in enumerate(machine.snapshots):
        where = f'snapshots[{index}]'
        if snapshot.cycle_index != index:
            raise FleetValidationError(mid, f'{where}.cycle', f"expected cycle {index}, got {snapshot.cycle_index}")
        expected = cycle_start(index, machine.calibration_period, machine.calibration_offset)
        if snapshot.valid_from != expected:
            raise FleetValidationError(mid, f'{where}.valid_from', f"expected {expected}, got {snapshot.valid_from}")
        if set(snapshot.cx_error) != set(machine.coupling):
            raise FleetValidationError(mid, f'{where}.cx_error', "must cover exactly the coupling edges")
        for edge, p in snapshot.cx_error.items():
            if not is_probability(p):
                raise FleetValidationError(mid, f'{where}.cx_error[{edge_key(edge)}]', f"{p!r} is not a probability in [0, 1)")
        for name in ('readout_error', 'single_qubit_error'):
            values = getattr(snapshot, name)
            if len(values) != machine.n_qubits:
                raise FleetValidationError(mid, f'{where}.{name}', f"expected {machine.n_qubits} entries, got {len(values)}")
            for q, p in enumerate(values):
                if not is_probability(p):
                    raise FleetValidationError(mid, f'{where}.{name}[{q}]', f"{p!r} is not a probability in [0, 1)")


def snapshot_at(machine: Machine, t: float) -> CalibrationSnapshot:
    """Return the snapshot with the largest valid_from <= t."""
    if t < machine.snapshots[0].valid_from or t >= machine.horizon_end:
        raise OutOfRangeError(
            f"t={t} outside calibration horizon [{machine.snapshots[0].valid_from}, {machine.horizon_end}) of {machine.id}"
        )
    index = bisect.bisect_right(machine._valid_from, t) - 1
    return machine.snapshots[index]


def next_calibration_time(machine: Machine, t: float) -> int:
    """Smallest k * period + offset strictly greater than t."""
    period, offset = machine.calibration_period, machine.calibration_offset
    k = math.floor((t - offset) / period) + 1
    return offset + k * period


def apply_stagger(fleet: Sequence[Machine]) -> List[Machine]:
    """Spread calibration boundaries evenly over the shared period."""
    if not fleet:
        return []
    periods = {m.calibration_period for m in fleet}
    if len(periods) > 1:
        raise MixedPeriodError(f"cannot stagger machines with periods {sorted(periods)}")

    period = periods.pop()
    count = len(fleet)
    staggered = []
    for i, machine in enumerate(fleet):
        offset = i * period // count
        snapshots = tuple(
            replace(s, valid_from=cycle_start(s.cycle_index, period, offset)) for s in machine.snapshots
        )
        staggered.append(replace(machine, calibration_offset=offset, snapshots=snapshots))

    logger.info(f"Staggered {count} machines, spacing {period // count}s")
    return staggered


def build_topology(n_qubits: int) -> FrozenSet[Edge]:
    """Linear chain up to 5 qubits, row-major 2D lattice above."""
    edges = set()
    if n_qubits <= 5:
        edges.update((q, q + 1) for q in range(n_qubits - 1))
        return frozenset(edges)

    cols = math.ceil(math.sqrt(n_qubits))
    for q in range(n_qubits):
        row, col = divmod(q, cols)
        right, down = q + 1, q + cols
        if col + 1 < cols and right < n_qubits:
            edges.add((q, right))
        if down < n_qubits:
            edges.add((q, down))
    return frozenset(edges)


def _quality_window(bounds: Tuple[float, float], quality: float, spread: float) -> Tuple[float, float]:
    """Sub-range of ``bounds`` a machine draws from; quality 0 is the low-error end."""
    low, high = bounds
    width = (high - low) * spread
    start = low + quality * (high - low - width)
    return start, min(start + width, high)


def generate_synthetic_fleet(spec: FleetSpec) -> List[Machine]:
    """Draw a fleet whose error rates are re-drawn every cycle around a fixed per-machine quality.

    Each machine draws one quality in [0, 1] that places a window covering
    ``quality_spread`` of every error range; each cycle draws uniformly inside
    that window. A spread of 1 gives every machine the full ranges.
    """
    rng = np.random.default_rng(spec.rng_seed)
    fleet = []
    for i in range(spec.machine_count):
        n_qubits = int(rng.choice(spec.qubit_count_choices))
        quality = float(rng.uniform())
        cx_window = _quality_window(spec.cx_range, quality, spec.quality_spread)
        readout_window = _quality_window(spec.readout_range, quality, spec.quality_spread)
        sq_window = _quality_window(spec.sq_range, quality, spec.quality_spread)
        coupling = build_topology(n_qubits)
        edges = sorted(coupling)
        snapshots = []
        for k in range(spec.cycles):
            cx = rng.uniform(*cx_window, size=len(edges))
            readout = rng.uniform(*readout_window, size=n_qubits)
            single = rng.uniform(*sq_window, size=n_qubits)
            snapshots.append(CalibrationSnapshot(
                cycle_index=k,
                valid_from=cycle_start(k, spec.calibration_period, 0),
                cx_error={edge: float(p) for edge, p in zip(edges, cx)},
                readout_error=tuple(float(p) for p in readout),
                single_qubit_error=tuple(float(p) for p in single),
            ))
        fleet.append(Machine(
            id=f"fake_{i:02d}_q{n_qubits}",
            n_qubits=n_qubits,
            coupling=coupling,
            calibration_period=spec.calibration_period,
            calibration_offset=0,
            snapshots=tuple(snapshots),
            is_public=n_qubits <= 7,
        ))

    if spec.stagger:
        fleet = apply_stagger(fleet)

    logger.info(f"Generated synthetic fleet: {spec.machine_count} machines x {spec.cycles} cycles (seed {spec.rng_seed})")
    return fleet


# --- fleet file format ---

def machine_to_dict(machine: Machine) -> dict:
    return {
        'id': machine.id,
        'n_qubits': machine.n_qubits,
        'coupling': [list(edge) for edge in sorted(machine.coupling)],
        'calibration_period_s': machine.calibration_period,
        'calibration_offset_s': machine.calibration_offset,
        'is_public': machine.is_public,
        'snapshots': [
            {
                'cycle': s.cycle_index,
                'valid_from_s': s.valid_from,
                'cx_error': {edge_key(edge): p for edge, p in sorted(s.cx_error.items())},
                'readout_error': list(s.readout_error),
                'single_qubit_error': list(s.single_qubit_error),
            }
            for s in machine.snapshots
        ],
    }


def machine_from_dict(data: dict, position: int = 0) -> Machine:
    """Build a Machine from its fleet-file object; raises FleetParseError on shape problems."""
    if not isinstance(data, dict):
        raise FleetParseError(f"fleet entry {position} is not an object")
    mid = data.get('id', f'#{position}')
    try:
        coupling = set()
        for pair in data['coupling']:
            if len(pair) != 2:
                raise FleetValidationError(mid, 'coupling', f"{pair!r} is not a qubit pair")
            coupling.add(normalize_edge(int(pair[0]), int(pair[1])))

        snapshots = []
        for s in data['snapshots']:
            cx_error = {}
            for key, p in s['cx_error'].items():
                edge = parse_edge_key(key)
                if edge is None:
                    raise FleetValidationError(mid, f"snapshots[{len(snapshots)}].cx_error", f"bad edge key '{key}'")
                cx_error[edge] = p
            snapshots.append(CalibrationSnapshot(
                cycle_index=s['cycle'],
                valid_from=s['valid_from_s'],
                cx_error=cx_error,
                readout_error=tuple(s['readout_error']),
                single_qubit_error=tuple(s['single_qubit_error']),
            ))

        return Machine(
            id=mid,
            n_qubits=data['n_qubits'],
            coupling=frozenset(coupling),
            calibration_period=data.get('calibration_period_s', DEFAULT_CALIBRATION_PERIOD),
            calibration_offset=data.get('calibration_offset_s', 0),
            snapshots=tuple(snapshots),
            is_public=bool(data.get('is_public', False)),
        )
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise FleetParseError(f"machine '{mid}' is malformed: {e!r}") from e


def load_fleet(path) -> List[Machine]:
    """Read and validate a fleet file, preserving machine order."""
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"Fleet file not found: {path}")
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise FleetParseError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e

    if not isinstance(data, list):
        raise FleetParseError(f"{path}: top level must be an array of machines")

    fleet = [machine_from_dict(entry, i) for i, entry in enumerate(data)]
    ids = [m.id for m in fleet]
    if len(set(ids)) != len(ids):
        raise FleetParseError(f"{path}: duplicate machine ids")

    logger.info(f"Loaded {len(fleet)} machines from {path}")
    return fleet


def dumps_fleet(fleet: Sequence[Machine]) -> str:
    return dumps_json([machine_to_dict(m) for m in fleet])


def write_fleet(fleet: Sequence[Machine], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dumps_fleet(fleet))
    logger.info(f"Wrote fleet of {len(fleet)} machines to {path}")
    return path


def find_machine(fleet: Sequence[Machine], machine_id: str) -> Optional[Machine]:
    return next((m for m in fleet if m.id == machine_id), None)
