# qcloud-lab/noise_oracle.py - Ground-Truth Probability of Success

"""Independent-error success model for compiled circuits.

A trial succeeds only when no gate or readout error fires; POS is the
fraction of successful trials.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from circuits import CX, SINGLE_QUBIT
from errors import ValidationError
from fleet import CalibrationSnapshot
from transpiler import CompiledCircuit
from utils.validation import normalize_edge

logger = logging.getLogger(__name__)

ANALYTIC = 'analytic'
SHOT_CHUNK = 10_000


@dataclass(frozen=True)
class PosEstimate:
    pos: float
    shots: Union[int, str] = ANALYTIC
    seed: Optional[int] = None


def error_events(cc: CompiledCircuit, s: CalibrationSnapshot) -> np.ndarray:
    """Per-event error probability: one entry per CX, single-qubit gate and measured qubit."""
    probs = []
    for gate in cc.physical_gates:
        if gate.kind == CX:
            probs.append(s.cx_error[normalize_edge(*gate.operands)])
        elif gate.kind == SINGLE_QUBIT:
            probs.append(s.single_qubit_error[gate.operands[0]])
    for q in sorted(cc.measured_physical):
        probs.append(s.readout_error[q])
    return np.asarray(probs, dtype=float)


def analytic_pos(cc: CompiledCircuit, s: CalibrationSnapshot) -> PosEstimate:
    pos = float(np.prod(1.0 - error_events(cc, s)))
    return PosEstimate(pos=pos)


def sample_pos(cc: CompiledCircuit, s: CalibrationSnapshot, shots: int, seed: int) -> PosEstimate:
    """Monte Carlo POS; chunk streams are spawned from the seed so results do not depend on chunking order."""
    if not isinstance(shots, int) or shots < 1:
        raise ValidationError(f"shots must be a positive integer, got {shots!r}")

    probs = error_events(cc, s)
    chunks = [SHOT_CHUNK] * (shots // SHOT_CHUNK)
    if shots % SHOT_CHUNK:
        chunks.append(shots % SHOT_CHUNK)

    streams = np.random.SeedSequence(seed).spawn(len(chunks))
    clean = 0
    for size, stream in zip(chunks, streams):
        rng = np.random.default_rng(stream)
        fired = rng.random((size, probs.size)) < probs
        clean += int(np.count_nonzero(~fired.any(axis=1)))

    pos = clean / shots
    logger.debug(f"Sampled POS for {cc.name} on {cc.machine_id}: {pos:.4f} over {shots} shots")
    return PosEstimate(pos=pos, shots=shots, seed=seed)
