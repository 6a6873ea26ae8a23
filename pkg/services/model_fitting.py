# qcloud-lab/services/model_fitting.py - Predictor Training Datasets

"""Builds the fidelity and execution-time training sets and fits both models.

The fidelity set compiles every benchmark on every machine large enough to
hold it, once per calibration cycle, and scores it with the analytic oracle.
The timing set draws random jobs per machine through the synthetic timing
generator.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from circuits import Circuit, benchmark_suite
from errors import InsufficientSamplesError, ZeroVarianceError
from fleet import Machine
from noise_oracle import analytic_pos
from predictors import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    DEFAULT_TRAIN_FRACTION,
    RUNTIME_FEATURES,
    FitReport,
    JobRuntimeFeatures,
    TimingGenerator,
    feature_correlations,
    fit_product_linear,
    pearson,
    predict,
)
from transpiler import FeatureVector, compile_for

logger = logging.getLogger(__name__)

TIMING_BATCH_RANGE = (1, 75)
TIMING_SHOTS_RANGE = (1024, 8192)


@dataclass(frozen=True)
class FidelitySample:
    machine_id: str
    benchmark: str
    cycle_index: int
    features: FeatureVector
    pos: float


@dataclass(frozen=True)
class RuntimeSample:
    machine_id: str
    features: JobRuntimeFeatures
    observed: float


@dataclass
class FitOutcome:
    fidelity: FitReport
    runtime: FitReport
    fidelity_feature_pearson: Dict[str, float] = field(default_factory=dict)
    runtime_feature_pearson: Dict[str, float] = field(default_factory=dict)
    per_machine_runtime_pearson: Dict[str, Optional[float]] = field(default_factory=dict)
    per_benchmark_fidelity_pearson: Dict[str, Optional[float]] = field(default_factory=dict)
    fidelity_table: List[dict] = field(default_factory=list)
    sample_counts: Dict[str, int] = field(default_factory=dict)


def fidelity_dataset(
    fleet: Sequence[Machine],
    circuits: Optional[Sequence[Circuit]] = None,
    cycles_per_machine: int = 8,
) -> List[FidelitySample]:
    circuits = list(circuits) if circuits is not None else benchmark_suite()
    samples = []
    for machine in fleet:
        for snapshot in machine.snapshots[:cycles_per_machine]:
            for circuit in circuits:
                if circuit.width > machine.n_qubits:
                    continue
                cc, features = compile_for(circuit, machine, snapshot.valid_from)
                samples.append(FidelitySample(
                    machine_id=machine.id,
                    benchmark=circuit.name,
                    cycle_index=snapshot.cycle_index,
                    features=features,
                    pos=analytic_pos(cc, snapshot).pos,
                ))
    logger.info(f"Built fidelity dataset: {len(samples)} compilations over {len(fleet)} machines")
    return samples


def runtime_dataset(
    fleet: Sequence[Machine],
    generator: TimingGenerator,
    samples_per_machine: int,
    seed: int,
    circuits: Optional[Sequence[Circuit]] = None,
) -> List[RuntimeSample]:
    circuits = list(circuits) if circuits is not None else benchmark_suite()
    rng = np.random.default_rng(seed)
    samples = []
    for machine in fleet:
        fitting = [c for c in circuits if c.width <= machine.n_qubits]
        if not fitting:
            continue
        for _ in range(samples_per_machine):
            circuit = fitting[int(rng.integers(len(fitting)))]
            batch = int(rng.integers(TIMING_BATCH_RANGE[0], TIMING_BATCH_RANGE[1] + 1))
            shots = int(rng.integers(TIMING_SHOTS_RANGE[0], TIMING_SHOTS_RANGE[1] + 1))
            jf = JobRuntimeFeatures.for_circuit(circuit, batch, shots, machine.n_qubits)
            samples.append(RuntimeSample(machine.id, jf, generator.observed_time(jf, rng)))
    logger.info(f"Built timing dataset: {len(samples)} jobs over {len(fleet)} machines")
    return samples


def optional_pearson(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Pearson, or None where it is undefined (constant or too-short series)."""
    if len(xs) < 2:
        return None
    try:
        return pearson(xs, ys)
    except ZeroVarianceError:
        return None


def fidelity_table(samples: Sequence[FidelitySample]) -> List[dict]:
    """Mean POS per machine and benchmark over the sampled cycles, machines in ascending order of their mean."""
    cells: Dict[str, Dict[str, List[float]]] = defaultdict(lambda: defaultdict(list))
    for s in samples:
        cells[s.machine_id][s.benchmark].append(s.pos)

    rows = []
    for machine_id, by_benchmark in cells.items():
        means = {name: float(np.mean(values)) for name, values in sorted(by_benchmark.items())}
        rows.append({
            'machine_id': machine_id,
            'mean_pos': float(np.mean(list(means.values()))),
            'benchmarks': means,
        })
    rows.sort(key=lambda row: (row['mean_pos'], row['machine_id']))
    return rows


def fit_models(
    fleet: Sequence[Machine],
    cycles_per_machine: int = 8,
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    split_seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    timing: Optional[TimingGenerator] = None,
    timing_samples_per_machine: int = 60,
    timing_seed: int = 1,
) -> FitOutcome:
    """Fit both predictors and the correlation tables reported next to them."""
    timing = timing or TimingGenerator()

    fid_samples = fidelity_dataset(fleet, cycles_per_machine=cycles_per_machine)
    if not fid_samples:
        raise InsufficientSamplesError("no machine in the fleet can hold any benchmark")
    fid_xy = [(s.features.as_tuple(), s.pos) for s in fid_samples]
    fidelity = fit_product_linear(fid_xy, FeatureVector.NAMES, train_fraction, split_seed, max_iter, tol)
    fid_table = feature_correlations(fid_xy, FeatureVector.NAMES, train_fraction, split_seed)

    rt_samples = runtime_dataset(fleet, timing, timing_samples_per_machine, timing_seed)
    if not rt_samples:
        raise InsufficientSamplesError("timing dataset is empty")
    rt_xy = [(s.features.as_vector(), s.observed) for s in rt_samples]
    runtime = fit_product_linear(rt_xy, RUNTIME_FEATURES, train_fraction, split_seed, max_iter, tol)
    rt_table = feature_correlations(rt_xy, RUNTIME_FEATURES, train_fraction, split_seed)

    per_machine = {}
    for machine in fleet:
        rows = [s for s in rt_samples if s.machine_id == machine.id]
        per_machine[machine.id] = optional_pearson(
            [predict(runtime.model, s.features.as_vector()) for s in rows],
            [s.observed for s in rows],
        )

    per_benchmark = {}
    for name in sorted({s.benchmark for s in fid_samples}):
        rows = [s for s in fid_samples if s.benchmark == name]
        per_benchmark[name] = optional_pearson(
            [predict(fidelity.model, s.features.as_tuple()) for s in rows],
            [s.pos for s in rows],
        )

    for name, r in fid_table.items():
        if r > fidelity.test_pearson:
            logger.warning(f"Single feature '{name}' (r={r:.3f}) beats the tuned fidelity model (r={fidelity.test_pearson:.3f})")

    return FitOutcome(
        fidelity=fidelity,
        runtime=runtime,
        fidelity_feature_pearson=fid_table,
        runtime_feature_pearson=rt_table,
        per_machine_runtime_pearson=per_machine,
        per_benchmark_fidelity_pearson=per_benchmark,
        fidelity_table=fidelity_table(fid_samples),
        sample_counts={'fidelity': len(fid_samples), 'runtime': len(rt_samples)},
    )


def outcome_to_dict(outcome: FitOutcome) -> dict:
    return {
        'fidelity': {
            'tuned_test_pearson': outcome.fidelity.test_pearson,
            'tuned_train_pearson': outcome.fidelity.train_pearson,
            'per_feature_test_pearson': outcome.fidelity_feature_pearson,
            'per_benchmark_pearson': outcome.per_benchmark_fidelity_pearson,
            'machine_benchmark_pos': outcome.fidelity_table,
        },
        'runtime': {
            'tuned_test_pearson': outcome.runtime.test_pearson,
            'tuned_train_pearson': outcome.runtime.train_pearson,
            'per_feature_test_pearson': outcome.runtime_feature_pearson,
            'per_machine_pearson': outcome.per_machine_runtime_pearson,
        },
        'samples': outcome.sample_counts,
    }
