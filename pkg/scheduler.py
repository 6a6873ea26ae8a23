# qcloud-lab/scheduler.py - Utility-Based Machine Selection

"""Machine selection for quantum jobs.

For every capacity-feasible machine the representative circuit is compiled
against the current calibration, its fidelity predicted from the
post-compilation features, and its wait predicted from the machine queue. A
policy then picks one candidate: ``only_wt`` the shortest wait, ``only_fid``
the highest fidelity, ``proposed`` the highest utility.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from circuits import Circuit
from errors import ConfigError, NoFeasibleMachineError, ValidationError
from fleet import Machine, next_calibration_time, snapshot_at
from predictors import (
    DEFAULT_RUNTIME_FLOOR,
    JobRuntimeFeatures,
    ProductLinearModel,
    predict,
    predict_exec_time,
)
from transpiler import CompiledCircuit, FeatureVector, compile_for

logger = logging.getLogger(__name__)

PROPOSED = 'proposed'
ONLY_FID = 'only_fid'
ONLY_WT = 'only_wt'
POLICY_KINDS = (PROPOSED, ONLY_FID, ONLY_WT)

DEFAULT_WAIT_NORMALIZER = 86400.0  # Q_max: 24 hours
DEFAULT_PENALTY = 10.0
DEFAULT_QOS_MARGIN = 0.05  # slack kept under a QOS bound, as a fraction of it


@dataclass(frozen=True)
class Job:
    id: str
    circuits: Tuple[Circuit, ...]
    shots: int
    submit_time: float
    representative_index: int = 0
    qos_max_wait: Optional[float] = None

    def __post_init__(self):
        if not self.circuits:
            raise ValidationError(f"job {self.id} has no circuits")
        if not 0 <= self.representative_index < len(self.circuits):
            raise ValidationError(f"job {self.id}: representative_index {self.representative_index} out of range")
        if self.shots < 1:
            raise ValidationError(f"job {self.id}: shots must be >= 1")

    @property
    def representative(self) -> Circuit:
        return self.circuits[self.representative_index]

    @property
    def batch_size(self) -> int:
        return len(self.circuits)

    def runtime_features(self, machine: Machine) -> JobRuntimeFeatures:
        return JobRuntimeFeatures.for_circuit(self.representative, self.batch_size, self.shots, machine.n_qubits)


@dataclass(frozen=True)
class Candidate:
    machine_id: str
    predicted_fidelity: float
    predicted_wait: float
    predicted_exec: float
    crossover_predicted: bool = False
    qos_violated: bool = False
    cycle_index: int = 0

    def __post_init__(self):
        if self.predicted_wait < 0 or self.predicted_exec < 0:
            raise ValidationError(f"candidate {self.machine_id}: predicted durations must be non-negative")


@dataclass(frozen=True)
class UtilityConfig:
    """Sign coefficients in {-1, 0, 1} plus penalty magnitudes.

    The crossover and QOS terms subtract ``w * penalty`` when flagged.
    ``qos_margin`` is the share of a QOS bound held back when deciding which
    machines meet it.
    """

    w_fid: int = 1
    w_wait: int = -1
    w_qos: int = 1
    w_cc: int = 1
    qos_penalty: float = DEFAULT_PENALTY
    cc_penalty: float = DEFAULT_PENALTY
    wait_normalizer: float = DEFAULT_WAIT_NORMALIZER
    qos_margin: float = DEFAULT_QOS_MARGIN

    def __post_init__(self):
        for name in ('w_fid', 'w_wait', 'w_qos', 'w_cc'):
            if getattr(self, name) not in (-1, 0, 1):
                raise ConfigError(f"{name} must be -1, 0 or 1", field=f'utility.{name}')
        if self.wait_normalizer <= 0:
            raise ConfigError("wait_normalizer must be positive", field='utility.wait_normalizer')
        if not 0.0 <= self.qos_margin < 1.0:
            raise ConfigError("qos_margin must be in [0, 1)", field='utility.qos_margin')
        for name in ('qos_penalty', 'cc_penalty'):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1", field=f'utility.{name}')


@dataclass(frozen=True)
class Policy:
    kind: str
    config: UtilityConfig = field(default_factory=UtilityConfig)
    label: str = ''

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy '{self.kind}', expected one of {', '.join(POLICY_KINDS)}", field='scenario.policies')
        if not self.label:
            object.__setattr__(self, 'label', self.kind)

    @property
    def cc_aware(self) -> bool:
        return self.kind == PROPOSED and self.config.w_cc != 0


@dataclass(frozen=True)
class Predictors:
    """Fitted models the scheduler needs."""

    fidelity: ProductLinearModel
    runtime: ProductLinearModel
    runtime_floor: float = DEFAULT_RUNTIME_FLOOR

    def fidelity_of(self, features: FeatureVector) -> float:
        return min(1.0, max(0.0, predict(self.fidelity, features.as_tuple())))

    def exec_time_of(self, jf: JobRuntimeFeatures) -> float:
        return predict_exec_time(self.runtime, jf, self.runtime_floor)


@dataclass(frozen=True)
class MachineView:
    """What the scheduler sees of one machine at decision time."""

    machine: Machine
    predicted_wait: float


class CompilationCache:
    """Memoizes compile_for by (circuit, machine, cycle); compile_for is pure."""

    def __init__(self):
        self._entries: Dict[Tuple[Circuit, str, int], Tuple[CompiledCircuit, FeatureVector]] = {}
        self.hits = 0
        self.misses = 0

    def compile(self, circuit: Circuit, machine: Machine, t: float) -> Tuple[CompiledCircuit, FeatureVector]:
        key = (circuit, machine.id, snapshot_at(machine, t).cycle_index)
        entry = self._entries.get(key)
        if entry is None:
            self.misses += 1
            entry = compile_for(circuit, machine, t)
            self._entries[key] = entry
        else:
            self.hits += 1
        return entry


def feasible_machines(
    job: Job,
    fleet: Sequence[Machine],
    now: float,
    waits: Optional[Dict[str, float]] = None,
    margin: float = 0.0,
) -> List[Machine]:
    """Capacity filter, then QOS filter on predicted waits.

    A machine meets the bound when its predicted wait leaves ``margin * bound``
    of slack; failing that, the plain bound is used. When no machine meets the
    bound at all, only the machines whose wait is within ``margin * bound`` of
    the shortest stay, so the job overshoots as little as it can. Without
    predicted waits the whole capable list is returned.
    """
    if not fleet:
        raise NoFeasibleMachineError("fleet is empty")
    width = job.representative.width
    capable = [m for m in fleet if m.n_qubits >= width]
    if not capable:
        raise NoFeasibleMachineError(f"job {job.id} needs {width} qubits; no machine is large enough")

    if job.qos_max_wait is None or waits is None:
        return capable

    bound = job.qos_max_wait
    slack = margin * bound
    within = [m for m in capable if waits[m.id] <= bound - slack]
    if not within:
        within = [m for m in capable if waits[m.id] <= bound]
    if within:
        return within

    least = min(waits[m.id] for m in capable)
    logger.warning(f"Job {job.id}: no machine meets QOS {bound:.0f}s at t={now:.0f} (shortest wait {least:.0f}s)")
    return [m for m in capable if waits[m.id] <= least + slack]


def predicts_crossover(machine: Machine, now: float, predicted_wait: float, predicted_exec: float) -> bool:
    """True iff the job is predicted to finish after the machine's next calibration."""
    return now + predicted_wait + predicted_exec > next_calibration_time(machine, now)


def utility(c: Candidate, cfg: UtilityConfig) -> float:
    score = cfg.w_fid * c.predicted_fidelity + cfg.w_wait * (c.predicted_wait / cfg.wait_normalizer)
    if c.qos_violated:
        score -= cfg.w_qos * cfg.qos_penalty
    if c.crossover_predicted:
        score -= cfg.w_cc * cfg.cc_penalty
    return score


def build_candidate(
    job: Job,
    view: MachineView,
    predictors: Predictors,
    now: float,
    cache: Optional[CompilationCache] = None,
) -> Candidate:
    machine = view.machine
    if cache is not None:
        cc, features = cache.compile(job.representative, machine, now)
    else:
        cc, features = compile_for(job.representative, machine, now)
    exec_time = predictors.exec_time_of(job.runtime_features(machine))
    qos_violated = job.qos_max_wait is not None and view.predicted_wait > job.qos_max_wait
    return Candidate(
        machine_id=machine.id,
        predicted_fidelity=predictors.fidelity_of(features),
        predicted_wait=view.predicted_wait,
        predicted_exec=exec_time,
        crossover_predicted=predicts_crossover(machine, now, view.predicted_wait, exec_time),
        qos_violated=qos_violated,
        cycle_index=cc.cycle_index,
    )


def policy_score(c: Candidate, policy: Policy) -> float:
    if policy.kind == ONLY_WT:
        return -c.predicted_wait
    if policy.kind == ONLY_FID:
        return c.predicted_fidelity
    return utility(c, policy.config)


def rank_key(c: Candidate, policy: Policy):
    """Sort key: best first; ties go to higher fidelity, lower wait, then smaller id."""
    return (-policy_score(c, policy), -c.predicted_fidelity, c.predicted_wait, c.machine_id)


def select_machine(
    job: Job,
    views: Sequence[MachineView],
    predictors: Predictors,
    policy: Policy,
    now: float,
    cache: Optional[CompilationCache] = None,
) -> Tuple[str, Candidate]:
    by_id = {v.machine.id: v for v in views}
    fleet = [v.machine for v in views]
    waits = {v.machine.id: v.predicted_wait for v in views}
    use_qos = policy.kind == PROPOSED and policy.config.w_qos != 0
    machines = feasible_machines(job, fleet, now, waits if use_qos else None, policy.config.qos_margin)

    candidates = [build_candidate(job, by_id[m.id], predictors, now, cache) for m in machines]
    best = min(candidates, key=lambda c: rank_key(c, policy))

    logger.debug(
        f"[{policy.label}] job {job.id} -> {best.machine_id} "
        f"(fid {best.predicted_fidelity:.3f}, wait {best.predicted_wait:.0f}s, cc {best.crossover_predicted})"
    )
    return best.machine_id, best


NAIVE_SUFFIX = '_naive'


def policy_from_name(name: str, config: Optional[UtilityConfig] = None, cc_aware: bool = True) -> Policy:
    """Build a policy from its configured name.

    ``proposed_naive`` is the proposed policy with the crossover term switched
    off, as is plain ``proposed`` when the scenario is not calibration aware.
    """
    config = config or UtilityConfig()
    if name == PROPOSED + NAIVE_SUFFIX:
        return Policy(PROPOSED, replace(config, w_cc=0), label=name)
    if name == PROPOSED and not cc_aware:
        return Policy(PROPOSED, replace(config, w_cc=0), label=name)
    return Policy(name, config, label=name)
