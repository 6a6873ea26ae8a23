# qcloud-lab/cloudsim.py - Quantum Cloud Discrete-Event Simulation

"""Event-driven simulation of a fleet serving a stream of benchmark jobs.

Events are job arrivals, execution finishes and calibration boundaries. Each
policy runs on its own clone of the same seeded initial queues and sees the
same arrival stream.
"""

import heapq
import logging
from collections import Counter, deque
from dataclasses import dataclass, field, replace
from itertools import count
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from circuits import BENCHMARK_SUITE, Circuit, build_benchmark
from errors import OutOfRangeError, ScenarioError
from fleet import DEFAULT_CALIBRATION_PERIOD, FleetSpec, Machine, apply_stagger, generate_synthetic_fleet, load_fleet, snapshot_at
from noise_oracle import analytic_pos
from predictors import JobRuntimeFeatures, estimate_queue_time, jitter
from scheduler import (
    PROPOSED,
    CompilationCache,
    Candidate,
    Job,
    MachineView,
    Policy,
    Predictors,
    select_machine,
)
from services.policy_runner import PolicyRunner
from transpiler import CompiledCircuit
from utils.serialization import write_csv, write_json

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

LOW, HIGH, RANDOM = 'low', 'high', 'random'
LOAD_BANDS = {
    LOW: (0.0, 0.1),
    HIGH: (0.5, 1.0),
    RANDOM: (0.01, 1.0),
}

FILLER_BATCH_RANGE = (1, 75)
FILLER_SHOTS_RANGE = (1024, 8192)
MAX_FILLERS_PER_MACHINE = 500

# same-time ordering: a finishing job frees its machine before a boundary,
# and a boundary is applied before new arrivals are placed
FINISH, CALIBRATION, ARRIVAL = 0, 1, 2


@dataclass(frozen=True)
class LoadProfile:
    """Background queue level per machine, as a band of Q_max.

    With ``sustained`` every filler that finishes is replaced at the tail of its
    queue, so the background level holds for the whole run instead of draining.
    """

    kind: str = LOW
    max_queue: float = float(DEFAULT_CALIBRATION_PERIOD)
    filler_seed: int = 0
    sustained: bool = True

    def __post_init__(self):
        if self.kind not in LOAD_BANDS:
            raise ScenarioError(f"unknown load profile '{self.kind}', expected one of {', '.join(LOAD_BANDS)}")
        if self.max_queue <= 0:
            raise ScenarioError("max_queue must be positive")

    @property
    def band(self) -> Tuple[float, float]:
        low, high = LOAD_BANDS[self.kind]
        return low * self.max_queue, high * self.max_queue


@dataclass
class QueuedJob:
    """A queue entry: a scheduled benchmark job, or filler ballast when ``job`` is None."""

    job_id: str
    features: JobRuntimeFeatures
    predicted_exec: float
    actual_exec: float
    enqueue_time: float = 0.0
    job: Optional[Job] = None
    compiled: Tuple[CompiledCircuit, ...] = ()
    candidate: Optional[Candidate] = None
    qos_feasible: Optional[bool] = None


@dataclass
class MachineState:
    machine: Machine
    queue: Deque[QueuedJob] = field(default_factory=deque)
    running: Optional[QueuedJob] = None
    running_start: float = 0.0
    finish_time: float = 0.0
    completed: int = 0
    refills: int = 0

    @property
    def machine_id(self) -> str:
        return self.machine.id

    def remaining_current(self, now: float) -> float:
        """Predicted time left on the running job."""
        if self.running is None:
            return 0.0
        return max(0.0, self.running_start + self.running.predicted_exec - now)

    def predicted_wait(self, now: float) -> float:
        total = 0.0
        for entry in self.queue:
            total += entry.predicted_exec
        return self.remaining_current(now) + total

    def clone(self) -> 'MachineState':
        """Copy of the mutable queue; the machine itself is immutable and shared."""
        return MachineState(
            machine=self.machine,
            queue=deque(replace(entry) for entry in self.queue),
            running=replace(self.running) if self.running else None,
            running_start=self.running_start,
            finish_time=self.finish_time,
            completed=self.completed,
            refills=self.refills,
        )


@dataclass(frozen=True)
class JobRecord:
    job_id: str
    policy: str
    machine_id: str
    benchmark: str
    batch_size: int
    submit_time: float
    start_time: float
    finish_time: float
    wait: float
    exec: float
    pos: float
    predicted_fidelity: float
    predicted_wait: float
    crossover: bool
    crossover_predicted: bool
    qos_met: Optional[bool]
    qos_feasible: Optional[bool]


CSV_COLUMNS = ('schema_version',) + tuple(JobRecord.__dataclass_fields__)


@dataclass
class TraceMetrics:
    policy: str
    records: List[JobRecord] = field(default_factory=list)
    calibration_events: int = 0

    @property
    def aggregates(self) -> dict:
        n = len(self.records)
        with_qos = [r for r in self.records if r.qos_met is not None]
        return {
            'jobs': n,
            'mean_pos': sum(r.pos for r in self.records) / n if n else 0.0,
            'mean_wait': sum(r.wait for r in self.records) / n if n else 0.0,
            'max_wait': max((r.wait for r in self.records), default=0.0),
            'crossover_count': sum(1 for r in self.records if r.crossover),
            'crossover_rate': sum(1 for r in self.records if r.crossover) / n if n else 0.0,
            'qos_violations': sum(1 for r in with_qos if not r.qos_met),
            'qos_violations_when_feasible': sum(1 for r in with_qos if not r.qos_met and r.qos_feasible),
            'calibration_events': self.calibration_events,
            'machine_job_counts': dict(sorted(Counter(r.machine_id for r in self.records).items())),
        }

    def series(self) -> dict:
        return {
            'job_id': [r.job_id for r in self.records],
            'pos': [r.pos for r in self.records],
            'wait': [r.wait for r in self.records],
            'crossover': [int(r.crossover) for r in self.records],
            'machine_id': [r.machine_id for r in self.records],
        }


@dataclass(frozen=True)
class Scenario:
    policies: Tuple[Policy, ...]
    load: LoadProfile = field(default_factory=LoadProfile)
    fleet_path: Optional[str] = None
    fleet_spec: Optional[FleetSpec] = None
    job_count: int = 100
    job_seed: int = 0
    batch_range: Tuple[int, int] = (1, 75)
    shots: int = 4096
    qos: Optional[float] = None
    cc_aware: bool = False
    stagger: bool = False
    arrival_window: float = float(DEFAULT_CALIBRATION_PERIOD)
    exec_noise: float = 0.05
    noise_seed: int = 0
    max_workers: int = 1

    def __post_init__(self):
        if self.job_count < 0:
            raise ScenarioError("job_count must be >= 0")
        low, high = self.batch_range
        if not 1 <= low <= high:
            raise ScenarioError(f"batch_range must satisfy 1 <= min <= max, got {self.batch_range}")
        if self.shots < 1:
            raise ScenarioError("shots must be >= 1")
        if self.qos is not None and self.qos <= 0:
            raise ScenarioError("qos must be positive when set")
        if self.arrival_window <= 0:
            raise ScenarioError("arrival_window must be positive")
        if not 0 <= self.exec_noise < 1:
            raise ScenarioError("exec_noise must be in [0, 1)")


@dataclass
class ComparisonReport:
    metrics: Dict[str, TraceMetrics]
    ratios: Dict[str, Optional[float]]

    @property
    def aggregates(self) -> Dict[str, dict]:
        return {label: m.aggregates for label, m in self.metrics.items()}

    @property
    def series(self) -> Dict[str, dict]:
        return {label: m.series() for label, m in self.metrics.items()}


# --- setup ---

def resolve_fleet(scenario: Scenario, fleet: Optional[Sequence[Machine]] = None) -> List[Machine]:
    if fleet is None:
        if scenario.fleet_path:
            fleet = load_fleet(scenario.fleet_path)
        elif scenario.fleet_spec is not None:
            fleet = generate_synthetic_fleet(scenario.fleet_spec)
        else:
            raise ScenarioError("scenario names neither a fleet file nor a fleet spec")
    fleet = list(fleet)
    if not fleet:
        raise ScenarioError("fleet is empty")
    if scenario.stagger:
        fleet = apply_stagger(fleet)
    return fleet


def _filler_pool() -> List[Circuit]:
    return [build_benchmark(name, params) for name, params in BENCHMARK_SUITE]


def _draw_filler(
    rng: np.random.Generator,
    pool: Sequence[Circuit],
    machine: Machine,
    predictors: Predictors,
) -> Tuple[JobRuntimeFeatures, float]:
    batch = int(rng.integers(FILLER_BATCH_RANGE[0], FILLER_BATCH_RANGE[1] + 1))
    shots = int(rng.integers(FILLER_SHOTS_RANGE[0], FILLER_SHOTS_RANGE[1] + 1))
    circuit = pool[int(rng.integers(len(pool)))]
    jf = JobRuntimeFeatures.for_circuit(circuit, batch, shots, machine.n_qubits)
    return jf, predictors.exec_time_of(jf)


def seed_load(
    fleet: Sequence[Machine],
    profile: LoadProfile,
    predictors: Predictors,
    exec_noise: float = 0.0,
    max_fillers: int = MAX_FILLERS_PER_MACHINE,
) -> List[MachineState]:
    """Pre-fill every machine's queue with filler jobs until its estimated queue time lands in the load band.

    At most ``max_fillers`` jobs go to one machine; a runtime model that
    predicts near-floor times would otherwise need tens of thousands.
    """
    rng = np.random.default_rng(profile.filler_seed)
    noise_rng = np.random.default_rng([profile.filler_seed, 1])
    pool = _filler_pool()
    states = []

    for machine in fleet:
        low, high = profile.band
        target = float(rng.uniform(low, high))
        state = MachineState(machine)
        estimate = 0.0
        while len(state.queue) < max_fillers:
            jf, predicted = _draw_filler(rng, pool, machine, predictors)
            if not (estimate < low or estimate + predicted <= target):
                break
            state.queue.append(QueuedJob(
                job_id=f"filler-{machine.id}-{len(state.queue):04d}",
                features=jf,
                predicted_exec=predicted,
                actual_exec=predicted * jitter(noise_rng, exec_noise),
            ))
            estimate = estimate_queue_time([jf], predictors.runtime, estimate, predictors.runtime_floor)
        else:
            logger.warning(
                f"Seeding {machine.id} stopped at {max_fillers} filler jobs "
                f"({estimate:.0f}s of the {target:.0f}s target)"
            )

        logger.debug(f"Seeded {machine.id}: {len(state.queue)} filler jobs, {estimate:.0f}s estimated")
        states.append(state)

    logger.info(f"Seeded {profile.kind} load on {len(states)} machines (Q_max {profile.max_queue:.0f}s)")
    return states


def generate_jobs(scenario: Scenario, start_time: float = 0.0) -> List[Job]:
    """Random benchmark batches with uniform arrival times over the arrival window."""
    rng = np.random.default_rng(scenario.job_seed)
    pool = _filler_pool()
    drafts = []
    for _ in range(scenario.job_count):
        circuit = pool[int(rng.integers(len(pool)))]
        batch = int(rng.integers(scenario.batch_range[0], scenario.batch_range[1] + 1))
        submit = start_time + float(rng.uniform(0.0, scenario.arrival_window))
        drafts.append((submit, circuit, batch))

    drafts.sort(key=lambda d: d[0])
    return [
        Job(
            id=f"job-{i:03d}",
            circuits=(circuit,) * batch,
            shots=scenario.shots,
            submit_time=submit,
            qos_max_wait=scenario.qos,
        )
        for i, (submit, circuit, batch) in enumerate(drafts)
    ]


# --- event loop ---

class _PolicySimulation:
    def __init__(self, policy: Policy, states: List[MachineState], jobs: Sequence[Job],
                 predictors: Predictors, exec_noise: float, noise_seed: int, load: Optional[LoadProfile] = None):
        self.policy = policy
        self.states = {s.machine_id: s for s in states}
        self.order = [s.machine_id for s in states]
        self.machine_index = {mid: i for i, mid in enumerate(self.order)}
        self.load = load or LoadProfile(sustained=False)
        self.pool = _filler_pool()
        self.jobs = jobs
        self.predictors = predictors
        self.exec_noise = exec_noise
        self.noise_rng = np.random.default_rng(noise_seed)
        self.cache = CompilationCache()
        self.metrics = TraceMetrics(policy.label)
        self._events = []
        self._seq = count()
        self._pending_arrivals = len(jobs)
        self._open_jobs = 0

    def _push(self, time: float, kind: int, payload):
        heapq.heappush(self._events, (time, kind, next(self._seq), payload))

    def _idle(self) -> bool:
        """True once every arrival has been placed and has finished; background fillers do not count."""
        return self._pending_arrivals == 0 and self._open_jobs == 0

    def run(self) -> TraceMetrics:
        for job in self.jobs:
            self._push(job.submit_time, ARRIVAL, job)
        for machine_id in self.order:
            machine = self.states[machine_id].machine
            self._push(float(machine.first_boundary), CALIBRATION, machine_id)
            self._try_start(self.states[machine_id], 0.0)

        while self._events and not self._idle():
            now, kind, _, payload = heapq.heappop(self._events)
            if kind == FINISH:
                self._finish(self.states[payload], now)
            elif kind == CALIBRATION:
                self.metrics.calibration_events += 1
                machine = self.states[payload].machine
                self._push(float(now + machine.calibration_period), CALIBRATION, payload)
            else:
                self._pending_arrivals -= 1
                self._arrive(payload, now)

        self.metrics.records.sort(key=lambda r: r.job_id)
        return self.metrics

    def _arrive(self, job: Job, now: float):
        views = [MachineView(self.states[mid].machine, self.states[mid].predicted_wait(now)) for mid in self.order]
        qos_feasible = None
        if job.qos_max_wait is not None:
            qos_feasible = any(
                v.predicted_wait <= job.qos_max_wait
                for v in views
                if v.machine.n_qubits >= job.representative.width
            )

        try:
            machine_id, candidate = select_machine(job, views, self.predictors, self.policy, now, self.cache)
            state = self.states[machine_id]
            compiled = tuple(self.cache.compile(c, state.machine, now)[0] for c in job.circuits)
        except OutOfRangeError as e:
            raise ScenarioError(f"job {job.id} arrives outside the fleet calibration horizon: {e}") from e

        jf = job.runtime_features(state.machine)
        state.queue.append(QueuedJob(
            job_id=job.id,
            features=jf,
            predicted_exec=candidate.predicted_exec,
            actual_exec=candidate.predicted_exec * jitter(self.noise_rng, self.exec_noise),
            enqueue_time=now,
            job=job,
            compiled=compiled,
            candidate=candidate,
            qos_feasible=qos_feasible,
        ))
        self._open_jobs += 1
        self._try_start(state, now)

    def _try_start(self, state: MachineState, now: float):
        if state.running is not None or not state.queue:
            return
        entry = state.queue.popleft()
        state.running = entry
        state.running_start = now
        state.finish_time = now + entry.actual_exec
        self._push(state.finish_time, FINISH, state.machine_id)

    def _finish(self, state: MachineState, now: float):
        entry = state.running
        start = state.running_start
        state.running = None
        state.completed += 1
        if entry.job is not None:
            self._record(state, entry, start, now)
            self._open_jobs -= 1
        elif self.load.sustained:
            self._refill(state)
        self._try_start(state, now)

    def _refill(self, state: MachineState):
        """Queue a fresh filler behind everything already waiting on the machine."""
        k = state.refills
        rng = np.random.default_rng([self.load.filler_seed, self.machine_index[state.machine_id], k, 2])
        jf, predicted = _draw_filler(rng, self.pool, state.machine, self.predictors)
        state.queue.append(QueuedJob(
            job_id=f"refill-{state.machine_id}-{k:05d}",
            features=jf,
            predicted_exec=predicted,
            actual_exec=predicted * jitter(rng, self.exec_noise),
        ))
        state.refills += 1

    def _record(self, state: MachineState, entry: QueuedJob, start: float, finish: float):
        job = entry.job
        try:
            snapshot = snapshot_at(state.machine, start)
        except OutOfRangeError as e:
            raise ScenarioError(f"job {job.id} starts outside the fleet calibration horizon: {e}") from e

        # a stale compilation keeps its old mapping but runs under the new error rates
        pos = sum(analytic_pos(cc, snapshot).pos for cc in entry.compiled) / len(entry.compiled)
        crossover = any(cc.cycle_index != snapshot.cycle_index for cc in entry.compiled)
        wait = start - job.submit_time
        self.metrics.records.append(JobRecord(
            job_id=job.id,
            policy=self.policy.label,
            machine_id=state.machine_id,
            benchmark=job.representative.name,
            batch_size=job.batch_size,
            submit_time=job.submit_time,
            start_time=start,
            finish_time=finish,
            wait=wait,
            exec=entry.actual_exec,
            pos=pos,
            predicted_fidelity=entry.candidate.predicted_fidelity,
            predicted_wait=entry.candidate.predicted_wait,
            crossover=crossover,
            crossover_predicted=entry.candidate.crossover_predicted,
            qos_met=None if job.qos_max_wait is None else wait <= job.qos_max_wait,
            qos_feasible=entry.qos_feasible,
        ))


def _unique_labels(policies: Sequence[Policy]) -> List[Policy]:
    seen = Counter()
    result = []
    for policy in policies:
        seen[policy.label] += 1
        label = policy.label if seen[policy.label] == 1 else f"{policy.label}#{seen[policy.label]}"
        result.append(replace(policy, label=label))
    return result


def run(scenario: Scenario, predictors: Predictors, fleet: Optional[Sequence[Machine]] = None) -> Dict[str, TraceMetrics]:
    """Simulate every policy of the scenario on identical initial state and arrivals."""
    machines = resolve_fleet(scenario, fleet)
    initial = seed_load(machines, scenario.load, predictors, scenario.exec_noise)
    jobs = generate_jobs(scenario)
    logger.info(
        f"Simulating {len(jobs)} jobs on {len(machines)} machines under {scenario.load.kind} load "
        f"(qos={scenario.qos}, cc_aware={scenario.cc_aware}, stagger={scenario.stagger})"
    )

    tasks = {}
    for policy in _unique_labels(scenario.policies):
        def task(policy=policy):
            states = [s.clone() for s in initial]
            return _PolicySimulation(
                policy, states, jobs, predictors, scenario.exec_noise, scenario.noise_seed, scenario.load,
            ).run()
        tasks[policy.label] = task

    return PolicyRunner(scenario.max_workers).run_all(tasks)


def safe_ratio(numerator: Optional[float], denominator: Optional[float]) -> Optional[float]:
    if numerator is None or denominator is None:
        return None
    if denominator == 0:
        return 1.0 if numerator == 0 else None
    return numerator / denominator


def policy_ratios(aggregates: Dict[str, dict]) -> Dict[str, Optional[float]]:
    """Headline comparisons between the proposed policy and the baselines, where both are present."""
    def get(label, key):
        return aggregates[label][key] if label in aggregates else None

    return {
        'fidelity_proposed_over_only_fid': safe_ratio(get(PROPOSED, 'mean_pos'), get('only_fid', 'mean_pos')),
        'fidelity_proposed_over_only_wt': safe_ratio(get(PROPOSED, 'mean_pos'), get('only_wt', 'mean_pos')),
        'wait_only_fid_over_proposed': safe_ratio(get('only_fid', 'mean_wait'), get(PROPOSED, 'mean_wait')),
        'wait_proposed_over_only_wt': safe_ratio(get(PROPOSED, 'mean_wait'), get('only_wt', 'mean_wait')),
        'crossovers_proposed_minus_naive': (
            get(PROPOSED, 'crossover_count') - get('proposed_naive', 'crossover_count')
            if PROPOSED in aggregates and 'proposed_naive' in aggregates else None
        ),
    }


def compare_policies(scenario: Scenario, predictors: Predictors, fleet: Optional[Sequence[Machine]] = None) -> ComparisonReport:
    if len(scenario.policies) < 2:
        raise ScenarioError("compare_policies needs at least two policies")
    metrics = run(scenario, predictors, fleet)
    report = ComparisonReport(metrics, policy_ratios({label: m.aggregates for label, m in metrics.items()}))
    for label, agg in report.aggregates.items():
        logger.info(
            f"{label}: mean POS {agg['mean_pos']:.4f}, mean wait {agg['mean_wait']:.0f}s, "
            f"crossovers {agg['crossover_count']}, QOS violations {agg['qos_violations']}"
        )
    return report


# --- export ---

def record_row(record: JobRecord) -> dict:
    row = {'schema_version': SCHEMA_VERSION}
    row.update(record.__dict__)
    return row


def write_trace_csv(metrics: Dict[str, TraceMetrics], path):
    rows = [record_row(r) for m in metrics.values() for r in m.records]
    return write_csv(path, CSV_COLUMNS, rows)


def write_aggregates(report: ComparisonReport, scenario: Scenario, path):
    return write_json(path, {
        'schema_version': SCHEMA_VERSION,
        'scenario': scenario_summary(scenario),
        'policies': report.aggregates,
        'ratios': report.ratios,
    })


def write_series(report: ComparisonReport, path):
    return write_json(path, {'schema_version': SCHEMA_VERSION, 'series': report.series})


def scenario_summary(scenario: Scenario) -> dict:
    return {
        'policies': [p.label for p in scenario.policies],
        'load': scenario.load.kind,
        'max_queue': scenario.load.max_queue,
        'sustained_load': scenario.load.sustained,
        'job_count': scenario.job_count,
        'shots': scenario.shots,
        'qos': scenario.qos,
        'cc_aware': scenario.cc_aware,
        'stagger': scenario.stagger,
        'exec_noise': scenario.exec_noise,
        'seeds': {
            'filler': scenario.load.filler_seed,
            'jobs': scenario.job_seed,
            'noise': scenario.noise_seed,
        },
    }
