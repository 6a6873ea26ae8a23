# tests/test_cloudsim.py - Cloud Simulation Tests

from collections import defaultdict
from dataclasses import replace

import pytest

from cloudsim import (
    CSV_COLUMNS,
    MAX_FILLERS_PER_MACHINE,
    SCHEMA_VERSION,
    LoadProfile,
    Scenario,
    compare_policies,
    generate_jobs,
    run,
    safe_ratio,
    seed_load,
    write_aggregates,
    write_series,
    write_trace_csv,
)
from errors import ScenarioError
from fleet import FleetSpec, generate_synthetic_fleet
from predictors import RUNTIME_FEATURES, ProductLinearModel, estimate_queue_time
from scheduler import ONLY_FID, ONLY_WT, PROPOSED, Policy, Predictors, policy_from_name
from services.model_fitting import fit_models
from utils.serialization import read_csv, read_json

DAY = 86400.0

ALL_POLICIES = (Policy(PROPOSED), Policy(ONLY_FID), Policy(ONLY_WT))
CHAIN7 = tuple((q, q + 1) for q in range(6))


def scenario(**overrides):
    defaults = dict(policies=ALL_POLICIES, load=LoadProfile('low', DAY, 1), job_count=20, job_seed=3, noise_seed=4)
    defaults.update(overrides)
    return Scenario(**defaults)


class TestLoadProfile:
    """Test load profile validation."""

    def test_unknown_kind(self):
        """Test that only low, high and random exist."""
        with pytest.raises(ScenarioError):
            LoadProfile('medium')

    def test_non_positive_max_queue(self):
        """Test that Q_max must be positive."""
        with pytest.raises(ScenarioError):
            LoadProfile('low', 0.0)

    def test_bands(self):
        """Test the band edges for each profile."""
        assert LoadProfile('low', 100.0).band == (0.0, 10.0)
        assert LoadProfile('high', 100.0).band == (50.0, 100.0)
        assert LoadProfile('random', 100.0).band == (1.0, 100.0)


class TestSeedLoad:
    """Test initial queue seeding."""

    def test_low_load(self, small_fleet, exact_predictors):
        """Test that low load stays under 10% of Q_max on every machine."""
        states = seed_load(small_fleet, LoadProfile('low', DAY, 7), exact_predictors)
        assert all(s.predicted_wait(0.0) < 0.1 * DAY for s in states)

    def test_high_load(self, small_fleet, exact_predictors):
        """Test that high load lands in [50%, 100%] of Q_max."""
        states = seed_load(small_fleet, LoadProfile('high', DAY, 7), exact_predictors)
        assert all(0.5 * DAY <= s.predicted_wait(0.0) <= DAY for s in states)

    def test_random_load(self, small_fleet, exact_predictors):
        """Test that random load stays within Q_max."""
        states = seed_load(small_fleet, LoadProfile('random', DAY, 7), exact_predictors)
        assert all(0.01 * DAY <= s.predicted_wait(0.0) <= DAY for s in states)

    def test_deterministic(self, small_fleet, exact_predictors):
        """Test that the same filler seed gives identical queues."""
        first = seed_load(small_fleet, LoadProfile('high', DAY, 7), exact_predictors, 0.05)
        second = seed_load(small_fleet, LoadProfile('high', DAY, 7), exact_predictors, 0.05)
        assert [list(s.queue) for s in first] == [list(s.queue) for s in second]

    def test_fillers_in_ranges(self, small_fleet, exact_predictors):
        """Test filler batch sizes and shots."""
        states = seed_load(small_fleet, LoadProfile('high', DAY, 2), exact_predictors)
        for state in states:
            for entry in state.queue:
                assert entry.job is None
                assert 1 <= entry.features.batch_size <= 75
                assert 1024 <= entry.features.shots <= 8192

    def test_filler_count_is_bounded(self, small_fleet, exact_predictors):
        """Test that a model predicting only the floor time cannot flood a queue."""
        flat = ProductLinearModel(tuple((0.0, 0.0) for _ in RUNTIME_FEATURES), RUNTIME_FEATURES)
        floor_only = replace(exact_predictors, runtime=flat)

        states = seed_load(small_fleet, LoadProfile('high', DAY, 7), floor_only, max_fillers=40)
        assert all(len(s.queue) == 40 for s in states)
        states = seed_load(small_fleet[:1], LoadProfile('high', DAY, 7), floor_only)
        assert len(states[0].queue) == MAX_FILLERS_PER_MACHINE

    def test_estimate_matches_queue(self, small_fleet, exact_predictors):
        """Test that the seeded estimate equals a fresh estimate over the whole queue."""
        for state in seed_load(small_fleet, LoadProfile('random', DAY, 4), exact_predictors):
            features = [entry.features for entry in state.queue]
            assert state.predicted_wait(0.0) == pytest.approx(
                estimate_queue_time(features, exact_predictors.runtime, 0.0, exact_predictors.runtime_floor))

    def test_clone_is_independent(self, small_fleet, exact_predictors):
        """Test that a cloned state does not share its queue."""
        state = seed_load(small_fleet, LoadProfile('high', DAY, 2), exact_predictors)[0]
        copy = state.clone()
        copy.queue.popleft()
        assert len(copy.queue) == len(state.queue) - 1


class TestJobStream:
    """Test the arriving job stream."""

    def test_count_and_order(self):
        """Test the stream length and arrival order."""
        jobs = generate_jobs(scenario(job_count=100))
        assert len(jobs) == 100
        assert [j.submit_time for j in jobs] == sorted(j.submit_time for j in jobs)
        assert all(0.0 <= j.submit_time < DAY for j in jobs)

    def test_batches(self):
        """Test that each job repeats one benchmark batch_size times."""
        for job in generate_jobs(scenario(job_count=30)):
            assert 1 <= job.batch_size <= 75
            assert len({c.name for c in job.circuits}) == 1

    def test_deterministic(self):
        """Test that the job seed fixes the stream."""
        assert generate_jobs(scenario()) == generate_jobs(scenario())


class TestRun:
    """Test the event loop."""

    def test_empty_stream(self, small_fleet, exact_predictors):
        """Test that no jobs means no records and zero aggregates."""
        metrics = run(scenario(job_count=0), exact_predictors, small_fleet)
        for m in metrics.values():
            assert m.records == []
            agg = m.aggregates
            assert agg['jobs'] == 0 and agg['mean_pos'] == 0.0 and agg['mean_wait'] == 0.0
            assert agg['crossover_count'] == 0 and agg['qos_violations'] == 0

    def test_single_job_empty_machine(self, machine_factory, exact_predictors):
        """Test one job on one idle machine: zero wait and every policy agrees."""
        machine = machine_factory('solo', 7, CHAIN7, cycles=3)
        s = scenario(job_count=1, load=LoadProfile('low', 1.0, 0))
        metrics = run(s, exact_predictors, [machine])

        for m in metrics.values():
            assert len(m.records) == 1
            record = m.records[0]
            assert record.wait == 0.0
            assert record.machine_id == 'solo'

    def test_background_load_holds(self, machine_factory, exact_predictors):
        """Test that sustained fillers keep every job waiting while drained queues empty out."""
        machine = machine_factory('busy', 7, CHAIN7, cycles=3)
        waits = {}
        for sustained in (True, False):
            s = scenario(policies=(Policy(ONLY_WT),), job_count=10, load=LoadProfile('high', 10000.0, 2, sustained))
            waits[sustained] = [r.wait for r in run(s, exact_predictors, [machine])[ONLY_WT].records]

        assert all(w > 0 for w in waits[True])
        assert sum(waits[True]) > sum(waits[False])

    def test_conservation(self, small_fleet, exact_predictors):
        """Test that every arrival completes, over randomized scenarios."""
        for seed in range(20):
            s = scenario(
                job_count=5 + seed,
                job_seed=seed,
                load=LoadProfile(('low', 'high', 'random')[seed % 3], DAY, seed),
                qos=DAY / 2 if seed % 2 else None,
            )
            for m in run(s, exact_predictors, small_fleet).values():
                assert len(m.records) == s.job_count
                assert len({r.job_id for r in m.records}) == s.job_count

    def test_waits_and_exclusive_execution(self, small_fleet, exact_predictors):
        """Test wait = start - submit >= 0 and no overlapping executions per machine."""
        metrics = run(scenario(load=LoadProfile('high', DAY, 5), job_count=40), exact_predictors, small_fleet)
        for m in metrics.values():
            per_machine = defaultdict(list)
            for r in m.records:
                assert r.wait >= 0.0
                assert r.wait == pytest.approx(r.start_time - r.submit_time)
                assert r.finish_time >= r.start_time
                per_machine[r.machine_id].append(r)
            for records in per_machine.values():
                records.sort(key=lambda r: r.start_time)
                for before, after in zip(records, records[1:]):
                    assert after.start_time >= before.finish_time

    def test_fifo_per_machine(self, small_fleet, exact_predictors):
        """Test that jobs on one machine start in arrival order."""
        metrics = run(scenario(load=LoadProfile('high', DAY, 5), job_count=40), exact_predictors, small_fleet)
        for m in metrics.values():
            per_machine = defaultdict(list)
            for r in m.records:
                per_machine[r.machine_id].append(r)
            for records in per_machine.values():
                records.sort(key=lambda r: r.start_time)
                submits = [r.submit_time for r in records]
                assert submits == sorted(submits)

    def test_exact_timing(self, small_fleet, exact_predictors):
        """Test that zero noise makes actual execution equal the prediction."""
        metrics = run(scenario(exec_noise=0.0, job_count=10), exact_predictors, small_fleet)
        for m in metrics.values():
            for r in m.records:
                assert r.exec == pytest.approx(r.finish_time - r.start_time)

    def test_deterministic(self, small_fleet, exact_predictors):
        """Test that a fully seeded scenario reproduces exactly."""
        s = scenario(load=LoadProfile('random', DAY, 9))
        first = run(s, exact_predictors, small_fleet)
        second = run(s, exact_predictors, small_fleet)
        assert {k: m.records for k, m in first.items()} == {k: m.records for k, m in second.items()}

    def test_parallel_matches_sequential(self, small_fleet, exact_predictors):
        """Test that running policies on threads does not change results."""
        s = scenario()
        sequential = run(s, exact_predictors, small_fleet)
        parallel = run(replace(s, max_workers=3), exact_predictors, small_fleet)
        assert list(parallel) == list(sequential)
        assert {k: m.records for k, m in parallel.items()} == {k: m.records for k, m in sequential.items()}

    def test_calibration_events_counted(self, small_fleet, exact_predictors):
        """Test that calibration boundaries are processed during the run."""
        metrics = run(scenario(load=LoadProfile('high', DAY, 5)), exact_predictors, small_fleet)
        assert all(m.calibration_events > 0 for m in metrics.values())

    def test_qos_met_when_feasible(self, small_fleet, exact_predictors):
        """Test that proposed never misses a QOS bound some machine could meet."""
        s = scenario(
            policies=(Policy(PROPOSED),),
            load=LoadProfile('high', DAY, 3),
            qos=0.75 * DAY,
            exec_noise=0.0,
            job_count=30,
        )
        agg = run(s, exact_predictors, small_fleet)[PROPOSED].aggregates
        assert agg['qos_violations_when_feasible'] == 0

    def test_beyond_horizon(self, machine_factory, exact_predictors):
        """Test that arrivals past the fleet horizon are a scenario error."""
        machine = machine_factory('short', 7, CHAIN7, cycles=1)
        s = scenario(job_count=20, arrival_window=3 * DAY, job_seed=1)
        with pytest.raises(ScenarioError):
            run(s, exact_predictors, [machine])


class TestComparePolicies:
    """Test policy comparison and export."""

    def test_needs_two_policies(self, small_fleet, exact_predictors):
        """Test that a comparison needs at least two policies."""
        with pytest.raises(ScenarioError):
            compare_policies(scenario(policies=(Policy(ONLY_WT),)), exact_predictors, small_fleet)

    def test_identical_policies_identical_aggregates(self, small_fleet, exact_predictors):
        """Test that a policy compared with itself matches exactly."""
        report = compare_policies(scenario(policies=(Policy(ONLY_WT), Policy(ONLY_WT))), exact_predictors, small_fleet)
        labels = list(report.metrics)
        assert labels == [ONLY_WT, f'{ONLY_WT}#2']
        assert report.aggregates[labels[0]] == report.aggregates[labels[1]]

    def test_ratios(self, small_fleet, exact_predictors):
        """Test the headline ratios between policies."""
        report = compare_policies(scenario(), exact_predictors, small_fleet)
        agg = report.aggregates
        assert report.ratios['fidelity_proposed_over_only_fid'] == pytest.approx(
            agg[PROPOSED]['mean_pos'] / agg[ONLY_FID]['mean_pos'])
        assert report.ratios['wait_only_fid_over_proposed'] == safe_ratio(
            agg[ONLY_FID]['mean_wait'], agg[PROPOSED]['mean_wait'])
        assert report.ratios['crossovers_proposed_minus_naive'] is None

    def test_series_lengths(self, small_fleet, exact_predictors):
        """Test one series entry per job for every policy."""
        report = compare_policies(scenario(job_count=15), exact_predictors, small_fleet)
        for series in report.series.values():
            assert len(series['pos']) == len(series['wait']) == len(series['crossover']) == 15

    def test_safe_ratio(self):
        """Test ratio edge cases."""
        assert safe_ratio(0.0, 0.0) == 1.0
        assert safe_ratio(1.0, 0.0) is None
        assert safe_ratio(None, 2.0) is None
        assert safe_ratio(3.0, 2.0) == 1.5

    def test_exports(self, tmp_path, small_fleet, exact_predictors):
        """Test the CSV header, row count and JSON documents."""
        s = scenario(job_count=12)
        report = compare_policies(s, exact_predictors, small_fleet)

        write_trace_csv(report.metrics, tmp_path / 'trace.csv')
        write_aggregates(report, s, tmp_path / 'aggregates.json')
        write_series(report, tmp_path / 'series.json')

        rows = read_csv(tmp_path / 'trace.csv')
        assert list(rows[0]) == list(CSV_COLUMNS)
        assert len(rows) == 12 * len(ALL_POLICIES)
        assert all(row['schema_version'] == str(SCHEMA_VERSION) for row in rows)
        aggregates = read_json(tmp_path / 'aggregates.json')
        assert set(aggregates['policies']) == {PROPOSED, ONLY_FID, ONLY_WT}
        assert read_json(tmp_path / 'series.json')['schema_version'] == SCHEMA_VERSION

    def test_exports_byte_identical(self, tmp_path, small_fleet, exact_predictors):
        """Test that two identical runs write identical files."""
        s = scenario()
        for name in ('a', 'b'):
            report = compare_policies(s, exact_predictors, small_fleet)
            write_trace_csv(report.metrics, tmp_path / name / 'trace.csv')
            write_aggregates(report, s, tmp_path / name / 'aggregates.json')
        for filename in ('trace.csv', 'aggregates.json'):
            assert (tmp_path / 'a' / filename).read_bytes() == (tmp_path / 'b' / filename).read_bytes()


@pytest.fixture(scope='module')
def default_fleet():
    return generate_synthetic_fleet(FleetSpec())


@pytest.fixture(scope='module')
def fitted_predictors(default_fleet):
    """Both predictors fitted on the default fleet, as the fit command would."""
    outcome = fit_models(default_fleet, cycles_per_machine=4)
    return Predictors(outcome.fidelity.model, outcome.runtime.model)


def averaged(fleet, predictors, kind, seeds=range(5), **overrides):
    """Per-policy aggregates averaged over seeded runs of one load profile."""
    totals = defaultdict(lambda: defaultdict(float))
    for seed in seeds:
        s = scenario(job_count=100, job_seed=seed, noise_seed=seed, load=LoadProfile(kind, DAY, seed), **overrides)
        for label, agg in compare_policies(s, predictors, fleet).aggregates.items():
            for key in ('mean_pos', 'mean_wait', 'crossover_count', 'crossover_rate', 'qos_violations_when_feasible'):
                totals[label][key] += agg[key] / len(seeds)
    return totals


@pytest.mark.slow
class TestPolicyTrends:
    """Policy trade-offs on the default 26-machine fleet, averaged over five seeds."""

    def test_low_load(self, default_fleet, fitted_predictors):
        """Test that at low load proposed keeps Only-FID fidelity at a fraction of its wait."""
        agg = averaged(default_fleet, fitted_predictors, 'low')
        assert agg[PROPOSED]['mean_pos'] >= 0.97 * agg[ONLY_FID]['mean_pos']
        assert agg[PROPOSED]['mean_pos'] >= 1.15 * agg[ONLY_WT]['mean_pos']
        assert agg[ONLY_FID]['mean_wait'] >= 2.0 * agg[PROPOSED]['mean_wait']

    def test_high_load(self, default_fleet, fitted_predictors):
        """Test that at high load proposed waits about as little as Only-WT."""
        agg = averaged(default_fleet, fitted_predictors, 'high')
        assert agg[PROPOSED]['mean_pos'] >= 0.93 * agg[ONLY_FID]['mean_pos']
        assert agg[PROPOSED]['mean_wait'] <= 1.1 * agg[ONLY_WT]['mean_wait']

    def test_random_load(self, default_fleet, fitted_predictors):
        """Test that at random load proposed beats Only-WT on fidelity and Only-FID on wait."""
        agg = averaged(default_fleet, fitted_predictors, 'random')
        assert agg[PROPOSED]['mean_pos'] > agg[ONLY_WT]['mean_pos']
        assert agg[ONLY_FID]['mean_wait'] >= 1.5 * agg[PROPOSED]['mean_wait']


@pytest.mark.slow
class TestQosTrends:
    """QOS bounds under the default 5% execution noise."""

    @pytest.mark.parametrize('fraction', [0.5, 0.25])
    def test_bound_met_when_feasible(self, default_fleet, fitted_predictors, fraction):
        """Test that proposed never misses a bound some machine could meet at decision time."""
        agg = averaged(default_fleet, fitted_predictors, 'random', seeds=range(3),
                       policies=(Policy(PROPOSED), Policy(ONLY_WT)), qos=fraction * DAY)
        assert agg[PROPOSED]['qos_violations_when_feasible'] == 0

    def test_tight_bound_follows_only_wt(self, default_fleet, fitted_predictors):
        """Test that an unreachable bound at high load makes proposed wait like Only-WT."""
        agg = averaged(default_fleet, fitted_predictors, 'high', seeds=range(3),
                       policies=(Policy(PROPOSED), Policy(ONLY_WT)), qos=0.1 * DAY)
        assert agg[PROPOSED]['mean_wait'] <= 1.05 * agg[ONLY_WT]['mean_wait']


@pytest.mark.slow
class TestCrossoverTrends:
    """Calibration crossovers with and without the crossover penalty."""

    AWARE = (policy_from_name(PROPOSED, cc_aware=True), policy_from_name('proposed_naive'))

    def test_low_load_rarely_crosses(self, default_fleet, fitted_predictors):
        """Test a crossover rate of at most 2% at low load."""
        agg = averaged(default_fleet, fitted_predictors, 'low', seeds=range(3), policies=self.AWARE, cc_aware=True)
        assert agg[PROPOSED]['crossover_rate'] <= 0.02

    def test_high_load_synchronized(self, default_fleet, fitted_predictors):
        """Test that with synchronized calibration the aware policy crosses strictly less than the naive one."""
        agg = averaged(default_fleet, fitted_predictors, 'high', seeds=range(3), policies=self.AWARE, cc_aware=True)
        assert agg[PROPOSED]['crossover_count'] < agg['proposed_naive']['crossover_count']

    def test_high_load_staggered_exact(self, default_fleet, fitted_predictors):
        """Test that staggered calibration with exact timing lets the aware policy avoid every crossover."""
        for seed in range(3):
            s = scenario(
                policies=self.AWARE,
                job_count=100,
                job_seed=seed,
                noise_seed=seed,
                load=LoadProfile('high', DAY, seed),
                cc_aware=True,
                stagger=True,
                exec_noise=0.0,
            )
            agg = compare_policies(s, fitted_predictors, default_fleet).aggregates
            assert agg[PROPOSED]['crossover_count'] == 0
