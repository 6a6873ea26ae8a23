# tests/conftest.py - Test Configuration and Fixtures

import json

import pytest
from click.testing import CliRunner

from app import create_cli
from circuits import build_benchmark
from fleet import CalibrationSnapshot, FleetSpec, Machine, cycle_start, generate_synthetic_fleet
from predictors import ProductLinearModel, RUNTIME_FEATURES
from scheduler import Predictors
from transpiler import FeatureVector


@pytest.fixture
def cli():
    """Create the command group with the testing configuration."""
    return create_cli('testing')


@pytest.fixture
def runner():
    """A test runner for the lab's Click commands."""
    return CliRunner()


@pytest.fixture
def small_spec():
    """A fleet spec small enough to compile against quickly."""
    return FleetSpec(machine_count=4, qubit_count_choices=(7, 16), cycles=6, rng_seed=3)


@pytest.fixture
def small_fleet(small_spec):
    return generate_synthetic_fleet(small_spec)


def make_machine(mid='m0', n_qubits=2, coupling=((0, 1),), cycles=1, cx=0.01, readout=0.02, sq=0.001,
                 period=86400, offset=0):
    """Build a machine with the same error rates in every cycle."""
    coupling = frozenset(coupling)
    snapshots = tuple(
        CalibrationSnapshot(
            cycle_index=k,
            valid_from=cycle_start(k, period, offset),
            cx_error={edge: cx for edge in coupling},
            readout_error=(readout,) * n_qubits,
            single_qubit_error=(sq,) * n_qubits,
        )
        for k in range(cycles)
    )
    return Machine(mid, n_qubits, coupling, period, offset, snapshots)


@pytest.fixture
def machine_factory():
    """Factory for hand-built machines."""
    return make_machine


@pytest.fixture
def line_machine():
    """A 5-qubit chain with uniform errors over three cycles."""
    return make_machine('line5', 5, ((0, 1), (1, 2), (2, 3), (3, 4)), cycles=3)


@pytest.fixture
def exact_predictors():
    """Hand-set models: fidelity falls with error rates, runtime matches the timing generator."""
    fidelity = ProductLinearModel(
        terms=((1.0, -0.001), (1.0, -5.0), (1.0, 0.0), (1.0, -2.0)),
        feature_names=FeatureVector.NAMES,
    )
    runtime = ProductLinearModel(
        terms=((0.0, 1.0), (2.0, 0.002), (1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1.0, 0.005), (1.0, 0.0)),
        feature_names=RUNTIME_FEATURES,
    )
    return Predictors(fidelity, runtime)


@pytest.fixture
def toffoli():
    return build_benchmark('toffoli')


@pytest.fixture
def experiment_file(tmp_path):
    """A small experiment config writing into a temporary directory."""
    config = {
        'fleet': {'machine_count': 3, 'qubit_count_choices': [7], 'cycles': 4, 'rng_seed': 5},
        'fit': {'cycles_per_machine': 2, 'timing_samples_per_machine': 20},
        'scenario': {'job_count': 10, 'load': 'low'},
        'paths': {'out_dir': str(tmp_path / 'out')},
    }
    path = tmp_path / 'experiment.json'
    path.write_text(json.dumps(config), encoding='utf-8')
    return path
