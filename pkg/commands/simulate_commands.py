# qcloud-lab/commands/simulate_commands.py - Scenario Simulation Command

import logging
from pathlib import Path

import click

from cloudsim import (
    LOAD_BANDS,
    ComparisonReport,
    LoadProfile,
    Scenario,
    compare_policies,
    policy_ratios,
    run,
    write_aggregates,
    write_series,
    write_trace_csv,
)
from commands import experiment_options, handle_errors, resolve_experiment
from config import ExperimentConfig
from fleet import load_fleet
from predictors import load_model
from scheduler import Predictors, policy_from_name

logger = logging.getLogger(__name__)

TRACE_FILE = "trace.csv"
AGGREGATES_FILE = "aggregates.json"
SERIES_FILE = "series.json"


def build_scenario(cfg: ExperimentConfig, calibration_period: float, max_workers: int) -> Scenario:
    s = cfg.scenario
    return Scenario(
        policies=tuple(policy_from_name(name, cfg.utility, s.cc_aware) for name in s.policies),
        load=LoadProfile(s.load, s.max_queue, s.filler_seed, s.sustained_load),
        job_count=s.job_count,
        job_seed=s.job_seed,
        batch_range=s.batch_range,
        shots=s.shots,
        qos=s.qos,
        cc_aware=s.cc_aware,
        stagger=s.stagger,
        arrival_window=s.arrival_window or float(calibration_period),
        exec_noise=s.exec_noise,
        noise_seed=s.noise_seed,
        max_workers=s.max_workers or max_workers,
    )


@click.command('simulate')
@experiment_options
@click.option('--policy', 'policies', multiple=True, help='Policy to run (repeatable).')
@click.option('--load', type=click.Choice(sorted(LOAD_BANDS)), default=None, help='Initial load profile.')
@click.option('--qos', type=float, default=None, help='QOS bound on wait time, seconds.')
@click.option('--cc-aware/--no-cc-aware', default=None, help='Penalize predicted calibration crossovers.')
@click.option('--stagger/--no-stagger', default=None, help='Stagger calibration over the fleet.')
@click.pass_context
@handle_errors
def simulate(ctx, config_path, seed, out, policies, load, qos, cc_aware, stagger):
    """Run the scenario's policies and write per-job and aggregate metrics."""
    cfg = resolve_experiment(
        config_path, seed=seed, out=out, policies=policies, load=load,
        qos=qos, cc_aware=cc_aware, stagger=stagger,
    )
    paths = cfg.paths
    fleet = load_fleet(paths.resolve('fleet'))
    fidelity = load_model(paths.resolve('fidelity_model'))
    runtime = load_model(paths.resolve('runtime_model'))
    predictors = Predictors(fidelity.model, runtime.model)

    app_config = ctx.obj['config'] if ctx.obj else None
    workers = app_config.POLICY_WORKERS if app_config else 1
    scenario = build_scenario(cfg, fleet[0].calibration_period, workers)
    if len(scenario.policies) >= 2:
        report = compare_policies(scenario, predictors, fleet)
    else:
        metrics = run(scenario, predictors, fleet)
        report = ComparisonReport(metrics, policy_ratios({k: m.aggregates for k, m in metrics.items()}))

    out_dir = Path(paths.out_dir)
    trace = write_trace_csv(report.metrics, out_dir / TRACE_FILE)
    write_aggregates(report, scenario, out_dir / AGGREGATES_FILE)
    write_series(report, out_dir / SERIES_FILE)

    for label, agg in report.aggregates.items():
        click.echo(
            f"{label:<16} mean POS {agg['mean_pos']:.4f}  mean wait {agg['mean_wait']:9.0f}s  "
            f"crossovers {agg['crossover_count']:3d}  QOS violations {agg['qos_violations']}"
        )
    click.echo(f"Wrote {trace}")
