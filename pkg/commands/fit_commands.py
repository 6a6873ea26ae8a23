# qcloud-lab/commands/fit_commands.py - Predictor Fitting Command

import logging

import click

from commands import experiment_options, handle_errors, resolve_experiment
from config import experiment_to_dict
from fleet import load_fleet
from predictors import TimingGenerator, save_model
from services.model_fitting import fit_models, outcome_to_dict
from utils.serialization import write_json

logger = logging.getLogger(__name__)


@click.command('fit')
@experiment_options
@handle_errors
def fit(config_path, seed, out):
    """Fit the fidelity and execution-time predictors on the fleet file."""
    cfg = resolve_experiment(config_path, seed=seed, out=out)
    fleet = load_fleet(cfg.paths.resolve('fleet'))
    settings = cfg.fit

    outcome = fit_models(
        fleet,
        cycles_per_machine=settings.cycles_per_machine,
        train_fraction=settings.train_fraction,
        split_seed=settings.split_seed,
        max_iter=settings.max_iter,
        tol=settings.tol,
        timing=TimingGenerator(noise=settings.timing_noise),
        timing_samples_per_machine=settings.timing_samples_per_machine,
        timing_seed=settings.timing_seed,
    )

    save_model(outcome.fidelity, cfg.paths.resolve('fidelity_model'))
    save_model(outcome.runtime, cfg.paths.resolve('runtime_model'))
    report = outcome_to_dict(outcome)
    report['fit'] = experiment_to_dict(cfg)['fit']
    write_json(cfg.paths.resolve('fit_report'), report)

    click.echo(f"Fidelity model: test r={outcome.fidelity.test_pearson:.3f}")
    for name, r in outcome.fidelity_feature_pearson.items():
        click.echo(f"  {name:<28} r={r:.3f}")
    click.echo(f"Runtime model: test r={outcome.runtime.test_pearson:.3f}")
    weak = [mid for mid, r in outcome.per_machine_runtime_pearson.items() if r is not None and r < 0.95]
    if weak:
        click.echo(f"  machines below r=0.95: {', '.join(weak)}")

    click.echo("Mean POS by machine (ascending):")
    for row in outcome.fidelity_table:
        cells = ' '.join(f"{name}={pos:.3f}" for name, pos in row['benchmarks'].items())
        click.echo(f"  {row['machine_id']:<14} mean={row['mean_pos']:.3f}  {cells}")
