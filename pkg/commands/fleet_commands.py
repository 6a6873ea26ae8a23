# qcloud-lab/commands/fleet_commands.py - Fleet Generation Command

import logging
from dataclasses import replace

import click

from commands import experiment_options, handle_errors, resolve_experiment
from errors import ConfigError
from fleet import generate_synthetic_fleet, write_fleet

logger = logging.getLogger(__name__)


@click.command('gen-fleet')
@experiment_options
@click.option('--stagger/--no-stagger', default=None, help='Spread calibration boundaries over the period.')
@handle_errors
def gen_fleet(config_path, seed, out, stagger):
    """Generate a synthetic fleet and write it as a fleet file."""
    cfg = resolve_experiment(config_path, seed=seed, out=out)
    spec = cfg.fleet if stagger is None else replace(cfg.fleet, stagger=stagger)

    fleet = generate_synthetic_fleet(spec)
    path = cfg.paths.resolve('fleet')
    try:
        write_fleet(fleet, path)
    except OSError as e:
        raise ConfigError(f"cannot write fleet file {path}: {e.strerror}", field='paths.fleet') from e

    click.echo(f"Wrote {len(fleet)} machines to {path}")
