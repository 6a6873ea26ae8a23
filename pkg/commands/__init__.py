# qcloud-lab/commands/__init__.py - Shared Command Plumbing

import functools
import logging

import click

from config import apply_overrides, load_experiment_config
from errors import LabError

logger = logging.getLogger(__name__)


def handle_errors(f):
    """Log a lab error and turn it into the command's exit code."""
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except LabError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            raise click.exceptions.Exit(e.exit_code)
    return wrapper


def experiment_options(f):
    """--config, --seed and --out, shared by every experiment command."""
    f = click.option('--out', 'out', type=click.Path(file_okay=False), default=None,
                     help='Output directory (overrides paths.out_dir).')(f)
    f = click.option('--seed', type=int, default=None,
                     help='Master seed; every section seed is derived from it.')(f)
    f = click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
                     help='Experiment config JSON file.')(f)
    return f


def resolve_experiment(config_path, **overrides):
    cfg = load_experiment_config(config_path)
    return apply_overrides(cfg, **overrides)
