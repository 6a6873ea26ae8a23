# qcloud-lab/commands/report_commands.py - Cross-Run Comparison Command

import logging
from pathlib import Path
from typing import Dict, List, Optional

import click

from cloudsim import SCHEMA_VERSION, policy_ratios, safe_ratio
from commands import handle_errors
from errors import SchemaMismatchError
from utils.serialization import read_json, write_json

logger = logging.getLogger(__name__)

REPORT_FILE = 'report.json'


def load_aggregates(path) -> dict:
    data = read_json(path)
    if not isinstance(data, dict) or 'policies' not in data:
        raise SchemaMismatchError(f"{path}: not an aggregates file")
    version = data.get('schema_version')
    if version != SCHEMA_VERSION:
        raise SchemaMismatchError(f"{path}: schema version {version!r}, expected {SCHEMA_VERSION}")
    return data


def build_report(runs: List[dict], names: List[str]) -> dict:
    """Within-run ratios for every input, plus each run's means relative to the first run."""
    base = runs[0]['policies']
    shared = [p for p in base if all(p in run['policies'] for run in runs)]

    across: Dict[str, Dict[str, Dict[str, Optional[float]]]] = {}
    for name, run in zip(names, runs):
        across[name] = {
            policy: {
                'mean_pos': safe_ratio(run['policies'][policy]['mean_pos'], base[policy]['mean_pos']),
                'mean_wait': safe_ratio(run['policies'][policy]['mean_wait'], base[policy]['mean_wait']),
            }
            for policy in shared
        }

    return {
        'schema_version': SCHEMA_VERSION,
        'inputs': names,
        'runs': {name: {'policies': run['policies'], 'ratios': policy_ratios(run['policies'])}
                 for name, run in zip(names, runs)},
        'relative_to_first': across,
    }


def _fmt(value) -> str:
    return '-' if value is None else f"{value:.3f}"


@click.command('report')
@click.argument('paths', nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option('--out', 'out', type=click.Path(file_okay=False), default=None,
              help='Directory to save report.json in.')
@handle_errors
def report(paths, out):
    """Compare aggregate metrics of one or more simulate runs."""
    runs = [load_aggregates(p) for p in paths]
    names = []
    for i, p in enumerate(paths):
        name = str(p)
        names.append(name if name not in names else f"{name}#{i}")
    summary = build_report(runs, names)

    for name in names:
        click.echo(name)
        for policy, agg in summary['runs'][name]['policies'].items():
            click.echo(
                f"  {policy:<16} mean POS {agg['mean_pos']:.4f}  mean wait {agg['mean_wait']:.0f}s  "
                f"crossovers {agg['crossover_count']}  QOS violations {agg['qos_violations']}"
            )
        for key, value in summary['runs'][name]['ratios'].items():
            if value is not None:
                click.echo(f"  {key:<36} {_fmt(value)}")

    if len(names) > 1:
        click.echo("relative to first run")
        for name in names[1:]:
            for policy, ratios in summary['relative_to_first'][name].items():
                click.echo(f"  {name}  {policy:<16} POS x{_fmt(ratios['mean_pos'])}  wait x{_fmt(ratios['mean_wait'])}")

    if out is not None:
        path = write_json(Path(out) / REPORT_FILE, summary)
        click.echo(f"Wrote {path}")
