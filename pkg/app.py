# qcloud-lab/app.py - Command-Line Entry Point

import logging

import click

# Import configuration
from config import get_config
# Import command groups
from commands.fit_commands import fit
from commands.fleet_commands import gen_fleet
from commands.report_commands import report
from commands.simulate_commands import simulate

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s [%(levelname)s] %(name)s: %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S'
)

logger = logging.getLogger(__name__)


def create_cli(config_name=None) -> click.Group:
    """Create and configure the lab's command group."""
    config = get_config(config_name)

    @click.group(help='Quantum cloud scheduling lab.')
    @click.option('--verbose', '-v', is_flag=True, help='Log per-job scheduling decisions.')
    @click.pass_context
    def cli(ctx, verbose):
        level = 'DEBUG' if verbose else config.LOG_LEVEL
        logging.getLogger().setLevel(getattr(logging, level, logging.INFO))
        ctx.obj = {'config': config}
        logger.debug(f"Using {config.__name__} (log level {level})")

    # Register commands
    cli.add_command(gen_fleet)
    cli.add_command(fit)
    cli.add_command(simulate)
    cli.add_command(report)

    return cli


cli = create_cli()


if __name__ == '__main__':
    cli()
