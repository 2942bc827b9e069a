import logging
import sys

from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand

from flowopt.exceptions import FlowOptError
from flowopt.problem import PRESET_NAMES, load_config, load_preset
from flowopt.runner import run_problem

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Run a phase-field shape optimization from a shipped preset or a problem document'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--preset', choices=PRESET_NAMES, help='name of a shipped preset')
        source.add_argument('--config', help='path of a JSON problem document')
        parser.add_argument('--output-dir', help='directory for the VTK, CSV and JSON artifacts')
        parser.add_argument('--max-dofs', type=int, help='phase-field dof budget of the first stage')
        parser.add_argument('--snapshot-every', type=int, help='write a VTK snapshot every N iterations')
        parser.add_argument('--seed', type=int, help='seed of the sampled diagnostics')
        parser.add_argument('--dump-adjoint', action='store_true', default=None,
                            help='add the adjoint velocity and pressure to the VTK output')

    def handle(self, *args, **options):
        logger.debug(f'run.Command.handle() args: {args}')
        logger.debug(f'run.Command.handle() options: {options}')

        try:
            spec = load_preset(options['preset']) if options['preset'] else load_config(options['config'])
            spec = spec.with_overrides(max_dofs=options['max_dofs'], snapshot_every=options['snapshot_every'],
                                       seed=options['seed'], dump_adjoint=options['dump_adjoint'])
        except ImproperlyConfigured as ex:
            logger.error(f'{ex.__class__.__name__}: validation of the problem failed: {ex}')
            sys.exit(1)

        try:
            summary = run_problem(spec, options['output_dir'])
        except ImproperlyConfigured as ex:
            logger.error(f'{ex.__class__.__name__}: setup of the run failed: {ex}')
            sys.exit(1)
        except FlowOptError as ex:
            logger.error(f'{ex.__class__.__name__} in {ex.stage or "setup"}: {ex}')
            sys.exit(1)

        self.stdout.write(f'J = {summary["objective"]:.9e} after {summary["iterations"]} iterations, '
                          f'{summary["dofs"]["phase_field"]} phase-field dofs')
        logger.info('run Command.handle() returning...')
