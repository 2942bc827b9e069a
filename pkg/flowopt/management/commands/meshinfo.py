import logging
import sys

from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand

from flowopt.exceptions import FlowOptError
from flowopt.fem.mesh import generate_rectangle_mesh, mesh_statistics, uniform_refine
from flowopt.problem import PRESET_NAMES, load_config, load_preset

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Print the seed mesh of a preset, a problem document or a rectangle'

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group()
        source.add_argument('--preset', choices=PRESET_NAMES)
        source.add_argument('--config', help='path of a JSON problem document')
        parser.add_argument('--width', type=float, default=1.0)
        parser.add_argument('--height', type=float, default=1.0)
        parser.add_argument('--nx', type=int, default=8)
        parser.add_argument('--ny', type=int, default=8)
        parser.add_argument('--refine', type=int, default=0, help='number of uniform bisection sweeps')

    def handle(self, *args, **options):
        logger.debug(f'meshinfo.Command.handle() args: {args}')
        logger.debug(f'meshinfo.Command.handle() options: {options}')

        try:
            if options['preset'] or options['config']:
                spec = load_preset(options['preset']) if options['preset'] else load_config(options['config'])
                geometry = (spec.width, spec.height, spec.nx, spec.ny)
            else:
                geometry = (options['width'], options['height'], options['nx'], options['ny'])
            mesh = uniform_refine(generate_rectangle_mesh(*geometry), options['refine'])
        except ImproperlyConfigured as ex:
            logger.error(f'{ex.__class__.__name__}: could not read the problem: {ex}')
            sys.exit(1)
        except FlowOptError as ex:
            logger.error(f'{ex.__class__.__name__}: could not build the mesh: {ex}')
            sys.exit(1)

        for key, value in mesh_statistics(mesh).items():
            self.stdout.write(f'{key}: {value}')
        logger.info('meshinfo Command.handle() returning...')
