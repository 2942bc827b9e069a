import logging
import sys
from pathlib import Path

import numpy as np
from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand

from flowopt.exceptions import FlowOptError
from flowopt.problem import PRESET_NAMES, load_preset
from flowopt.runner import get_output_dir
from flowopt.verification import (adjoint_fd_comparison, duality_check, initial_problem, interior_direction,
                                  manufactured_flow_errors, poiseuille_flow_errors, write_report_csv)

logger = logging.getLogger(__name__)

SUITES = ('flow', 'gradient', 'duality')
RATE_THRESHOLD = 1.9
FD_TOLERANCE = 1e-3
DUALITY_TOLERANCE = 1e-9
POISEUILLE_TOLERANCE = 1e-10


class Command(BaseCommand):
    help = 'Run the verification oracles: flow convergence rates, adjoint against finite differences, duality'

    def add_arguments(self, parser):
        parser.add_argument('--suite', choices=SUITES + ('all',), default='all')
        parser.add_argument('--preset', choices=PRESET_NAMES, default='drag_surface',
                            help='preset whose first iterate the gradient checks use')
        parser.add_argument('--levels', type=int, default=3, help='mesh levels of the manufactured solution')
        parser.add_argument('--directions', type=int, default=10, help='random directions per gradient check')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--output-dir', help='directory for the CSV reports')

    def handle(self, *args, **options):
        logger.debug(f'verify.Command.handle() args: {args}')
        logger.debug(f'verify.Command.handle() options: {options}')
        suites = SUITES if options['suite'] == 'all' else (options['suite'],)
        output_dir = get_output_dir(options['output_dir'], 'verification')
        failures = []

        try:
            if 'flow' in suites:
                failures += self.check_flow(options['levels'], output_dir)
            if 'gradient' in suites or 'duality' in suites:
                problem, phi = initial_problem(load_preset(options['preset']))
                if 'gradient' in suites:
                    failures += self.check_gradient(problem, phi, options['directions'], options['seed'], output_dir)
                if 'duality' in suites:
                    failures += self.check_duality(problem, phi, options['seed'], output_dir)
        except ImproperlyConfigured as ex:
            logger.error(f'{ex.__class__.__name__}: verification setup failed: {ex}')
            sys.exit(1)
        except FlowOptError as ex:
            logger.error(f'{ex.__class__.__name__}: an oracle failed to evaluate: {ex}')
            sys.exit(1)

        for failure in failures:
            logger.error(f'verify: {failure}')
        self.stdout.write(f'{len(failures)} failed check(s) in suites {", ".join(suites)}; reports in {output_dir}')
        logger.info('verify Command.handle() returning...')
        if failures:
            sys.exit(1)

    def check_flow(self, levels, output_dir: Path) -> list:
        rows = manufactured_flow_errors(levels)
        write_report_csv(output_dir / 'flow_convergence.csv', rows)
        failures = [f'flow: level {row["level"]} velocity rate {row["velocity_rate"]:.2f} / pressure rate '
                    f'{row["pressure_rate"]:.2f} below {RATE_THRESHOLD}'
                    for row in rows[1:]
                    if min(row['velocity_rate'], row['pressure_rate']) < RATE_THRESHOLD]
        poiseuille = poiseuille_flow_errors()
        if max(poiseuille['velocity_h1'], poiseuille['pressure_l2']) > POISEUILLE_TOLERANCE:
            failures.append(f'flow: Poiseuille errors {poiseuille} are not at roundoff level')
        return failures

    def check_gradient(self, problem, phi, directions, seed, output_dir: Path) -> list:
        rows = adjoint_fd_comparison(problem, phi, directions, seed)
        write_report_csv(output_dir / 'adjoint_fd.csv', rows)
        return [f'gradient: direction {row["direction"]} relative error {row["relative_error"]:.2e}'
                for row in rows if row['relative_error'] > FD_TOLERANCE]

    def check_duality(self, problem, phi, seed, output_dir: Path) -> list:
        rng = np.random.default_rng(seed)
        rows = [dict(duality_check(problem, phi, interior_direction(phi, rng)), direction=k) for k in range(5)]
        write_report_csv(output_dir / 'duality.csv', rows)
        return [f'duality: direction {row["direction"]} residual {row["residual"]:.2e}'
                for row in rows if row['residual'] > DUALITY_TOLERANCE * row['scale']]
