"""Problem documents: parsing, validation and the shipped presets.

A problem document is one JSON object::

    {
        "SPEC_VERSION": 1,
        "PRESET": "drag_surface",
        "DOMAIN": {"WIDTH": 1.7, "HEIGHT": 0.4, "NX": 34, "NY": 8},
        "PHYSICS": {"MU": 0.001, "ALPHA_BAR": 0.03, "EPSILON": 0.008, "GAMMA": 0.01,
                    "BOUNDARY_DATA": {"left": {"NAME": "flowopt.flow.boundary.uniform_flow"}, ...}},
        "INITIAL_PHASE_FIELD": {"KIND": "ball", "OPTIONS": {"CENTER": [0.5, 0.2], "RADIUS": 0.25}},
        "OBJECTIVE": [{"KIND": "penalty_hat_alpha"}, ...],
        "CONSTRAINTS": [{"KIND": "volume_upper", "OPTIONS": {"BETA": 0.975}}],
        "OPTIMIZER": {"MAX_DOFS": 10000, "EPSILON_SCHEDULE": [0.008, 0.004]},
        "OUTPUT": {"SNAPSHOT_EVERY": 0, "DUMP_ADJOINT": false, "SEED": 0}
    }
"""
import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

from flowopt.exceptions import FlowOptError
from flowopt.fem.mesh import BOUNDARY_TAGS, generate_rectangle_mesh
from flowopt.fem.spaces import taylor_hood
from flowopt.flow.boundary import FLUX_TOLERANCE, dirichlet_data, resolve_profile
from flowopt.flow.params import C0_DEFAULT, PhysicalParams
from flowopt.functionals.base import get_functional_terms
from flowopt.functionals.constraints import get_constraint_specs
from flowopt.initial import INITIAL_KINDS
from flowopt.optimizer.loop import OptimizerConfig

logger = logging.getLogger(__name__)

SPEC_VERSION = 1
PRESET_NAMES = ('heavy_ground', 'drag_surface', 'drag_volume', 'lift_power')
SECTIONS = ('SPEC_VERSION', 'PRESET', 'DOMAIN', 'PHYSICS', 'INITIAL_PHASE_FIELD', 'OBJECTIVE', 'CONSTRAINTS',
            'OPTIMIZER', 'OUTPUT')
OUTPUT_DEFAULTS = {'SNAPSHOT_EVERY': 0, 'DUMP_ADJOINT': False, 'SEED': 0}


def get_presets_dir() -> Path:
    return Path(getattr(settings, 'FLOWOPT_PRESETS_DIR', Path(__file__).resolve().parent / 'presets'))


@dataclass
class ProblemSpec:
    preset: str
    width: float
    height: float
    nx: int
    ny: int
    params: PhysicalParams
    terms: list
    constraints: list
    optimizer: OptimizerConfig
    initial: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: dict(OUTPUT_DEFAULTS))
    document: dict = field(default_factory=dict)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def seed(self) -> int:
        return int(self.output.get('SEED', 0))

    def with_overrides(self, max_dofs=None, snapshot_every=None, seed=None, dump_adjoint=None) -> 'ProblemSpec':
        """Apply command-line overrides; None leaves a value as configured."""
        document = copy.deepcopy(self.document)
        if max_dofs is not None:
            document.setdefault('OPTIMIZER', {})['MAX_DOFS'] = int(max_dofs)
        output = document.setdefault('OUTPUT', {})
        for key, value in (('SNAPSHOT_EVERY', snapshot_every), ('SEED', seed), ('DUMP_ADJOINT', dump_adjoint)):
            if value is not None:
                output[key] = value
        return spec_from_document(document)


def _section(document, name, kind=dict):
    value = document.get(name, kind())
    if not isinstance(value, kind):
        raise ImproperlyConfigured(f'Problem document: {name} must be a JSON {"object" if kind is dict else "array"}')
    return value


def _lower(options: dict) -> dict:
    return {k.lower(): v for k, v in options.items()}


def _physical_params(physics: dict) -> PhysicalParams:
    physics = dict(physics)
    boundary = physics.pop('BOUNDARY_DATA', {})
    force = physics.pop('BODY_FORCE', None)
    unknown = set(physics) - {'MU', 'ALPHA_BAR', 'EPSILON', 'GAMMA', 'C0', 'HAT_ALPHA_MODE', 'RESCALE_OUTFLOW'}
    if unknown:
        raise ImproperlyConfigured(f'Problem document: unknown PHYSICS keys {sorted(unknown)}')
    missing = {'MU', 'ALPHA_BAR', 'EPSILON', 'GAMMA'} - set(physics)
    if missing:
        raise ImproperlyConfigured(f'Problem document: PHYSICS is missing {sorted(missing)}')
    unknown_tags = set(boundary) - set(BOUNDARY_TAGS)
    if unknown_tags:
        raise ImproperlyConfigured(f'Problem document: BOUNDARY_DATA has unknown segments {sorted(unknown_tags)}; '
                                   f'expected {BOUNDARY_TAGS}')
    options = _lower(physics)
    options.setdefault('c0', C0_DEFAULT)
    try:
        return PhysicalParams(
            boundary_data={tag: resolve_profile(profile) for tag, profile in boundary.items()},
            body_force=resolve_profile(force) if force else None,
            **options)
    except (TypeError, ValueError) as err:
        raise ImproperlyConfigured(f'Problem document: bad PHYSICS section: {err}')


def spec_from_document(document: dict) -> ProblemSpec:
    """Parse and validate a problem document."""
    if not isinstance(document, dict):
        raise ImproperlyConfigured('Problem document: the top level must be a JSON object')
    version = document.get('SPEC_VERSION')
    if version != SPEC_VERSION:
        raise ImproperlyConfigured(f'Problem document: SPEC_VERSION {version!r} is not supported; '
                                   f'expected {SPEC_VERSION}')
    unknown = set(document) - set(SECTIONS)
    if unknown:
        raise ImproperlyConfigured(f'Problem document: unknown sections {sorted(unknown)}')

    domain = _section(document, 'DOMAIN')
    try:
        width, height = float(domain['WIDTH']), float(domain['HEIGHT'])
        nx, ny = int(domain['NX']), int(domain['NY'])
    except KeyError as err:
        raise ImproperlyConfigured(f'Problem document: DOMAIN is missing {err}')
    if width <= 0 or height <= 0 or nx < 1 or ny < 1:
        raise ImproperlyConfigured(f'Problem document: DOMAIN must have positive size and cell counts, got {domain}')

    output = dict(OUTPUT_DEFAULTS)
    output.update(_section(document, 'OUTPUT'))
    initial = _section(document, 'INITIAL_PHASE_FIELD') or {'KIND': 'constant'}
    if initial.get('KIND', 'constant') not in INITIAL_KINDS:
        raise ImproperlyConfigured(f'Problem document: INITIAL_PHASE_FIELD KIND must be one of {INITIAL_KINDS}')

    spec = ProblemSpec(
        preset=document.get('PRESET', ''),
        width=width, height=height, nx=nx, ny=ny,
        params=_physical_params(_section(document, 'PHYSICS')),
        terms=get_functional_terms(_section(document, 'OBJECTIVE', list)),
        constraints=get_constraint_specs(_section(document, 'CONSTRAINTS', list)),
        optimizer=OptimizerConfig.from_options(_section(document, 'OPTIMIZER')),
        initial=initial,
        output=output,
        document=copy.deepcopy(document),
    )
    validate_spec(spec)
    return spec


def _check_volume_window(spec):
    lower = [c.bound(spec.area) for c in spec.constraints if c.kind == 'volume_lower']
    upper = [c.bound(spec.area) for c in spec.constraints if c.kind == 'volume_upper']
    if lower and upper and max(lower) > min(upper):
        raise ImproperlyConfigured(f'Problem document: the volume window is empty, lower bound {max(lower):.6g} '
                                   f'exceeds upper bound {min(upper):.6g}')


def _check_flux(spec):
    mesh = generate_rectangle_mesh(spec.width, spec.height, spec.nx, spec.ny)
    try:
        data = dirichlet_data(taylor_hood(mesh).velocity, spec.params.boundary_data, spec.params.rescale_outflow)
    except FlowOptError as err:
        raise ImproperlyConfigured(f'Problem document: bad BOUNDARY_DATA: {err}')
    if abs(data.flux) > FLUX_TOLERANCE * max(1.0, spec.area):
        raise ImproperlyConfigured(f'Problem document: boundary data carry a net flux of {data.flux:.6e}; '
                                   f'balance the profiles or set PHYSICS.RESCALE_OUTFLOW')
    if data.outflow_scale != 1.0:
        logger.warning(f'validate_spec: outflow profiles are rescaled by {data.outflow_scale:.6f} '
                       f'to balance the flux')


def validate_spec(spec: ProblemSpec):
    """Checks that must pass before any solve; raises ImproperlyConfigured."""
    if not spec.terms:
        raise ImproperlyConfigured('Problem document: OBJECTIVE has no active terms')
    for item in spec.terms + spec.constraints:
        item.validate_domain(spec.width, spec.height)
    names = [c.name for c in spec.constraints]
    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        logger.warning(f'validate_spec: constraints {duplicates} appear more than once')
    _check_volume_window(spec)
    _check_flux(spec)
    if spec.optimizer.epsilon_schedule and spec.optimizer.epsilon_schedule[0] != spec.params.epsilon:
        logger.info(f'validate_spec: the epsilon schedule starts at {spec.optimizer.epsilon_schedule[0]}, '
                    f'PHYSICS.EPSILON {spec.params.epsilon} is not used')
    snapshot_every = spec.output.get('SNAPSHOT_EVERY', 0)
    if not isinstance(snapshot_every, int) or snapshot_every < 0:
        raise ImproperlyConfigured(f'Problem document: OUTPUT.SNAPSHOT_EVERY must be a nonnegative integer, '
                                   f'got {snapshot_every!r}')


def load_config(path) -> ProblemSpec:
    path = Path(path)
    try:
        with path.open() as f:
            document = json.load(f)
    except FileNotFoundError:
        raise ImproperlyConfigured(f'load_config: {path} does not exist')
    except json.JSONDecodeError as err:
        raise ImproperlyConfigured(f'load_config: {path} is not valid JSON: {err}')
    logger.debug(f'load_config: read {path}')
    return spec_from_document(document)


def load_preset(name: str) -> ProblemSpec:
    if name not in PRESET_NAMES:
        raise ImproperlyConfigured(f'load_preset: unknown preset {name!r}; expected one of {PRESET_NAMES}')
    return load_config(get_presets_dir() / f'{name}.json')
