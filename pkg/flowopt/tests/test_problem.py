import json
import math
import tempfile
from pathlib import Path

from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase

from flowopt.problem import PRESET_NAMES, load_config, load_preset, spec_from_document

from .factories import problem_document


class PresetTestCase(SimpleTestCase):

    def test_all_presets_load(self):
        for name in PRESET_NAMES:
            with self.subTest(preset=name):
                spec = load_preset(name)
                self.assertEqual(spec.preset, name)
                self.assertTrue(spec.terms)

    def test_heavy_ground(self):
        spec = load_preset('heavy_ground')
        self.assertEqual((spec.nx, spec.ny), (20, 20))
        self.assertAlmostEqual(spec.params.c0, math.pi / 2)
        self.assertTrue(spec.params.rescale_outflow)
        (rocks,) = [term for term in spec.terms if term.kind == 'rock_cost']
        self.assertEqual(len(rocks.rocks), 4)
        self.assertTrue(all(cost == 50.0 for _, _, cost in rocks.rocks))
        self.assertEqual(spec.constraints, [])
        self.assertEqual(spec.optimizer.max_dofs, 20000)

    def test_drag_surface(self):
        spec = load_preset('drag_surface')
        self.assertEqual(spec.params.gamma, 0.01)
        self.assertEqual(spec.params.alpha_bar, 0.03)
        self.assertEqual(spec.params.mu, 0.001)
        self.assertEqual([c.kind for c in spec.constraints], ['volume_upper'])
        self.assertEqual(spec.constraints[0].beta, 0.975)
        self.assertEqual(spec.optimizer.epsilon_schedule[0], spec.params.epsilon)

    def test_drag_volume(self):
        spec = load_preset('drag_volume')
        self.assertEqual(spec.params.mu, 0.01)
        self.assertIn('volume_drag', [term.kind for term in spec.terms])

    def test_lift_power(self):
        spec = load_preset('lift_power')
        (relaxed,) = [term for term in spec.terms if term.kind == 'moreau_yosida']
        self.assertEqual((relaxed.s, relaxed.d), (100.0, 0.06))
        names = [c.name for c in spec.constraints]
        self.assertEqual(names, ['volume_lower', 'volume_upper', 'center_of_mass_x', 'center_of_mass_y',
                                 'potential_power_cap'])
        self.assertLess(spec.constraints[0].bound(spec.area), spec.constraints[1].bound(spec.area))
        self.assertFalse(spec.constraints[-1].enforce)

    def test_unknown_preset(self):
        with self.assertRaises(ImproperlyConfigured):
            load_preset('lift_drag')


class ProblemDocumentTestCase(SimpleTestCase):

    def test_valid_document(self):
        spec = spec_from_document(problem_document())
        self.assertEqual(spec.area, 1.0)
        self.assertEqual(spec.optimizer.max_outer_iters, 3)
        self.assertEqual(spec.seed, 0)

    def test_overrides(self):
        spec = spec_from_document(problem_document()).with_overrides(max_dofs=99, snapshot_every=5, seed=4)
        self.assertEqual(spec.optimizer.max_dofs, 99)
        self.assertEqual(spec.output['SNAPSHOT_EVERY'], 5)
        self.assertEqual(spec.seed, 4)
        self.assertFalse(spec.output['DUMP_ADJOINT'])

    def test_rejections(self):
        physics = problem_document()['PHYSICS']
        no_outflow = dict(physics, BOUNDARY_DATA=dict(physics['BOUNDARY_DATA'],
                                                      right={'NAME': 'flowopt.flow.boundary.zero'}))
        cases = {
            'version': problem_document(SPEC_VERSION=2),
            'section': problem_document(RESULTS={}),
            'physics key': problem_document(PHYSICS=dict(physics, RE=100)),
            'missing physics': problem_document(PHYSICS={'MU': 1.0}),
            'segment': problem_document(PHYSICS=dict(physics, BOUNDARY_DATA={'inlet': {'NAME': 'x'}})),
            'net flux': problem_document(PHYSICS=no_outflow),
            'no objective': problem_document(OBJECTIVE=[]),
            'empty window': problem_document(CONSTRAINTS=[{'KIND': 'volume_lower', 'OPTIONS': {'BETA': 0.5}},
                                                          {'KIND': 'volume_upper', 'OPTIONS': {'BETA': 0.2}}]),
            'snapshots': problem_document(OUTPUT={'SNAPSHOT_EVERY': -1}),
            'initial kind': problem_document(INITIAL_PHASE_FIELD={'KIND': 'torus'}),
            'domain': problem_document(DOMAIN={'WIDTH': 1.0, 'HEIGHT': 1.0, 'NX': 0, 'NY': 4}),
            'objective type': problem_document(OBJECTIVE={'KIND': 'ginzburg_landau'}),
        }
        for label, document in cases.items():
            with self.subTest(label), self.assertRaises(ImproperlyConfigured):
                spec_from_document(document)

    def test_rescaled_outflow_is_accepted(self):
        physics = problem_document()['PHYSICS']
        boundary = dict(physics['BOUNDARY_DATA'],
                        right={'NAME': 'flowopt.flow.boundary.uniform_flow', 'OPTIONS': {'VELOCITY': [2.0, 0.0]}})
        spec = spec_from_document(problem_document(PHYSICS=dict(physics, BOUNDARY_DATA=boundary,
                                                                RESCALE_OUTFLOW=True)))
        self.assertTrue(spec.params.rescale_outflow)

    def test_load_config(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'problem.json'
            path.write_text(json.dumps(problem_document()))
            self.assertEqual(load_config(path).nx, 4)
            path.write_text('{"SPEC_VERSION": 1,')
            with self.assertRaises(ImproperlyConfigured):
                load_config(path)
        with self.assertRaises(ImproperlyConfigured):
            load_config(Path(tmp) / 'missing.json')
