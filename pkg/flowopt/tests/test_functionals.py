import math

import numpy as np
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase, override_settings

from flowopt.flow.state import solve_state
from flowopt.functionals.base import FunctionalValue, get_functional_terms
from flowopt.functionals.forces import SurfaceForceTerm, VolumeDragTerm
from flowopt.functionals.ginzburg_landau import GinzburgLandauTerm, eval_ginzburg_landau
from flowopt.functionals.power import MoreauYosidaTerm, eval_potential_power
from flowopt.functionals.rocks import ConstructionCostTerm, RockCostTerm, clamped_sine, rock_factor

from .factories import MeshFactory, PhaseFieldFactory, PhysicalParamsFactory


class GinzburgLandauTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory()
        self.params = PhysicalParamsFactory()

    def test_pure_phases_cost_nothing(self):
        for value in (-1.0, 1.0):
            phi = PhaseFieldFactory(mesh=self.mesh, values=np.full(self.mesh.n_vertices, value))
            self.assertAlmostEqual(eval_ginzburg_landau(phi, 0.1, 0.01).value, 0.0, places=14)

    def test_constant_mixture(self):
        phi = PhaseFieldFactory(mesh=self.mesh, values=np.zeros(self.mesh.n_vertices))
        value = GinzburgLandauTerm()(phi, None, self.params).value
        # gamma / (2 c0) * |Omega| / (2 eps) with c0 = pi / 2
        self.assertAlmostEqual(value, 0.01 / math.pi * 1.0 / 0.2)

    def test_derivative_matches_central_difference(self):
        rng = np.random.default_rng(3)
        values = rng.uniform(-0.5, 0.5, self.mesh.n_vertices)
        direction = rng.uniform(-1.0, 1.0, self.mesh.n_vertices)
        phi = PhaseFieldFactory(mesh=self.mesh, values=values)
        derivative = eval_ginzburg_landau(phi, 0.1, 0.01).d_phi @ direction
        # the energy is quadratic in phi, so the central quotient is exact
        t = 0.1
        plus = eval_ginzburg_landau(phi.with_values(values + t * direction), 0.1, 0.01).value
        minus = eval_ginzburg_landau(phi.with_values(values - t * direction), 0.1, 0.01).value
        self.assertAlmostEqual((plus - minus) / (2 * t), derivative, places=12)


class MaterialCostTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory()
        self.params = PhysicalParamsFactory(epsilon=0.01)

    def test_clamped_sine(self):
        np.testing.assert_allclose(clamped_sine([-3.0, 0.0, math.pi / 6, 3.0]), [-1.0, 0.0, 0.5, 1.0])

    def test_rock_factor(self):
        self.assertAlmostEqual(float(rock_factor(0.5, 0.5, (0.5, 0.5), 0.1, 50.0, 0.01)), 50.0)
        self.assertAlmostEqual(float(rock_factor(0.9, 0.9, (0.5, 0.5), 0.1, 50.0, 0.01)), 1.0)

    def test_rock_cost_of_pure_fluid(self):
        phi = PhaseFieldFactory(mesh=self.mesh)
        plain = RockCostTerm(ROCKS=[])(phi, None, self.params)
        self.assertAlmostEqual(plain.value, 1.0)
        rocky = RockCostTerm(ROCKS=[{'CENTER': [0.5, 0.5], 'SIGMA': 0.2, 'COST': 50.0}])(phi, None, self.params)
        self.assertGreater(rocky.value, plain.value)
        np.testing.assert_allclose(rocky.d_phi_grad, 0.0)

    def test_rock_options(self):
        with self.assertRaises(ImproperlyConfigured):
            RockCostTerm(ROCKS=[{'CENTER': [0.5, 0.5], 'COST': 50.0}])
        with self.assertRaises(ImproperlyConfigured):
            RockCostTerm(ROCKS=[{'CENTER': [0.5, 0.5], 'SIGMA': 0.0, 'COST': 50.0}])

    def test_construction_cost(self):
        phi = PhaseFieldFactory(mesh=self.mesh, values=-np.ones(self.mesh.n_vertices))
        self.assertAlmostEqual(ConstructionCostTerm(UNIT_COST=3.0)(phi, None, self.params).value, 3.0)


class FlowFunctionalsTestCase(SimpleTestCase):

    def setUp(self):
        self.params = PhysicalParamsFactory()
        self.phi = PhaseFieldFactory()
        self.state = solve_state(self.phi, self.params)

    def test_uniform_flow_has_no_power(self):
        power = eval_potential_power(self.phi, self.state, self.params.mu)
        self.assertAlmostEqual(power.value, 0.0, places=10)
        relaxed = MoreauYosidaTerm(S=100.0, D=0.06)
        self.assertEqual(relaxed(self.phi, self.state, self.params).value, 0.0)
        self.assertEqual(relaxed.multiplier(self.phi, self.state, self.params), 0.0)

    def test_force_vanishes_without_interface(self):
        term = SurfaceForceTerm(DIRECTION=[1.0, 0.0])
        self.assertAlmostEqual(term(self.phi, self.state, self.params).value, 0.0, places=10)

    def test_direction_must_be_a_unit_vector(self):
        with self.assertRaises(ImproperlyConfigured):
            SurfaceForceTerm(DIRECTION=[1.0, 1.0])

    def test_volume_drag_square(self):
        with self.assertRaises(ImproperlyConfigured):
            VolumeDragTerm(DIRECTION=[1.0, 0.0], SQUARE=[[0.5, 0.2], [0.1, 0.3]])
        term = VolumeDragTerm(DIRECTION=[1.0, 0.0], SQUARE=[[0.2, 0.8], [0.2, 0.8]])
        with self.assertRaises(ImproperlyConfigured):
            term.validate_domain(0.7, 1.0)
        mesh = self.phi.mesh
        eta = term.eta(mesh)
        self.assertEqual(eta.shape, (mesh.n_vertices, 2))
        center = int(np.argmin(np.hypot(mesh.vertices[:, 0] - 0.5, mesh.vertices[:, 1] - 0.5)))
        np.testing.assert_allclose(eta[center], [1.0, 0.0])
        np.testing.assert_allclose(eta[mesh.boundary_vertices], 0.0)


class FunctionalRegistryTestCase(SimpleTestCase):

    def test_kinds_and_weights(self):
        terms = get_functional_terms([
            {'KIND': 'ginzburg_landau', 'WEIGHT': 2.0},
            {'KIND': 'surface_force', 'OPTIONS': {'DIRECTION': [0.0, -1.0]}},
            {'KIND': 'penalty_hat_alpha', 'ACTIVE': False},
        ])
        self.assertEqual([term.kind for term in terms], ['ginzburg_landau', 'surface_force'])
        mesh = MeshFactory()
        phi = PhaseFieldFactory(mesh=mesh, values=np.zeros(mesh.n_vertices))
        params = PhysicalParamsFactory()
        self.assertAlmostEqual(terms[0](phi, None, params).value, 2.0 * GinzburgLandauTerm()(phi, None, params).value)

    def test_unknown_kind(self):
        with self.assertRaises(ImproperlyConfigured):
            get_functional_terms([{'KIND': 'lift_to_drag'}])

    def test_unimportable_name(self):
        with self.assertRaises(ImproperlyConfigured):
            get_functional_terms([{'NAME': 'flowopt.functionals.nowhere.Term'}])

    def test_missing_required_options(self):
        with self.assertRaisesMessage(ImproperlyConfigured, 'DIRECTION'):
            get_functional_terms([{'KIND': 'surface_force'}])

    @override_settings(FLOWOPT_FUNCTIONALS={'perimeter': 'flowopt.functionals.ginzburg_landau.GinzburgLandauTerm'})
    def test_settings_extend_the_registry(self):
        terms = get_functional_terms([{'KIND': 'perimeter'}])
        self.assertIsInstance(terms[0], GinzburgLandauTerm)

    def test_sum_of_values(self):
        mesh = MeshFactory()
        a, b = FunctionalValue.zero(mesh, 1.5), FunctionalValue.zero(mesh, 2.0)
        b.d_phi_l2 += 1.0
        total = a + b.scaled(2.0)
        self.assertEqual(total.value, 5.5)
        np.testing.assert_allclose(total.d_phi, 2.0)
        self.assertEqual(total.d_state.size, b.d_velocity.size + b.d_pressure.size + 1)
