import numpy as np
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase

from flowopt.flow.state import solve_state
from flowopt.functionals.constraints import (LinearConstraint, MassConstraint, get_constraint_specs,
                                             linear_constraints)

from .factories import MeshFactory, PhaseFieldFactory, PhysicalParamsFactory


class VolumeConstraintTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory(width=2.0, height=0.5)
        self.fluid = PhaseFieldFactory(mesh=self.mesh)

    def test_fraction_bounds(self):
        lower, upper = get_constraint_specs([{'KIND': 'volume_lower', 'OPTIONS': {'BETA': 0.5}},
                                             {'KIND': 'volume_upper', 'OPTIONS': {'BETA': 0.9}}])
        # integral of phi = 1 is the area
        self.assertAlmostEqual(lower.evaluate(self.fluid, None, None).value, 1.0 - 0.5)
        self.assertAlmostEqual(upper.evaluate(self.fluid, None, None).value, 0.9 - 1.0)
        self.assertFalse(upper.is_satisfied(upper.evaluate(self.fluid, None, None).value))
        self.assertEqual(lower.bound(self.mesh.area), 0.5)

    def test_absolute_bounds(self):
        (upper,) = get_constraint_specs([{'KIND': 'volume_upper', 'OPTIONS': {'VOLUME': 0.75}}])
        self.assertAlmostEqual(upper.evaluate(self.fluid, None, None).value, -0.25)
        with self.assertRaises(ImproperlyConfigured):
            upper.validate_domain(0.5, 1.0)

    def test_exactly_one_bound(self):
        with self.assertRaises(ImproperlyConfigured):
            get_constraint_specs([{'KIND': 'volume_lower', 'OPTIONS': {'BETA': 0.5, 'VOLUME': 0.2}}])
        with self.assertRaises(ImproperlyConfigured):
            get_constraint_specs([{'KIND': 'volume_lower'}])
        with self.assertRaises(ImproperlyConfigured):
            get_constraint_specs([{'KIND': 'volume_lower', 'OPTIONS': {'BETA': 1.0}}])


class CenterOfMassTestCase(SimpleTestCase):

    def test_one_constraint_per_axis(self):
        specs = get_constraint_specs([{'KIND': 'center_of_mass', 'OPTIONS': {'CENTER': [0.5, 0.2]}}])
        self.assertEqual([spec.name for spec in specs], ['center_of_mass_x', 'center_of_mass_y'])
        self.assertTrue(all(spec.relation == 'equality' for spec in specs))

    def test_symmetric_object_is_centred(self):
        mesh = MeshFactory()
        specs = get_constraint_specs([{'KIND': 'center_of_mass', 'OPTIONS': {'CENTER': [0.5, 0.5]}}])
        r = np.hypot(mesh.vertices[:, 0] - 0.5, mesh.vertices[:, 1] - 0.5)
        phi = PhaseFieldFactory(mesh=mesh, values=np.where(r < 0.3, -1.0, 1.0))
        for spec in specs:
            self.assertAlmostEqual(spec.evaluate(phi, None, None).value, 0.0, places=12)

    def test_center_must_be_interior(self):
        (spec, _) = get_constraint_specs([{'KIND': 'center_of_mass', 'OPTIONS': {'CENTER': [1.5, 0.2]}}])
        with self.assertRaises(ImproperlyConfigured):
            spec.validate_domain(1.0, 1.0)


class StateConstraintTestCase(SimpleTestCase):

    def test_power_cap_is_monitored_only(self):
        specs = get_constraint_specs([{'KIND': 'potential_power_cap', 'OPTIONS': {'D': 0.06}},
                                      {'KIND': 'mass', 'OPTIONS': {'MASS': 0.1}}])
        mesh = MeshFactory()
        constraints = linear_constraints(specs, mesh)
        self.assertEqual([c.name for c in constraints], ['mass'])

        params = PhysicalParamsFactory()
        phi = PhaseFieldFactory(mesh=mesh)
        cap = specs[0].evaluate(phi, solve_state(phi, params), params)
        # uniform flow dissipates nothing
        self.assertAlmostEqual(cap.value, 0.06, places=10)
        with self.assertRaises(ValueError):
            specs[0].evaluate(phi, None, None)

    def test_mass_is_affine(self):
        mesh = MeshFactory()
        spec = MassConstraint(MASS=0.25, DENSITY=2.0)
        phi = PhaseFieldFactory(mesh=mesh, values=-np.ones(mesh.n_vertices))
        # the object fills the square: mass = density * area
        self.assertAlmostEqual(spec.evaluate(phi, None, None).value, 0.25 - 2.0)
        (constraint,) = linear_constraints([spec], mesh)
        self.assertAlmostEqual(constraint.residual(phi.values), 0.25 - 2.0)

    def test_mass_is_an_upper_bound(self):
        mesh = MeshFactory()
        spec = MassConstraint(MASS=0.5)
        self.assertEqual(spec.relation, 'inequality')
        # phi = 0 counts half the square: mass 0.5, on the bound
        half = PhaseFieldFactory(mesh=mesh, values=np.zeros(mesh.n_vertices))
        self.assertTrue(spec.is_satisfied(spec.evaluate(half, None, None).value))
        fluid = PhaseFieldFactory(mesh=mesh)
        self.assertAlmostEqual(spec.evaluate(fluid, None, None).value, 0.5)
        self.assertTrue(spec.is_satisfied(spec.evaluate(fluid, None, None).value))
        solid = PhaseFieldFactory(mesh=mesh, values=-np.ones(mesh.n_vertices))
        self.assertFalse(spec.is_satisfied(spec.evaluate(solid, None, None).value))
        self.assertEqual(MassConstraint(MASS=0.25, RELATION='equality').relation, 'equality')


class LinearConstraintTestCase(SimpleTestCase):

    def test_residual(self):
        constraint = LinearConstraint(weights=np.array([1.0, 2.0]), target=1.0, relation='inequality', name='g')
        self.assertEqual(constraint.residual(np.array([1.0, 1.0])), 2.0)
