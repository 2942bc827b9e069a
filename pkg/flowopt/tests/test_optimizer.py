import numpy as np
from django.core.exceptions import ImproperlyConfigured
from django.test import SimpleTestCase
from scipy import sparse

from flowopt.adjoint import MultiplierState
from flowopt.exceptions import InfeasibleConstraintsError, LineSearchError
from flowopt.fem.assembly import p1_mass
from flowopt.fem.mesh import generate_rectangle_mesh, refine_marked
from flowopt.functionals.constraints import LinearConstraint, get_constraint_specs, linear_constraints
from flowopt.optimizer.diagnostics import constraint_qualification_diagnostic
from flowopt.optimizer.loop import OptimizerConfig
from flowopt.optimizer.pdas import pdas_project
from flowopt.optimizer.vmpt import ArmijoConfig, IterationRecord, vmpt_step
from flowopt.reduced import metric_matrix

from .factories import MeshFactory, PhaseFieldFactory, PhysicalParamsFactory


class ProjectionTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory()
        self.metric = p1_mass(self.mesh)
        self.ones = self.metric @ np.ones(self.mesh.n_vertices)

    def test_box_only_is_a_clamp_in_the_identity_metric(self):
        result = pdas_project(np.array([2.0, -3.0, 0.5]), sparse.identity(3, format='csr'))
        np.testing.assert_allclose(result.values, [1.0, -1.0, 0.5])
        np.testing.assert_array_equal(result.active_upper, [True, False, False])
        np.testing.assert_array_equal(result.active_lower, [False, True, False])
        self.assertAlmostEqual(result.inactive_fraction, 1.0 / 3.0)
        self.assertAlmostEqual(result.box_multipliers[0], 1.0)

    def test_equality_gives_the_mean(self):
        volume = LinearConstraint(weights=self.ones, target=0.3, relation='equality', name='volume')
        result = pdas_project(np.full(self.mesh.n_vertices, 0.8), self.metric, [volume])
        np.testing.assert_allclose(result.values, 0.3, atol=1e-10)
        self.assertLess(result.multipliers.lambdas[0], 0.0)
        self.assertLessEqual(result.kkt_residual, 1e-10)

    def test_projection_is_idempotent(self):
        rng = np.random.default_rng(0)
        volume = LinearConstraint(weights=self.ones, target=-0.2, relation='inequality', name='volume')
        result = pdas_project(rng.uniform(-2.0, 2.0, self.mesh.n_vertices), self.metric, [volume])
        again = pdas_project(result.values, self.metric, [volume])
        np.testing.assert_allclose(again.values, result.values, atol=1e-10)
        self.assertTrue(np.all(np.abs(result.values) <= 1.0 + 1e-12))
        self.assertGreaterEqual(volume.residual(result.values), -1e-10)

    def test_clipped_field_is_its_own_projection(self):
        mesh = generate_rectangle_mesh(1.0, 1.0, 8, 8)
        rng = np.random.default_rng(3)
        feasible = np.clip(rng.uniform(-2.0, 2.0, mesh.n_vertices), -1.0, 1.0)
        self.assertTrue(np.any(feasible == 1.0) and np.any(feasible == -1.0))
        result = pdas_project(feasible, p1_mass(mesh))
        np.testing.assert_allclose(result.values, feasible, atol=1e-12)
        self.assertTrue(np.all(np.abs(result.values) <= 1.0))
        self.assertLessEqual(result.iterations, 2)

    def test_projection_on_a_refined_mesh(self):
        mesh = refine_marked(generate_rectangle_mesh(1.0, 1.0, 6, 6), [0, 1, 2, 30, 31])
        metric = metric_matrix(mesh, PhysicalParamsFactory())
        ones = p1_mass(mesh) @ np.ones(mesh.n_vertices)
        volume = LinearConstraint(weights=ones, target=0.1, relation='equality', name='volume')
        rng = np.random.default_rng(4)
        result = pdas_project(rng.uniform(-2.0, 2.0, mesh.n_vertices), metric, [volume])
        self.assertAlmostEqual(volume.residual(result.values), 0.0, places=9)
        self.assertTrue(np.all(np.abs(result.values) <= 1.0))
        again = pdas_project(result.values, metric, [volume])
        np.testing.assert_allclose(again.values, result.values, atol=1e-9)

    def test_inactive_inequality_has_no_multiplier(self):
        volume = LinearConstraint(weights=self.ones, target=-0.5, relation='inequality', name='volume')
        result = pdas_project(np.zeros(self.mesh.n_vertices), self.metric, [volume])
        np.testing.assert_allclose(result.values, 0.0, atol=1e-12)
        self.assertEqual(result.multipliers.lambdas[0], 0.0)
        self.assertFalse(result.multipliers.active_flags[0])

    def test_infeasible(self):
        volume = LinearConstraint(weights=self.ones, target=1.5, relation='equality', name='volume')
        with self.assertRaises(InfeasibleConstraintsError):
            pdas_project(np.zeros(self.mesh.n_vertices), self.metric, [volume])


class DescentStepTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory()
        self.metric = p1_mass(self.mesh)
        self.target = 0.5 * np.sin(np.pi * self.mesh.vertices[:, 0])

    def objective(self, phi):
        misfit = phi.values - self.target
        return 0.5 * float(misfit @ (self.metric @ misfit))

    def test_zero_gradient_is_stationary(self):
        phi = PhaseFieldFactory(mesh=self.mesh, values=np.zeros(self.mesh.n_vertices))
        result = vmpt_step(phi, np.zeros(self.mesh.n_vertices), self.metric, [], self.objective)
        self.assertTrue(result.stationary)
        self.assertIs(result.phi, phi)
        self.assertTrue(result.record.stationary)

    def test_full_step_reaches_the_minimizer(self):
        phi = PhaseFieldFactory(mesh=self.mesh, values=np.zeros(self.mesh.n_vertices))
        gradient = self.metric @ (phi.values - self.target)
        result = vmpt_step(phi, gradient, self.metric, [], self.objective, iteration=4)
        self.assertFalse(result.stationary)
        np.testing.assert_allclose(result.phi.values, self.target, atol=1e-10)
        self.assertEqual(result.record.tau, 1.0)
        self.assertEqual(result.record.iteration, 4)
        self.assertLess(result.record.objective, self.objective(phi))

    def test_multipliers_are_scaled_by_the_step(self):
        ones = self.metric @ np.ones(self.mesh.n_vertices)
        volume = LinearConstraint(weights=ones, target=0.0, relation='equality', name='volume')
        phi = PhaseFieldFactory(mesh=self.mesh, values=np.zeros(self.mesh.n_vertices))
        gradient = self.metric @ (phi.values - self.target)
        result = vmpt_step(phi, gradient, self.metric, [volume], self.objective)
        self.assertAlmostEqual(volume.residual(result.phi.values), 0.0, places=10)
        np.testing.assert_allclose(result.multipliers.lambdas, result.projection.multipliers.lambdas / result.record.tau)
        self.assertIn('volume', result.record.multipliers)

    def test_line_search_failure(self):
        phi = PhaseFieldFactory(mesh=self.mesh, values=np.zeros(self.mesh.n_vertices))
        gradient = self.metric @ (phi.values - self.target)
        with self.assertRaises(LineSearchError):
            vmpt_step(phi, gradient, self.metric, [], lambda trial: 1.0, ArmijoConfig(max_backtracks=2),
                      current_value=0.0)

    def test_armijo_options(self):
        with self.assertRaises(ValueError):
            ArmijoConfig(shrink=1.5)
        with self.assertRaises(ValueError):
            ArmijoConfig(sufficient_decrease=0.0)

    def test_history_row(self):
        record = IterationRecord(iteration=2, objective=1.5, constraints={'volume_upper': 0.1},
                                 multipliers={'volume_upper': 0.0})
        row = record.as_row()
        self.assertEqual(row['J'], 1.5)
        self.assertEqual(row['G_volume_upper'], 0.1)
        self.assertEqual(row['lambda_volume_upper'], 0.0)
        self.assertNotIn('objective', row)


class MultiplierStateTestCase(SimpleTestCase):

    def test_slackness(self):
        specs = get_constraint_specs([{'KIND': 'volume_upper', 'OPTIONS': {'BETA': 0.5}},
                                      {'KIND': 'mass', 'OPTIONS': {'MASS': 0.1, 'RELATION': 'equality'}}])
        state = MultiplierState(names=['volume_upper', 'mass'], lambdas=np.array([2.0, 3.0]),
                                active_flags=np.array([True, True]))
        # only inequalities carry complementary slackness
        np.testing.assert_allclose(state.with_values(specs, [0.5, 0.5]).slackness, [1.0, 0.0])
        self.assertEqual(MultiplierState.zero(specs).as_dict(), {'volume_upper': 0.0, 'mass': 0.0})


class ConstraintQualificationTestCase(SimpleTestCase):

    def test_independent_constraints_are_regular(self):
        mesh = MeshFactory()
        specs = get_constraint_specs([{'KIND': 'mass', 'OPTIONS': {'MASS': 0.5}},
                                      {'KIND': 'center_of_mass', 'OPTIONS': {'CENTER': [0.5, 0.5]}}])
        phi = PhaseFieldFactory(mesh=mesh, values=np.zeros(mesh.n_vertices))
        report = constraint_qualification_diagnostic(phi, None, specs, seed=1)
        self.assertEqual(report['rank'], 3)
        self.assertTrue(report['regular'])

    def test_duplicated_constraints_are_not(self):
        mesh = MeshFactory()
        specs = get_constraint_specs([{'KIND': 'mass', 'OPTIONS': {'MASS': 0.5}},
                                      {'KIND': 'mass', 'OPTIONS': {'MASS': 1.0, 'DENSITY': 2.0}}])
        phi = PhaseFieldFactory(mesh=mesh, values=np.zeros(mesh.n_vertices))
        self.assertFalse(constraint_qualification_diagnostic(phi, None, specs)['regular'])


class OptimizerConfigTestCase(SimpleTestCase):

    def test_from_options(self):
        config = OptimizerConfig.from_options({'MAX_DOFS': 500, 'EPSILON_SCHEDULE': [0.02, 0.01],
                                               'ARMIJO': {'SHRINK': 0.25}, 'METRIC': 'l2'})
        self.assertEqual(config.max_dofs, 500)
        self.assertEqual(config.epsilon_schedule, (0.02, 0.01))
        self.assertEqual(config.armijo.shrink, 0.25)
        self.assertEqual(config.with_max_dofs(20).max_dofs, 20)

    def test_rejections(self):
        for options in ({'METRIC': 'h2'}, {'INACTIVE_FRACTION_FLOOR': 0.0}, {'DOF_GROWTH': 0.5},
                        {'EPSILON_SCHEDULE': [0.01, -0.01]}, {'MAX_OUTER_ITERS': 0}, {'STEP_SIZE': 1.0},
                        {'ARMIJO': {'SHRINK': 2.0}}):
            with self.subTest(options=options), self.assertRaises(ImproperlyConfigured):
                OptimizerConfig.from_options(options)
