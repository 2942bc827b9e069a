import numpy as np
from django.test import SimpleTestCase

from flowopt.adjoint import MultiplierState, compute_theta, lagrangian_value, mean_free_divergence_data
from flowopt.fem.assembly import assemble_load
from flowopt.fem.spaces import taylor_hood
from flowopt.functionals.base import FunctionalValue, get_functional_terms
from flowopt.functionals.constraints import get_constraint_specs
from flowopt.reduced import ReducedProblem, metric_matrix
from flowopt.verification import adjoint_fd_comparison, duality_check, fd_reduced_gradient, interior_direction

from .factories import MeshFactory, PhaseFieldFactory, PhysicalParamsFactory, ball_values


class AdjointGradientTestCase(SimpleTestCase):

    def setUp(self):
        mesh = MeshFactory(nx=6, ny=6)
        self.phi = PhaseFieldFactory(mesh=mesh, values=ball_values(mesh))
        self.params = PhysicalParamsFactory(alpha_bar=2.0)
        terms = get_functional_terms([{'KIND': 'penalty_hat_alpha'},
                                      {'KIND': 'surface_force', 'OPTIONS': {'DIRECTION': [1.0, 0.0]}},
                                      {'KIND': 'ginzburg_landau'}])
        self.problem = ReducedProblem(terms, [], self.params)

    def test_duality(self):
        delta = interior_direction(self.phi, np.random.default_rng(7))
        report = duality_check(self.problem, self.phi, delta)
        self.assertLessEqual(report['residual'], 1e-9 * report['scale'])

    def test_finite_differences(self):
        rows = adjoint_fd_comparison(self.problem, self.phi, n_directions=2, seed=11)
        for row in rows:
            self.assertLess(row['relative_error'], 1e-3)

    def test_states_are_reused(self):
        self.problem.evaluate(self.phi)
        self.problem.objective(self.phi)
        self.problem.gradient(self.phi)
        self.assertEqual(self.problem.state_solves, 1)

    def test_finite_differences_must_stay_in_the_box(self):
        with self.assertRaises(ValueError):
            fd_reduced_gradient(self.problem, self.phi, np.ones(self.phi.mesh.n_vertices), steps=(0.1,))

    def test_lagrangian_gradient_adds_the_constraints(self):
        specs = get_constraint_specs([{'KIND': 'volume_upper', 'OPTIONS': {'BETA': 0.5}}])
        problem = ReducedProblem(self.problem.terms, specs, self.params)
        evaluation = problem.evaluate(self.phi)
        plain = problem.gradient(self.phi, evaluation)
        constraints = problem.linear_constraints(self.phi.mesh)
        multipliers = MultiplierState(names=['volume_upper'], lambdas=np.array([0.3]), active_flags=np.array([True]))
        lagrangian = problem.gradient(self.phi, evaluation, multipliers)
        # G = -integral of phi + bound, so -lambda dG adds lambda (1, psi_i)
        np.testing.assert_allclose(lagrangian.dual - plain.dual, -0.3 * constraints[0].weights, atol=1e-10)


class StateFreeProblemTestCase(SimpleTestCase):

    def test_gradient_without_state(self):
        mesh = MeshFactory()
        phi = PhaseFieldFactory(mesh=mesh, values=0.5 * np.sin(np.pi * mesh.vertices[:, 0]))
        problem = ReducedProblem(get_functional_terms([{'KIND': 'ginzburg_landau'}]), [], PhysicalParamsFactory())
        self.assertFalse(problem.needs_state)
        gradient = problem.gradient(phi)
        self.assertIsNone(gradient.adjoint)
        self.assertIsNone(gradient.evaluation.state)
        self.assertEqual(problem.state_solves, 0)

    def test_metrics(self):
        mesh = MeshFactory()
        params = PhysicalParamsFactory()
        ones = np.ones(mesh.n_vertices)
        self.assertAlmostEqual(float(ones @ (metric_matrix(mesh, params, 'l2') @ ones)), 1.0)
        x = mesh.vertices[:, 0]
        l2 = float(x @ (metric_matrix(mesh, params, 'l2') @ x))
        h1 = float(x @ (metric_matrix(mesh, params, 'h1_scaled') @ x))
        self.assertAlmostEqual(h1 - l2, params.gl_scale * params.epsilon)
        with self.assertRaises(ValueError):
            metric_matrix(mesh, params, 'h2')


class PressureMultiplierTestCase(SimpleTestCase):

    def test_theta_makes_the_divergence_data_mean_free(self):
        mesh = MeshFactory()
        p1 = taylor_hood(mesh).p1
        data = assemble_load(p1, lambda x, y: 1.0 + x * y)
        mean_row = assemble_load(p1, 1.0)
        theta = compute_theta(data, mesh.area)
        self.assertAlmostEqual(theta, -1.25)
        self.assertAlmostEqual(float(np.sum(mean_free_divergence_data(data, mean_row, theta))), 0.0, places=12)

    def test_lagrangian_value(self):
        mesh = MeshFactory()
        objective = FunctionalValue.zero(mesh, 2.0)
        constraint = FunctionalValue.zero(mesh, 0.5)
        self.assertEqual(lagrangian_value(objective, [constraint], [4.0]).value, 0.0)
