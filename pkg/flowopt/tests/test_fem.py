import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from flowopt.exceptions import LevelSetError
from flowopt.fem.assembly import p1_mass, p1_stiffness
from flowopt.fem.indicators import doerfler_mark, phase_jump_indicator
from flowopt.fem.levelset import extract_zero_level_set
from flowopt.fem.mesh import refine_marked
from flowopt.fem.quadrature import get_rule
from flowopt.fem.spaces import taylor_hood
from flowopt.fem.vtk import write_vtk

from .factories import MeshFactory


class QuadratureTestCase(SimpleTestCase):

    def test_weights_sum_to_reference_area(self):
        for degree in range(1, 7):
            rule = get_rule(degree)
            self.assertGreaterEqual(rule.degree, degree)
            self.assertAlmostEqual(float(rule.weights.sum()), 0.5)
            np.testing.assert_allclose(rule.points.sum(axis=1), 1.0)

    def test_unavailable_degree(self):
        with self.assertRaises(ValueError):
            get_rule(50)


class SpacesTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory()
        self.spaces = taylor_hood(self.mesh)

    def test_dof_counts(self):
        self.assertEqual(self.spaces.p1.n_dofs, self.mesh.n_vertices)
        self.assertEqual(self.spaces.n_velocity, 2 * (self.mesh.n_vertices + self.mesh.n_edges))
        self.assertEqual(self.spaces.n_pressure, self.mesh.n_vertices)

    def test_p2_integrates_quadratics_exactly(self):
        p2 = self.spaces.velocity.scalar
        values = p2.interpolate(lambda x, y: x ** 2 + x * y)
        self.assertAlmostEqual(p2.integrate(values), 1.0 / 3.0 + 0.25)

    def test_mass_and_stiffness(self):
        ones = np.ones(self.mesh.n_vertices)
        self.assertAlmostEqual(float(ones @ (p1_mass(self.mesh) @ ones)), 1.0)
        np.testing.assert_allclose(p1_stiffness(self.mesh) @ ones, 0.0, atol=1e-12)
        x = self.mesh.vertices[:, 0]
        # |grad x|^2 integrated over the unit square
        self.assertAlmostEqual(float(x @ (p1_stiffness(self.mesh) @ x)), 1.0)


class IndicatorTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory()

    def test_linear_field_has_no_jumps(self):
        eta = phase_jump_indicator(self.mesh, self.mesh.vertices @ np.array([0.3, -0.7]))
        np.testing.assert_allclose(eta, 0.0, atol=1e-12)
        self.assertEqual(doerfler_mark(eta).size, 0)

    def test_affine_field_on_a_refined_mesh_marks_nothing(self):
        mesh = refine_marked(self.mesh, [0, 5, 11])
        values = 40.0 * mesh.vertices[:, 0] - 25.0 * mesh.vertices[:, 1] + 3.0
        eta = phase_jump_indicator(mesh, values)
        self.assertTrue(np.all(eta == 0.0))
        self.assertEqual(doerfler_mark(eta).size, 0)
        self.assertEqual(doerfler_mark(np.full(mesh.n_triangles, 1e-17)).size, 0)

    def test_kink_is_marked(self):
        values = np.abs(self.mesh.vertices[:, 0] - 0.5)
        eta = phase_jump_indicator(self.mesh, values)
        marked = doerfler_mark(eta)
        self.assertGreater(marked.size, 0)
        centroids = self.mesh.centroids[marked]
        self.assertTrue(np.all(np.abs(centroids[:, 0] - 0.5) < 0.25))

    def test_doerfler_takes_the_largest_first(self):
        np.testing.assert_array_equal(doerfler_mark([3.0, 1.0, 0.0, 2.0], 0.5), [0])
        np.testing.assert_array_equal(doerfler_mark([3.0, 1.0, 0.0, 2.0], 0.8), [0, 3])


class LevelSetTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory()

    def test_vertical_interface(self):
        polyline = extract_zero_level_set(self.mesh, self.mesh.vertices[:, 0] - 0.45)
        self.assertAlmostEqual(polyline.length, 1.0)
        # normals point into phi < 0
        np.testing.assert_allclose(polyline.outward_normals, np.tile([-1.0, 0.0], (len(polyline), 1)), atol=1e-12)

    def test_vanishing_field(self):
        with self.assertRaises(LevelSetError):
            extract_zero_level_set(self.mesh, np.zeros(self.mesh.n_vertices))


class VtkTestCase(SimpleTestCase):

    def test_write(self):
        mesh = MeshFactory(nx=2, ny=2)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_vtk(Path(tmp) / 'out.vtk', mesh,
                             point_data={'phi': np.zeros(mesh.n_vertices),
                                         'velocity': np.ones((mesh.n_vertices, 2))},
                             cell_data={'eta': np.arange(mesh.n_triangles)})
            text = path.read_text()
        self.assertIn(f'POINTS {mesh.n_vertices} double', text)
        self.assertIn(f'CELLS {mesh.n_triangles} {4 * mesh.n_triangles}', text)
        self.assertIn('SCALARS phi double 1', text)
        self.assertIn('VECTORS velocity double', text)
        self.assertIn(f'CELL_DATA {mesh.n_triangles}', text)

    def test_wrong_length(self):
        mesh = MeshFactory(nx=2, ny=2)
        with tempfile.TemporaryDirectory() as tmp, self.assertRaises(ValueError):
            write_vtk(Path(tmp) / 'out.vtk', mesh, point_data={'phi': np.zeros(3)})
