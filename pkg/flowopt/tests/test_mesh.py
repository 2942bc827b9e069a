import numpy as np
from django.test import SimpleTestCase

from flowopt.exceptions import MeshError
from flowopt.fem.mesh import generate_rectangle_mesh, mesh_statistics, prolongate, refine_marked, uniform_refine

from .factories import MeshFactory


class RectangleMeshTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory(width=2.0, height=1.0, nx=4, ny=2)

    def test_counts(self):
        self.assertEqual(self.mesh.n_vertices, 15)
        self.assertEqual(self.mesh.n_triangles, 16)
        # Euler's formula for a simply connected triangulation
        self.assertEqual(self.mesh.n_edges, self.mesh.n_vertices + self.mesh.n_triangles - 1)
        self.assertAlmostEqual(self.mesh.area, 2.0)

    def test_boundary_tags(self):
        lengths = self.mesh.segment_lengths()
        self.assertAlmostEqual(lengths['bottom'], 2.0)
        self.assertAlmostEqual(lengths['top'], 2.0)
        self.assertAlmostEqual(lengths['left'], 1.0)
        self.assertAlmostEqual(lengths['right'], 1.0)
        self.assertEqual(self.mesh.hanging_edges().size, 0)

    def test_bad_dimensions(self):
        with self.assertRaises(MeshError):
            generate_rectangle_mesh(0.0, 1.0, 2, 2)
        with self.assertRaises(MeshError):
            generate_rectangle_mesh(1.0, 1.0, 0, 2)

    def test_statistics(self):
        stats = mesh_statistics(self.mesh)
        self.assertEqual(stats['velocity_dofs'], 2 * (self.mesh.n_vertices + self.mesh.n_edges))
        self.assertEqual(stats['pressure_dofs'], self.mesh.n_vertices)
        self.assertEqual(stats['bounds'], [0.0, 2.0, 0.0, 1.0])
        self.assertAlmostEqual(stats['min_angle'], 45.0)


class RefinementTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory()

    def test_single_triangle_refinement_is_conforming(self):
        fine = refine_marked(self.mesh, [5])
        self.assertGreater(fine.n_triangles, self.mesh.n_triangles)
        self.assertAlmostEqual(fine.area, self.mesh.area)
        self.assertEqual(fine.hanging_edges().size, 0)
        self.assertTrue(np.all(fine.signed_areas > 0.0))

    def test_empty_marking_returns_the_mesh(self):
        self.assertIs(refine_marked(self.mesh, []), self.mesh)

    def test_out_of_range_marking(self):
        with self.assertRaises(MeshError):
            refine_marked(self.mesh, [self.mesh.n_triangles])

    def test_uniform_refinement_keeps_angles(self):
        fine = uniform_refine(self.mesh, times=2)
        self.assertAlmostEqual(fine.area, 1.0)
        self.assertEqual(fine.hanging_edges().size, 0)
        # newest-vertex bisection only produces the two similarity classes of the seed
        self.assertGreaterEqual(fine.min_angle(), 45.0 - 1e-9)

    def test_prolongation_is_exact_for_linear_fields(self):
        fine = refine_marked(self.mesh, [0, 7, 12])
        coarse_values = self.mesh.vertices @ np.array([1.0, 2.0])
        np.testing.assert_allclose(prolongate(fine, coarse_values), fine.vertices @ np.array([1.0, 2.0]))

    def test_prolongation_needs_a_refined_mesh(self):
        with self.assertRaises(MeshError):
            prolongate(self.mesh, np.zeros(self.mesh.n_vertices))
