import csv
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from flowopt.problem import spec_from_document
from flowopt.verification import (fluid_connects, initial_problem, manufactured_flow_errors, manufactured_force,
                                  manufactured_velocity, object_geometry, write_report_csv)

from .factories import MeshFactory, PhaseFieldFactory, PhysicalParamsFactory, problem_document


class FlowOracleTestCase(SimpleTestCase):

    def test_manufactured_velocity_is_divergence_free(self):
        x, y, h = 0.3, 0.7, 1e-6
        dudx = (manufactured_velocity(x + h, y)[0] - manufactured_velocity(x - h, y)[0]) / (2 * h)
        dvdy = (manufactured_velocity(x, y + h)[1] - manufactured_velocity(x, y - h)[1]) / (2 * h)
        self.assertAlmostEqual(dudx + dvdy, 0.0, places=8)
        self.assertEqual(np.shape(manufactured_force(1.0)(np.zeros(3), np.zeros(3))[0]), (3,))

    def test_errors_decrease_under_refinement(self):
        rows = manufactured_flow_errors(levels=2, n0=4)
        self.assertEqual([row['level'] for row in rows], [0, 1])
        self.assertLess(rows[1]['velocity_h1'], rows[0]['velocity_h1'] / 2.5)
        self.assertLess(rows[1]['pressure_l2'], rows[0]['pressure_l2'])
        self.assertGreater(rows[1]['velocity_rate'], 1.3)


class ShapeDiagnosticsTestCase(SimpleTestCase):

    def setUp(self):
        self.mesh = MeshFactory(nx=8, ny=8)
        self.params = PhysicalParamsFactory()

    def test_open_channel_connects(self):
        self.assertTrue(fluid_connects(PhaseFieldFactory(mesh=self.mesh), self.params))

    def test_wall_blocks_the_flow(self):
        x = self.mesh.vertices[:, 0]
        phi = PhaseFieldFactory(mesh=self.mesh, values=np.where(np.abs(x - 0.5) < 0.2, -1.0, 1.0))
        self.assertFalse(fluid_connects(phi, self.params))

    def test_object_geometry(self):
        x, y = self.mesh.vertices.T
        inside = (np.abs(x - 0.5) <= 0.25) & (np.abs(y - 0.5) <= 0.125)
        phi = PhaseFieldFactory(mesh=self.mesh, values=np.where(inside, -1.0, 1.0))
        geometry = object_geometry(phi)
        np.testing.assert_allclose(geometry['centroid'], [0.5, 0.5], atol=1e-12)
        self.assertGreater(geometry['area'], 0.0)
        self.assertAlmostEqual(abs(geometry['inclination']) % 180.0, 0.0, places=6)
        self.assertAlmostEqual(object_geometry(PhaseFieldFactory(mesh=self.mesh))['area'], 0.0, places=12)


class ReportTestCase(SimpleTestCase):

    def test_initial_problem(self):
        spec = spec_from_document(problem_document())
        problem, phi = initial_problem(spec)
        self.assertEqual(phi.mesh.n_vertices, 25)
        self.assertEqual(problem.params.epsilon, 0.1)

    def test_report_header_is_the_union_of_keys(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_report_csv(Path(tmp) / 'nested' / 'report.csv', [{'a': 1}, {'a': 2, 'b': 3}])
            with path.open() as f:
                rows = list(csv.DictReader(f))
        self.assertEqual(rows, [{'a': '1', 'b': ''}, {'a': '2', 'b': '3'}])
