import math
from pathlib import Path
import tempfile
import unittest

import numpy as np

from src.data_models import PotentialShape, PotentialSpec
from src.errors import ConfigurationError
from src.potentials import potential_model


class TestPotentialModel(unittest.TestCase):
    def test_square_well_defaults_to_unit_support(self):
        model = potential_model.make_potential(PotentialSpec(shape=PotentialShape.SQUARE_WELL, amplitude=4.0))

        self.assertEqual(model.support_radius, 1.0)
        np.testing.assert_allclose(model.V(np.array([[0.5, 0.0, 0.0], [0.0, 1.5, 0.0]])), [4.0, 0.0])

    def test_factorisation_u_times_v_is_v(self):
        model = potential_model.make_potential(PotentialSpec(shape=PotentialShape.GAUSSIAN, amplitude=-2.0, width=0.5))
        points = np.random.default_rng(1).uniform(-1.0, 1.0, size=(20, 3))

        np.testing.assert_allclose(model.u(points) * model.v(points), model.V(points), rtol=1e-14, atol=1e-300)
        self.assertTrue(np.all(model.u(points) >= 0.0))

    def test_square_well_norms(self):
        model = potential_model.make_potential(PotentialSpec(shape=PotentialShape.SQUARE_WELL, amplitude=4.0))

        self.assertAlmostEqual(model.l1_norm(), 16.0 * math.pi / 3.0, places=10)
        self.assertAlmostEqual(model.weighted_l1_norm(), 16.0 * math.pi * 10.0 / 21.0, places=10)
        self.assertAlmostEqual(model.l3_norm(), 4.0 * (4.0 * math.pi / 3.0) ** (1.0 / 3.0), places=10)

    def test_gaussian_truncation_error_accounts_for_lost_mass(self):
        spec = PotentialSpec(shape=PotentialShape.GAUSSIAN, amplitude=1.0, width=1.0, support_radius=1.0)

        with self.assertLogs("src.potentials.potential_model", level="WARNING"):
            model = potential_model.make_potential(spec)

        self.assertAlmostEqual(model.l1_norm() + model.truncation_error(), math.pi**1.5, places=9)

    def test_gaussian_default_support_is_truncation_widths(self):
        model = potential_model.make_potential(PotentialSpec(shape=PotentialShape.GAUSSIAN, amplitude=1.0, width=0.5))

        self.assertEqual(model.support_radius, 3.0)

    def test_rescaled_is_gross_pitaevskii_scaling(self):
        model = potential_model.make_potential(PotentialSpec(shape=PotentialShape.GAUSSIAN, amplitude=1.5, width=0.4))
        point = np.array([[0.1, 0.05, 0.0]])

        scaled = model.rescaled(3.0)

        self.assertAlmostEqual(float(scaled.V(point)[0]), 9.0 * float(model.V(3.0 * point)[0]), places=12)
        self.assertAlmostEqual(scaled.support_radius, model.support_radius / 3.0)
        self.assertAlmostEqual(scaled.l1_norm(), model.l1_norm() / 3.0, places=9)

    def test_tabulated_potential_from_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "v.csv"
            path.write_text("r,V\n0.0,2.0\n0.5,1.0\n1.0,0.0\n", encoding="utf-8")

            model = potential_model.make_potential(
                PotentialSpec(shape=PotentialShape.TABULATED_RADIAL, amplitude=3.0, table_path=str(path))
            )

        self.assertEqual(model.support_radius, 1.0)
        self.assertEqual(model.knots, (0.5,))
        self.assertAlmostEqual(float(model.profile(0.25)), 4.5)
        self.assertEqual(model.max_abs(), 6.0)

    def test_tabulated_without_table_raises(self):
        with self.assertRaises(ConfigurationError):
            potential_model.make_potential(PotentialSpec(shape=PotentialShape.TABULATED_RADIAL, amplitude=1.0))

    def test_decreasing_table_radii_raise(self):
        spec = PotentialSpec(shape=PotentialShape.TABULATED_RADIAL, amplitude=1.0, table_r=(0.0, 1.0, 0.5), table_v=(1.0, 1.0, 1.0))

        with self.assertRaises(ConfigurationError):
            potential_model.make_potential(spec)

    def test_zero_amplitude_is_zero(self):
        model = potential_model.make_potential(PotentialSpec(shape=PotentialShape.SQUARE_WELL, amplitude=0.0))

        self.assertTrue(model.is_zero)

    def test_grid_norm_converges_to_quadrature_norm(self):
        model = potential_model.make_potential(PotentialSpec(shape=PotentialShape.GAUSSIAN, amplitude=1.0, width=0.5))
        grid = potential_model.default_grid(model)

        self.assertAlmostEqual(model.grid_l1_norm(grid), model.l1_norm(), places=6)


if __name__ == "__main__":
    unittest.main()
