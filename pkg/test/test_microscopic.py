from dataclasses import replace
import unittest

import numpy as np

from src.analysis.convergence import fit_rate
from src.analysis.field_distance import l2_distance
from src.data_models import DensityFamily, DensitySpec, ObstacleConfig, PotentialShape, PotentialSpec, SourceSpec
from src.errors import CapExceededError, GridMismatchError, LambdaMismatchError
from src.microscopic import densities, remainder
from src.point_charge.charges import solve_point_charges
from src.point_charge.green_field import source_field
from src.potentials.potential_model import make_potential
from src.potentials.quadrature import Grid3D, quadrature_grid
from src.random_field.sampling import sample_configuration
from src.scattering import radial_ode

LAM = 1.0


def source(lam: float = LAM) -> SourceSpec:
    return SourceSpec(g0=1.0, center=(0.1, 0.0, -0.1), width=1.0, lam=lam)


def square_well(amplitude: float) -> PotentialSpec:
    return PotentialSpec(shape=PotentialShape.SQUARE_WELL, amplitude=amplitude, support_radius=1.0)


class TestSolveDensities(unittest.TestCase):
    def setUp(self):
        self.grid = quadrature_grid(1.0, 6, 3)
        self.pot = make_potential(square_well(4.0))
        self.config = sample_configuration(DensitySpec(family=DensityFamily.UNIFORM_BALL), 3, 21)

    def test_zero_potential_gives_zero_charges(self):
        sol = densities.solve_densities(self.config, make_potential(square_well(0.0)), self.grid, LAM, source())

        np.testing.assert_array_equal(sol.Q, np.zeros(3))
        self.assertEqual(sol.method, "trivial")
        self.assertEqual(sol.a, 0.0)

    def test_gmres_matches_monolithic(self):
        iterative = densities.solve_densities(self.config, self.pot, self.grid, LAM, source())

        direct = densities.solve_densities(self.config, self.pot, self.grid, LAM, source(), monolithic=True)

        self.assertEqual(direct.method, "monolithic")
        np.testing.assert_allclose(iterative.rho_hat, direct.rho_hat, rtol=0.0, atol=1e-9 * np.abs(direct.rho_hat).max())
        self.assertLess(iterative.block_residuals.max(), densities.BLOCK_TOL)

    def test_chunked_coupling_matches_dense(self):
        dense = densities.MicroscopicSystem(self.config, self.pot, self.grid, LAM)
        chunked = densities.MicroscopicSystem(self.config, self.pot, self.grid, LAM, dense_limit=0)
        values = np.random.default_rng(0).standard_normal((3, self.grid.size))

        np.testing.assert_allclose(chunked.apply_offdiag(values), dense.apply_offdiag(values), rtol=1e-12, atol=1e-14)

    def test_matches_unrescaled_system(self):
        sol = densities.solve_densities(self.config, self.pot, self.grid, LAM, source())

        unrescaled = densities.solve_unrescaled_densities(self.config, self.pot, self.grid, LAM, source())

        np.testing.assert_allclose(sol.Q, unrescaled, rtol=1e-8, atol=1e-12)

    def test_cloud_charges_sum_to_monopoles(self):
        sol = densities.solve_densities(self.config, self.pot, self.grid, LAM, source())

        per_obstacle = sol.cloud_charges.reshape(3, self.grid.size).sum(axis=1)

        np.testing.assert_allclose(per_obstacle, sol.Q, rtol=1e-12, atol=1e-15)
        self.assertEqual(sol.cloud_points.shape, (3 * self.grid.size, 3))

    def test_single_obstacle_is_direct(self):
        config = ObstacleConfig(points=np.array([[0.2, 0.0, 0.0]]))

        sol = densities.solve_densities(config, self.pot, self.grid, LAM, source())

        self.assertEqual(sol.iterations, 0)
        self.assertEqual(sol.n_points, 1)

    def test_cap_exceeded_raises(self):
        with self.assertRaises(CapExceededError):
            densities.solve_densities(self.config, self.pot, self.grid, LAM, source(), cap=10)

    def test_lambda_mismatch_raises(self):
        with self.assertRaises(LambdaMismatchError):
            densities.solve_densities(self.config, self.pot, self.grid, LAM, source(4.0))

    def test_overlapping_supports_warn(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]))

        with self.assertLogs("src.microscopic.densities", level="WARNING"):
            densities.MicroscopicSystem(config, self.pot, self.grid, LAM)


class TestFields(unittest.TestCase):
    def setUp(self):
        self.grid = quadrature_grid(1.0, 6, 3)
        self.pot = make_potential(square_well(4.0))
        self.config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]))
        self.sol = densities.solve_densities(self.config, self.pot, self.grid, LAM, source())

    def test_fields_agree_far_away(self):
        point = np.array([[0.0, 0.0, 4.0]])

        cloud_value = densities.microscopic_field(self.sol, self.config, self.pot, self.grid, source()).evaluate(point)
        monopole_value = densities.monopole_field(self.sol, self.config, source()).evaluate(point)

        self.assertAlmostEqual(float(cloud_value[0]), float(monopole_value[0]), delta=1e-3)

    def test_grid_mismatch_raises(self):
        with self.assertRaises(GridMismatchError):
            densities.microscopic_field(self.sol, self.config, self.pot, quadrature_grid(1.0, 6, 4), source())


class TestRemainder(unittest.TestCase):
    def setUp(self):
        self.grid = quadrature_grid(1.0, 6, 3)
        self.pot = make_potential(square_well(4.0))

    def test_charge_identity_holds(self):
        config = sample_configuration(DensitySpec(family=DensityFamily.UNIFORM_BALL), 4, 8)
        sol = densities.solve_densities(config, self.pot, self.grid, LAM, source())
        terms = remainder.remainder_terms(sol, config, self.pot, self.grid, LAM, source())
        charges = solve_point_charges(config, sol.a, LAM, source())

        report = remainder.charge_comparison_residual(sol, terms, charges)

        self.assertLess(report["identity_residual"], 1e-7)
        self.assertGreater(report["charge_difference"], 0.0)

    def test_single_obstacle_has_no_coupling_term(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.3, 0.0]]))
        sol = densities.solve_densities(config, self.pot, self.grid, LAM, source())

        terms = remainder.remainder_terms(sol, config, self.pot, self.grid, LAM, source())

        np.testing.assert_array_equal(terms.B, np.zeros(1))

    def test_born_error_is_second_order(self):
        config = ObstacleConfig(points=np.array([[0.2, -0.1, 0.0]]))
        errors = []
        for amplitude in (0.1, 0.05):
            pot = make_potential(square_well(amplitude))
            sol = densities.solve_densities(config, pot, self.grid, LAM, source())
            nodes = config.points[0] + self.grid.nodes
            born = -float(np.dot(self.grid.weights, pot.V(self.grid.nodes) * source().h(nodes)))
            errors.append(abs(float(sol.Q[0]) - born))

        self.assertAlmostEqual(errors[0] / errors[1], 4.0, delta=0.3)


class TestMicroscopicBounds(unittest.TestCase):
    def setUp(self):
        self.config = sample_configuration(DensitySpec(family=DensityFamily.UNIFORM_BALL), 8, 13)

    def monopole_gap(self, pot_spec: PotentialSpec, grid: Grid3D) -> tuple[float, float]:
        pot = make_potential(pot_spec)
        sol = densities.solve_densities(self.config, pot, grid, LAM, source())
        micro = densities.microscopic_field(sol, self.config, pot, grid, source())
        gap = l2_distance(micro, densities.monopole_field(sol, self.config, source())).value
        return gap, l2_distance(micro, source_field(source())).value

    def test_zero_potential_has_zero_remainder(self):
        grid = quadrature_grid(1.0, 6, 3)
        pot = make_potential(square_well(0.0))
        sol = densities.solve_densities(self.config, pot, grid, LAM, source())

        terms = remainder.remainder_terms(sol, self.config, pot, grid, LAM, source())

        for values in (terms.A, terms.B, terms.D):
            np.testing.assert_array_equal(values, np.zeros(8))

    def test_monopole_gap_is_below_scattered_part(self):
        gap, scattered = self.monopole_gap(square_well(4.0), quadrature_grid(1.0, 6, 3))

        self.assertGreater(gap, 0.0)
        self.assertLessEqual(gap, scattered)

    def test_monopole_gap_shrinks_with_support_at_fixed_a(self):
        wide = PotentialSpec(shape=PotentialShape.SQUARE_WELL, amplitude=1.0, support_radius=1.0)
        target = radial_ode.square_well_scattering_length(1.0, 1.0)
        narrow = radial_ode.retune_amplitude(replace(wide, support_radius=0.5), target, 1.0, 100.0)

        wide_gap, _ = self.monopole_gap(wide, quadrature_grid(1.0, 6, 3))
        narrow_gap, _ = self.monopole_gap(narrow, quadrature_grid(0.5, 6, 3))

        self.assertLess(narrow_gap, wide_gap)

    def test_remainder_decays_with_n(self):
        lam = 4.0
        grid = quadrature_grid(1.0, 6, 3)
        pot = make_potential(square_well(4.0))
        n_values = [4, 8, 16, 32]
        norms = []
        for n in n_values:
            per_seed = []
            for seed in range(3):
                config = sample_configuration(DensitySpec(family=DensityFamily.UNIFORM_BALL), n, 40 + seed)
                sol = densities.solve_densities(config, pot, grid, lam, source(lam))
                per_seed.append(remainder.remainder_terms(sol, config, pot, grid, lam, source(lam)).norm)
            norms.append(per_seed)

        fit = fit_rate(n_values, norms)

        self.assertLess(fit.slope, -1.0)
        self.assertGreater(fit.slope, -3.5)


if __name__ == "__main__":
    unittest.main()
