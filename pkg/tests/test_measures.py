import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import E2, rel
from pqdual.errors import MeasureError, UnsupportedDimension
from pqdual.geometry import Ball, Ellipsoid, HPolytope, LinearImage, unit, wulff_shape
from pqdual.measures import (
    DiscreteSphericalMeasure,
    MeasureParams,
    curvature_atoms,
    curvature_boundary_oracle,
    curvature_functional,
    curvature_measure_polytope,
    special_case_suite,
)
from pqdual.quadrature import auto_grid
from pqdual.quermass import dual_quermass

B2 = Ball(1.0, 2)
B3 = Ball(1.0, 3)


def random_polytope(rng, n, m):
    while True:
        V = unit(rng.standard_normal((m, n)))
        try:
            return wulff_shape(V, rng.uniform(0.6, 1.6, m))
        except Exception:
            continue


def indicator(v):
    return lambda N: (N @ v > 1 - 1e-12).astype(float)


def ones(N):
    return np.ones(len(N))


class TestSquareAtoms:
    @pytest.mark.parametrize("p", [0.0, 1.0])
    def test_unit_atoms(self, square, p):
        atoms = curvature_atoms(square, MeasureParams(p, 2.0, 0, B2))
        np.testing.assert_allclose(atoms, 1.0, rtol=1e-14)

    @pytest.mark.parametrize("lam", [0.5, 2.0, 3.7])
    def test_dilated_square(self, lam):
        P = HPolytope(E2, [lam] * 4)
        atoms = curvature_atoms(P, MeasureParams(1.0, 2.0, 0, B2))
        np.testing.assert_allclose(atoms, lam, rtol=1e-13)

    def test_measure_object(self, square):
        mu = curvature_measure_polytope(square, MeasureParams(0.0, 2.0, 0, B2), estimate_error=True)
        assert len(mu) == 4
        assert mu.total == pytest.approx(4.0, rel=1e-14)
        assert mu.error_estimate < 1e-12

    def test_cube_atoms(self, cube):
        atoms = curvature_atoms(cube, MeasureParams(0.0, 3.0, 0, B3))
        np.testing.assert_allclose(atoms, 4 / 3, rtol=1e-12)

    def test_redundant_facet_gets_no_atom(self):
        P = HPolytope(E2 + [[math.sqrt(0.5), math.sqrt(0.5)]], [1, 1, 1, 1, 2])
        atoms = curvature_atoms(P, MeasureParams(0.0, 2.0, 0, B2))
        assert atoms[4] == 0.0
        mu = curvature_measure_polytope(P, MeasureParams(0.0, 2.0, 0, B2))
        assert len(mu) == 4


class TestFunctional:
    def test_constant(self, square):
        val = curvature_functional(square, MeasureParams(0.0, 2.0, 0, B2), ones)
        assert val == pytest.approx(4.0, rel=1e-14)

    def test_indicator(self, square):
        val = curvature_functional(square, MeasureParams(0.0, 2.0, 0, B2), indicator(np.array([1.0, 0.0])))
        assert val == pytest.approx(1.0, rel=1e-14)

    def test_smooth_body(self, ellipse):
        # for p = 0 and g = 1 the functional is the dual quermassintegral
        prm = MeasureParams(0.0, 1.5, 0, B2)
        val = curvature_functional(ellipse, prm, ones)
        assert val == pytest.approx(dual_quermass(ellipse, B2, 1.5).value, rel=1e-12)

    def test_smooth_body_with_support_weight(self, ellipse):
        # (1/n) int h_E(a(u)) rho_E^{n-1} h_E^{-1} ... with p = 1, q = n: volume-type identity
        prm = MeasureParams(1.0, 2.0, 0, B2)
        val = curvature_functional(ellipse, prm, lambda N: ellipse.support(N))
        assert val == pytest.approx(2 * math.pi, rel=1e-10)

    def test_atoms_sum_to_functional(self):
        P = random_polytope(np.random.default_rng(4), 2, 7)
        prm = MeasureParams(0.7, 1.3, 1, Ellipsoid([1.0, 1.5]))
        g = auto_grid(2, [P])
        atoms = curvature_atoms(P, prm, g)
        assert math.fsum(atoms) == pytest.approx(curvature_functional(P, prm, ones, g), rel=1e-13)
        for i in P.active_indices:
            val = curvature_functional(P, prm, indicator(P.normals[i]), g)
            assert val == pytest.approx(atoms[i], rel=1e-13)


class TestBoundaryOracle:
    @pytest.mark.parametrize("p", [0.0, 1.0])
    def test_square(self, square, p):
        val = curvature_boundary_oracle(square, MeasureParams(p, 2.0, 0, B2), ones)
        assert val == pytest.approx(4.0, rel=1e-14)

    def test_zero_test_function(self, square):
        prm = MeasureParams(0.3, 1.7, 1, Ellipsoid([1.0, 2.0]))
        assert curvature_boundary_oracle(square, prm, lambda N: np.zeros(len(N))) == 0.0

    def test_cube(self, cube):
        val = curvature_boundary_oracle(cube, MeasureParams(0.0, 3.0, 0, B3), ones)
        assert val == pytest.approx(8.0, rel=1e-13)

    def test_high_dimension(self):
        P = HPolytope(np.vstack([np.eye(4), -np.eye(4)]), np.ones(8))
        with pytest.raises(UnsupportedDimension):
            curvature_boundary_oracle(P, MeasureParams(0.0, 2.0, 0, Ball(1.0, 4)), ones)

    @pytest.mark.parametrize("seed", range(6))
    def test_agrees_with_spherical_route_2d(self, seed):
        rng = np.random.default_rng(seed)
        P = random_polytope(rng, 2, int(rng.integers(4, 10)))
        Q = LinearImage(np.eye(2) + 0.3 * rng.standard_normal((2, 2)), Ball(1.0, 2))
        p, q = rng.uniform(-2, 4, 2)
        prm = MeasureParams(p, q, int(rng.integers(0, 2)), Q)
        g = lambda N: 1.0 + N[:, 0] ** 2
        a = curvature_functional(P, prm, g)
        b = curvature_boundary_oracle(P, prm, g)
        assert rel(a, b) <= 1e-8

    @pytest.mark.parametrize("seed", range(3))
    def test_agrees_with_spherical_route_3d(self, seed):
        rng = np.random.default_rng(100 + seed)
        P = random_polytope(rng, 3, 9)
        prm = MeasureParams(rng.uniform(-2, 4), rng.uniform(-2, 4), int(rng.integers(0, 2)),
                            Ellipsoid([1.0, 1.3, 0.8]))
        a = curvature_functional(P, prm, ones)
        b = curvature_boundary_oracle(P, prm, ones)
        assert rel(a, b) <= 1e-3


class TestSpecialCases:
    def test_square_self_gauge(self, square):
        for q in (-1.0, 0.5, 3.0):
            atoms = curvature_atoms(square, MeasureParams(1.7, q, 0, square))
            np.testing.assert_allclose(atoms, 1.0, rtol=1e-13)

    def test_suite_2d(self):
        P = random_polytope(np.random.default_rng(8), 2, 8)
        assert special_case_suite(P)["max_discrepancy"] <= 1e-12

    def test_suite_3d(self, cube):
        P = HPolytope(cube.normals, [1.0, 0.7, 1.2, 0.9, 1.1, 0.8])
        assert special_case_suite(P)["max_discrepancy"] <= 1e-9


class TestHomogeneity:
    P = HPolytope(unit([[1, 0.2], [0.1, 1], [-1, 0.3], [-0.2, -1], [0.7, -0.7]]),
                  [1.0, 0.8, 1.2, 0.9, 1.1])

    @given(st.floats(0.2, 5.0), st.floats(-2.0, 4.0), st.floats(-2.0, 4.0), st.integers(0, 1))
    def test_in_M(self, lam, p, q, j):
        prm = MeasureParams(p, q, j, Ellipsoid([1.0, 1.7]))
        a = curvature_atoms(self.P, prm)
        b = curvature_atoms(self.P.scaled(lam), prm)
        np.testing.assert_allclose(b, lam ** (q - p) * a, rtol=1e-10)

    @given(st.floats(0.2, 5.0), st.floats(-2.0, 4.0), st.floats(-2.0, 4.0), st.integers(0, 1))
    def test_in_Q(self, lam, p, q, j):
        a = curvature_atoms(self.P, MeasureParams(p, q, j, Ellipsoid([1.0, 1.7])))
        b = curvature_atoms(self.P, MeasureParams(p, q, j, Ellipsoid([lam, 1.7 * lam])))
        np.testing.assert_allclose(b, lam ** (2 - q - j) * a, rtol=1e-10)

    @given(st.floats(-2.0, 4.0), st.floats(-2.0, 4.0))
    def test_positive(self, p, q):
        atoms = curvature_atoms(self.P, MeasureParams(p, q, 0, B2))
        assert np.all(atoms > 0)

    def test_total_mass_is_dual_quermass(self):
        Q = Ellipsoid([1.0, 1.7])
        for q, j in ((1.5, 0), (-0.5, 1), (3.0, 0)):
            atoms = curvature_atoms(self.P, MeasureParams(0.0, q, j, Q))
            assert math.fsum(atoms) == pytest.approx(dual_quermass(self.P, Q, q, j).value, rel=1e-9)

    def test_total_mass_3d(self, cube):
        P = HPolytope(cube.normals, [1.0, 0.7, 1.2, 0.9, 1.1, 0.8])
        atoms = curvature_atoms(P, MeasureParams(0.0, 1.5, 1, B3))
        assert math.fsum(atoms) == pytest.approx(dual_quermass(P, B3, 1.5, 1).value, rel=1e-4)


class TestMeasureParams:
    def test_j_equal_to_dimension(self):
        with pytest.raises(ValueError):
            MeasureParams(1.0, 1.0, 2, B2)


class TestDiscreteMeasure:
    def test_round_trip(self):
        mu = DiscreteSphericalMeasure([[2, 0], [0, 1], [-1, 0], [0, -3]], [1, 2, 1, 2])
        back = DiscreteSphericalMeasure.from_dict(mu.to_dict())
        np.testing.assert_array_equal(back.directions, mu.directions)
        np.testing.assert_array_equal(back.masses, mu.masses)
        assert back.dim == 2 and back.total == 6.0

    def test_directions_normalized(self):
        mu = DiscreteSphericalMeasure([[3, 4]], [1.0])
        np.testing.assert_allclose(mu.directions, [[0.6, 0.8]])

    def test_scaled(self):
        mu = DiscreteSphericalMeasure(E2, [1, 2, 1, 2]).scaled(3.0)
        np.testing.assert_array_equal(mu.masses, [3, 6, 3, 6])

    def test_bad_lengths(self):
        with pytest.raises(MeasureError):
            DiscreteSphericalMeasure(E2, [1, 2, 3])
