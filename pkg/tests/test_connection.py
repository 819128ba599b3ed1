import math

import numpy as np
import pytest

from connection import (
    InadmissiblePerturbation, check_path_condition, chern_coefficients, christoffel_symbols,
    make_admissible_perturbation, perturbed_spray, spray, spray_batch, spray_coefficients, spray_jacobian,
)
from geodesic_engine import SampledCurve, integrate_geodesic
from metric_zoo import F_batch, F_value, TangentVector
from utils.exceptions import ConvexityError, InputError


def poincare_christoffel(x):
    """共形因子 f = 2/(1-|x|^2)：Γ^i_jk = σ_j δ_ik + σ_k δ_ij - σ_i δ_jk，σ = d log f。"""
    sigma = 2 * np.asarray(x) / (1 - np.dot(x, x))
    eye = np.eye(2)
    return (np.einsum("j,ik->ijk", sigma, eye) + np.einsum("k,ij->ijk", sigma, eye)
            - np.einsum("i,jk->ijk", sigma, eye))


class TestSpray:
    def test_flat_metrics_have_zero_spray(self, euclidean, randers_flat):
        for metric in (euclidean, randers_flat):
            G = spray_coefficients(metric, np.array([0.3, 0.1]), np.array([1.0, -2.0]))
            np.testing.assert_allclose(G, 0.0, atol=1e-12)

    def test_poincare_spray(self, poincare):
        """黎曼情形 2G = Γ(y, y)。"""
        x, y = np.array([0.2, -0.3]), np.array([0.5, 0.4])
        G = spray_coefficients(poincare, x, y)
        np.testing.assert_allclose(2 * G, np.einsum("ijk,j,k->i", poincare_christoffel(x), y, y), atol=1e-10)

    def test_spray_homogeneous_of_degree_two(self, randers_expr, poincare):
        for metric in (randers_expr, poincare):
            x, y = np.array([0.1, 0.2]), np.array([0.7, -0.4])
            np.testing.assert_allclose(spray_coefficients(metric, x, 3 * y), 9 * spray_coefficients(metric, x, y),
                                       rtol=1e-10, atol=1e-12)

    def test_berwald_connection_methods_agree(self, poincare):
        x, y = np.array([0.2, 0.1]), np.array([0.3, -0.6])
        central = spray_jacobian(poincare, x, y, "central")
        richardson = spray_jacobian(poincare, x, y, "richardson")
        np.testing.assert_allclose(central, richardson, rtol=1e-6, atol=1e-8)
        # Euler：P y = 2G
        np.testing.assert_allclose(central @ y, 2 * spray_coefficients(poincare, x, y), atol=1e-8)

    def test_unknown_method(self, poincare):
        with pytest.raises(InputError):
            spray(poincare, TangentVector.at([0, 0], [1, 0]), method="forward")

    def test_spray_checks_convexity(self, quartic):
        with pytest.raises(ConvexityError):
            spray(quartic, TangentVector.at([0, 0], [1, 0]))

    @pytest.mark.parametrize("name", ["poincare", "sphere", "randers_expr", "euclidean"])
    def test_batch_matches_single(self, request, name):
        metric = request.getfixturevalue(name)
        X = np.array([[0.1, -0.2], [0.3, 0.25], [-0.4, 0.0]])
        Y = np.array([[1.0, 0.5], [-0.2, 0.9], [0.3, -0.7]])
        batch = spray_batch(metric, X, Y)
        for x, y, G in zip(X, Y, batch):
            np.testing.assert_allclose(G, spray_coefficients(metric, x, y), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(F_batch(metric, X, Y), [F_value(metric, x, y) for x, y in zip(X, Y)],
                                   rtol=1e-14)


class TestChern:
    def test_contraction_is_twice_spray(self, randers_expr, sphere):
        for metric in (randers_expr, sphere):
            v = TangentVector.at([0.2, -0.1], [0.6, 0.3])
            chern = chern_coefficients(metric, v)
            G = spray_coefficients(metric, v.x, v.dir)
            np.testing.assert_allclose(chern.contract(v.dir, v.dir), 2 * G, atol=1e-7)

    def test_riemannian_reduction(self, poincare):
        x = np.array([0.25, 0.1])
        expected = poincare_christoffel(x)
        np.testing.assert_allclose(christoffel_symbols(poincare, x), expected, atol=1e-7)
        chern = chern_coefficients(poincare, TangentVector.at(x, [0.3, 0.9]))
        np.testing.assert_allclose(chern.gamma1, expected, atol=1e-7)
        assert chern.asymmetry < 1e-8

    def test_symmetric_in_lower_indices(self, randers_expr):
        chern = chern_coefficients(randers_expr, TangentVector.at([0, 0], [1, 1]))
        np.testing.assert_array_equal(chern.gamma1, chern.gamma1.transpose(0, 2, 1))


class TestPathCondition:
    def test_geodesic_satisfies_path_condition(self, sphere):
        sol = integrate_geodesic(sphere, TangentVector.at([0.1, 0.0], [0.0, 0.8]), 1.0, step=1e-2)
        assert check_path_condition(sphere, sol, stride=10).max_residual < 1e-6

    def test_circle_is_not_a_euclidean_geodesic(self, euclidean):
        """单位圆的加速度为 1，不满足路径条件。"""
        curve = SampledCurve.from_function(
            lambda s: [math.cos(s), math.sin(s)], 0.0, math.pi / 2, 33,
            derivative=lambda s: [-math.sin(s), math.cos(s)],
        )
        residual = check_path_condition(euclidean, curve)
        assert residual.max_residual == pytest.approx(1.0, abs=5e-3)
        assert residual.samples == 33


class TestPerturbations:
    def test_admissible_perturbation_keeps_spray(self, randers_expr):
        pert = make_admissible_perturbation(randers_expr, [0.3, -1.0], verify_flags=10, seed=2)
        assert pert.verification["n_yy"] < 1e-10
        assert pert.verification["ell_v"] < 1e-10
        v = TangentVector.at([0.1, 0.2], [0.8, 0.5])
        np.testing.assert_allclose(perturbed_spray(randers_expr, v, pert),
                                   spray_coefficients(randers_expr, v.x, v.dir), atol=1e-12)

    def test_admissible_tensor_is_homogeneous(self, poincare):
        pert = make_admissible_perturbation(poincare, [1.0, 0.0], verify_flags=5)
        x, y = np.array([0.1, 0.0]), np.array([0.3, 0.4])
        np.testing.assert_allclose(pert.tensor(x, 2.5 * y), pert.tensor(x, y), atol=1e-10)

    def test_inadmissible_perturbation_changes_spray(self, euclidean):
        pert = InadmissiblePerturbation(euclidean, np.array([0.0, 1.0]))
        v = TangentVector.at([0, 0], [1, 0])
        np.testing.assert_allclose(perturbed_spray(euclidean, v, pert), [0.0, 0.5], atol=1e-12)

    def test_seed_dimension(self, euclidean):
        with pytest.raises(InputError):
            make_admissible_perturbation(euclidean, [1.0, 0.0, 0.0])
