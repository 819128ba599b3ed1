import json
import math

import numpy as np
import pytest

from metric_zoo import (
    INVARIANTS, TangentVector, check_metric_invariants, derivative_engine, eval_F, fundamental_tensor,
    indicatrix_point, invariant_residual, tensor_at,
)
from metrics import ZOO, get_metric, load_metric, load_metric_set
from utils.exceptions import (
    ConvexityError, DomainError, HomogeneityError, InputError, ZeroSectionError,
)


class TestEvalF:
    def test_euclidean(self, euclidean):
        assert eval_F(euclidean, TangentVector.at([0, 0], [3, 4])) == pytest.approx(5.0, abs=1e-15)

    def test_zero_vector(self, euclidean, randers_flat):
        assert eval_F(euclidean, TangentVector.at([1, 2], [0, 0])) == 0.0
        assert eval_F(randers_flat, TangentVector.at([0, 0], [0, 0])) == 0.0

    def test_randers_is_not_reversible(self, randers_flat, randers_expr):
        """β = (0.5, 0)：F(e1) = 1.5，F(-e1) = 0.5。"""
        for metric in (randers_flat, randers_expr):
            assert eval_F(metric, TangentVector.at([0, 0], [1, 0])) == pytest.approx(1.5)
            assert eval_F(metric, TangentVector.at([0, 0], [-1, 0])) == pytest.approx(0.5)
        assert not randers_flat.reversible

    def test_conformal_factors(self, poincare, sphere):
        assert eval_F(poincare, TangentVector.at([0.5, 0], [1, 0])) == pytest.approx(2 / 0.75)
        assert eval_F(sphere, TangentVector.at([1, 0], [0, 1])) == pytest.approx(1.0)

    def test_outside_domain(self, poincare):
        with pytest.raises(DomainError):
            eval_F(poincare, TangentVector.at([1.0, 0.0], [1, 0]))

    def test_bad_input(self, euclidean):
        with pytest.raises(InputError):
            eval_F(euclidean, TangentVector.at([0, 0, 0], [1, 0, 0]))
        with pytest.raises(InputError):
            TangentVector.at([0, float("nan")], [1, 0])


class TestFundamentalTensor:
    def test_euclidean_identity(self, euclidean):
        np.testing.assert_allclose(tensor_at(euclidean, [0.3, -0.2], [1.0, 2.0]).g, np.eye(2), atol=1e-14)

    def test_conformal(self, poincare, sphere):
        np.testing.assert_allclose(tensor_at(poincare, [0, 0], [0.3, 0.4]).g, 4 * np.eye(2), atol=1e-12)
        np.testing.assert_allclose(tensor_at(sphere, [0, 0], [1, 0]).g, 4 * np.eye(2), atol=1e-12)

    def test_randers_reproduces_norm(self, randers_flat):
        y = np.array([0.3, -1.2])
        tensor = tensor_at(randers_flat, [0, 0], y)
        F = eval_F(randers_flat, TangentVector.at([0, 0], y))
        assert tensor.inner(y, y) == pytest.approx(F * F)
        np.testing.assert_allclose(tensor.g @ tensor.g_inv, np.eye(2), atol=1e-12)

    def test_zero_section(self, euclidean):
        with pytest.raises(ZeroSectionError):
            tensor_at(euclidean, [0, 0], [1e-12, 0])

    def test_quartic_not_strongly_convex(self, quartic):
        """(y1^4 + y2^4 - 1.5 y1^2 y2^2)^(1/4) 在坐标轴附近 g_22 < 0。"""
        with pytest.raises(ConvexityError):
            tensor_at(quartic, [0, 0], [1, 0])

    def test_indicatrix_point(self, randers_flat):
        v = indicatrix_point(randers_flat, [0, 0], [-1, 1], 0.7)
        assert eval_F(randers_flat, v) == pytest.approx(0.7)
        with pytest.raises(InputError):
            indicatrix_point(randers_flat, [0, 0], [0, 0], 1.0)


class TestDerivativeEngine:
    @pytest.mark.parametrize("directions", [
        [("y", 0), ("y", 0)], [("x", 0), ("y", 1)], [("x", 1), ("x", 1)], [("y", 1), ("x", 0)],
    ])
    def test_jet_matches_central(self, poincare, directions):
        v = TangentVector.at([0.2, -0.1], [0.4, 0.7])
        fast = derivative_engine(poincare, v, 2, directions)
        oracle = derivative_engine(poincare, v, 2, directions, method="central")
        assert fast == pytest.approx(oracle, rel=1e-6, abs=1e-6)

    def test_first_order(self, randers_expr):
        v = TangentVector.at([0, 0], [3, 4])
        # d(F^2)/dy1 = 2F dF/dy1 = 2 * 6.5 * 1.1
        assert derivative_engine(randers_expr, v, 1, [("y", 0)]) == pytest.approx(14.3)

    def test_bad_direction(self, euclidean):
        v = TangentVector.at([0, 0], [1, 0])
        with pytest.raises(InputError):
            derivative_engine(euclidean, v, 2, [("z", 0), ("y", 0)])
        with pytest.raises(InputError):
            derivative_engine(euclidean, v, 2, [("y", 0)])


class TestInvariants:
    @pytest.mark.parametrize("name", ["euclidean", "poincare", "sphere", "randers_flat", "randers_expr"])
    def test_zoo_invariants(self, name):
        metric = get_metric(ZOO[name], name=name)
        report = check_metric_invariants(metric, samples=20, seed=3, convexity_pairs=20)
        assert set(report.residuals) == set(INVARIANTS)
        for key, residual in report.residuals.items():
            assert residual < 1e-6, key

    def test_witness_replays(self, randers_expr):
        report = check_metric_invariants(randers_expr, samples=10, seed=1, convexity_pairs=10)
        for name, witness in report.witnesses.items():
            assert invariant_residual(randers_expr, name, witness) == pytest.approx(report.residuals[name], abs=1e-15)

    def test_quartic_rejected(self, quartic):
        with pytest.raises(ConvexityError):
            check_metric_invariants(quartic, samples=100, seed=0)


class TestLoading:
    def test_zoo_names(self):
        assert load_metric("sphere").metric_id == "sphere"

    def test_inline_json_and_file(self, tmp_path):
        spec = {"kind": "riemannian_conformal", "n": 2, "factor": "1 + x1^2", "name": "bump"}
        assert load_metric(json.dumps(spec)).metric_id == "bump"
        path = tmp_path / "metric.json"
        path.write_text(json.dumps(spec), encoding="utf-8")
        metric = load_metric(str(path))
        assert eval_F(metric, TangentVector.at([1, 0], [0, 1])) == pytest.approx(2.0)
        assert metric.to_dict() == {**spec}

    def test_metric_set(self, tmp_path):
        assert [m.metric_id for m in load_metric_set("euclidean, sphere")] == ["euclidean", "sphere"]
        assert load_metric_set("  ") == []
        path = tmp_path / "set.json"
        path.write_text(json.dumps([{"kind": "euclidean", "n": 3}]), encoding="utf-8")
        assert load_metric_set(str(path))[0].n == 3

    @pytest.mark.parametrize("source", [
        "{not json", "no-such-metric", '{"kind": "hyperbolic", "n": 2}', '{"kind": "euclidean"}',
        '{"kind": "euclidean", "n": 1}', '{"kind": "randers", "n": 2, "alpha": [[1, 0], [0, 1]]}',
    ])
    def test_invalid(self, source):
        with pytest.raises(InputError):
            load_metric(source)

    def test_randers_beta_too_large(self):
        with pytest.raises(ConvexityError):
            get_metric({"kind": "randers", "n": 2, "alpha": [[1, 0], [0, 1]], "beta": [1.0, 0.0]})
        with pytest.raises(ConvexityError):
            get_metric({"kind": "randers", "n": 2, "alpha": [[1, 0], [0, -1]], "beta": [0.0, 0.0]})

    def test_expression_must_be_homogeneous(self):
        with pytest.raises(HomogeneityError):
            get_metric({"kind": "expression", "n": 2, "F": "y1^2 + y2^2"})

    def test_randers_field_coefficients(self):
        metric = get_metric({"kind": "randers", "n": 2, "alpha": [[1, 0], [0, 1]], "beta": ["0.3*x1", 0]})
        assert eval_F(metric, TangentVector.at([1, 0], [1, 0])) == pytest.approx(1.3)
        with pytest.raises(ConvexityError):
            eval_F(metric, TangentVector.at([4, 0], [1, 0]))
