import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import hyperjet
from hyperjet import HyperJet


class TestHyperJet:
    def test_product_rule(self):
        """f(a, b) = a*b + sin(a)：梯度和 Hessian 与解析结果一致。"""
        a, b = HyperJet.seed([0.7, -1.3])
        f = a * b + hyperjet.sin(a)
        np.testing.assert_allclose(f.value, 0.7 * -1.3 + math.sin(0.7))
        np.testing.assert_allclose(f.grad, [-1.3 + math.cos(0.7), 0.7])
        np.testing.assert_allclose(f.hess, [[-math.sin(0.7), 1.0], [1.0, 0.0]])

    def test_quotient_and_sqrt(self):
        """f(a, b) = sqrt(a^2 + b^2) 的 Hessian 是 (I - u u^T) / r。"""
        a, b = HyperJet.seed([3.0, 4.0])
        f = hyperjet.sqrt(a * a + b * b)
        u = np.array([0.6, 0.8])
        np.testing.assert_allclose(f.value, 5.0)
        np.testing.assert_allclose(f.grad, u)
        np.testing.assert_allclose(f.hess, (np.eye(2) - np.outer(u, u)) / 5.0, atol=1e-14)

        g = 1.0 / a
        np.testing.assert_allclose(g.grad, [-1.0 / 9.0, 0.0])
        np.testing.assert_allclose(g.hess[0, 0], 2.0 / 27.0)

    def test_float_fallback(self):
        assert hyperjet.sqrt(4.0) == 2.0
        assert hyperjet.power(2.0, 3.0) == 8.0
        assert hyperjet.value_of(1.5) == 1.5

    def test_domain_errors(self):
        (a,) = HyperJet.seed([0.0])
        with pytest.raises(ZeroDivisionError):
            hyperjet.sqrt(a)
        with pytest.raises(ZeroDivisionError):
            a.reciprocal()
        (b,) = HyperJet.seed([-1.0])
        with pytest.raises(ValueError):
            hyperjet.sqrt(b)
        with pytest.raises(ValueError):
            hyperjet.log(b)
        with pytest.raises(ValueError):
            hyperjet.power(-1.0, 0.5)

    def test_jet_exponent(self):
        """a^b 对两个参数都求导。"""
        a, b = HyperJet.seed([2.0, 3.0])
        f = a ** b
        np.testing.assert_allclose(f.value, 8.0)
        np.testing.assert_allclose(f.grad, [3.0 * 4.0, 8.0 * math.log(2.0)])

    @given(st.floats(min_value=0.1, max_value=10.0, allow_nan=False, allow_infinity=False),
           st.floats(min_value=-3.0, max_value=3.0, allow_nan=False, allow_infinity=False))
    @settings(max_examples=50)
    def test_power_matches_exp_log(self, v, p):
        """a^p 与 exp(p log a) 的二阶 jet 一致。"""
        (a,) = HyperJet.seed([v])
        direct = a ** p
        via_log = hyperjet.exp(p * hyperjet.log(a))
        np.testing.assert_allclose(direct.value, via_log.value, rtol=1e-12)
        np.testing.assert_allclose(direct.grad, via_log.grad, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(direct.hess, via_log.hess, rtol=1e-9, atol=1e-12)

    @given(st.floats(min_value=-2.0, max_value=2.0, allow_nan=False, allow_infinity=False))
    @settings(max_examples=50)
    def test_tanh_second_derivative(self, v):
        (a,) = HyperJet.seed([v])
        t = math.tanh(v)
        f = hyperjet.tanh(a)
        np.testing.assert_allclose(f.grad, [1 - t * t], atol=1e-14)
        np.testing.assert_allclose(f.hess, [[-2 * t * (1 - t * t)]], atol=1e-14)

    def test_batch_matches_stacked_scalars(self):
        """批量 jet 的第 b 行与在第 b 个点上的标量 jet 相同。"""
        points = np.array([[0.7, -1.3], [2.0, 0.5], [1.1, 3.0]])

        def f(a, b):
            return hyperjet.sqrt(a * a + b * b) * hyperjet.exp(0.3 * b) + hyperjet.log(a) / (1.0 + b * b) - 2.0

        batch = f(*HyperJet.seed(points))
        assert batch.value.shape == (3,)
        assert batch.grad.shape == (3, 2)
        assert batch.hess.shape == (3, 2, 2)
        for row, point in enumerate(points):
            single = f(*HyperJet.seed(point))
            np.testing.assert_allclose(batch.value[row], single.value, rtol=1e-14)
            np.testing.assert_allclose(batch.grad[row], single.grad, rtol=1e-13)
            np.testing.assert_allclose(batch.hess[row], single.hess, rtol=1e-12, atol=1e-14)

    def test_batch_domain_errors(self):
        a, _ = HyperJet.seed([[1.0, 0.0], [-1.0, 0.0]])
        with pytest.raises(ValueError):
            hyperjet.sqrt(a)
        with pytest.raises(ValueError):
            hyperjet.log(a)
        b, _ = HyperJet.seed([[0.0, 1.0], [2.0, 1.0]])
        with pytest.raises(ZeroDivisionError):
            b.reciprocal()
