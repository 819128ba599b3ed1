"""
二阶截断 Taylor 数（hyper-dual 的多变量形式）。

HyperJet 同时携带函数值、对 m 个种子变量的梯度和 Hessian，
一次前向求值即可得到 F^2 关于 (x, y) 的全部一、二阶偏导，
没有差分噪声。模块级函数 sqrt/exp/log/... 对普通浮点数退化为 math.*，
因此度量只需写一份代码。

批量模式：value 是形如 (B,) 的数组，grad 为 (B, m)，hess 为 (B, m, m)，
一次求值处理 B 个点；此时浮点参数退化为 numpy 的逐元素函数。
"""
import math
from typing import List, Sequence, Union

import numpy as np

Scalar = Union[float, np.ndarray, "HyperJet"]


def _col(v) -> np.ndarray:
    return np.asarray(v)[..., None]


def _mat(v) -> np.ndarray:
    return np.asarray(v)[..., None, None]


def _outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., :, None] * b[..., None, :]


def _batched(v) -> bool:
    return np.ndim(v) > 0


class HyperJet:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: Union[float, np.ndarray], grad: np.ndarray, hess: np.ndarray):
        self.value = value
        self.grad = grad
        self.hess = hess

    @classmethod
    def seed(cls, values) -> List["HyperJet"]:
        """
        为每个坐标创建独立变量。values 形如 (m,) 时得到标量 jet；
        形如 (B, m) 时得到 m 个批量 jet，第 b 行是第 b 个求值点。
        """
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 1:
            m = arr.shape[0]
            eye = np.eye(m)
            zero = np.zeros((m, m))
            return [cls(float(v), eye[i], zero) for i, v in enumerate(arr)]
        if arr.ndim != 2:
            raise ValueError(f"种子数组必须是一维或二维的，实际形状 {arr.shape}")
        batch, m = arr.shape
        eye = np.eye(m)
        zero = np.zeros((batch, m, m))
        return [cls(arr[:, i].copy(), np.broadcast_to(eye[i], (batch, m)), zero) for i in range(m)]

    def _chain(self, f0, f1, f2) -> "HyperJet":
        return HyperJet(f0, _col(f1) * self.grad,
                        _mat(f1) * self.hess + _mat(f2) * _outer(self.grad, self.grad))

    # --- 算术 ---
    def __add__(self, other):
        if isinstance(other, HyperJet):
            return HyperJet(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        if _batched(other) and not _batched(self.value):
            return HyperJet(self.value + other, np.broadcast_to(self.grad, other.shape + self.grad.shape),
                            np.broadcast_to(self.hess, other.shape + self.hess.shape))
        return HyperJet(self.value + other, self.grad, self.hess)

    __radd__ = __add__

    def __neg__(self):
        return HyperJet(-self.value, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if isinstance(other, HyperJet):
            return HyperJet(self.value - other.value, self.grad - other.grad, self.hess - other.hess)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, HyperJet):
            cross = _outer(self.grad, other.grad)
            return HyperJet(
                self.value * other.value,
                self.grad * _col(other.value) + other.grad * _col(self.value),
                self.hess * _mat(other.value) + other.hess * _mat(self.value) + cross + np.swapaxes(cross, -1, -2),
            )
        return HyperJet(self.value * other, self.grad * _col(other), self.hess * _mat(other))

    __rmul__ = __mul__

    def reciprocal(self) -> "HyperJet":
        v = self.value
        if np.any(np.asarray(v) == 0.0):
            raise ZeroDivisionError("division by zero")
        return self._chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))

    def __truediv__(self, other):
        if isinstance(other, HyperJet):
            return self * other.reciprocal()
        if np.any(np.asarray(other) == 0):
            raise ZeroDivisionError("division by zero")
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, other):
        if isinstance(other, HyperJet) or _batched(other):
            return exp(other * log(self))
        p = float(other)
        if p == 0.0:
            return HyperJet(np.ones_like(self.value) if _batched(self.value) else 1.0,
                            np.zeros_like(self.grad), np.zeros_like(self.hess))
        if p == 1.0:
            return self
        if p == 2.0:
            return self * self
        v = self.value
        return self._chain(_pow(v, p), p * _pow(v, p - 1.0), p * (p - 1.0) * _pow(v, p - 2.0))

    def __rpow__(self, other):
        if np.any(np.asarray(other) <= 0.0):
            raise ValueError("math domain error")
        return exp(self * log(other))

    def __repr__(self) -> str:
        return f"HyperJet({self.value!r}, grad={self.grad.tolist()})"


def value_of(a: Scalar):
    if isinstance(a, HyperJet):
        return a.value
    return a if _batched(a) else float(a)


def _pow(v, p: float):
    if not _batched(v):
        return math.pow(v, p)
    v = np.asarray(v)
    if not float(p).is_integer() and np.any(v < 0.0):
        raise ValueError("math domain error")
    if p < 0.0 and np.any(v == 0.0):
        raise ZeroDivisionError("0.0 cannot be raised to a negative power")
    return np.power(v, p)


# --- 初等函数 ---
def _elementary(name: str, v):
    """标量走 math（保留其定义域异常），批量走 numpy。"""
    if not _batched(v):
        return getattr(math, name)(v)
    with np.errstate(over="raise"):
        try:
            return getattr(np, name)(v)
        except FloatingPointError as e:
            raise OverflowError(str(e)) from None


def sqrt(a: Scalar) -> Scalar:
    v = value_of(a)
    if np.any(np.asarray(v) < 0.0):
        raise ValueError("math domain error")
    if not isinstance(a, HyperJet):
        return _elementary("sqrt", v)
    if np.any(np.asarray(v) == 0.0):
        raise ZeroDivisionError("sqrt is not differentiable at 0")
    s = _elementary("sqrt", v)
    return a._chain(s, 0.5 / s, -0.25 / (s * v))


def exp(a: Scalar) -> Scalar:
    if not isinstance(a, HyperJet):
        return _elementary("exp", a)
    e = _elementary("exp", a.value)
    return a._chain(e, e, e)


def log(a: Scalar) -> Scalar:
    v = value_of(a)
    if np.any(np.asarray(v) <= 0.0):
        raise ValueError("math domain error")
    if not isinstance(a, HyperJet):
        return _elementary("log", v)
    return a._chain(_elementary("log", v), 1.0 / v, -1.0 / (v * v))


def sin(a: Scalar) -> Scalar:
    if not isinstance(a, HyperJet):
        return _elementary("sin", a)
    s, c = _elementary("sin", a.value), _elementary("cos", a.value)
    return a._chain(s, c, -s)


def cos(a: Scalar) -> Scalar:
    if not isinstance(a, HyperJet):
        return _elementary("cos", a)
    s, c = _elementary("sin", a.value), _elementary("cos", a.value)
    return a._chain(c, -s, -c)


def tanh(a: Scalar) -> Scalar:
    if not isinstance(a, HyperJet):
        return _elementary("tanh", a)
    t = _elementary("tanh", a.value)
    d = 1.0 - t * t
    return a._chain(t, d, -2.0 * t * d)


def power(a: Scalar, b: Scalar) -> Scalar:
    if isinstance(a, HyperJet) or isinstance(b, HyperJet):
        return a ** b
    if _batched(b):
        return exp(b * log(a))
    if _batched(a):
        return _pow(a, float(b))
    # math.pow 对负底数的非整数次幂抛 ValueError，而不是返回复数
    return math.pow(a, b)
