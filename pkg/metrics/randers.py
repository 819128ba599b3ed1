import math
from typing import Any, Dict, List, Sequence, Union

import numpy as np

import hyperjet
from constants import RANDERS_VALIDATION_SAMPLES
from hyperjet import Scalar
from metric_expr import compile_expression
from utils.exceptions import ConvexityError, InputError
from utils.seeding import rng
from .base import Domain, MetricSpec

Entry = Union[float, str]


class RandersMetric(MetricSpec):
    """
    Randers 度量 F(x, y) = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i。
    alpha 和 beta 的每个分量可以是常数，也可以是关于 x 的表达式字符串。
    要求 ||beta||_alpha < 1，否则 F 既不正也不强凸。
    """
    kind = "randers"

    def __init__(self, n: int, domain: Domain, alpha: Sequence[Sequence[Entry]],
                 beta: Sequence[Entry], name: str = None):
        super().__init__(n, domain, name)
        if len(alpha) != n or any(len(row) != n for row in alpha) or len(beta) != n:
            raise InputError(f"alpha 必须是 {n}x{n} 矩阵，beta 必须是长度为 {n} 的向量")
        self.alpha_source = [list(row) for row in alpha]
        self.beta_source = list(beta)
        self._alpha = [[self._field(v) for v in row] for row in alpha]
        self._beta = [self._field(v) for v in beta]
        self.is_constant = not any(isinstance(v, str) for v in self.beta_source) and \
            not any(isinstance(v, str) for row in self.alpha_source for v in row)
        self._check_admissible_samples()

    def _field(self, value: Entry):
        if isinstance(value, str):
            return compile_expression(value, self.n, with_fiber=False)
        try:
            return float(value)
        except (TypeError, ValueError):
            raise InputError(f"无效的 Randers 分量: {value!r}") from None

    def _coefficients(self, x: Sequence[Scalar]):
        a = [[v if isinstance(v, float) else v.evaluate(x) for v in row] for row in self._alpha]
        b = [v if isinstance(v, float) else v.evaluate(x) for v in self._beta]
        return a, b

    def beta_alpha_norm(self, x: Sequence[float]):
        """
        ||beta||_alpha = sqrt(b^T a^{-1} b)，同时检查 alpha 对称正定。
        x 的分量为数组时逐点计算，返回同形状的数组。
        """
        a, b = self._coefficients(list(x))
        n = self.n
        values = np.broadcast_arrays(*[np.asarray(hyperjet.value_of(v), dtype=float) for row in a for v in row],
                                     *[np.asarray(hyperjet.value_of(v), dtype=float) for v in b])
        a = np.moveaxis(np.stack(values[:n * n]).reshape((n, n) + values[0].shape), (0, 1), (-2, -1))
        b = np.moveaxis(np.stack(values[n * n:]), 0, -1)
        if not np.allclose(a, np.swapaxes(a, -1, -2), atol=1e-12):
            raise ConvexityError("Randers alpha 不是对称矩阵")
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            raise ConvexityError("Randers alpha 不是正定矩阵") from None
        w = np.linalg.solve(chol, b[..., None])[..., 0]
        norm = np.sqrt(np.sum(w * w, axis=-1))
        return float(norm) if norm.ndim == 0 else norm

    def _check_admissible_samples(self):
        if self.is_constant:
            points = [[0.0] * self.n]
        else:
            gen = rng(0, "randers-admissibility", self.n)
            radius = self.domain.sampling_radius()
            center = np.zeros(self.n) if self.domain.kind == "all" else np.array(self.domain.center)
            points = [center + radius * gen.uniform(-1.0, 1.0, self.n) / math.sqrt(self.n)
                      for _ in range(RANDERS_VALIDATION_SAMPLES)]
        for x in points:
            norm = self.beta_alpha_norm(list(x))
            if not norm < 1.0:
                raise ConvexityError(f"Randers 度量不可容许: ||beta||_alpha = {norm:.6g} >= 1")

    def norm(self, x: Sequence[Scalar], y: Sequence[Scalar]) -> Scalar:
        if not self.is_constant:
            norm = self.beta_alpha_norm([hyperjet.value_of(c) for c in x])
            if not np.all(np.asarray(norm) < 1.0):
                raise ConvexityError(f"Randers 度量在该点不可容许: ||beta||_alpha = {float(np.max(norm)):.6g}")
        a, b = self._coefficients(x)
        n = self.n
        quad = sum(a[i][j] * y[i] * y[j] for i in range(n) for j in range(n))
        return hyperjet.sqrt(quad) + sum(b[i] * y[i] for i in range(n))

    def params(self) -> Dict[str, Any]:
        return {"alpha": self.alpha_source, "beta": self.beta_source}

    @property
    def reversible(self) -> bool:
        return self.is_constant and not any(self.beta_source)

    @property
    def x_independent(self) -> bool:
        return self.is_constant
