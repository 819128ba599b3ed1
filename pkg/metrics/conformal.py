from typing import Any, Dict, Sequence

import numpy as np

import hyperjet
from hyperjet import Scalar
from metric_expr import MetricExpression, compile_expression
from utils.exceptions import DomainError
from .base import Domain, MetricSpec


class ConformalMetric(MetricSpec):
    """黎曼共形度量 F(x, y) = f(x) |y|，f 由只含 x1..xn 的表达式给出。"""
    kind = "riemannian_conformal"

    def __init__(self, n: int, domain: Domain, factor: str, name: str = None):
        super().__init__(n, domain, name)
        self.factor_source = factor
        self.factor: MetricExpression = compile_expression(factor, n, with_fiber=False)

    def norm(self, x: Sequence[Scalar], y: Sequence[Scalar]) -> Scalar:
        f = self.factor.evaluate(x)
        if np.any(np.asarray(hyperjet.value_of(f)) <= 0.0):
            raise DomainError(f"共形因子在 x = {np.asarray([hyperjet.value_of(c) for c in x]).tolist()} 处非正")
        return f * hyperjet.sqrt(sum(c * c for c in y))

    def params(self) -> Dict[str, Any]:
        return {"factor": self.factor_source}

    @property
    def reversible(self) -> bool:
        return True
