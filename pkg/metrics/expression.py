from typing import Any, Dict, Sequence

from hyperjet import Scalar
from metric_expr import MetricExpression, parse_metric
from .base import Domain, MetricSpec


class ExpressionMetric(MetricSpec):
    """由用户表达式定义的度量，加载时已验证齐次性。"""
    kind = "expression"

    def __init__(self, n: int, domain: Domain, source: str, name: str = None):
        super().__init__(n, domain, name)
        self.expression: MetricExpression = parse_metric(source, n)

    def norm(self, x: Sequence[Scalar], y: Sequence[Scalar]) -> Scalar:
        return self.expression.evaluate(x, y)

    def params(self) -> Dict[str, Any]:
        return {"F": self.expression.source}
