from typing import Any, Dict, Sequence

import hyperjet
from hyperjet import Scalar
from .base import MetricSpec


class EuclideanMetric(MetricSpec):
    kind = "euclidean"

    def norm(self, x: Sequence[Scalar], y: Sequence[Scalar]) -> Scalar:
        return hyperjet.sqrt(sum(c * c for c in y))

    def params(self) -> Dict[str, Any]:
        return {}

    @property
    def reversible(self) -> bool:
        return True

    @property
    def x_independent(self) -> bool:
        return True
