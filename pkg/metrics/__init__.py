import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

from constants import ZOO_NAMES
from utils.exceptions import InputError
from .base import Domain, MetricSpec
from .conformal import ConformalMetric
from .euclidean import EuclideanMetric
from .expression import ExpressionMetric
from .randers import RandersMetric

# --- 度量动物园 ---
ZOO: Dict[str, Dict[str, Any]] = {
    "euclidean": {"kind": "euclidean", "n": 2},
    "poincare": {
        "kind": "riemannian_conformal", "n": 2, "factor": "2/(1-x1^2-x2^2)",
        "domain": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
    },
    "sphere": {
        "kind": "riemannian_conformal", "n": 2, "factor": "2/(1+x1^2+x2^2)",
        "domain": {"type": "ball", "center": [0.0, 0.0], "radius": 1e4},
    },
    "randers_flat": {"kind": "randers", "n": 2, "alpha": [[1.0, 0.0], [0.0, 1.0]], "beta": [0.5, 0.0]},
    "randers_expr": {"kind": "expression", "n": 2, "F": "sqrt(y1^2+y2^2)+0.5*y1"},
    # 不完备：单位圆盘上的欧氏度量
    "euclidean_disk": {
        "kind": "euclidean", "n": 2,
        "domain": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
    },
    # 反例：在坐标轴附近不是强凸的四次度量
    "quartic": {"kind": "expression", "n": 2, "F": "(y1^4+y2^4-1.5*y1^2*y2^2)^0.25"},
}


def get_metric(spec: Dict[str, Any], name: Optional[str] = None) -> MetricSpec:
    if not isinstance(spec, dict):
        raise InputError(f"度量定义必须是 JSON 对象，实际为 {type(spec).__name__}")
    kind = spec.get("kind")
    n = spec.get("n")
    if not isinstance(n, int) or isinstance(n, bool):
        raise InputError(f"度量定义缺少整数字段 'n': {spec!r}")
    domain = Domain.from_dict(spec.get("domain"), n)
    name = name or spec.get("name")

    if kind == "euclidean":
        metric = EuclideanMetric(n, domain, name)
    elif kind == "riemannian_conformal":
        metric = ConformalMetric(n, domain, _require(spec, "factor"), name)
    elif kind == "randers":
        metric = RandersMetric(n, domain, _require(spec, "alpha"), _require(spec, "beta"), name)
    elif kind == "expression":
        metric = ExpressionMetric(n, domain, _require(spec, "F"), name)
    else:
        raise InputError(f"未知的度量类型 {kind!r}，支持 euclidean、riemannian_conformal、randers、expression")
    metric.validate()
    return metric


def _require(spec: Dict[str, Any], key: str) -> Any:
    if key not in spec:
        raise InputError(f"{spec.get('kind')} 度量缺少字段 {key!r}")
    return spec[key]


def load_metric(source: str) -> MetricSpec:
    """从动物园名称、内联 JSON 或 JSON 文件路径加载度量。"""
    source = source.strip()
    if source in ZOO:
        return get_metric(ZOO[source], name=source)
    if source.startswith("{"):
        text = source
    else:
        path = Path(source)
        if not path.is_file():
            raise InputError(f"度量文件不存在: {source}")
        text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"度量 JSON 无效: {e}") from e
    return get_metric(data)


def zoo_metrics(names: Iterable[str] = ZOO_NAMES) -> List[MetricSpec]:
    return [get_metric(ZOO[name], name=name) for name in names]


def load_metric_set(source: str) -> List[MetricSpec]:
    """'zoo'、逗号分隔的动物园名称，或包含度量定义列表的 JSON 文件。"""
    source = source.strip()
    if not source:
        return []
    if source == "zoo":
        return zoo_metrics()
    if all(part.strip() in ZOO for part in source.split(",")):
        return zoo_metrics(part.strip() for part in source.split(","))
    path = Path(source)
    if not path.is_file():
        raise InputError(f"未知的度量集合: {source}")
    try:
        entries = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"度量集合 JSON 无效: {e}") from e
    if not isinstance(entries, list):
        raise InputError("度量集合文件必须包含 JSON 数组")
    return [get_metric(entry) for entry in entries]


__all__ = [
    "Domain", "MetricSpec", "EuclideanMetric", "ConformalMetric", "RandersMetric",
    "ExpressionMetric", "ZOO", "get_metric", "load_metric", "load_metric_set", "zoo_metrics",
]
