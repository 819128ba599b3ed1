import abc
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from hyperjet import Scalar
from utils.exceptions import InputError


@dataclass(frozen=True)
class Domain:
    """单一坐标卡上的定义域：整个 R^n，或一个开球。"""
    kind: str = "all"
    center: Optional[Tuple[float, ...]] = None
    radius: float = math.inf

    @classmethod
    def from_dict(cls, data: Any, n: int) -> "Domain":
        if data is None or data == "all":
            return cls()
        if not isinstance(data, dict) or data.get("type") != "ball":
            raise InputError(f"无效的定义域描述: {data!r}")
        center = tuple(float(c) for c in data.get("center", [0.0] * n))
        radius = float(data.get("radius", 1.0))
        if len(center) != n or not radius > 0:
            raise InputError(f"无效的球形定义域: center={center}, radius={radius}")
        return cls("ball", center, radius)

    def contains(self, x: Sequence[float]) -> bool:
        if not all(math.isfinite(c) for c in x):
            return False
        if self.kind == "all":
            return True
        return math.dist(x, self.center) < self.radius

    def contains_batch(self, X: np.ndarray) -> np.ndarray:
        """contains 的批量版本，X 形如 (B, n)。"""
        finite = np.all(np.isfinite(X), axis=-1)
        if self.kind == "all":
            return finite
        with np.errstate(invalid="ignore"):
            return finite & (np.linalg.norm(X - np.asarray(self.center), axis=-1) < self.radius)

    def sampling_radius(self) -> float:
        """采样基点时使用的半径（定义域内留出余量）。"""
        return 1.0 if self.kind == "all" else min(1.0, 0.5 * self.radius)

    def to_dict(self) -> Any:
        if self.kind == "all":
            return "all"
        return {"type": "ball", "center": list(self.center), "radius": self.radius}


class MetricSpec(abc.ABC):
    """Finsler 度量 F(x, y) 的声明式定义。"""
    kind: str = ""

    def __init__(self, n: int, domain: Domain, name: Optional[str] = None):
        self.n = n
        self.domain = domain
        self.name = name

    @abc.abstractmethod
    def norm(self, x: Sequence[Scalar], y: Sequence[Scalar]) -> Scalar:
        """计算 F(x, y)，x、y 的分量可以是浮点数或 HyperJet。"""
        ...

    @abc.abstractmethod
    def params(self) -> Dict[str, Any]:
        """该种度量特有的 JSON 字段。"""
        ...

    @property
    def reversible(self) -> bool:
        return False

    @property
    def x_independent(self) -> bool:
        """F 不依赖 x 时喷射恒为零，测地线是坐标直线。"""
        return False

    @property
    def metric_id(self) -> str:
        return self.name or self.kind

    def contains(self, x: Sequence[float]) -> bool:
        return self.domain.contains(x)

    def contains_batch(self, X: np.ndarray) -> np.ndarray:
        return self.domain.contains_batch(X)

    def validate(self):
        """
        验证度量定义是否有效。
        这个基类方法提供了通用检查，如果无效则抛出 InputError。
        """
        if not isinstance(self.n, int) or self.n < 2:
            raise InputError(f"维数 n 必须是不小于 2 的整数，实际为 {self.n!r}")
        if self.domain.kind == "ball" and len(self.domain.center) != self.n:
            raise InputError("定义域中心的维数与度量不一致")

    def to_dict(self) -> Dict[str, Any]:
        data = {"kind": self.kind, "n": self.n}
        data.update(self.params())
        if self.domain.kind != "all":
            data["domain"] = self.domain.to_dict()
        if self.name:
            data["name"] = self.name
        return data

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.metric_id!r}, n={self.n})"
