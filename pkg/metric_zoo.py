"""
度量求值与基本张量。

g_ij(x, y) = 1/2 d^2 F^2 / dy^i dy^j 由 HyperJet 前向求导精确得到；
中心差分只作为测试用的独立参照。所有求导运算都排除零截面附近
|y| < 1e-8 (1 + |x|) 的旗。
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from constants import ORACLE_FD_STEP, SYMMETRY_TOL, Y_MIN_SCALE, y_min_tol
from hyperjet import HyperJet
from metrics import MetricSpec
from utils.exceptions import ConvexityError, DomainError, InputError, ZeroSectionError
from utils.seeding import rng


@dataclass(frozen=True, eq=False)
class Point:
    coords: np.ndarray

    @property
    def n(self) -> int:
        return len(self.coords)


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: Point
    dir: np.ndarray

    @classmethod
    def at(cls, x: Sequence[float], y: Sequence[float]) -> "TangentVector":
        return cls(Point(as_vector(x, what="x")), as_vector(y, what="y"))

    @property
    def x(self) -> np.ndarray:
        return self.base.coords


@dataclass(frozen=True, eq=False)
class FundamentalTensor:
    g: np.ndarray
    g_inv: np.ndarray
    at: TangentVector
    cond: float

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ self.g @ v)


def as_vector(v: Sequence[float], n: Optional[int] = None, what: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if n is not None and arr.shape[0] != n:
        raise InputError(f"{what} 的维数应为 {n}，实际为 {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what} 含有非有限数值: {arr.tolist()}")
    return arr


def check_flag(metric: MetricSpec, x: np.ndarray, y: np.ndarray, derivative: bool):
    if x.shape[0] != metric.n or y.shape[0] != metric.n:
        raise InputError(f"旗的维数与度量不一致 (n = {metric.n})")
    if not metric.contains(x):
        raise DomainError(f"点 {x.tolist()} 不在度量 {metric.metric_id} 的定义域内")
    if derivative and np.linalg.norm(y) < y_min_tol(float(np.linalg.norm(x))):
        raise ZeroSectionError(f"切向量 {y.tolist()} 过于接近零截面")


# --- F 的求值 ---
def F_value(metric: MetricSpec, x: np.ndarray, y: np.ndarray) -> float:
    """eval_F 的数组版本，供内部循环使用。"""
    check_flag(metric, x, y, derivative=False)
    if not np.any(y):
        return 0.0
    value = float(metric.norm(x.tolist(), y.tolist()))
    if not value > 0.0:
        raise ConvexityError(f"F(x, y) = {value:.6g} 不是正数 (x = {x.tolist()}, y = {y.tolist()})")
    return value


def eval_F(metric: MetricSpec, v: TangentVector) -> float:
    x = as_vector(v.base.coords, metric.n, "x")
    y = as_vector(v.dir, metric.n, "y")
    return F_value(metric, x, y)


def l2_jet(metric: MetricSpec, x: np.ndarray, y: np.ndarray, fiber_only: bool = False) -> HyperJet:
    """F^2 的 HyperJet；fiber_only 时只对 y 求导（维数 n），否则对 (x, y) 求导（维数 2n）。"""
    check_flag(metric, x, y, derivative=True)
    if fiber_only:
        ys = HyperJet.seed(y)
        F = metric.norm(x.tolist(), ys)
    else:
        zs = HyperJet.seed(np.concatenate([x, y]))
        F = metric.norm(zs[:metric.n], zs[metric.n:])
    return F * F


# --- 批量求值 ---
def check_flag_batch(metric: MetricSpec, X: np.ndarray, Y: np.ndarray, derivative: bool):
    if X.ndim != 2 or X.shape != Y.shape or X.shape[1] != metric.n:
        raise InputError(f"批量旗的形状应为 (B, {metric.n})，实际为 {X.shape} 与 {Y.shape}")
    inside = metric.contains_batch(X)
    if not np.all(inside):
        outside = X[int(np.argmin(inside))]
        raise DomainError(f"点 {outside.tolist()} 不在度量 {metric.metric_id} 的定义域内")
    if derivative:
        floor = Y_MIN_SCALE * (1.0 + np.linalg.norm(X, axis=1))
        if np.any(np.linalg.norm(Y, axis=1) < floor):
            raise ZeroSectionError("批量旗中有切向量过于接近零截面")


def F_batch(metric: MetricSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """F_value 的批量版本：X、Y 形如 (B, n)，一次求值返回 (B,) 个 F。"""
    check_flag_batch(metric, X, Y, derivative=False)
    moving = np.any(Y != 0.0, axis=1)
    values = np.zeros(X.shape[0])
    if np.any(moving):
        with np.errstate(divide="ignore", invalid="ignore"):
            F = metric.norm(list(X[moving].T), list(Y[moving].T))
        F = np.broadcast_to(np.asarray(F, dtype=float), (int(moving.sum()),))
        if not np.all(np.isfinite(F)):
            raise DomainError(f"度量 {metric.metric_id} 在批量旗上出现非有限值")
        if not np.all(F > 0.0):
            raise ConvexityError(f"F(x, y) = {float(np.min(F)):.6g} 不是正数")
        values[moving] = F
    return values


def l2_jet_batch(metric: MetricSpec, X: np.ndarray, Y: np.ndarray) -> HyperJet:
    """F^2 关于 (x, y) 的批量 HyperJet：value (B,)，grad (B, 2n)，hess (B, 2n, 2n)。"""
    check_flag_batch(metric, X, Y, derivative=True)
    zs = HyperJet.seed(np.concatenate([X, Y], axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        F = metric.norm(zs[:metric.n], zs[metric.n:])
    L = F * F
    if not (np.all(np.isfinite(L.value)) and np.all(np.isfinite(L.hess))):
        raise DomainError(f"度量 {metric.metric_id} 在批量旗上出现非有限值")
    return L


def metric_matrix(metric: MetricSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """g_ij(x, y)，不做正定性检查。"""
    return 0.5 * l2_jet(metric, x, y, fiber_only=True).hess


def fundamental_tensor(metric: MetricSpec, v: TangentVector) -> FundamentalTensor:
    x = as_vector(v.base.coords, metric.n, "x")
    y = as_vector(v.dir, metric.n, "y")
    g = metric_matrix(metric, x, y)
    asym = float(np.max(np.abs(g - g.T)))
    if asym > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(g)))):
        raise ConvexityError(f"基本张量不对称 (偏差 {asym:.3g})")
    g = 0.5 * (g + g.T)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise ConvexityError(
            f"度量 {metric.metric_id} 在旗 (x = {x.tolist()}, y = {y.tolist()}) 处不是强凸的"
        ) from None
    return FundamentalTensor(g, np.linalg.inv(g), v, float(np.linalg.cond(g)))


def tensor_at(metric: MetricSpec, x: Sequence[float], y: Sequence[float]) -> FundamentalTensor:
    return fundamental_tensor(metric, TangentVector.at(x, y))


# --- 求导内核 ---
Direction = Tuple[str, int]

def _flat_index(metric: MetricSpec, direction: Direction) -> int:
    space, i = direction
    if space not in ("x", "y") or not 0 <= i < metric.n:
        raise InputError(f"无效的求导方向 {direction!r}")
    return i if space == "x" else metric.n + i


def derivative_engine(metric: MetricSpec, v: TangentVector, order: int,
                      directions: Sequence[Direction], method: str = "jet") -> float:
    """
    F^2 在 (x, y) 处的一阶或二阶混合偏导。directions 是 ("x", i) / ("y", i) 的序列。
    method="jet" 为精确前向求导；method="central" 为带 Richardson 外推的中心差分，仅供测试对照。
    """
    if order not in (1, 2) or len(directions) != order:
        raise InputError(f"order 必须是 1 或 2，且与方向个数一致 (order={order}, directions={directions!r})")
    x = as_vector(v.base.coords, metric.n, "x")
    y = as_vector(v.dir, metric.n, "y")
    idx = [_flat_index(metric, d) for d in directions]
    if method == "jet":
        L = l2_jet(metric, x, y)
        return float(L.grad[idx[0]]) if order == 1 else float(L.hess[idx[0], idx[1]])
    if method != "central":
        raise InputError(f"未知的求导方法 {method!r}")
    check_flag(metric, x, y, derivative=True)
    z0 = np.concatenate([x, y])

    def L(z: np.ndarray) -> float:
        F = F_value(metric, z[:metric.n], z[metric.n:])
        return F * F

    def stencil(h: float) -> float:
        if order == 1:
            e = np.zeros_like(z0)
            e[idx[0]] = h
            return (L(z0 + e) - L(z0 - e)) / (2.0 * h)
        i, j = idx
        if i == j:
            e = np.zeros_like(z0)
            e[i] = h
            return (L(z0 + e) - 2.0 * L(z0) + L(z0 - e)) / (h * h)
        ei, ej = np.zeros_like(z0), np.zeros_like(z0)
        ei[i], ej[j] = h, h
        return (L(z0 + ei + ej) - L(z0 + ei - ej) - L(z0 - ei + ej) + L(z0 - ei - ej)) / (4.0 * h * h)

    h = ORACLE_FD_STEP * max(1.0, float(np.max(np.abs(z0))))
    coarse, fine = stencil(h), stencil(0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def indicatrix_point(metric: MetricSpec, x: Sequence[float], u: Sequence[float], rho: float) -> TangentVector:
    """y = rho * u / F(x, u)，满足 F(x, y) = rho。"""
    x = as_vector(x, metric.n, "x")
    u = as_vector(u, metric.n, "u")
    if not np.any(u):
        raise InputError("指标形方向 u 不能为零向量")
    if not rho > 0:
        raise InputError(f"半径 rho 必须为正，实际为 {rho}")
    return TangentVector(Point(x), rho * u / F_value(metric, x, u))


# --- 采样 ---
def sample_base_point(metric: MetricSpec, gen: np.random.Generator, radius: Optional[float] = None) -> np.ndarray:
    radius = metric.domain.sampling_radius() if radius is None else radius
    center = np.zeros(metric.n) if metric.domain.kind == "all" else np.array(metric.domain.center)
    direction = gen.normal(size=metric.n)
    direction /= np.linalg.norm(direction)
    return center + radius * gen.uniform() ** (1.0 / metric.n) * direction


def sample_flags(metric: MetricSpec, gen: np.random.Generator, count: int,
                 speed: Tuple[float, float] = (0.2, 1.0), radius: Optional[float] = None) -> List[TangentVector]:
    """在采样球内随机取基点，方向随机，F 值均匀落在 speed 区间。"""
    flags = []
    for _ in range(count):
        x = sample_base_point(metric, gen, radius)
        rho = gen.uniform(*speed)
        flags.append(indicatrix_point(metric, x, gen.normal(size=metric.n), rho))
    return flags


def g_orthogonal(tensor: FundamentalTensor, X: np.ndarray, w: np.ndarray) -> np.ndarray:
    """w 减去它在 X 上的 g_(x,X) 投影。"""
    return w - tensor.inner(w, X) / tensor.inner(X, X) * X


# --- 不变量 ---
FLAG_INVARIANTS = ("homogeneity_F", "homogeneity_g", "norm_reproduction", "euler_identity")
INVARIANTS = FLAG_INVARIANTS + ("fast_vs_central", "indicatrix_convexity")
# 与中心差分参照比较的量，参照本身只有约 1e-7 的精度
ORACLE_INVARIANTS = ("fast_vs_central",)


def invariant_residual(metric: MetricSpec, name: str, witness: dict) -> float:
    """按见证数据重算单个不变量的残差；check_metric_invariants 与见证重放共用。"""
    x = as_vector(witness["x"], metric.n, "x")
    if name == "indicatrix_convexity":
        y1 = as_vector(witness["y1"], metric.n, "y1")
        y2 = as_vector(witness["y2"], metric.n, "y2")
        t = float(witness["t"])
        return max(F_value(metric, x, t * y1 + (1 - t) * y2) - float(witness["rho"]), 0.0)

    y = as_vector(witness["y"], metric.n, "y")
    lam = float(witness.get("lambda", 1.0))
    F = F_value(metric, x, y)
    if name == "homogeneity_F":
        return abs(F_value(metric, x, lam * y) - lam * F) / (lam * F)
    if name == "homogeneity_g":
        return float(np.max(np.abs(metric_matrix(metric, x, lam * y) - metric_matrix(metric, x, y))))
    if name == "norm_reproduction":
        return abs(y @ metric_matrix(metric, x, y) @ y - F * F) / (F * F)
    if name == "euler_identity":
        # d/dλ g(x, λy) 在 λ = 1 处为零（g 的 Euler 恒等式 y^k dg_ij/dy^k = 0）
        h = 1e-5
        euler = (metric_matrix(metric, x, (1 + h) * y) - metric_matrix(metric, x, (1 - h) * y)) / (2 * h)
        return float(np.max(np.abs(euler)))
    if name == "fast_vs_central":
        dirs = [tuple(d) for d in witness["directions"]]
        v = TangentVector.at(x, y)
        fast = derivative_engine(metric, v, 2, dirs)
        oracle = derivative_engine(metric, v, 2, dirs, method="central")
        return abs(fast - oracle) / max(1.0, abs(oracle), F * F)
    raise InputError(f"未知的不变量 {name!r}")


@dataclass
class InvariantReport:
    samples: int
    residuals: Dict[str, float] = field(default_factory=dict)
    witnesses: Dict[str, dict] = field(default_factory=dict)

    def record(self, name: str, value: float, witness: dict):
        if value >= self.residuals.get(name, -math.inf):
            self.residuals[name] = value
            self.witnesses[name] = witness


def check_metric_invariants(metric: MetricSpec, samples: int = 100, seed: int = 0,
                            convexity_pairs: int = 200) -> InvariantReport:
    """
    抽样检查 F 的一次齐次性、g 的零次齐次性、y^T g y = F^2、正定性、
    Euler 恒等式、指标形凸性以及快速求导与中心差分的一致性。
    非强凸的旗直接抛出 ConvexityError。
    """
    gen = rng(seed, "metric-invariants", metric.metric_id)
    report = InvariantReport(samples)
    for k in range(samples):
        x = sample_base_point(metric, gen)
        y = gen.normal(size=metric.n)
        witness = {"x": x.tolist(), "y": y.tolist(), "lambda": float(gen.choice([0.5, 2.0, 10.0]))}
        tensor_at(metric, x, y)
        for name in FLAG_INVARIANTS:
            report.record(name, invariant_residual(metric, name, witness), witness)
        if k < 10:
            i, j = (int(c) for c in gen.integers(0, metric.n, size=2))
            space = ("x", "y")[int(gen.integers(0, 2))]
            w = dict(witness, directions=[[space, i], ["y", j]])
            report.record("fast_vs_central", invariant_residual(metric, "fast_vs_central", w), w)

    x0 = sample_base_point(metric, gen)
    for _ in range(convexity_pairs):
        y1 = indicatrix_point(metric, x0, gen.normal(size=metric.n), gen.uniform(0.05, 1.0)).dir
        y2 = indicatrix_point(metric, x0, gen.normal(size=metric.n), gen.uniform(0.05, 1.0)).dir
        for t in (0.25, 0.5, 0.75):
            w = {"x": x0.tolist(), "y1": y1.tolist(), "y2": y2.tolist(), "t": t, "rho": 1.0}
            report.record("indicatrix_convexity", invariant_residual(metric, "indicatrix_convexity", w), w)
    return report
