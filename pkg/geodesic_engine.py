"""
测地线积分、指数映射及其微分、曲线的 Finsler 长度。

测地线方程 x'' = -2G(x, x') 化成一阶系统 (x, v) 后用定步长经典 RK4 积分，
每个样本记录 F(x, v) 监测能量漂移。测地线天然是仿射参数化的，
需要弧长参数时用 unit_speed 后处理。
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from config import config
from connection import SprayFn, spray_base_jacobian, spray_batch, spray_coefficients, spray_jacobian
from constants import DEXP_FD_SCALE, y_min_tol
from metric_zoo import F_batch, F_value, Point, TangentVector, as_vector
from metrics import MetricSpec
from utils.exceptions import (
    DomainError, DomainExitError, EvaluationError, FinslerError, InputError, IntegrationError,
    IntegrationQualityError, ZeroSectionError,
)
from utils.logger import log

MIN_CURVE_SAMPLES = 8
DRIFT_ABORT_FACTOR = 100.0

PointLike = Union[Point, Sequence[float], np.ndarray]


def coords_of(x: PointLike, n: int) -> np.ndarray:
    return as_vector(x.coords if isinstance(x, Point) else x, n, "x")


@dataclass(eq=False)
class GeodesicSolution:
    t: np.ndarray           # (N,)，从 0 严格递增（integrate_span 时从 t_start 开始）
    x: np.ndarray           # (N, n)
    v: np.ndarray           # (N, n)
    a: np.ndarray           # (N, n)，喷射给出的加速度 -2G(x, v)
    F_values: np.ndarray    # (N,)
    initial: TangentVector
    step: float
    max_drift: float

    @property
    def endpoint(self) -> np.ndarray:
        return self.x[-1]

    @property
    def samples(self) -> int:
        return len(self.t)

    @property
    def length(self) -> float:
        """有向长度 ∫ F(c, c') dt。"""
        return float(simpson(self.F_values, x=self.t))

    def kinematics(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.x, self.v, self.a

    @cached_property
    def _interpolants(self):
        return (CubicHermiteSpline(self.t, self.x, self.v, axis=0),
                CubicHermiteSpline(self.t, self.v, self.a, axis=0))

    def state_at(self, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """时刻 t 的 (c(t), c'(t))；落在网格点上时返回样本本身。"""
        if not self.t[0] <= t <= self.t[-1]:
            raise InputError(f"t = {t} 超出积分区间 [{self.t[0]}, {self.t[-1]}]")
        k = int(np.searchsorted(self.t, t))
        if k < len(self.t) and self.t[k] == t:
            return self.x[k].copy(), self.v[k].copy()
        xs, vs = self._interpolants
        return np.asarray(xs(t)), np.asarray(vs(t))

    def as_curve(self) -> "SampledCurve":
        return SampledCurve(self.t, self.x, self.v, self.a)


@dataclass(eq=False)
class SampledCurve:
    """
    采样曲线：参数 s_k、点 b(s_k)，可选地附带速度与加速度。
    没有给出速度时用三次样条（not-a-knot）求导。
    """
    s: np.ndarray
    points: np.ndarray
    velocities: Optional[np.ndarray] = None
    accelerations: Optional[np.ndarray] = None

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float).reshape(-1)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points[:, None]
        if len(self.s) < MIN_CURVE_SAMPLES:
            raise InputError(f"采样曲线至少需要 {MIN_CURVE_SAMPLES} 个样本，实际 {len(self.s)} 个")
        if self.points.shape[0] != len(self.s):
            raise InputError("参数个数与点的个数不一致")
        if not np.all(np.diff(self.s) > 0):
            raise InputError("曲线参数必须严格递增")
        if not np.all(np.isfinite(self.points)):
            raise InputError("曲线含有非有限的点")
        for name in ("velocities", "accelerations"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value, dtype=float).reshape(self.points.shape)
                setattr(self, name, value)

    @classmethod
    def from_function(cls, fn: Callable[[float], Sequence[float]], s0: float, s1: float, samples: int,
                      derivative: Optional[Callable[[float], Sequence[float]]] = None) -> "SampledCurve":
        s = np.linspace(s0, s1, samples)
        points = np.array([fn(t) for t in s], dtype=float)
        velocities = None if derivative is None else np.array([derivative(t) for t in s], dtype=float)
        return cls(s, points, velocities)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(self.s, self.points, axis=0)

    def velocity_array(self) -> np.ndarray:
        if self.velocities is not None:
            return self.velocities
        return self._spline(self.s, 1)

    def kinematics(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        velocities = self.velocity_array()
        if self.accelerations is not None:
            accelerations = self.accelerations
        elif self.velocities is not None:
            accelerations = CubicSpline(self.s, self.velocities, axis=0)(self.s, 1)
        else:
            accelerations = self._spline(self.s, 2)
        return self.points, velocities, accelerations

    def resampled(self, samples: int) -> "SampledCurve":
        """在同一参数区间上用样条重新均匀采样。"""
        s = np.linspace(self.s[0], self.s[-1], samples)
        if self.velocities is not None:
            spline = CubicHermiteSpline(self.s, self.points, self.velocities, axis=0)
            return SampledCurve(s, spline(s), spline(s, 1))
        return SampledCurve(s, self._spline(s), self._spline(s, 1))

    def reversed(self) -> "SampledCurve":
        s = self.s[0] + self.s[-1] - self.s[::-1]
        velocities = None if self.velocities is None else -self.velocities[::-1]
        accelerations = None if self.accelerations is None else self.accelerations[::-1]
        return SampledCurve(s, self.points[::-1], velocities, accelerations)


# --- 积分 ---
def _rk4_step(accel: Callable[[np.ndarray, np.ndarray], np.ndarray], x: np.ndarray, v: np.ndarray,
              a: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """一步经典 RK4；a 为步首的加速度。标量与批量 (B, n) 状态共用。"""
    k2x = v + 0.5 * h * a
    k2v = accel(x + 0.5 * h * v, k2x)
    k3x = v + 0.5 * h * k2v
    k3v = accel(x + 0.5 * h * k2x, k3x)
    k4x = v + h * k3v
    k4v = accel(x + h * k3x, k4x)
    return (x + h / 6.0 * (v + 2.0 * k2x + 2.0 * k3x + k4x),
            v + h / 6.0 * (a + 2.0 * k2v + 2.0 * k3v + k4v))


def _integrate(metric: MetricSpec, x0: np.ndarray, v0: np.ndarray, t_end: float, step: float,
               spray_fn: SprayFn, drift_tol: float) -> GeodesicSolution:
    """从 t = 0 积分到 t_end（可以为负，此时向过去积分）。"""
    n_steps = max(1, int(round(abs(t_end) / step)))
    h = t_end / n_steps
    initial = TangentVector(Point(x0.copy()), v0.copy())

    def accel(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return -2.0 * spray_fn(metric, x, v)

    F0 = F_value(metric, x0, v0)
    x, v, a = x0, v0, accel(x0, v0)
    ts, xs, vs, as_, Fs = [0.0], [x], [v], [a], [F0]
    max_drift = 0.0

    def solution() -> GeodesicSolution:
        return GeodesicSolution(np.array(ts), np.array(xs), np.array(vs), np.array(as_), np.array(Fs),
                                initial, abs(h), max_drift)

    for k in range(n_steps):
        try:
            x, v = _rk4_step(accel, x, v, a, h)
            a = accel(x, v)
            F = F_value(metric, x, v)
        except (DomainError, EvaluationError) as e:
            raise DomainExitError(
                f"测地线在 t ∈ ({ts[-1]:.6g}, {ts[-1] + h:.6g}] 内离开了度量 {metric.metric_id} 的定义域",
                exit_time=ts[-1], exit_point=xs[-1].copy(), partial=solution(),
            ) from e
        except ZeroSectionError as e:
            raise IntegrationError(f"测地线速度在 t ≈ {ts[-1]:.6g} 处退化到零截面") from e

        drift = abs(F - F0) / F0
        max_drift = max(max_drift, drift)
        if drift > DRIFT_ABORT_FACTOR * drift_tol:
            raise IntegrationQualityError(
                f"F 值相对漂移 {drift:.3g} 超过容差的 {DRIFT_ABORT_FACTOR:g} 倍 (步长 {abs(h):.3g})", drift
            )
        ts.append((k + 1) * h)
        xs.append(x)
        vs.append(v)
        as_.append(a)
        Fs.append(F)

    if max_drift > drift_tol:
        log.debug(f"测地线 F 值漂移 {max_drift:.3g} 超过 {drift_tol:.1e}")
    return solution()


def _prepare(metric: MetricSpec, init: TangentVector, step: Optional[float],
             spray_fn: Optional[SprayFn], drift_tol: Optional[float]):
    x0 = as_vector(init.base.coords, metric.n, "x")
    v0 = as_vector(init.dir, metric.n, "y")
    step = config.step if step is None else float(step)
    if not step > 0:
        raise InputError(f"积分步长必须为正，实际为 {step}")
    if np.linalg.norm(v0) < y_min_tol(float(np.linalg.norm(x0))):
        raise ZeroSectionError("初速度过于接近零，无法积分测地线")
    if not metric.contains(x0):
        raise DomainError(f"初始点 {x0.tolist()} 不在度量 {metric.metric_id} 的定义域内")
    spray_fn = spray_coefficients if spray_fn is None else spray_fn
    drift_tol = config.energy_drift_tol if drift_tol is None else float(drift_tol)
    return x0, v0, step, spray_fn, drift_tol


def integrate_geodesic(metric: MetricSpec, init: TangentVector, t_end: float, step: Optional[float] = None,
                       spray_fn: Optional[SprayFn] = None, drift_tol: Optional[float] = None) -> GeodesicSolution:
    """
    以 init = (x, y) 为初值积分测地线到 t_end。
    实际步长取 t_end / round(t_end / step)，使终点正好落在网格上。
    """
    if not t_end > 0:
        raise InputError(f"t_end 必须为正，实际为 {t_end}")
    x0, v0, step, spray_fn, drift_tol = _prepare(metric, init, step, spray_fn, drift_tol)
    return _integrate(metric, x0, v0, float(t_end), step, spray_fn, drift_tol)


def integrate_span(metric: MetricSpec, init: TangentVector, t_start: float, t_end: float,
                   step: Optional[float] = None, spray_fn: Optional[SprayFn] = None,
                   drift_tol: Optional[float] = None) -> GeodesicSolution:
    """在 [t_start, t_end]（包含 0）上积分，c(0) = x，c'(0) = y。"""
    if not t_start <= 0.0 <= t_end or t_start == t_end:
        raise InputError(f"积分区间 [{t_start}, {t_end}] 必须包含 0 且非退化")
    x0, v0, step, spray_fn, drift_tol = _prepare(metric, init, step, spray_fn, drift_tol)
    parts = []
    if t_start < 0:
        back = _integrate(metric, x0, v0, float(t_start), step, spray_fn, drift_tol)
        parts.append((back.t[:0:-1], back.x[:0:-1], back.v[:0:-1], back.a[:0:-1], back.F_values[:0:-1]))
    if t_end > 0:
        fwd = _integrate(metric, x0, v0, float(t_end), step, spray_fn, drift_tol)
        parts.append((fwd.t, fwd.x, fwd.v, fwd.a, fwd.F_values))
        drift, h = fwd.max_drift, fwd.step
    else:
        parts.append((np.zeros(1), x0[None, :], v0[None, :], back.a[:1], back.F_values[:1]))
        drift, h = 0.0, back.step
    if t_start < 0:
        drift = max(drift, back.max_drift)
    t, x, v, a, F = (np.concatenate(arrays) for arrays in zip(*parts))
    return GeodesicSolution(t, x, v, a, F, TangentVector(Point(x0), v0), h, drift)


# --- 批量积分 ---
BATCH_FAILURES = (FinslerError, ArithmeticError, ValueError, np.linalg.LinAlgError)


@dataclass(eq=False)
class BatchEndpoints:
    """批量积分的结果：points[b] 是第 b 条测地线的终点，失败的行为 nan，errors[b] 记录原因。"""
    points: np.ndarray
    errors: List[Optional[FinslerError]]
    max_drift: Optional[np.ndarray] = None

    @property
    def ok(self) -> np.ndarray:
        return np.array([e is None for e in self.errors], dtype=bool)

    def raise_first(self) -> np.ndarray:
        for e in self.errors:
            if e is not None:
                raise e
        return self.points


def _member_failure(metric: MetricSpec, e: FinslerError, t: float, x: np.ndarray) -> FinslerError:
    """与 _integrate 相同的异常归类。"""
    if isinstance(e, (DomainError, EvaluationError)):
        return DomainExitError(f"测地线在 t ≈ {t:.6g} 处离开了度量 {metric.metric_id} 的定义域",
                               exit_time=t, exit_point=x.copy())
    if isinstance(e, ZeroSectionError):
        return IntegrationError(f"测地线速度在 t ≈ {t:.6g} 处退化到零截面")
    return e


def _integrate_batch(metric: MetricSpec, x0: np.ndarray, v0: np.ndarray, step: float,
                     drift_tol: float, t_end: float = 1.0) -> BatchEndpoints:
    """
    B 条测地线在 [0, t_end] 上同步积分，只保留终点和每条的最大 F 漂移。
    整批求值失败时逐行重算这一步，找出失败的行并把它们移出批次，其余行继续。
    """
    batch = x0.shape[0]
    n_steps = max(1, int(round(t_end / step)))
    h = t_end / n_steps
    errors: List[Optional[FinslerError]] = [None] * batch
    max_drift = np.zeros(batch)
    x, v = x0.copy(), v0.copy()
    a, F0 = np.zeros_like(x), np.ones(batch)

    def accel(p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return -2.0 * spray_batch(metric, p, q)

    def single(p: np.ndarray, q: np.ndarray) -> np.ndarray:
        return -2.0 * spray_coefficients(metric, p, q)

    try:
        a[:], F0[:] = accel(x, v), F_batch(metric, x, v)
    except BATCH_FAILURES:
        for b in range(batch):
            try:
                a[b], F0[b] = single(x[b], v[b]), F_value(metric, x[b], v[b])
            except FinslerError as e:
                errors[b] = e
    alive = np.array([b for b in range(batch) if errors[b] is None], dtype=int)

    for k in range(n_steps):
        if not alive.size:
            break
        try:
            xs, vs = _rk4_step(accel, x[alive], v[alive], a[alive], h)
            as_, Fs = accel(xs, vs), F_batch(metric, xs, vs)
        except BATCH_FAILURES:
            xs, vs = x[alive].copy(), v[alive].copy()
            as_, Fs = a[alive].copy(), np.full(alive.size, np.nan)
            for j, b in enumerate(alive):
                try:
                    xs[j], vs[j] = _rk4_step(single, x[b], v[b], a[b], h)
                    as_[j], Fs[j] = single(xs[j], vs[j]), F_value(metric, xs[j], vs[j])
                except FinslerError as e:
                    errors[b] = _member_failure(metric, e, k * h, x[b])
        drift = np.abs(Fs - F0[alive]) / F0[alive]
        max_drift[alive] = np.fmax(max_drift[alive], drift)
        healthy = np.array([errors[b] is None for b in alive], dtype=bool)
        for j in np.flatnonzero(healthy & (drift > DRIFT_ABORT_FACTOR * drift_tol)):
            errors[alive[j]] = IntegrationQualityError(
                f"F 值相对漂移 {drift[j]:.3g} 超过容差的 {DRIFT_ABORT_FACTOR:g} 倍 (步长 {h:.3g})", drift[j]
            )
        x[alive], v[alive], a[alive] = xs, vs, as_
        alive = np.array([b for b in alive if errors[b] is None], dtype=int)

    failed = [b for b in range(batch) if errors[b] is not None]
    x[failed] = np.nan
    return BatchEndpoints(x, errors, max_drift)


def integrate_endpoints(metric: MetricSpec, xs: np.ndarray, vs: np.ndarray, t_end: float = 1.0,
                        step: Optional[float] = None, drift_tol: Optional[float] = None) -> BatchEndpoints:
    """B 个初始旗 (x_b, v_b) 的测地线同步积分到 t_end，起点可以各不相同。"""
    xs = np.asarray(xs, dtype=float).reshape(-1, metric.n)
    vs = np.asarray(vs, dtype=float).reshape(xs.shape)
    step = config.step if step is None else float(step)
    if not step > 0 or not t_end > 0:
        raise InputError(f"积分步长与终止时间必须为正，实际为 {step} 与 {t_end}")
    if not np.all(np.any(vs != 0.0, axis=1)):
        raise ZeroSectionError("初速度不能为零向量")
    drift_tol = config.energy_drift_tol if drift_tol is None else drift_tol
    return _integrate_batch(metric, xs, vs, step, drift_tol, t_end)


# --- 指数映射 ---
def exp_map(metric: MetricSpec, x: PointLike, X: Sequence[float], step: Optional[float] = None,
            spray_fn: Optional[SprayFn] = None) -> np.ndarray:
    """Exp_x(X) = c_X(1)，返回终点坐标。|X| 小于零截面阈值时返回 x。"""
    x = coords_of(x, metric.n)
    X = as_vector(X, metric.n, "X")
    if np.linalg.norm(X) < y_min_tol(float(np.linalg.norm(x))):
        if not metric.contains(x):
            raise DomainError(f"点 {x.tolist()} 不在度量 {metric.metric_id} 的定义域内")
        return x.copy()
    step = config.exp_step if step is None else step
    return integrate_geodesic(metric, TangentVector(Point(x), X), 1.0, step, spray_fn).endpoint


def exp_map_flags(metric: MetricSpec, xs: np.ndarray, Xs: np.ndarray, step: Optional[float] = None) -> BatchEndpoints:
    """
    exp_map 的批量版本：points[b] = Exp_{x_b}(X_b)，基点可以逐行不同。
    单行失败只记录在 errors 里，不影响其他行。
    """
    Xs = np.asarray(Xs, dtype=float).reshape(-1, metric.n)
    xs = np.array(np.broadcast_to(np.asarray(xs, dtype=float), Xs.shape))
    inside = metric.contains_batch(xs)
    if not np.all(inside):
        outside = xs[int(np.argmin(inside))]
        raise DomainError(f"点 {outside.tolist()} 不在度量 {metric.metric_id} 的定义域内")
    step = config.exp_step if step is None else float(step)
    if not step > 0:
        raise InputError(f"积分步长必须为正，实际为 {step}")
    points = xs.copy()
    errors: List[Optional[FinslerError]] = [None] * Xs.shape[0]
    moving = np.flatnonzero(np.linalg.norm(Xs, axis=1) >= y_min_tol(np.linalg.norm(xs, axis=1)))
    if moving.size:
        result = _integrate_batch(metric, xs[moving], Xs[moving], step, config.energy_drift_tol)
        points[moving] = result.points
        for j, b in enumerate(moving):
            errors[b] = result.errors[j]
    return BatchEndpoints(points, errors)


def exp_map_batch(metric: MetricSpec, x: PointLike, Xs: np.ndarray, step: Optional[float] = None) -> BatchEndpoints:
    """同一基点 x 处的 B 个初速度一次积分。"""
    return exp_map_flags(metric, coords_of(x, metric.n), Xs, step)


def push_forward(metric: MetricSpec, x: PointLike, Xs: np.ndarray, Vs: np.ndarray,
                 step: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    批量计算 Exp_x(X_k) 与 (DExp_x)_{X_k} V_k（中心差分，与 d_exp 相同的步长规则），
    所有 X_k、X_k ± h u_k 在同一批中积分。x 可以是一个基点，也可以是逐行的基点 (B, n)。
    任一行失败时抛出该行的异常。
    """
    Xs = np.asarray(Xs, dtype=float).reshape(-1, metric.n)
    Vs = np.asarray(Vs, dtype=float).reshape(Xs.shape)
    base = np.asarray(x.coords if isinstance(x, Point) else x, dtype=float)
    xs = np.array(np.broadcast_to(base, Xs.shape))
    count = Xs.shape[0]
    scale = np.linalg.norm(Vs, axis=1)
    h = DEXP_FD_SCALE * (1.0 + np.linalg.norm(Xs, axis=1))
    flat = (scale == 0.0) | (np.linalg.norm(Xs, axis=1) < y_min_tol(np.linalg.norm(xs, axis=1)))
    U = np.zeros_like(Vs)
    U[~flat] = Vs[~flat] / scale[~flat, None]
    shifted = h[:, None] * U
    ends = exp_map_flags(metric, np.concatenate([xs, xs, xs]), np.concatenate([Xs, Xs + shifted, Xs - shifted]),
                         step).raise_first()
    points, plus, minus = ends[:count], ends[count:2 * count], ends[2 * count:]
    velocities = scale[:, None] * (plus - minus) / (2.0 * h[:, None])
    velocities[flat] = Vs[flat]
    return points, velocities


def _variational_d_exp(metric: MetricSpec, x: np.ndarray, X: np.ndarray, V: np.ndarray,
                       step: float, spray_fn: SprayFn) -> np.ndarray:
    """
    沿 c_X 积分坐标中的变分方程 J'' = -2(dG/dx J + dG/dy J')，
    J(0) = 0，J'(0) = V，则 (DExp_x)_X V = J(1)。
    """
    n = metric.n
    n_steps = max(1, int(round(1.0 / step)))
    h = 1.0 / n_steps

    def rhs(state: np.ndarray) -> np.ndarray:
        p, v, J, W = np.split(state, 4)
        acc = -2.0 * spray_fn(metric, p, v)
        Gx = spray_base_jacobian(metric, p, v, spray_fn)
        Gy = spray_jacobian(metric, p, v, "central", spray_fn)
        return np.concatenate([v, acc, W, -2.0 * (Gx @ J + Gy @ W)])

    state = np.concatenate([x, X, np.zeros(n), V])
    for k in range(n_steps):
        try:
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * h * k1)
            k3 = rhs(state + 0.5 * h * k2)
            k4 = rhs(state + h * k3)
        except (DomainError, EvaluationError) as e:
            raise DomainExitError(
                f"变分方程积分在 t ≈ {k * h:.6g} 处离开定义域",
                exit_time=k * h, exit_point=state[:n].copy(),
            ) from e
        state = state + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return state[2 * n:3 * n]


def d_exp(metric: MetricSpec, x: PointLike, X: Sequence[float], V: Sequence[float], method: str = "central",
          step: Optional[float] = None, spray_fn: Optional[SprayFn] = None) -> np.ndarray:
    """
    (DExp_x)_X V。central 为中心差分 (Exp(X + hV) - Exp(X - hV)) / 2h，h = 1e-5 (1 + |X|)，
    步长按 V 的长度归一；variational 为变分方程积分。X = 0 时 DExp 是恒等映射。
    """
    x = coords_of(x, metric.n)
    X = as_vector(X, metric.n, "X")
    V = as_vector(V, metric.n, "V")
    if not np.any(V):
        return np.zeros(metric.n)
    if np.linalg.norm(X) < y_min_tol(float(np.linalg.norm(x))):
        return V.copy()
    step = config.exp_step if step is None else step
    if method == "central":
        if spray_fn is None:
            return push_forward(metric, x, X[None, :], V[None, :], step)[1][0]
        scale = float(np.linalg.norm(V))
        u = V / scale
        h = DEXP_FD_SCALE * (1.0 + float(np.linalg.norm(X)))
        plus = exp_map(metric, x, X + h * u, step, spray_fn)
        minus = exp_map(metric, x, X - h * u, step, spray_fn)
        return scale * (plus - minus) / (2.0 * h)
    if method == "variational":
        spray_fn = spray_coefficients if spray_fn is None else spray_fn
        return _variational_d_exp(metric, x, X, V, step, spray_fn)
    raise InputError(f"未知的 d_exp 方法 {method!r}")


def dexp_jacobian(metric: MetricSpec, x: PointLike, X: Sequence[float], method: str = "central",
                  step: Optional[float] = None) -> np.ndarray:
    """列为 d_exp(x, X, e_i) 的矩阵；central 时 2n 条测地线在同一批中积分。"""
    if method == "central":
        X = as_vector(X, metric.n, "X")
        eye = np.eye(metric.n)
        return push_forward(metric, x, np.tile(X, (metric.n, 1)), eye, step)[1].T
    eye = np.eye(metric.n)
    return np.column_stack([d_exp(metric, x, X, eye[i], method, step) for i in range(metric.n)])


# --- 长度 ---
def curve_length(metric: MetricSpec, c: SampledCurve) -> float:
    """L = ∫ F(c, c') ds，复合 Simpson 求积；样本顺序决定方向。"""
    velocities = c.velocity_array()
    values = np.empty(len(c.s))
    stalled = 0
    for k, (p, v) in enumerate(zip(c.points, velocities)):
        if np.linalg.norm(v) < y_min_tol(float(np.linalg.norm(p))):
            if not metric.contains(p):
                raise DomainError(f"曲线上的点 {p.tolist()} 不在度量 {metric.metric_id} 的定义域内")
            values[k] = 0.0
            stalled += 1
        else:
            values[k] = F_value(metric, p, v)
    if stalled:
        log.warning(f"曲线上有 {stalled} 个零速度样本，按 F(x, 0) = 0 计入长度")
    return float(simpson(values, x=c.s))


def image_length(metric: MetricSpec, x: PointLike, tangent_curve: SampledCurve, method: str = "chain",
                 step: Optional[float] = None, densify: int = 4) -> float:
    """
    b = Exp_x ∘ b̃ 的长度。chain 用 DExp 把 b̃' 推前为 b'；
    resample 把 b̃ 加密 densify 倍后只推前点，速度由样条求得。
    """
    x = coords_of(x, metric.n)
    if method == "chain":
        curve = tangent_curve
        points, velocities = push_forward(metric, x, curve.points, curve.velocity_array(), step)
        return curve_length(metric, SampledCurve(curve.s, points, velocities))
    if method == "resample":
        curve = tangent_curve.resampled(densify * (len(tangent_curve.s) - 1) + 1)
        points = exp_map_batch(metric, x, curve.points, step).raise_first()
        return curve_length(metric, SampledCurve(curve.s, points))
    raise InputError(f"未知的像长度计算方法 {method!r}")


def unit_speed(sol: GeodesicSolution) -> SampledCurve:
    """按 F 弧长重新参数化：s(t) = ∫ F dt，dx/ds = v / F。"""
    s = cumulative_trapezoid(sol.F_values, sol.t, initial=0.0)
    if sol.t[0] != 0.0:
        s = s - float(np.interp(0.0, sol.t, s))
    F = sol.F_values[:, None]
    return SampledCurve(s, sol.x, sol.v / F, sol.a / (F * F))
