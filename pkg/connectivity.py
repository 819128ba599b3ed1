"""
测地线边值问题（打靶法）、有向距离以及凸邻域半径 ε、η、ε̃ 的估计。

ε、η 是存在性量，这里的估计器在有限网格上做带种子的证伪搜索：
报告的半径是"经测试通过的"，而不是被证明的。
"""
import asyncio
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import config
from constants import DEXP_FD_SCALE, DISTINCT_SOLUTION_TOL, MAX_DAMPING_HALVINGS, MULTISTART_SCALES
from geodesic_engine import (
    GeodesicSolution, PointLike, coords_of, dexp_jacobian, exp_map, exp_map_batch, integrate_geodesic,
)
from metric_zoo import F_value, Point, TangentVector, indicatrix_point, metric_matrix
from metrics import MetricSpec
from utils.exceptions import (
    ConvexityError, DomainError, DomainExitError, InputError, IntegrationError, NoGeodesicFoundError,
    ShootingError,
)
from utils.logger import log
from utils.seeding import rng

MAX_GUESS_SHRINKS = 10


@dataclass
class ShootOptions:
    tol: float = field(default_factory=lambda: config.shoot_tol)
    max_iterations: int = field(default_factory=lambda: config.max_newton_iterations)
    multistart: int = field(default_factory=lambda: config.multistart)
    perturbation: float = field(default_factory=lambda: config.multistart_perturbation)
    step: float = field(default_factory=lambda: config.exp_step)
    seed: int = 0
    extra_guesses: Sequence[Sequence[float]] = ()


@dataclass(eq=False)
class ShootingResult:
    initial_velocity: np.ndarray
    iterations: int
    residual: float
    converged: bool
    geodesic: Optional[GeodesicSolution]
    length: float
    start: str = "primary"
    alternatives: List["ShootingResult"] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "initial_velocity": self.initial_velocity.tolist(),
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
            "length": self.length,
            "start": self.start,
            "alternatives": [
                {"initial_velocity": alt.initial_velocity.tolist(), "length": alt.length, "start": alt.start}
                for alt in self.alternatives
            ],
        }


# --- 打靶 ---
def _pair_label(y: np.ndarray, z: np.ndarray) -> str:
    return f"{y.tolist()}->{z.tolist()}"


def initial_guess(metric: MetricSpec, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """X₀ = z - y，缩放到 F(y, X₀) 等于坐标线段长度的中点估计 F((y+z)/2, z - y)。"""
    d = z - y
    mid = 0.5 * (y + z)
    estimate = F_value(metric, mid, d) if metric.contains(mid) else F_value(metric, y, d)
    return d * estimate / F_value(metric, y, d)


def _shoot_jacobians(metric: MetricSpec, y: np.ndarray, Xs: np.ndarray, step: float):
    """每个 X 的 DExp_y 雅可比，所有 X ± h e_i 在同一批中积分；返回 (J, ok)。"""
    n = metric.n
    count = Xs.shape[0]
    h = DEXP_FD_SCALE * (1.0 + np.linalg.norm(Xs, axis=1))
    shifts = h[:, None, None] * np.eye(n)[None, :, :]                 # (count, n, n)，第 i 行是 h e_i
    rows = np.concatenate([(Xs[:, None, :] + shifts).reshape(-1, n), (Xs[:, None, :] - shifts).reshape(-1, n)])
    ends = exp_map_batch(metric, y, rows, step)
    half = count * n
    plus, minus = ends.points[:half].reshape(count, n, n), ends.points[half:].reshape(count, n, n)
    ok = ends.ok[:half].reshape(count, n).all(axis=1) & ends.ok[half:].reshape(count, n).all(axis=1)
    J = np.swapaxes((plus - minus) / (2.0 * h[:, None, None]), 1, 2)
    return J, ok


def _newton(metric: MetricSpec, y: np.ndarray, z: np.ndarray, starts: List[Tuple[str, np.ndarray]],
            opts: ShootOptions) -> List[ShootingResult]:
    """
    对 S(X) = Exp_y(X) - z 做阻尼 Newton 迭代，所有初值同步推进、同批积分。
    雅可比的列为 d_exp(y, X, e_i)。某个初值的积分失败只让这个初值失败。
    """
    labels = [label for label, _ in starts]
    X0 = np.array([g for _, g in starts], dtype=float).reshape(-1, metric.n)
    X = X0.copy()
    count = X.shape[0]
    r = np.full_like(X, np.nan)
    failed = np.zeros(count, dtype=bool)

    pending = np.arange(count)
    for _ in range(MAX_GUESS_SHRINKS):
        ends = exp_map_batch(metric, y, X[pending], opts.step)
        r[pending[ends.ok]] = ends.points[ends.ok] - z
        pending = pending[~ends.ok]
        if not pending.size:
            break
        X[pending] *= 0.5
        log.debug(f"{len(pending)} 个初值的测地线积分失败，缩小初值重试")
    else:
        failed[pending] = True

    norm_r = np.linalg.norm(r, axis=1)
    converged = np.zeros(count, dtype=bool)
    stalled = np.zeros(count, dtype=bool)
    iterations = np.zeros(count, dtype=int)
    for it in range(opts.max_iterations + 1):
        running = ~(failed | converged | stalled)
        done = running & (norm_r <= opts.tol)
        converged |= done
        iterations[done] = it
        active = np.flatnonzero(running & ~done)
        iterations[active] = it
        if not active.size or it == opts.max_iterations:
            break
        J, ok = _shoot_jacobians(metric, y, X[active], opts.step)
        stalled[active[~ok]] = True
        trial, J = active[ok], J[ok]
        dX = np.array([np.linalg.lstsq(Jk, -r[k], rcond=None)[0] for Jk, k in zip(J, trial)]).reshape(-1, metric.n)
        step_of = dict(zip(trial.tolist(), dX))
        lam = np.ones(count)
        for _ in range(MAX_DAMPING_HALVINGS):
            if not trial.size:
                break
            candidate = X[trial] + lam[trial, None] * np.array([step_of[k] for k in trial])
            ends = exp_map_batch(metric, y, candidate, opts.step)
            r_new = ends.points - z
            with np.errstate(invalid="ignore"):
                better = ends.ok & (np.linalg.norm(r_new, axis=1) < norm_r[trial])
            accepted = trial[better]
            X[accepted], r[accepted] = candidate[better], r_new[better]
            norm_r[accepted] = np.linalg.norm(r_new[better], axis=1)
            trial = trial[~better]
            lam[trial] *= 0.5
        stalled[trial] = True  # 阻尼步长耗尽

    results = []
    for k in range(count):
        if failed[k]:
            results.append(ShootingResult(X0[k], 0, float("inf"), False, None, float("nan"), labels[k]))
        else:
            results.append(ShootingResult(X[k].copy(), int(iterations[k]), float(norm_r[k]), bool(converged[k]),
                                          None, F_value(metric, y, X[k]), labels[k]))
    return results


def _distinct(results: List[ShootingResult]) -> List[ShootingResult]:
    """按初值顺序去重（同一测地线保留最先找到的），再按长度排序。"""
    unique: List[ShootingResult] = []
    for res in results:
        scale = 1.0 + float(np.linalg.norm(res.initial_velocity))
        if all(np.linalg.norm(res.initial_velocity - u.initial_velocity) > DISTINCT_SOLUTION_TOL * scale
               for u in unique):
            unique.append(res)
    return sorted(unique, key=lambda r: r.length)


def _starts(metric: MetricSpec, y: np.ndarray, z: np.ndarray, opts: ShootOptions) -> List[Tuple[str, np.ndarray]]:
    X0 = initial_guess(metric, y, z)
    starts = [("primary", X0)]
    starts += [(f"extra-{k}", np.asarray(g, dtype=float)) for k, g in enumerate(opts.extra_guesses)]
    if opts.multistart > 0:
        starts += [(f"scaled-{s:g}", s * X0) for s in MULTISTART_SCALES]
        if not np.allclose(z - y, X0):
            starts.append(("chord", z - y))
        gen = rng(opts.seed, "multistart", metric.metric_id, _pair_label(y, z))
        scale = opts.perturbation * float(np.linalg.norm(X0))
        starts += [(f"multistart-{k}", X0 + scale * gen.normal(size=metric.n)) for k in range(opts.multistart)]
    return starts


def connect(metric: MetricSpec, y: PointLike, z: PointLike, opts: Optional[ShootOptions] = None) -> ShootingResult:
    """
    求连接 y 到 z 的测地线初速度 X（Exp_y(X) = z）。
    主初值、附加初值、缩短的初值、坐标弦 z - y 和带种子的扰动初值一起迭代；返回收敛结果中
    长度最短的一个，其余互不相同的收敛解放在 alternatives 里。
    """
    opts = opts or ShootOptions()
    y = coords_of(y, metric.n)
    z = coords_of(z, metric.n)
    for p in (y, z):
        if not metric.contains(p):
            raise DomainError(f"点 {p.tolist()} 不在度量 {metric.metric_id} 的定义域内")
    if np.array_equal(y, z):
        return ShootingResult(np.zeros(metric.n), 0, 0.0, True, None, 0.0, "trivial")

    attempts = _newton(metric, y, z, _starts(metric, y, z, opts), opts)
    if not attempts[0].converged:
        log.debug(f"打靶 {_pair_label(y, z)} 的主初值未收敛 (残差 {attempts[0].residual:.3g})")
    converged = _distinct([a for a in attempts if a.converged])
    if not converged:
        best = min(a.residual for a in attempts)
        raise NoGeodesicFoundError(
            f"未找到连接 {y.tolist()} 与 {z.tolist()} 的测地线 (最好的残差 {best:.3g})", best
        )
    integrated = []
    for res in converged:
        try:
            res.geodesic = integrate_geodesic(metric, TangentVector(Point(y), res.initial_velocity), 1.0, opts.step)
        except IntegrationError as e:
            if not integrated and res is converged[-1]:
                raise NoGeodesicFoundError(f"收敛的测地线无法重新积分: {e}", res.residual) from e
            log.debug(f"丢弃无法重新积分的解 {res.start}: {e}")
            continue
        integrated.append(res)
    best, others = integrated[0], integrated[1:]
    best.alternatives = others
    return best


def distance(metric: MetricSpec, y: PointLike, z: PointLike, opts: Optional[ShootOptions] = None) -> float:
    """
    有向距离：最短收敛测地线的长度，distance(y, z) 不必等于 distance(z, y)。
    可逆度量上 d 对称，总是从字典序较小的端点出发打靶，两个方向得到同一个数。
    """
    y = coords_of(y, metric.n)
    z = coords_of(z, metric.n)
    if metric.reversible and tuple(z) < tuple(y):
        y, z = z, y
    return connect(metric, y, z, opts).length


# --- 坐标球界 ---
@dataclass(eq=False)
class ChartBallBounds:
    """
    以 y 为中心的坐标同心壳上，g 特征值的采样下界与上界。
    任何从 y 到坐标距离 r 处的曲线都要穿过 r 以内的每一层壳。
    """
    center: np.ndarray
    radii: np.ndarray      # 壳的边界，radii[0] = 0
    lam_min: np.ndarray    # 每层壳上 λ_min(g) 的采样最小值（壳越出定义域时为 0）
    lam_max: np.ndarray    # 每层壳上 λ_max(g) 的采样最大值（壳越出定义域时为 inf）

    def distance_lower(self, p: np.ndarray) -> float:
        """d(y, p) 的下界，坐标距离超出采样范围的部分不计入。"""
        r = float(np.linalg.norm(np.asarray(p) - self.center))
        widths = np.clip(np.minimum(self.radii[1:], r) - self.radii[:-1], 0.0, None)
        return float(np.sum(np.sqrt(self.lam_min) * widths))

    def distance_upper(self, p: np.ndarray) -> float:
        """沿坐标直线段的 d(y, p) 上界。"""
        r = float(np.linalg.norm(np.asarray(p) - self.center))
        if r > self.radii[-1]:
            return float("inf")
        widths = np.clip(np.minimum(self.radii[1:], r) - self.radii[:-1], 0.0, None)
        used = widths > 0
        return float(np.sum(np.sqrt(self.lam_max[used]) * widths[used]))


def chart_ball_bounds(metric: MetricSpec, y: PointLike, chart_radius: float, points_per_shell: int = 16,
                      directions: int = 4, seed: int = 0) -> ChartBallBounds:
    y = coords_of(y, metric.n)
    if not chart_radius > 0:
        raise InputError(f"坐标半径必须为正，实际为 {chart_radius}")
    inner = min(chart_radius, 1.0)
    radii = np.linspace(0.0, inner, 33)
    if chart_radius > inner:
        radii = np.concatenate([radii, np.geomspace(inner, chart_radius, 49)[1:]])
    gen = rng(seed, "chart-ball", metric.metric_id, y.tolist())
    lam_min = np.full(len(radii) - 1, np.inf)
    lam_max = np.zeros(len(radii) - 1)

    def sample_shell(r: float) -> Tuple[float, float]:
        lo, hi = np.inf, 0.0
        for _ in range(points_per_shell if r > 0 else 1):
            w = gen.normal(size=metric.n)
            p = y + r * w / np.linalg.norm(w)
            if not metric.contains(p):
                return 0.0, np.inf
            for _ in range(directions):
                eig = np.linalg.eigvalsh(metric_matrix(metric, p, gen.normal(size=metric.n)))
                lo, hi = min(lo, float(eig[0])), max(hi, float(eig[-1]))
        return lo, hi

    edges = [sample_shell(float(r)) for r in radii]
    for k in range(len(radii) - 1):
        lam_min[k] = max(0.0, min(edges[k][0], edges[k + 1][0]))
        lam_max[k] = max(edges[k][1], edges[k + 1][1])
    return ChartBallBounds(y, radii, lam_min, lam_max)


def geodesic_contained(metric: MetricSpec, sol: GeodesicSolution, eta: float,
                       bounds: Optional[ChartBallBounds] = None) -> bool:
    """
    c 是否留在 B_η(c(0)) 内：弧长界 d(y, c(t)) <= t L(c) < η，
    或者坐标球上界对所有样本都小于 η，任一成立即可。
    """
    if sol.length < eta:
        return True
    y = sol.x[0]
    if bounds is None:
        reach = float(np.max(np.linalg.norm(sol.x - y, axis=1)))
        bounds = chart_ball_bounds(metric, y, max(reach, 1e-12))
    return all(bounds.distance_upper(p) < eta for p in sol.x)


# --- 唯一性与逃逸 ---
@dataclass
class EscapeFinding:
    initial_velocity: List[float]
    length: float
    start: str
    max_chart_distance: float
    distance_lower_bound: float
    escaped: bool


def check_uniqueness_escape(metric: MetricSpec, y: PointLike, z: PointLike, eta: float,
                            opts: Optional[ShootOptions] = None) -> List[EscapeFinding]:
    """
    多起点打靶 y -> z，确认每条非最短的测地线都有样本点离开 F 半径 η 的球 B_η(y)。
    离 y 的距离用坐标壳上的特征值下界估计。
    """
    opts = opts or ShootOptions()
    y = coords_of(y, metric.n)
    try:
        result = connect(metric, y, z, opts)
    except ShootingError as e:
        log.warning(f"唯一性检查中打靶失败: {e}")
        return []
    findings = []
    for alt in result.alternatives:
        if alt.geodesic is None:
            continue
        reach = np.linalg.norm(alt.geodesic.x - y, axis=1)
        far = int(np.argmax(reach))
        bounds = chart_ball_bounds(metric, y, float(reach[far]), seed=opts.seed)
        lower = bounds.distance_lower(alt.geodesic.x[far])
        findings.append(EscapeFinding(
            alt.initial_velocity.tolist(), alt.length, alt.start, float(reach[far]), lower, lower > eta,
        ))
        if lower <= eta:
            log.warning(f"第二条测地线 ({alt.start}, 长度 {alt.length:.6g}) 未能确认离开 B_η(y)")
    return findings


# --- 凸邻域半径 ---
@dataclass
class RadiusTrial:
    radius: float
    passed: bool
    pairs: int
    failures: Dict[str, int]
    min_singular_value: float


@dataclass
class ConvexityReport:
    base_point: List[float]
    epsilon: float
    eta: float
    epsilon_tilde: float
    eta_factor: float
    samples_tested: int
    failure_modes: Dict[str, int]
    trials: List[RadiusTrial]
    impossible: bool = False
    eta_convention: str = "eta = eta_factor * epsilon"

    def to_dict(self) -> dict:
        return asdict(self)


def normalized_singular_value(metric: MetricSpec, x: np.ndarray, X: np.ndarray, step: Optional[float] = None) -> float:
    """
    DExp_x 在 X 处的最小奇异值，两端分别用 g_(x,X) 与 g_(p,DExp X) 度量，
    因此对坐标卡的伸缩不敏感（欧氏情形恒为 1）。
    """
    J = dexp_jacobian(metric, x, X, step=step)
    p = exp_map(metric, x, X, step)
    Lx = np.linalg.cholesky(metric_matrix(metric, x, X))
    Lp = np.linalg.cholesky(metric_matrix(metric, p, J @ X))
    M = Lp.T @ J @ np.linalg.inv(Lx.T)
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def _sample_in_ball(metric: MetricSpec, gen: np.random.Generator, x: np.ndarray, radius: float,
                    boundary: bool) -> np.ndarray:
    """指标形球 B_radius(0_x) 中的切向量；boundary 时贴近边界 (0.999 radius)。"""
    rho = 0.999 * radius if boundary else radius * gen.uniform() ** (1.0 / metric.n)
    return indicatrix_point(metric, x, gen.normal(size=metric.n), max(rho, 1e-12)).dir


async def _trial(metric: MetricSpec, x: np.ndarray, eps: float, eta: float, samples: int, seed: int,
                 index: int, opts: ShootOptions, semaphore: asyncio.Semaphore) -> RadiusTrial:
    gen = rng(seed, "convexity", metric.metric_id, index)
    # 先按固定顺序抽完全部样本，并发求值不影响种子序列
    rank_samples = [_sample_in_ball(metric, gen, x, eps, boundary=k % 2 == 0) for k in range(max(2, samples // 4))]
    pair_samples = [(_sample_in_ball(metric, gen, x, eps, boundary=k % 2 == 0),
                     _sample_in_ball(metric, gen, x, eps, boundary=k % 2 == 1)) for k in range(samples)]
    boundary_samples = [_sample_in_ball(metric, gen, x, eps, boundary=True) for _ in range(max(1, samples // 4))]

    def rank(X: np.ndarray) -> Optional[float]:
        try:
            return normalized_singular_value(metric, x, X, opts.step)
        except (IntegrationError, ConvexityError, np.linalg.LinAlgError):
            return None

    def pair(Y: np.ndarray, Z: np.ndarray) -> Optional[str]:
        try:
            y = exp_map(metric, x, Y, opts.step)
            z = exp_map(metric, x, Z, opts.step)
        except IntegrationError:
            return "domain_exit"
        try:
            res = connect(metric, y, z, opts)
        except ShootingError:
            return "non_convergence"
        if res.length >= eta:
            return "too_long"
        if res.geodesic is not None and not geodesic_contained(metric, res.geodesic, eta):
            return "escape"
        return None

    # 单射性：边界上的 X 打靶回来必须得到 X 本身，而不是更短的原像
    def injective(X: np.ndarray) -> Optional[str]:
        try:
            p = exp_map(metric, x, X, opts.step)
            back = connect(metric, x, p, opts)
        except (IntegrationError, ShootingError):
            return "injectivity"
        if back.length < F_value(metric, x, X) - 1e-7 * max(1.0, eps):
            return "multiple_solutions"
        return None

    async def run(fn, *args):
        async with semaphore:
            return await asyncio.to_thread(fn, *args)

    ranks, pairs, injections = await asyncio.gather(
        asyncio.gather(*[run(rank, X) for X in rank_samples]),
        asyncio.gather(*[run(pair, Y, Z) for Y, Z in pair_samples]),
        asyncio.gather(*[run(injective, X) for X in boundary_samples]),
    )

    failures: Dict[str, int] = {}
    for mode in ["domain_exit" for value in ranks if value is None] + list(pairs) + list(injections):
        if mode is not None:
            failures[mode] = failures.get(mode, 0) + 1
    singular = [value for value in ranks if value is not None]
    smallest = min(singular) if singular else np.inf
    if smallest < config.rank_tol:
        failures["rank"] = failures.get("rank", 0) + 1
    return RadiusTrial(eps, not failures, samples, failures, float(smallest))


async def estimate_convexity_radii_async(metric: MetricSpec, x: PointLike, grid: Sequence[float],
                                         samples_per_radius: Optional[int] = None, seed: int = 0,
                                         eta_factor: Optional[float] = None,
                                         opts: Optional[ShootOptions] = None,
                                         concurrency: Optional[int] = None) -> ConvexityReport:
    """
    自小到大扫描网格半径 ε：采样点对必须能以长度 < η 的测地线连接且留在 B_η 内，
    DExp 保持满秩，边界样本可以单射地打靶回来。遇到第一个失败的半径即停止。
    同一半径上的样本在线程池里并发求值，并发数由 verify.concurrency 限制。
    """
    x = coords_of(x, metric.n)
    grid = [float(r) for r in grid]
    if not grid or any(r <= 0 for r in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InputError(f"半径网格必须非空、为正且严格递增: {grid}")
    if not metric.contains(x):
        raise DomainError(f"基点 {x.tolist()} 不在度量 {metric.metric_id} 的定义域内")
    samples = config.samples_per_radius if samples_per_radius is None else int(samples_per_radius)
    factor = config.eta_factor if eta_factor is None else float(eta_factor)
    if factor < 1.0:
        raise InputError(f"eta_factor 不能小于 1，实际为 {factor}")
    opts = opts or ShootOptions(seed=seed)
    semaphore = asyncio.Semaphore(concurrency or config.verify_concurrency)

    trials: List[RadiusTrial] = []
    modes: Dict[str, int] = {}
    epsilon = 0.0
    for index, eps in enumerate(grid):
        trial = await _trial(metric, x, eps, factor * eps, samples, seed, index, opts, semaphore)
        trials.append(trial)
        for mode, count in trial.failures.items():
            modes[mode] = modes.get(mode, 0) + count
        if not trial.passed:
            log.warning(f"半径 ε = {eps:g} 未通过凸性检验: {trial.failures}")
            break
        epsilon = eps
        log.debug(f"半径 ε = {eps:g} 通过 (最小奇异值 {trial.min_singular_value:.3g})")

    impossible = epsilon == 0.0
    if impossible:
        log.warning(f"在最小的网格半径 {grid[0]:g} 上已经失败，无法给出凸邻域半径")
    return ConvexityReport(
        base_point=x.tolist(), epsilon=epsilon, eta=factor * epsilon, epsilon_tilde=epsilon / 3.0,
        eta_factor=factor, samples_tested=sum(t.pairs for t in trials), failure_modes=modes,
        trials=trials, impossible=impossible,
    )


def estimate_convexity_radii(metric: MetricSpec, x: PointLike, grid: Sequence[float],
                             samples_per_radius: Optional[int] = None, seed: int = 0,
                             eta_factor: Optional[float] = None, opts: Optional[ShootOptions] = None,
                             concurrency: Optional[int] = None) -> ConvexityReport:
    return asyncio.run(estimate_convexity_radii_async(metric, x, grid, samples_per_radius, seed, eta_factor,
                                                      opts, concurrency))


# --- 完备性 ---
@dataclass
class CompletenessProbe:
    base_point: List[float]
    t_max: float
    survival_times: List[float]
    directions: List[List[float]]

    @property
    def complete(self) -> bool:
        return all(t >= self.t_max for t in self.survival_times)

    def to_dict(self) -> dict:
        return dict(asdict(self), complete=self.complete)


def probe_completeness(metric: MetricSpec, p: PointLike, directions: int = 8, t_max: float = 5.0,
                       seed: int = 0, step: Optional[float] = None) -> CompletenessProbe:
    """
    从 p 出发沿单位速度测地线积分到 t_max，记录每个方向的存活时间。
    在完备度量上全部存活；在不完备的度量（例如单位圆盘上的欧氏度量）上会提前离开定义域。
    """
    p = coords_of(p, metric.n)
    gen = rng(seed, "completeness", metric.metric_id)
    times, dirs = [], []
    for _ in range(directions):
        X = indicatrix_point(metric, p, gen.normal(size=metric.n), 1.0).dir
        dirs.append(X.tolist())
        try:
            integrate_geodesic(metric, TangentVector(Point(p), X), t_max, step or config.exp_step)
            times.append(float(t_max))
        except DomainExitError as e:
            times.append(float(e.exit_time))
    return CompletenessProbe(p.tolist(), float(t_max), times, dirs)
