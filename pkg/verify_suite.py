"""
数值验证套件：每个检查在带种子的样本上计算残差，与 constants.CHECK_TOLERANCES
中声明的容差比较，并记录复现最大残差的见证数据。
"""
import asyncio
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn

from config import config
from connection import (
    InadmissiblePerturbation, check_path_condition, chern_coefficients, christoffel_symbols,
    make_admissible_perturbation, perturbed_spray_fn, spray_coefficients,
)
from connectivity import ShootOptions, connect
from constants import (
    CHECK_TOLERANCES, INADMISSIBLE_MIN_DEVIATION, INEQUALITY_STRICT_GAP, RADIAL_EQUALITY_TOL, RADIAL_STRICT_AMPLITUDE,
)
from geodesic_engine import (
    SampledCurve, curve_length, d_exp, exp_map, integrate_endpoints, integrate_geodesic, integrate_span,
    push_forward,
)
from metric_zoo import (
    INVARIANTS, ORACLE_INVARIANTS, F_value, Point, TangentVector, as_vector, check_metric_invariants, g_orthogonal,
    indicatrix_point, invariant_residual, metric_matrix, sample_base_point, sample_flags, tensor_at,
)
from metrics import MetricSpec, get_metric
from utils.exceptions import ConvexityError, DomainExitError, FinslerError, InputError, ShootingError
from utils.logger import console, log
from utils.seeding import rng

RADIAL_AMPLITUDES = (0.0, 0.02, 0.05, 0.1, 0.2)
RADIAL_EQUALITY_STEP_FACTOR = 0.25
INEQUALITY_TAUS = (0.0, 0.1, 1.0, 10.0)
MAX_RESAMPLES = 10


def json_safe(value):
    """把非有限浮点数（inf、nan）替换为 None，使报告是严格的 JSON。"""
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


@dataclass
class CheckReport:
    check: str
    metric: str
    samples: int
    max_residual: float
    tolerance: float
    violations: int = 0
    witness: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance and self.violations == 0

    def to_dict(self) -> dict:
        data = asdict(self)
        data["passed"] = self.passed
        return json_safe(data)


class _Worst:
    """跟踪最大残差及其见证。"""

    def __init__(self):
        self.value = -math.inf
        self.witness: dict = {}
        self.samples = 0

    def record(self, value: float, witness: dict):
        self.samples += 1
        if value >= self.value:
            self.value, self.witness = value, witness

    def report(self, check: str, metric: MetricSpec, violations: int = 0, **details) -> CheckReport:
        value = self.value if self.samples else 0.0
        return CheckReport(check, metric.metric_id, self.samples, value, CHECK_TOLERANCES[check],
                           violations, self.witness, details)


def _origin(metric: MetricSpec) -> np.ndarray:
    return np.zeros(metric.n) if metric.domain.kind == "all" else np.array(metric.domain.center)


def _orthogonal_direction(metric: MetricSpec, gen: np.random.Generator, x: np.ndarray, X: np.ndarray) -> np.ndarray:
    """与 X 关于 g_(x,X) 正交的带种子方向，g 长度等于 F(x, X)；投影退化时重新抽样。"""
    tensor = tensor_at(metric, x, X)
    F = F_value(metric, x, X)
    for _ in range(MAX_RESAMPLES):
        w = gen.normal(size=metric.n)
        Y = g_orthogonal(tensor, X, w)
        size = math.sqrt(max(tensor.inner(Y, Y), 0.0))
        if size > 1e-3 * math.sqrt(tensor.inner(w, w)):
            return Y * F / size
    raise InputError(f"无法在旗 (x = {x.tolist()}, X = {X.tolist()}) 处构造 g 正交方向")


# --- 度量代数 ---
def check_metric_algebra(metric: MetricSpec, samples: int = 100, seed: int = 0) -> CheckReport:
    inv = check_metric_invariants(metric, samples, seed)
    scored = [name for name in INVARIANTS if name not in ORACLE_INVARIANTS]
    worst = max(scored, key=lambda name: inv.residuals[name])
    witness = dict(inv.witnesses[worst], quantity=worst)
    return CheckReport("metric_algebra", metric.metric_id, samples, inv.residuals[worst],
                       CHECK_TOLERANCES["metric_algebra"], 0, witness, dict(inv.residuals))


def _replay_metric_algebra(metric: MetricSpec, w: dict) -> float:
    return invariant_residual(metric, w["quantity"], w)


# --- 能量守恒 ---
def _energy_drift(metric: MetricSpec, w: dict) -> float:
    init = TangentVector.at(w["x"], w["y"])
    return integrate_geodesic(metric, init, w["t_end"], w["step"]).max_drift


def check_energy_conservation(metric: MetricSpec, flags: int = 20, t_end: float = 1.0,
                              step: Optional[float] = None, seed: int = 0) -> CheckReport:
    """沿积分测地线 F(c, c') 的最大相对漂移。"""
    step = config.step if step is None else step
    gen = rng(seed, "energy", metric.metric_id)
    sampled = sample_flags(metric, gen, flags)
    if not sampled:
        return _Worst().report("energy_conservation", metric, domain_exits=0)
    ends = integrate_endpoints(metric, [f.x for f in sampled], [f.dir for f in sampled], t_end, step)
    worst, exits = _Worst(), 0
    for flag, error, drift in zip(sampled, ends.errors, ends.max_drift):
        if isinstance(error, DomainExitError):
            exits += 1
            continue
        if error is not None:
            raise error
        worst.record(float(drift), {"x": flag.x.tolist(), "y": flag.dir.tolist(), "t_end": t_end, "step": step})
    return worst.report("energy_conservation", metric, domain_exits=exits)


# --- Γ¹ 一致性 ---
def _chern_residual(metric: MetricSpec, w: dict) -> float:
    v = TangentVector.at(w["x"], w["y"])
    chern = chern_coefficients(metric, v)
    if w.get("part") == "christoffel":
        gamma = christoffel_symbols(metric, v.x)
        return float(np.max(np.abs(chern.gamma1 - gamma))) / max(1.0, float(np.max(np.abs(gamma))))
    two_G = 2.0 * spray_coefficients(metric, v.x, v.dir)
    F = F_value(metric, v.x, v.dir)
    return float(np.linalg.norm(chern.contract(v.dir, v.dir) - two_G)) / max(float(np.linalg.norm(two_G)), F * F)


def check_chern_consistency(metric: MetricSpec, flags: int = 50, seed: int = 0) -> CheckReport:
    """Γ¹(y, y) = 2G；黎曼度量上 Γ¹ 还必须与只依赖 x 的 Christoffel 符号一致。"""
    gen = rng(seed, "chern", metric.metric_id)
    riemannian = metric.kind in ("euclidean", "riemannian_conformal")
    worst = _Worst()
    for flag in sample_flags(metric, gen, flags):
        w = {"x": flag.x.tolist(), "y": flag.dir.tolist(), "part": "spray"}
        worst.record(_chern_residual(metric, w), w)
        if riemannian:
            w = dict(w, part="christoffel")
            worst.record(_chern_residual(metric, w), w)
    return worst.report("chern_consistency", metric, riemannian_reduction=riemannian)


# --- 路径条件 ---
def _path_residual(metric: MetricSpec, w: dict) -> float:
    sol = integrate_geodesic(metric, TangentVector.at(w["x"], w["y"]), w["t_end"], w["step"])
    F = F_value(metric, sol.x[0], sol.v[0])
    return check_path_condition(metric, sol, w["stride"]).max_residual / (F * F)


def check_path_residuals(metric: MetricSpec, flags: int = 4, t_end: float = 1.0, step: Optional[float] = None,
                         stride: int = 10, seed: int = 0) -> CheckReport:
    """积分得到的测地线满足 c'' + Γ¹(c', c') = 0。"""
    step = config.exp_step if step is None else step
    gen = rng(seed, "path", metric.metric_id)
    worst = _Worst()
    for flag in sample_flags(metric, gen, flags):
        w = {"x": flag.x.tolist(), "y": flag.dir.tolist(), "t_end": t_end, "step": step, "stride": stride}
        try:
            worst.record(_path_residual(metric, w), w)
        except DomainExitError:
            continue
    return worst.report("path_condition", metric)


# --- Gauss 引理 ---
def _gauss_residuals(metric: MetricSpec, witnesses: Sequence[dict]) -> List[float]:
    """全部旗的 Exp X、DExp·X 与 DExp·Y 在同一批中推前（见证共用步长）。"""
    if not witnesses:
        return []
    xs = np.array([as_vector(w["x"], metric.n, "x") for w in witnesses])
    Xs = np.array([as_vector(w["X"], metric.n, "X") for w in witnesses])
    Ys = np.array([as_vector(w["Y"], metric.n, "Y") for w in witnesses])
    points, pushed = push_forward(metric, np.concatenate([xs, xs]), np.concatenate([Xs, Xs]),
                                  np.concatenate([Xs, Ys]), witnesses[0]["step"])
    count = len(witnesses)
    residuals = []
    for x, X, p, DX, DY in zip(xs, Xs, points[:count], pushed[:count], pushed[count:]):
        F = F_value(metric, x, X)
        norm_identity = abs(F - F_value(metric, p, DX)) / F
        g = metric_matrix(metric, p, DX)
        orthogonality = abs(DX @ g @ DY) / (F * math.sqrt(DY @ g @ DY))
        residuals.append(max(norm_identity, orthogonality))
    return residuals


def _gauss_residual(metric: MetricSpec, w: dict) -> float:
    return _gauss_residuals(metric, [w])[0]


def check_gauss_lemma(metric: MetricSpec, flags: int = 100, seed: int = 0, step: Optional[float] = None) -> CheckReport:
    """
    F(x, X) = F(Exp_x X, DExp·X)，并且 g_(Exp X, DExp·X)(DExp·X, DExp·Y) = 0，
    其中 Y 与 X 关于 g_(x,X) 正交。
    """
    step = config.exp_step if step is None else step
    gen = rng(seed, "gauss", metric.metric_id)
    witnesses = []
    for flag in sample_flags(metric, gen, flags):
        Y = _orthogonal_direction(metric, gen, flag.x, flag.dir)
        witnesses.append({"x": flag.x.tolist(), "X": flag.dir.tolist(), "Y": Y.tolist(), "step": step})
    worst = _Worst()
    for w, residual in zip(witnesses, _gauss_residuals(metric, witnesses)):
        worst.record(residual, w)
    return worst.report("gauss_lemma", metric)


# --- 径向极小性 ---
def _radial_curve(X: np.ndarray, W: np.ndarray, amplitude: float, samples: int) -> SampledCurve:
    return SampledCurve.from_function(
        lambda s: s * X + amplitude * math.sin(math.pi * s) * W, 0.0, 1.0, samples,
        derivative=lambda s: X + amplitude * math.pi * math.cos(math.pi * s) * W,
    )


def _radial_margins(metric: MetricSpec, witnesses: Sequence[dict]) -> List[float]:
    """
    每条径向曲线的 L(Exp_x ∘ b̃) - F(x, X)。所有见证共用基点，
    步长相同的曲线的点和推前速度在同一批中积分。
    """
    if not witnesses:
        return []
    x = as_vector(witnesses[0]["x"], metric.n, "x")
    margins: List[float] = [0.0] * len(witnesses)
    for step in sorted({w["step"] for w in witnesses}):
        group = [k for k, w in enumerate(witnesses) if w["step"] == step]
        curves, speeds = [], []
        for k in group:
            w = witnesses[k]
            X = as_vector(w["X"], metric.n, "X")
            curves.append(_radial_curve(X, as_vector(w["W"], metric.n, "W"), w["amplitude"], w["samples"]))
            speeds.append(F_value(metric, x, X))
        points, velocities = push_forward(metric, x, np.concatenate([c.points for c in curves]),
                                          np.concatenate([c.velocity_array() for c in curves]), step)
        start = 0
        for k, curve, F in zip(group, curves, speeds):
            end = start + len(curve.s)
            image = SampledCurve(curve.s, points[start:end], velocities[start:end])
            margins[k] = curve_length(metric, image) - F
            start = end
    return margins


def _replay_radial(metric: MetricSpec, w: dict) -> float:
    return max(0.0, -_radial_margins(metric, [w])[0])


def check_radial_minimality(metric: MetricSpec, x: Optional[Sequence[float]] = None, curves: int = 12,
                            samples: int = 17, seed: int = 0, step: Optional[float] = None) -> CheckReport:
    """
    b̃(s) = sX + φ(s)W，φ(s) = a sin(πs)，W 与 X 关于 g_(x,X) 正交：
    像曲线 Exp_x ∘ b̃ 的长度不小于 F(x, X)，a >= 5% 时严格更长，a = 0 时相等。
    """
    step = config.exp_step if step is None else step
    x = _origin(metric) if x is None else as_vector(x, metric.n, "x")
    gen = rng(seed, "radial", metric.metric_id)
    witnesses = []
    for k in range(curves):
        X = indicatrix_point(metric, x, gen.normal(size=metric.n), gen.uniform(0.2, 1.0)).dir
        W = _orthogonal_direction(metric, gen, x, X)
        amplitude = RADIAL_AMPLITUDES[k % len(RADIAL_AMPLITUDES)]
        # a = 0 的像曲线用更细的步长，等式容差低于 RK4 在默认步长下的误差
        witnesses.append({"x": x.tolist(), "X": X.tolist(), "W": W.tolist(), "amplitude": amplitude,
                          "samples": samples,
                          "step": step * RADIAL_EQUALITY_STEP_FACTOR if amplitude == 0.0 else step})

    worst, violations = _Worst(), 0
    equality = 0.0
    for w, margin in zip(witnesses, _radial_margins(metric, witnesses)):
        worst.record(max(0.0, -margin), dict(w, margin=margin))
        if w["amplitude"] == 0.0:
            equality = max(equality, abs(margin))
            if abs(margin) > RADIAL_EQUALITY_TOL:
                violations += 1
        elif w["amplitude"] >= RADIAL_STRICT_AMPLITUDE and margin <= 0.0:
            violations += 1
    return worst.report("radial_minimality", metric, violations, radial_equality=equality)


# --- 基本不等式 ---
def _inequality_gap(metric: MetricSpec, w: dict) -> float:
    x = as_vector(w["x"], metric.n, "x")
    Z = as_vector(w["Z"], metric.n, "Z")
    Y = as_vector(w["Y"], metric.n, "Y")
    F = F_value(metric, x, Z)
    return (F_value(metric, x, Y + Z) - F) / F


def _replay_inequality(metric: MetricSpec, w: dict) -> float:
    return max(0.0, -_inequality_gap(metric, w))


def check_fundamental_inequality(metric: MetricSpec, trials: int = 200, seed: int = 0) -> CheckReport:
    """F(x, Y + Z) >= F(x, Z)，Y 与 Z 关于 g_(x,Z) 正交，等号当且仅当 Y = 0。"""
    gen = rng(seed, "inequality", metric.metric_id)
    worst, violations = _Worst(), 0
    for k in range(trials):
        x = sample_base_point(metric, gen)
        Z = gen.normal(size=metric.n)
        tau = INEQUALITY_TAUS[k % len(INEQUALITY_TAUS)]
        Y = tau * _orthogonal_direction(metric, gen, x, Z)
        w = {"x": x.tolist(), "Z": Z.tolist(), "Y": Y.tolist(), "tau": tau}
        gap = _inequality_gap(metric, w)
        worst.record(max(0.0, -gap), w)
        if tau == 0.0 and abs(gap) > INEQUALITY_STRICT_GAP:
            violations += 1
        elif tau > 0.0 and gap <= INEQUALITY_STRICT_GAP:
            violations += 1
    return worst.report("fundamental_inequality", metric, violations)


# --- 二次增长 ---
def _growth_distance(metric: MetricSpec, x: Sequence[float], point: Sequence[float], X: Sequence[float],
                     opts: ShootOptions) -> float:
    """d(x, point)，以打到切点的初速度 X 作附加初值；窗口内的点都靠近切点，不做多起点。"""
    return connect(metric, x, point, replace(opts, multistart=0, extra_guesses=[list(X)])).length


def _growth_residual(metric: MetricSpec, w: dict) -> float:
    opts = ShootOptions(step=w["step"], tol=w["tol"], seed=w["seed"])
    d = _growth_distance(metric, w["x"], w["point"], w["X"], opts)
    return max(0.0, w["mu"] / w["epsilon"] * w["t"] ** 2 - (d - w["d0"]))


def check_quadratic_growth(metric: MetricSpec, x: Optional[Sequence[float]] = None, epsilon: float = 0.2,
                           mus: Sequence[float] = (0.4,), seed: int = 0, step: Optional[float] = None,
                           halvings: int = 5, opts: Optional[ShootOptions] = None) -> CheckReport:
    """
    c 在 p = Exp_x(εu/F(x,u)) 处与 ∂B_ε(x) 相切，速度取 Gauss 引理推前的 g 正交方向。
    μ 以 1/ε 为单位（欧氏情形 d(t) - ε ≈ t²/2ε，即 μ = 0.5）。对每个 μ 从 ρ = ε 起逐次减半，
    求窗口内 d(x, c(t)) - d(x, c(0)) >= (μ/ε) t² 成立的半宽 ρ，并报告拟合出的增长系数。
    只有最小的 μ 必须找到窗口，更大的 μ 只报告 (μ, ρ)。
    """
    step = config.exp_step if step is None else step
    opts = opts or ShootOptions(seed=seed, step=step)
    if not mus or any(not 0.0 < mu < 1.0 for mu in mus):
        raise InputError(f"μ 必须落在 (0, 1) 内: {list(mus)}")
    x = _origin(metric) if x is None else as_vector(x, metric.n, "x")
    gen = rng(seed, "growth", metric.metric_id)
    u = gen.normal(size=metric.n)
    X = epsilon * u / F_value(metric, x, u)
    p = exp_map(metric, x, X, step)
    v = d_exp(metric, x, X, _orthogonal_direction(metric, gen, x, X), step=step)
    v = v / F_value(metric, p, v)

    half = epsilon
    while True:
        try:
            curve = integrate_span(metric, TangentVector(Point(p), v), -half, half, step)
            break
        except DomainExitError:
            half *= 0.5
            if half < 1e-3 * epsilon:
                raise
    d0 = _growth_distance(metric, x, p, X, opts)

    profile: Dict[float, float] = {0.0: d0}

    def dist_at(t: float) -> Optional[float]:
        if t not in profile:
            point, _ = curve.state_at(t)
            try:
                profile[t] = _growth_distance(metric, x, point, X, opts)
            except (ShootingError, DomainExitError):
                return None
        return profile[t]

    worst, violations = _Worst(), 0
    fits = []
    required = min(mus)
    for mu in sorted(mus):
        coefficient = mu / epsilon

        def window_ok(rho: float) -> bool:
            for t in (-rho, -0.5 * rho, 0.5 * rho, rho):
                d = dist_at(t)
                if d is None or d - d0 < coefficient * t * t - CHECK_TOLERANCES["quadratic_growth"]:
                    return False
            return True

        # 逐次减半时 ±ρ/2 与下一个窗口的 ±ρ 重合，距离只算一次
        rho = half
        for _ in range(halvings):
            if window_ok(rho):
                break
            rho *= 0.5
        else:
            rho = rho if window_ok(rho) else 0.0
        if rho == 0.0:
            violations += int(mu == required)
            fits.append({"mu": mu, "coefficient": coefficient, "rho": 0.0, "fitted_mu": None})
            continue
        ts = [t for t in sorted(profile) if t != 0.0 and abs(t) <= rho and profile.get(t) is not None]
        fitted = min((profile[t] - d0) / (t * t) for t in ts)
        fits.append({"mu": mu, "coefficient": coefficient, "rho": rho, "fitted_mu": fitted})
        if mu != required:
            continue
        for t in ts:
            point, _ = curve.state_at(t)
            w = {"x": x.tolist(), "point": point.tolist(), "X": X.tolist(), "t": t, "mu": mu, "epsilon": epsilon,
                 "d0": d0, "step": opts.step, "tol": opts.tol, "seed": opts.seed}
            worst.record(max(0.0, coefficient * t * t - (profile[t] - d0)), w)
    return worst.report("quadratic_growth", metric, violations, epsilon=epsilon, fits=fits,
                        tangent_point=p.tolist(), velocity=v.tolist())


# --- 联络族不变性 ---
def _family_deviation(metric: MetricSpec, w: dict, inadmissible: bool = False) -> float:
    seed_vector = as_vector(w["seed_vector"], metric.n, "seed_vector")
    if inadmissible:
        pert = InadmissiblePerturbation(metric, seed_vector)
    else:
        pert = make_admissible_perturbation(metric, seed_vector, verify_flags=10, seed=w["seed"])
    init = TangentVector.at(w["x"], w["y"])
    base = integrate_geodesic(metric, init, w["t_end"], w["step"])
    moved = integrate_geodesic(metric, init, w["t_end"], w["step"], spray_fn=perturbed_spray_fn(pert))
    return float(np.linalg.norm(moved.endpoint - base.endpoint))


def check_connection_family_invariance(metric: MetricSpec, flags: int = 6, seeds: Sequence[int] = (0, 1),
                                       t_end: float = 1.0, step: Optional[float] = None,
                                       seed: int = 0) -> CheckReport:
    """
    可容许扰动 Ñ = h ⊗ V 不改变路径：扰动前后测地线终点重合。
    对照组在欧氏度量上用不可容许的 δ_jk V^i，必须产生可见的偏差。
    """
    step = config.exp_step if step is None else step
    gen = rng(seed, "family", metric.metric_id)
    worst = _Worst()
    for s in seeds:
        seed_vector = rng(seed, "family-seed", metric.metric_id, s).normal(size=metric.n)
        for flag in sample_flags(metric, gen, max(1, flags // len(seeds))):
            w = {"x": flag.x.tolist(), "y": flag.dir.tolist(), "seed_vector": seed_vector.tolist(),
                 "seed": s, "t_end": t_end, "step": step}
            try:
                worst.record(_family_deviation(metric, w), w)
            except DomainExitError:
                continue

    control_metric = get_metric({"kind": "euclidean", "n": metric.n})
    e1, e2 = np.eye(metric.n)[0], np.eye(metric.n)[1]
    control = {"x": [0.0] * metric.n, "y": e1.tolist(), "seed_vector": e2.tolist(), "seed": seed,
               "t_end": t_end, "step": step}
    control_deviation = _family_deviation(control_metric, control, inadmissible=True)
    violations = int(control_deviation < INADMISSIBLE_MIN_DEVIATION)
    return worst.report("connection_family_invariance", metric, violations,
                        control_deviation=control_deviation)


# --- 见证重放 ---
REPLAYERS: Dict[str, Callable[[MetricSpec, dict], float]] = {
    "metric_algebra": _replay_metric_algebra,
    "energy_conservation": _energy_drift,
    "chern_consistency": _chern_residual,
    "path_condition": _path_residual,
    "gauss_lemma": _gauss_residual,
    "radial_minimality": _replay_radial,
    "fundamental_inequality": _replay_inequality,
    "quadratic_growth": _growth_residual,
    "connection_family_invariance": _family_deviation,
}


def replay_witness(metric: MetricSpec, report: CheckReport) -> float:
    """按报告中的见证重新计算最大残差。"""
    if not report.witness:
        raise InputError(f"检查 {report.check} 的报告没有见证数据")
    return float(REPLAYERS[report.check](metric, report.witness))


# --- 整套运行 ---
@dataclass
class SuiteReport:
    seed: int
    metrics: List[str]
    reports: List[CheckReport] = field(default_factory=list)
    rejected: Dict[str, str] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.rejected and all(r.passed for r in self.reports)

    def failures(self) -> List[CheckReport]:
        return [r for r in self.reports if not r.passed]

    def to_dict(self) -> dict:
        return json_safe({
            "seed": self.seed,
            "metrics": self.metrics,
            "passed": self.passed,
            "rejected": self.rejected,
            "reports": [r.to_dict() for r in self.reports],
        })


def suite_checks(settings: Optional[dict] = None) -> Dict[str, Callable[[MetricSpec, int], CheckReport]]:
    """run_all 使用的检查表（度量代数除外，它作为准入检查单独运行）。"""
    s = dict(config.verify, **(settings or {}))
    return {
        "energy_conservation": lambda m, seed: check_energy_conservation(m, s["energy_flags"], seed=seed),
        "chern_consistency": lambda m, seed: check_chern_consistency(m, s["chern_flags"], seed=seed),
        "path_condition": lambda m, seed: check_path_residuals(m, seed=seed),
        "gauss_lemma": lambda m, seed: check_gauss_lemma(m, s["gauss_flags"], seed=seed),
        "radial_minimality": lambda m, seed: check_radial_minimality(m, curves=s["radial_curves"], seed=seed),
        "fundamental_inequality": lambda m, seed: check_fundamental_inequality(m, s["inequality_trials"], seed=seed),
        "quadratic_growth": lambda m, seed: check_quadratic_growth(
            m, epsilon=s["growth_epsilon"], mus=s["growth_mus"], seed=seed),
        "connection_family_invariance": lambda m, seed: check_connection_family_invariance(
            m, s["family_flags"], seed=seed),
    }


def _guarded(check: str, metric: MetricSpec, fn: Callable[[], CheckReport]) -> CheckReport:
    try:
        return fn()
    except ConvexityError:
        raise
    except FinslerError as e:
        log.error(f"检查 {check} 在度量 {metric.metric_id} 上出错: {e}")
        return CheckReport(check, metric.metric_id, 0, math.inf, CHECK_TOLERANCES[check], 1,
                           details={"error": str(e)})


async def run_all_async(metrics: Sequence[MetricSpec], seed: int = 0, settings: Optional[dict] = None,
                        concurrency: Optional[int] = None) -> SuiteReport:
    """
    每个 (度量, 检查) 一个任务，在线程中运行并由信号量限流；
    报告按索引重新组装，与调度顺序无关。
    """
    s = dict(config.verify, **(settings or {}))
    suite = SuiteReport(seed, [m.metric_id for m in metrics])
    if not metrics:
        return suite
    checks = suite_checks(s)
    semaphore = asyncio.Semaphore(concurrency or config.verify_concurrency)

    with Progress(
        SpinnerColumn(), TextColumn("[progress.description]{task.description}"),
        BarColumn(), TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        TextColumn("({task.completed}/{task.total})"), console=console
    ) as progress:
        total = len(metrics) * (len(checks) + 1)
        task = progress.add_task(f"[cyan]验证 {len(metrics)} 个度量", total=total)

        async def run(check: str, metric: MetricSpec, fn: Callable[[], CheckReport]):
            async with semaphore:
                try:
                    return await asyncio.to_thread(_guarded, check, metric, fn)
                except ConvexityError as e:
                    return e
                finally:
                    progress.update(task, advance=1)

        # 准入：度量代数检查；非强凸的度量在这里被拒绝
        admission = await asyncio.gather(*[
            run("metric_algebra", m, lambda m=m: check_metric_algebra(m, s["algebra_flags"], seed))
            for m in metrics
        ])
        accepted = []
        for metric, result in zip(metrics, admission):
            if isinstance(result, ConvexityError):
                log.error(f"度量 {metric.metric_id} 被拒绝: {result}")
                suite.rejected[metric.metric_id] = str(result)
                progress.update(task, advance=len(checks))
            else:
                suite.reports.append(result)
                accepted.append(metric)

        jobs = [(metric, name, fn) for metric in accepted for name, fn in checks.items()]
        results = await asyncio.gather(*[
            run(name, metric, lambda metric=metric, fn=fn: fn(metric, seed)) for metric, name, fn in jobs
        ])
        for (metric, name, _), result in zip(jobs, results):
            if isinstance(result, ConvexityError):
                suite.rejected.setdefault(metric.metric_id, str(result))
                result = CheckReport(name, metric.metric_id, 0, math.inf, CHECK_TOLERANCES[name], 1,
                                     details={"error": str(result)})
            suite.reports.append(result)

    order = {m.metric_id: i for i, m in enumerate(metrics)}
    names = ["metric_algebra"] + list(checks)
    suite.reports.sort(key=lambda r: (order[r.metric], names.index(r.check)))
    for r in suite.failures():
        log.warning(f"检查 {r.check} 在度量 {r.metric} 上未通过: 残差 {r.max_residual:.3g} (容差 {r.tolerance:.1e}), "
                    f"违例 {r.violations}")
    return suite


def run_all(metrics: Sequence[MetricSpec], seed: int = 0, settings: Optional[dict] = None,
            concurrency: Optional[int] = None) -> SuiteReport:
    return asyncio.run(run_all_async(metrics, seed, settings, concurrency))
