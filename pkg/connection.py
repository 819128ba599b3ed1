"""
测地喷射、Berwald 非线性联络、Chern-Rund 系数 Γ¹ 以及可容许扰动族。

喷射系数取 Euler-Lagrange 形式
    G^i = 1/4 g^{il} (y^k d²F²/dy^l dx^k - dF²/dx^l),
测地线方程为 x'' + 2G(x, x') = 0。非线性联络取 Berwald 选择 P = dG/dy。
只有 Γ¹ 和 P 影响底流形上的路径，因此竖直系数块不予实现。
"""
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from constants import JET_FD_STEP
from metric_zoo import (
    TangentVector, as_vector, check_flag, check_flag_batch, fundamental_tensor, l2_jet, l2_jet_batch,
    metric_matrix, sample_flags,
)
from metrics import MetricSpec
from utils.exceptions import ConvexityError, InputError
from utils.logger import log
from utils.seeding import rng

SprayFn = Callable[[MetricSpec, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class NonlinearConnection:
    G: np.ndarray
    P: np.ndarray   # P[i, j] = dG^i / dy^j
    at: TangentVector


@dataclass(frozen=True, eq=False)
class ChernCoefficients:
    gamma1: np.ndarray   # gamma1[i, j, k] = Γ^{1i}_{jk}
    at: TangentVector
    asymmetry: float     # 对称化之前的下标 (j, k) 不对称量

    def contract(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.einsum("ijk,j,k->i", self.gamma1, u, v)


# --- 喷射 ---
def spray_coefficients(metric: MetricSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """G^i(x, y) 的快速路径：一次 (x, y) HyperJet 求值，不做正定性检查。"""
    n = metric.n
    if metric.x_independent:
        check_flag(metric, x, y, derivative=True)
        return np.zeros(n)
    L = l2_jet(metric, x, y)
    g = 0.5 * L.hess[n:, n:]
    rhs = L.hess[n:, :n] @ y - L.grad[:n]
    try:
        return 0.25 * np.linalg.solve(g, rhs)
    except np.linalg.LinAlgError:
        raise ConvexityError(f"基本张量在旗 (x = {x.tolist()}, y = {y.tolist()}) 处奇异") from None


def spray_batch(metric: MetricSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """spray_coefficients 的批量版本，X、Y 形如 (B, n)；任一行失败时整批抛出。"""
    n = metric.n
    if metric.x_independent:
        check_flag_batch(metric, X, Y, derivative=True)
        return np.zeros_like(Y)
    L = l2_jet_batch(metric, X, Y)
    g = 0.5 * L.hess[:, n:, n:]
    rhs = np.einsum("bij,bj->bi", L.hess[:, n:, :n], Y) - L.grad[:, :n]
    try:
        return 0.25 * np.linalg.solve(g, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise ConvexityError("批量旗中有基本张量奇异") from None


def spray_jacobian(metric: MetricSpec, x: np.ndarray, y: np.ndarray, method: str = "central",
                   spray_fn: SprayFn = spray_coefficients) -> np.ndarray:
    """P = dG/dy。central 为二阶中心差分；richardson 为四点外推，两者相互独立。"""
    n = metric.n
    h = JET_FD_STEP * float(np.linalg.norm(y))

    def column(j: int, step: float) -> np.ndarray:
        e = np.zeros(n)
        e[j] = step
        return (spray_fn(metric, x, y + e) - spray_fn(metric, x, y - e)) / (2.0 * step)

    P = np.empty((n, n))
    for j in range(n):
        if method == "central":
            P[:, j] = column(j, h)
        elif method == "richardson":
            P[:, j] = (4.0 * column(j, 0.5 * h) - column(j, h)) / 3.0
        else:
            raise InputError(f"未知的 P 计算方法 {method!r}")
    return P


def spray_base_jacobian(metric: MetricSpec, x: np.ndarray, y: np.ndarray,
                        spray_fn: SprayFn = spray_coefficients) -> np.ndarray:
    """dG/dx，变分方程使用。"""
    n = metric.n
    h = JET_FD_STEP * (1.0 + float(np.linalg.norm(x)))
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (spray_fn(metric, x + e, y) - spray_fn(metric, x - e, y)) / (2.0 * h)
    return J


def spray(metric: MetricSpec, v: TangentVector, method: str = "central") -> NonlinearConnection:
    x = as_vector(v.base.coords, metric.n, "x")
    y = as_vector(v.dir, metric.n, "y")
    fundamental_tensor(metric, v)  # 非强凸时抛出 ConvexityError
    return NonlinearConnection(spray_coefficients(metric, x, y), spray_jacobian(metric, x, y, method), v)


# --- Γ¹ ---
def _tensor_derivatives(metric: MetricSpec, x: np.ndarray, y: np.ndarray):
    """对精确的 g 做中心差分：dgx[l, j, k] = d_l g_jk，dgy[l, j, k] = d_l^ g_jk。"""
    n = metric.n
    hx = JET_FD_STEP * (1.0 + float(np.linalg.norm(x)))
    hy = JET_FD_STEP * float(np.linalg.norm(y))
    dgx = np.empty((n, n, n))
    dgy = np.empty((n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = 1.0
        dgx[l] = (metric_matrix(metric, x + hx * e, y) - metric_matrix(metric, x - hx * e, y)) / (2.0 * hx)
        dgy[l] = (metric_matrix(metric, x, y + hy * e) - metric_matrix(metric, x, y - hy * e)) / (2.0 * hy)
    return dgx, dgy


def chern_coefficients(metric: MetricSpec, v: TangentVector, symmetrize: bool = True) -> ChernCoefficients:
    """
    2Γ^{1i}_{jk} = g^{im}(δ_j g_mk + δ_k g_mj - δ_m g_jk)，
    其中水平导数 δ_l = d_l - P^h_l d_h^（Berwald 联络下即 Chern-Rund 系数）。
    """
    x = as_vector(v.base.coords, metric.n, "x")
    y = as_vector(v.dir, metric.n, "y")
    tensor = fundamental_tensor(metric, v)
    P = spray_jacobian(metric, x, y)
    dgx, dgy = _tensor_derivatives(metric, x, y)
    delta = dgx - np.einsum("hl,hjk->ljk", P, dgy)
    A = np.einsum("jmk->mjk", delta) + np.einsum("kmj->mjk", delta) - delta
    gamma = 0.5 * np.einsum("im,mjk->ijk", tensor.g_inv, A)
    asymmetry = float(np.max(np.abs(gamma - gamma.transpose(0, 2, 1))))
    if symmetrize:
        gamma = 0.5 * (gamma + gamma.transpose(0, 2, 1))
    return ChernCoefficients(gamma, v, asymmetry)


def christoffel_symbols(metric: MetricSpec, x: np.ndarray) -> np.ndarray:
    """仅依赖 x 的黎曼 Christoffel 符号（度量必须是黎曼的，例如共形度量）。"""
    x = as_vector(x, metric.n, "x")
    e1 = np.eye(metric.n)[0]
    ginv = np.linalg.inv(metric_matrix(metric, x, e1))
    dg, _ = _tensor_derivatives(metric, x, e1)
    A = np.einsum("jmk->mjk", dg) + np.einsum("kmj->mjk", dg) - dg
    return 0.5 * np.einsum("im,mjk->ijk", ginv, A)


@dataclass(frozen=True)
class PathResidual:
    max_residual: float
    worst_index: int
    samples: int


def check_path_condition(metric: MetricSpec, sol, stride: int = 1) -> PathResidual:
    """
    沿曲线检查 c'' + Γ¹(c', c') 的水平分量。
    测地线解使用积分器记录的加速度，其他采样曲线对速度做样条求导。
    """
    points, velocities, accelerations = sol.kinematics()
    worst, worst_index = 0.0, 0
    indices = range(0, len(points), max(1, stride))
    for k in indices:
        chern = chern_coefficients(metric, TangentVector.at(points[k], velocities[k]))
        r = float(np.linalg.norm(accelerations[k] + chern.contract(velocities[k], velocities[k])))
        if r > worst:
            worst, worst_index = r, k
    return PathResidual(worst, worst_index, len(indices))


# --- 可容许扰动 ---
@dataclass(frozen=True, eq=False)
class AdmissiblePerturbation:
    """
    Ñ^i_jk(x, y) = h_jk(x, y) V^i(x, y)，h 为角度量 g_jk - l_j l_k，
    V 为 seed 减去其在 y 上的 g 投影（零次齐次，且 l(V) = 0）。
    """
    metric: MetricSpec
    seed: np.ndarray
    verification: Dict[str, float] = field(default_factory=dict)

    def _pieces(self, x: np.ndarray, y: np.ndarray):
        L = l2_jet(self.metric, x, y, fiber_only=True)
        g = 0.5 * L.hess
        F = np.sqrt(L.value)
        ell = 0.5 * L.grad / F   # dF/dy = (dF²/dy) / 2F
        return g, ell, F

    def vector(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        g, _, _ = self._pieces(x, y)
        return self.seed - (self.seed @ g @ y) / (y @ g @ y) * y

    def angular_metric(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        g, ell, _ = self._pieces(x, y)
        return g - np.outer(ell, ell)

    def tensor(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("i,jk->ijk", self.vector(x, y), self.angular_metric(x, y))

    def contraction(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Ñ^i_jk y^j y^k = h(y, y) V^i。"""
        g, ell, _ = self._pieces(x, y)
        V = self.seed - (self.seed @ g @ y) / (y @ g @ y) * y
        hyy = y @ g @ y - (ell @ y) ** 2
        return hyy * V


@dataclass(frozen=True, eq=False)
class InadmissiblePerturbation(AdmissiblePerturbation):
    """对照组：Ñ^i_jk = δ_jk V^i，违反 Ñ(y, y) = 0。"""

    def tensor(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.einsum("i,jk->ijk", self.vector(x, y), np.eye(self.metric.n))

    def contraction(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return float(y @ y) * self.vector(x, y)


def make_admissible_perturbation(metric: MetricSpec, seed_vector, verify_flags: int = 50,
                                 seed: int = 0) -> AdmissiblePerturbation:
    seed_vector = as_vector(seed_vector, metric.n, "seed_vector")
    pert = AdmissiblePerturbation(metric, seed_vector)
    gen = rng(seed, "admissible-perturbation", metric.metric_id)
    worst = {"n_yy": 0.0, "ell_v": 0.0, "homogeneity": 0.0}
    for flag in sample_flags(metric, gen, verify_flags):
        x, y = flag.base.coords, flag.dir
        _, ell, F = pert._pieces(x, y)
        V = pert.vector(x, y)
        scale = max(1.0, float(np.linalg.norm(seed_vector)))
        worst["n_yy"] = max(worst["n_yy"], float(np.max(np.abs(pert.contraction(x, y)))) / (F * F * scale))
        worst["ell_v"] = max(worst["ell_v"], abs(float(ell @ V)) / scale)
        scaled = pert.tensor(x, 3.0 * y) - pert.tensor(x, y)
        worst["homogeneity"] = max(worst["homogeneity"], float(np.max(np.abs(scaled))) / scale)
    pert.verification.update(worst)
    if worst["n_yy"] > 1e-10 or worst["ell_v"] > 1e-10 or worst["homogeneity"] > 1e-8:
        log.warning(f"扰动可容许性验证偏差较大: {worst}")
    return pert


def perturbed_spray(metric: MetricSpec, v: TangentVector, pert: AdmissiblePerturbation) -> np.ndarray:
    """G^i + 1/2 Ñ^i_jk y^j y^k；可容许扰动下与 G 一致。"""
    x = as_vector(v.base.coords, metric.n, "x")
    y = as_vector(v.dir, metric.n, "y")
    return spray_coefficients(metric, x, y) + 0.5 * pert.contraction(x, y)


def perturbed_spray_fn(pert: AdmissiblePerturbation) -> SprayFn:
    """供积分器使用的数组版本。"""
    def fn(metric: MetricSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return spray_coefficients(metric, x, y) + 0.5 * pert.contraction(x, y)
    return fn
