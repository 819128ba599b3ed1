# --- 零截面 ---
# |y| < Y_MIN_SCALE * (1 + |x|) 的旗被排除在所有求导运算之外
Y_MIN_SCALE = 1e-8

def y_min_tol(x_norm: float) -> float:
    return Y_MIN_SCALE * (1.0 + x_norm)

# 命令行容差覆盖的下限
MIN_TOLERANCE = 1e-14

# --- 数值差分步长 ---
JET_FD_STEP = 1e-5            # 对精确 Hessian 再做中心差分（三阶导数、P = dG/dy）
ORACLE_FD_STEP = 1e-4         # 仅供测试的中心差分参照路径
DEXP_FD_SCALE = 1e-5          # d_exp: h = DEXP_FD_SCALE * (1 + |X|)

# --- 度量验证 ---
HOMOGENEITY_SAMPLES = 32
HOMOGENEITY_RTOL = 1e-7
RANDERS_VALIDATION_SAMPLES = 32
SYMMETRY_TOL = 1e-10

# --- 打靶 ---
MAX_DAMPING_HALVINGS = 12
DISTINCT_SOLUTION_TOL = 1e-6
MULTISTART_SCALES = (0.5,)     # 多起点之外再加的缩短初值 s X₀

# --- 验证套件容差表（所有检查只从这里读容差） ---
CHECK_TOLERANCES = {
    "metric_algebra": 1e-6,
    "energy_conservation": 1e-6,
    "chern_consistency": 1e-6,
    "path_condition": 1e-6,
    "gauss_lemma": 1e-5,
    "radial_minimality": 1e-6,
    "fundamental_inequality": 1e-9,
    "quadratic_growth": 1e-7,
    "connection_family_invariance": 1e-8,
}

# 检查的附加阈值
RADIAL_STRICT_AMPLITUDE = 0.05      # |phi| >= 0.05 F(x,X) 时要求严格变长
RADIAL_EQUALITY_TOL = 1e-9          # a = 0 时像曲线就是测地线本身，长度必须等于 F(x, X)
INEQUALITY_STRICT_GAP = 1e-9        # tau > 0 时 F(Y+Z) - F(Z) 必须超过它
INADMISSIBLE_MIN_DEVIATION = 1e-3   # 非容许扰动必须产生的可见偏差

# 默认度量集合
ZOO_NAMES = ("euclidean", "poincare", "sphere", "randers_flat", "randers_expr")
