import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from rich.table import Table

from config import config
from connection import chern_coefficients, spray
from connectivity import ShootOptions, connect, estimate_convexity_radii
from constants import MIN_TOLERANCE
from geodesic_engine import exp_map, integrate_geodesic
from metric_zoo import TangentVector, eval_F, fundamental_tensor
from metrics import load_metric, load_metric_set
from utils.exceptions import (
    ConvexityError, DomainError, ExpressionError, FinslerError, InputError, IntegrationError,
    ShootingError,
)
from utils.logger import console, log
from verify_suite import SuiteReport, json_safe, run_all

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_VERIFY = 3

COMMANDS = ("eval", "tensor", "connection", "trace", "exp", "connect", "distance", "convexity", "verify")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """用法错误统一以退出码 1 结束，而不是 argparse 默认的 2。"""

    def error(self, message: str):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    metric: Optional[str] = None
    metric_set: Optional[str] = None
    seed: int = 0
    step: Optional[float] = None
    tol: Optional[float] = None
    grid: List[float] = field(default_factory=list)
    samples: Optional[int] = None
    eta_factor: Optional[float] = None
    json: bool = False
    json_path: Optional[Path] = None
    output: Optional[Path] = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        tol = getattr(args, "tol", None)
        if tol is not None:
            tol = max(float(tol), MIN_TOLERANCE)
        grid = getattr(args, "grid", None)
        output = getattr(args, "out", None)
        json_arg = getattr(args, "json", False)
        json_path = json_arg if isinstance(json_arg, str) and json_arg != "-" else None
        return cls(
            command=args.command,
            metric=getattr(args, "metric", None),
            metric_set=getattr(args, "metric_set", None),
            seed=config.default_seed if args.seed is None else args.seed,
            step=getattr(args, "step", None),
            tol=tol,
            grid=parse_grid(grid) if grid else [],
            samples=getattr(args, "samples", None),
            eta_factor=getattr(args, "eta_factor", None),
            json=bool(json_arg),
            json_path=Path(json_path) if json_path else None,
            output=Path(output) if output else None,
        )

    def shoot_options(self) -> ShootOptions:
        opts = ShootOptions(seed=self.seed)
        if self.step is not None:
            opts.step = self.step
        if self.tol is not None:
            opts.tol = self.tol
        return opts


# --- 参数解析 ---
def parse_vector(text: str) -> np.ndarray:
    """逗号分隔的十进制数，例如 "0.5,0"。"""
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise InputError(f"无效的向量 {text!r}，应为逗号分隔的数值") from None
    if not all(np.isfinite(values)):
        raise InputError(f"向量 {text!r} 含有非有限数值")
    return np.array(values)


def parse_grid(text: str) -> List[float]:
    """"a:b:c" 表示从 a 到 b（含）步长为 c；也接受逗号分隔的列表。"""
    if ":" in text:
        try:
            start, stop, step = (float(part) for part in text.split(":"))
        except ValueError:
            raise InputError(f"无效的网格 {text!r}，应为 start:stop:step") from None
        if not step > 0 or stop < start:
            raise InputError(f"无效的网格 {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + k * step, 12) for k in range(count)]
    return [float(v) for v in parse_vector(text)]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="finsler", description="Finsler 几何数值引擎")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name: str, help_text: str, metric: bool = True, json_path: bool = False) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if metric:
            p.add_argument("--metric", required=True, help="动物园名称、JSON 文件路径或内联 JSON")
        p.add_argument("--seed", type=int, default=None, help="随机种子 (默认取 FINSLER_SEED 或 0)")
        if json_path:
            p.add_argument("--json", nargs="?", const="-", default=None, metavar="PATH",
                           help="输出 JSON 报告；给出 PATH 时写入该文件，省略或为 - 时写到标准输出")
        else:
            p.add_argument("--json", action="store_true", help="输出机器可读的 JSON")
        return p

    vec_help = "逗号分隔的坐标；负数请写成 --x=-1,0"
    p = command("eval", "计算 F(x, y)")
    p.add_argument("--x", required=True, help=vec_help)
    p.add_argument("--y", required=True, help=vec_help)

    p = command("tensor", "基本张量 g_ij(x, y)")
    p.add_argument("--x", required=True, help=vec_help)
    p.add_argument("--y", required=True, help=vec_help)

    p = command("connection", "喷射 G、非线性联络 P 与 Γ¹")
    p.add_argument("--x", required=True, help=vec_help)
    p.add_argument("--y", required=True, help=vec_help)
    p.add_argument("--method", choices=("central", "richardson"), default="central")

    p = command("trace", "积分测地线并输出 CSV")
    p.add_argument("--x", required=True, help=vec_help)
    p.add_argument("--y", required=True, help=vec_help)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--out", default=None, help="CSV 写入文件而不是标准输出")

    p = command("exp", "指数映射 Exp_x(X)")
    p.add_argument("--x", required=True, help=vec_help)
    p.add_argument("--X", required=True, dest="X", help=vec_help)
    p.add_argument("--step", type=float, default=None)

    for name, help_text in (("connect", "打靶求连接两点的测地线"), ("distance", "有向 Finsler 距离")):
        p = command(name, help_text)
        p.add_argument("--from", required=True, dest="source", help=vec_help)
        p.add_argument("--to", required=True, dest="target", help=vec_help)
        p.add_argument("--step", type=float, default=None)
        p.add_argument("--tol", type=float, default=None, help="打靶容差 (下限 1e-14)")

    p = command("convexity", "估计凸邻域半径 ε、η、ε̃")
    p.add_argument("--at", required=True, help=vec_help)
    p.add_argument("--grid", required=True, help="start:stop:step 或逗号分隔的半径列表")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--eta-factor", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)

    p = command("verify", "运行验证套件", metric=False, json_path=True)
    p.add_argument("--metric-set", default="zoo", help="'zoo'、逗号分隔的动物园名称或 JSON 数组文件")
    p.add_argument("--out", default=None, help="JSON 报告写入的文件")
    return parser


# --- 输出 ---
def emit(data, as_json: bool, text: Optional[str] = None):
    if as_json:
        print(json.dumps(json_safe(data), indent=2, ensure_ascii=False, allow_nan=False))
    else:
        print(text if text is not None else data)


def _fmt(values) -> str:
    return ",".join(f"{float(v):.17g}" for v in np.ravel(values))


def trace_csv(sol) -> str:
    n = sol.x.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)] + ["F"]
    lines = [",".join(header)]
    for t, x, v, F in zip(sol.t, sol.x, sol.v, sol.F_values):
        lines.append(_fmt(np.concatenate([[t], x, v, [F]])))
    return "\n".join(lines) + "\n"


def show_suite(suite: SuiteReport):
    table = Table(title=f"验证结果 (seed = {suite.seed})")
    for column in ("度量", "检查", "样本", "最大残差", "容差", "违例", "结果"):
        table.add_column(column)
    for r in suite.reports:
        table.add_row(r.metric, r.check, str(r.samples), f"{r.max_residual:.3g}", f"{r.tolerance:.0e}",
                      str(r.violations), "[green]通过[/green]" if r.passed else "[red]失败[/red]")
    for metric, reason in suite.rejected.items():
        table.add_row(metric, "-", "-", "-", "-", "-", f"[red]拒绝: {reason}[/red]")
    console.print(table)


# --- 命令 ---
def run_command(args: argparse.Namespace, run: RunConfig) -> int:
    if run.command == "verify":
        metrics = load_metric_set(run.metric_set)
        suite = run_all(metrics, run.seed)
        show_suite(suite)
        report = json.dumps(suite.to_dict(), indent=2, ensure_ascii=False, allow_nan=False)
        for path in dict.fromkeys(p for p in (run.output, run.json_path) if p):
            path.write_text(report + "\n", encoding="utf-8")
            log.info(f"验证报告已写入 {path}")
        if run.json and run.json_path is None:
            print(report)
        else:
            print("PASS" if suite.passed else "FAIL")
        return EXIT_OK if suite.passed else EXIT_VERIFY

    metric = load_metric(run.metric)
    log.debug(f"已加载度量 {metric!r}")

    if run.command == "eval":
        value = eval_F(metric, TangentVector.at(parse_vector(args.x), parse_vector(args.y)))
        emit({"F": value}, run.json, repr(value))

    elif run.command == "tensor":
        tensor = fundamental_tensor(metric, TangentVector.at(parse_vector(args.x), parse_vector(args.y)))
        emit({"g": tensor.g.tolist(), "g_inv": tensor.g_inv.tolist(), "cond": tensor.cond}, run.json,
             "\n".join(_fmt(row) for row in tensor.g))

    elif run.command == "connection":
        v = TangentVector.at(parse_vector(args.x), parse_vector(args.y))
        nl = spray(metric, v, args.method)
        chern = chern_coefficients(metric, v)
        emit({"G": nl.G.tolist(), "P": nl.P.tolist(), "gamma1": chern.gamma1.tolist()}, run.json,
             f"G = {_fmt(nl.G)}\nP = {_fmt(nl.P)}\nΓ¹ = {_fmt(chern.gamma1)}")

    elif run.command == "trace":
        init = TangentVector.at(parse_vector(args.x), parse_vector(args.y))
        sol = integrate_geodesic(metric, init, args.t_end, run.step)
        csv = trace_csv(sol)
        if run.output:
            run.output.write_text(csv, encoding="utf-8")
            log.info(f"{sol.samples} 个样本已写入 {run.output} (最大 F 漂移 {sol.max_drift:.3g})")
        else:
            sys.stdout.write(csv)

    elif run.command == "exp":
        point = exp_map(metric, parse_vector(args.x), parse_vector(args.X), run.step)
        emit({"point": point.tolist()}, run.json, _fmt(point))

    elif run.command in ("connect", "distance"):
        result = connect(metric, parse_vector(args.source), parse_vector(args.target), run.shoot_options())
        if run.command == "distance":
            emit({"distance": result.length}, run.json, repr(result.length))
        else:
            emit(result.to_dict(), run.json,
                 f"X = {_fmt(result.initial_velocity)}\nlength = {result.length!r}\niterations = {result.iterations}")

    elif run.command == "convexity":
        report = estimate_convexity_radii(
            metric, parse_vector(args.at), run.grid, run.samples, run.seed, run.eta_factor, run.shoot_options(),
        )
        data = report.to_dict()
        emit(data, run.json, f"epsilon = {report.epsilon!r}\neta = {report.eta!r}\n"
                             f"epsilon_tilde = {report.epsilon_tilde!r}\nimpossible = {report.impossible}")
    return EXIT_OK


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """解析命令行并执行命令，返回退出码。"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command not in COMMANDS:
            raise UsageError("缺少命令")
        run = RunConfig.from_args(args)
        return run_command(args, run)
    except UsageError as e:
        console.print(parser.format_usage(), end="")
        log.error(f"用法错误: {e}")
        return EXIT_USAGE
    except (InputError, ExpressionError) as e:
        log.error(f"输入错误: {e}")
        return EXIT_USAGE
    except (IntegrationError, ShootingError, ConvexityError, DomainError) as e:
        log.error(f"数值错误: {e}")
        return EXIT_NUMERIC
    except FinslerError as e:
        log.error(f"发生错误: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    try:
        sys.exit(dispatch())
    except KeyboardInterrupt:
        log.info("\n操作被用户中断")
        sys.exit(130)
    except Exception as e:
        log.error(f"发生未处理的意外错误: {e}")
        if config.is_development:
            console.print_exception(show_locals=True)
        sys.exit(1)
