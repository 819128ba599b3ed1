from typing import Any, Optional, Tuple


class FinslerError(Exception):
    """所有自定义异常的基类。"""
    pass

class InputError(FinslerError):
    """输入无效：非有限数值、零方向向量、格式错误的 JSON 或命令行向量。"""
    pass

class DomainError(FinslerError):
    """点位于度量定义域之外。"""
    pass

class ZeroSectionError(FinslerError):
    """切向量过于接近零截面，无法求导。"""
    pass

class ConvexityError(FinslerError):
    """基本张量不是对称正定矩阵（度量在该旗上不是强凸的）。"""
    pass


# --- 表达式错误 ---
class ExpressionError(FinslerError):
    """度量表达式解析或求值失败。"""

    def __init__(self, message: str, position: Optional[Tuple[int, int]] = None):
        self.position = position
        if position is not None:
            message = f"{message} (第 {position[0]} 行, 第 {position[1]} 列)"
        super().__init__(message)

class ParseError(ExpressionError):
    """语法错误。"""
    pass

class UnknownIdentifierError(ExpressionError):
    """引用了未声明的变量或函数。"""
    pass

class ArityError(ExpressionError):
    """函数参数个数不匹配。"""
    pass

class HomogeneityError(ExpressionError):
    """表达式关于 y 不是正一次齐次的。"""
    pass

class EvaluationError(ExpressionError):
    """求值时出现定义域错误（负数开方、非正数取对数等）。"""
    pass


# --- 数值积分与打靶 ---
class IntegrationError(FinslerError):
    """测地线积分失败。"""
    pass

class DomainExitError(IntegrationError):
    """轨道离开了度量定义域，携带离开时刻与部分结果。"""

    def __init__(self, message: str, exit_time: float, exit_point: Any, partial: Any = None):
        super().__init__(message)
        self.exit_time = exit_time
        self.exit_point = exit_point
        self.partial = partial

class IntegrationQualityError(IntegrationError):
    """F 值漂移超过容差的 100 倍，步长过大。"""

    def __init__(self, message: str, drift: float):
        super().__init__(message)
        self.drift = drift

class ShootingError(FinslerError):
    """打靶法边值问题求解失败。"""
    pass

class NoGeodesicFoundError(ShootingError):
    """多起点重试之后仍未收敛。"""

    def __init__(self, message: str, best_residual: float):
        super().__init__(message)
        self.best_residual = best_residual
