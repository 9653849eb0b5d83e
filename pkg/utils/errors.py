"""
异常体系

每类异常对应一个命令行退出码：
  1：用法 / 配置错误
  2：数值不收敛
  3：数据校验失败
"""
from typing import Optional


class ModelError(Exception):
    """项目内所有异常的基类。"""

    exit_code = 1


class ConfigError(ModelError):
    """运行配置不合法（字段路径写在消息里）。"""

    exit_code = 1


class ConvergenceError(ModelError):
    """求解器在迭代预算内未收敛。"""

    exit_code = 2

    def __init__(
        self,
        message: str,
        residual: Optional[float] = None,
        iterations: Optional[int] = None,
    ) -> None:
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class QuadratureError(ConvergenceError):
    """自适应积分未达到要求的精度。"""

    def __init__(self, message: str, error_estimate: float) -> None:
        super().__init__(message, residual=error_estimate)
        self.error_estimate = error_estimate


class NoEmploymentError(ModelError):
    """所有会面都被拒绝：不存在可接受的匹配。"""

    exit_code = 2


class CalibrationError(ModelError):
    """目标冲击在参数边界内不可达。"""

    exit_code = 2

    def __init__(self, message: str, attainable: tuple[float, float]) -> None:
        super().__init__(message)
        self.attainable = attainable


class DataValidationError(ModelError):
    """面板数据或回归设定与数据不符。"""

    exit_code = 3


class SingularDesignError(DataValidationError):
    """设计矩阵退化（全部共线或 X'X 奇异）。"""
