"""领域异常

所有异常都继承 `MeccoError`（本身是 `ValueError`），
CLI 在最外层统一转换成退出码，就像路由层把 ValueError 转成 HTTP 状态码。
"""

from __future__ import annotations

from collections.abc import Iterable


class MeccoError(ValueError):
    """所有领域错误的基类"""

    exit_code: int = 1


class ConfigError(MeccoError):
    """配置文件无法解析或取值越界"""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class AdmissionError(MeccoError):
    """场景不满足准入规则（例如 N > L_w）"""

    exit_code = 3


class TrainingError(MeccoError):
    """训练过程出现非有限梯度等数值故障"""

    exit_code = 4


class ConstraintError(MeccoError):
    """违反分配约束 C1-C6 或截止时间"""

    def __init__(self, constraint: str, message: str = ""):
        self.constraint = constraint
        super().__init__(f"constraint {constraint} violated{': ' + message if message else ''}")


class DomainError(MeccoError):
    """公式参数不在定义域内（如 w <= 0, f <= 0）"""


class AuthorizationError(MeccoError):
    """非管理员签名的合约调用"""


class DecodeError(MeccoError):
    """字节流 / 模型文件无法解码"""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        suffix = f" (offset {offset})" if offset is not None else ""
        super().__init__(f"{message}{suffix}")


class SizeError(MeccoError):
    """穷举搜索规模超过上限"""


__all__: Iterable[str] = (
    "MeccoError",
    "ConfigError",
    "AdmissionError",
    "TrainingError",
    "ConstraintError",
    "DomainError",
    "AuthorizationError",
    "DecodeError",
    "SizeError",
)
