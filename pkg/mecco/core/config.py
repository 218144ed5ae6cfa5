"""进程级运行时设置（MECCO_* 环境变量 / .env 文件）

实验参数不在这里，见 scenario.py。
"""

from enum import Enum
from functools import lru_cache
from pathlib import Path
import os

from loguru import logger
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

ROOT_DIR = Path(__file__).resolve().parent.parent.parent

_ENV_NAME = os.getenv("MECCO_ENV", "development").lower()
ENV_FILES = (ROOT_DIR / f".env.{_ENV_NAME}", ROOT_DIR / ".env")


class Environment(str, Enum):
    DEVELOPMENT = "development"
    PRODUCTION = "production"


class Settings(BaseSettings):
    """运行时设置（与实验配置文件分离，只管进程级行为）"""

    env: Environment = Field(default=Environment.DEVELOPMENT, description="运行环境")
    debug: bool = Field(default=False, description="打开后日志级别强制为 DEBUG")
    log_level: str = Field(default="INFO", description="loguru 日志级别")
    output_dir: Path = Field(default=Path("runs"), description="默认输出目录")
    workers: int = Field(default=1, ge=1, description="sweep 并行进程数")

    model_config = SettingsConfigDict(
        env_prefix="MECCO_",
        env_file=ENV_FILES,
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    @property
    def effective_log_level(self) -> str:
        return "DEBUG" if self.debug else self.log_level.upper()


@lru_cache
def get_settings() -> Settings:
    settings = Settings()
    if settings.env == Environment.DEVELOPMENT:
        logger.debug(f"⚙️ [settings] env={settings.env.value} workers={settings.workers} out={settings.output_dir}")
    return settings
