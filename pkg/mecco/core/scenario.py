"""实验配置文件

格式：每行一个 `key = value`，`#` 之后为注释，空行忽略。
键名以人类单位书写（MHz / GHz / Mbps / MB / dBm/Hz），读入后统一转换为 SI。
未知键、重复键、越界值或无法解析的行都会抛出带行号的 ConfigError。

    # 只写 n_devices，其余取默认值
    n_devices = 10
"""

from __future__ import annotations

import hashlib
from collections.abc import Iterable
from enum import Enum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..features.agent.models import AgentConfig
from ..features.chain.models import ChainConfig
from ..features.costs.models import BITS_PER_MB, CloudShareMode, ScenarioConfig, dbm_per_hz_to_w
from .errors import ConfigError

GHZ = 1e9
MHZ = 1e6
MBPS = 1e6


class ExperimentConfig(BaseModel):
    """配置文件的扁平镜像；字段顺序即 dump_config 的规范顺序"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # --- 1. 场景 ---
    bandwidth_mhz: float = Field(default=15.0, gt=0, description="总带宽 B")
    noise_dbm_hz: float = Field(default=-100.0, description="噪声功率谱密度 N0")
    edge_capacity_ghz: float = Field(default=2.0, gt=0, description="MEC 算力 F_e")
    cloud_capacity_ghz: float = Field(default=10.0, gt=0, description="云端算力 F_c")
    wired_rate_mbps: float = Field(default=100.0, gt=0, description="边缘到云的有线速率")
    beta_t: float = Field(default=0.5, ge=0, le=1)
    beta_e: float = Field(default=0.5, ge=0, le=1)
    cloud_share_mode: CloudShareMode = CloudShareMode.EQUAL_SPLIT
    n_devices: int = Field(default=10, ge=0)
    tx_power_w: float = Field(default=0.5, gt=0)
    idle_power_w: float = Field(default=0.1, ge=0)
    channel_gain: float = Field(default=1e-7, gt=0)
    cycles_per_bit: float = Field(default=500.0, gt=0)
    task_min_mb: float = Field(default=0.1, gt=0)
    task_max_mb: float = Field(default=12.0, gt=0)
    enforce_deadline: bool = False
    deadline_s: float = Field(default=60.0, gt=0)
    cloud_propagation_s: float = Field(default=0.0, ge=0)
    seed: int = Field(default=0, ge=0)

    # --- 2. 环境离散化与学习器 ---
    levels_f: int = Field(default=8, ge=1)
    levels_w: int = Field(default=16, ge=1)
    hidden_units: int = Field(default=64, ge=1)
    gamma: float = Field(default=0.9, gt=0, lt=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)
    batch_size: int = Field(default=64, ge=1)
    target_sync: int = Field(default=100, ge=1)
    episodes: int = Field(default=3000, ge=0)
    replay_capacity: int = Field(default=10_000, ge=1)
    epsilon_start: float = Field(default=1.0, ge=0, le=1)
    epsilon_end: float = Field(default=0.05, ge=0, le=1)
    epsilon_decay_fraction: float = Field(default=0.8, gt=0, le=1)

    # --- 3. 链 ---
    admin_seed: int = Field(default=0, ge=0)
    n_miners: int = Field(default=3, ge=1)

    @property
    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig(
            bandwidth_hz=self.bandwidth_mhz * MHZ,
            noise_psd=dbm_per_hz_to_w(self.noise_dbm_hz),
            edge_capacity=self.edge_capacity_ghz * GHZ,
            cloud_capacity=self.cloud_capacity_ghz * GHZ,
            wired_rate=self.wired_rate_mbps * MBPS,
            beta_t=self.beta_t,
            beta_e=self.beta_e,
            cloud_share_mode=self.cloud_share_mode,
            n_devices=self.n_devices,
            tx_power=self.tx_power_w,
            idle_power=self.idle_power_w,
            channel_gain=self.channel_gain,
            cycles_per_bit=self.cycles_per_bit,
            task_min_bits=self.task_min_mb * BITS_PER_MB,
            task_max_bits=self.task_max_mb * BITS_PER_MB,
            deadline_s=self.deadline_s,
            enforce_deadline=self.enforce_deadline,
            cloud_propagation_s=self.cloud_propagation_s,
            seed=self.seed,
        )

    @property
    def agent(self) -> AgentConfig:
        return AgentConfig(**self.model_dump(include=set(AgentConfig.model_fields)))

    @property
    def chain(self) -> ChainConfig:
        return ChainConfig(admin_seed=self.admin_seed, n_miners=self.n_miners)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """CLI 参数覆盖；走完整校验"""
        return build_config({**self.model_dump(), **changes})


# ---------------------------------------------------------------------------
# 解析 / 输出
# ---------------------------------------------------------------------------


def build_config(values: dict, lines: dict[str, int] | None = None) -> ExperimentConfig:
    """校验键值并检查派生配置；错误统一转换为 ConfigError"""
    lines = lines or {}
    try:
        cfg = ExperimentConfig.model_validate(values)
    except ValidationError as e:
        err = e.errors()[0]
        key = str(err["loc"][0]) if err["loc"] else None
        if err["type"] == "extra_forbidden":
            raise ConfigError(f"unknown key {key!r}", lines.get(key or "")) from e
        raise ConfigError(f"{key}: {err['msg']}", lines.get(key or "")) from e

    # 跨字段约束在派生对象上检查
    try:
        cfg.scenario
    except ValidationError as e:
        raise ConfigError(
            f"task_min_mb ({cfg.task_min_mb}) exceeds task_max_mb ({cfg.task_max_mb})",
            lines.get("task_max_mb"),
        ) from e
    try:
        cfg.agent
    except ValidationError as e:
        raise ConfigError(
            f"batch_size ({cfg.batch_size}) exceeds replay_capacity ({cfg.replay_capacity})",
            lines.get("batch_size"),
        ) from e
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", number)
        values[key] = value
        lines[key] = number
    return build_config(values, lines)


def load_config(path: Path | None = None) -> ExperimentConfig:
    """没有给路径时返回全默认配置"""
    if path is None:
        return ExperimentConfig()
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return parse_config(path.read_text(encoding="utf-8"))


def _format(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """规范顺序输出全部生效的键；parse_config(dump_config(c)) == c"""
    return "".join(
        f"{name} = {_format(getattr(cfg, name))}\n" for name in ExperimentConfig.model_fields
    )


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()


__all__: Iterable[str] = (
    "ExperimentConfig",
    "build_config",
    "parse_config",
    "load_config",
    "dump_config",
    "config_hash",
)
