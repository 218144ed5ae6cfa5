"""代价模型的数据结构（全部为 SI 单位，构造后不可变）"""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

BITS_PER_MB = 8e6


def dbm_per_hz_to_w(value_dbm_hz: float) -> float:
    """dBm/Hz -> W/Hz"""
    return 10 ** ((value_dbm_hz - 30) / 10)


class CloudShareMode(str, Enum):
    """云端算力分配方式"""

    FULL = "full"
    EQUAL_SPLIT = "equal-split"


class PlanCheck(str, Enum):
    """validate_plan 的判定结果，按 C1..C6 的固定顺序报告第一个违反项"""

    OK = "ok"
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    C4 = "C4"
    C5 = "C5"
    C6 = "C6"


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


# --- 1. 场景配置 ---
class ScenarioConfig(_Frozen):
    bandwidth_hz: float = Field(default=15e6, gt=0, description="总无线带宽 B (Hz)")
    noise_psd: float = Field(
        default=dbm_per_hz_to_w(-100.0), gt=0, description="噪声功率谱密度 N0 (W/Hz)"
    )
    edge_capacity: float = Field(default=2e9, gt=0, description="MEC 服务器算力 F_e (cycles/s)")
    cloud_capacity: float = Field(default=10e9, gt=0, description="云服务器算力 F_c (cycles/s)")
    wired_rate: float = Field(default=100e6, gt=0, description="边缘到云的有线速率 r_w (bits/s)")
    beta_t: float = Field(default=0.5, ge=0, le=1, description="时延权重")
    beta_e: float = Field(default=0.5, ge=0, le=1, description="能耗权重")
    cloud_share_mode: CloudShareMode = Field(default=CloudShareMode.EQUAL_SPLIT)
    n_devices: int = Field(default=10, ge=0, description="移动设备数 N")

    # 设备画像（默认值，可覆盖）
    tx_power: float = Field(default=0.5, gt=0, description="发射功率 p_n (W)")
    idle_power: float = Field(default=0.1, ge=0, description="空闲功率 p_i (W)")
    channel_gain: float = Field(default=1e-7, gt=0, description="信道增益 h_n")

    # 任务生成
    cycles_per_bit: float = Field(default=500.0, gt=0, description="X_n = D_n * cycles_per_bit")
    task_min_bits: float = Field(default=0.1 * BITS_PER_MB, gt=0)
    task_max_bits: float = Field(default=12 * BITS_PER_MB, gt=0)
    deadline_s: float = Field(default=60.0, gt=0, description="任务最大容忍时延 tau_n")
    enforce_deadline: bool = Field(default=False, description="T_n > tau_n 视为不可行")
    cloud_propagation_s: float = Field(default=0.0, ge=0, description="云端固定传播时延")
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _task_range(self) -> "ScenarioConfig":
        if self.task_min_bits > self.task_max_bits:
            raise ValueError("task_min must not exceed task_max")
        return self

    def device_profile(self) -> "DeviceProfile":
        return DeviceProfile(
            tx_power=self.tx_power,
            idle_power=self.idle_power,
            channel_gain=self.channel_gain,
        )

    def device_profiles(self, count: int | None = None) -> tuple["DeviceProfile", ...]:
        profile = self.device_profile()
        return (profile,) * (self.n_devices if count is None else count)


# --- 2. 设备与任务 ---
class DeviceProfile(_Frozen):
    tx_power: float = Field(gt=0, description="p_n (W)")
    idle_power: float = Field(ge=0, description="p_i (W)")
    channel_gain: float = Field(gt=0, description="h_n")


class Task(_Frozen):
    data_bits: float = Field(gt=0, description="D_n (bits)")
    cycles: float = Field(gt=0, description="X_n，总 CPU 周期数")
    deadline_s: float = Field(gt=0, description="tau_n (s)")


# --- 3. 决策与分配方案 ---
class OffloadDecision(_Frozen):
    """(alpha_e, alpha_c)，合法性由 validate_plan / device_cost 检查"""

    alpha_e: int
    alpha_c: int

    @classmethod
    def edge(cls) -> "OffloadDecision":
        return cls(alpha_e=1, alpha_c=0)

    @classmethod
    def cloud(cls) -> "OffloadDecision":
        return cls(alpha_e=0, alpha_c=1)


class AllocationPlan(_Frozen):
    decisions: tuple[OffloadDecision, ...] = ()
    edge_alloc: tuple[float, ...] = Field(default=(), description="f_n (cycles/s)")
    bw_alloc: tuple[float, ...] = Field(default=(), description="w_n，占 B 的比例")

    @model_validator(mode="after")
    def _same_length(self) -> "AllocationPlan":
        if not len(self.decisions) == len(self.edge_alloc) == len(self.bw_alloc):
            raise ValueError("decisions, edge_alloc and bw_alloc must have equal length")
        return self

    def __len__(self) -> int:
        return len(self.decisions)


class CostBreakdown(_Frozen):
    latency: float = Field(ge=0, description="T_n (s)")
    energy: float = Field(ge=0, description="E_n (J)")
    weighted: float = Field(ge=0, description="C_n = beta_t*T_n + beta_e*E_n")
