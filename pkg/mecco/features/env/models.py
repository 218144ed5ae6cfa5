"""MDP 状态、离散动作与单步结果"""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..costs.models import CostBreakdown, ScenarioConfig, Task


class Platform(str, Enum):
    EDGE = "edge"
    CLOUD = "cloud"


class DiscreteAction(BaseModel):
    """(平台, 边缘算力档位, 带宽档位)；云端动作没有 f_level"""

    model_config = ConfigDict(frozen=True)

    platform: Platform
    f_level: int | None = Field(default=None, ge=1)
    w_level: int = Field(ge=1)

    @model_validator(mode="after")
    def _edge_needs_f(self) -> "DiscreteAction":
        if (self.f_level is not None) != (self.platform is Platform.EDGE):
            raise ValueError("f_level is present iff platform is edge")
        return self


class SystemState(BaseModel):
    """{tc, ec, bw} + 游标；剩余资源以整数档位记账，避免浮点漂移"""

    model_config = ConfigDict(frozen=True)

    tc: float = Field(ge=0, description="已累计的加权代价")
    ec_levels: int = Field(ge=0, description="剩余边缘算力档位数")
    bw_levels: int = Field(ge=0, description="剩余带宽档位数")
    cursor: int = Field(ge=0, description="下一个待调度设备")
    levels_f: int = Field(ge=1)
    levels_w: int = Field(ge=1)
    tasks: tuple[Task, ...] = ()
    actions: tuple[int, ...] = Field(default=(), description="已执行的动作下标")
    cost_scale: float = Field(default=1.0, gt=0, description="tc 归一化常数")
    scenario: ScenarioConfig

    @property
    def n_devices(self) -> int:
        return len(self.tasks)

    @property
    def ec(self) -> float:
        """剩余边缘算力 (cycles/s)"""
        return self.scenario.edge_capacity * self.ec_levels / self.levels_f

    @property
    def bw(self) -> float:
        """剩余带宽占比"""
        return self.bw_levels / self.levels_w

    @property
    def remaining(self) -> int:
        return self.n_devices - self.cursor

    @property
    def done(self) -> bool:
        return self.cursor >= self.n_devices


class StepOutcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    next_state: SystemState
    step_cost: float = Field(ge=0)
    done: bool
    breakdown: CostBreakdown


class FeasibleActions(BaseModel):
    """固定顺序的动作集合 + 可行掩码"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    actions: tuple[DiscreteAction, ...]
    mask: tuple[bool, ...]

    @property
    def indices(self) -> list[int]:
        return [i for i, ok in enumerate(self.mask) if ok]
