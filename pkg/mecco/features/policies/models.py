"""策略名与评估报告"""

from __future__ import annotations

from enum import Enum
from typing import NamedTuple

import polars as pl
from pydantic import BaseModel, ConfigDict, Field

from ..costs.models import AllocationPlan


class PolicyName(str, Enum):
    ADRLO = "ADRLO"
    DRLO = "DRLO"
    EO = "EO"
    CO = "CO"
    EO_EQUAL = "EO-equal"
    CO_EQUAL = "CO-equal"
    NO_EDGE_ALLOC = "no-edge-alloc"
    NO_BW_ALLOC = "no-bw-alloc"
    ORACLE = "ORACLE"
    RANDOM = "RANDOM"

    @property
    def learned(self) -> bool:
        """需要训练好的模型"""
        return self in (
            PolicyName.ADRLO,
            PolicyName.DRLO,
            PolicyName.NO_EDGE_ALLOC,
            PolicyName.NO_BW_ALLOC,
        )


class PolicyChoice(NamedTuple):
    index: int
    fallback: bool = False


# 逐 seed 报告的列
SEED_SCHEMA = {
    "policy": pl.Utf8,
    "seed": pl.Int64,
    "total_cost": pl.Float64,
    "mean_latency_s": pl.Float64,
    "mean_energy_j": pl.Float64,
    "edge_fraction": pl.Float64,
    "fallback_count": pl.Int64,
}

# 逐设备明细
DEVICE_SCHEMA = {
    "seed": pl.Int64,
    "device": pl.Int64,
    "action": pl.Int64,
    "platform": pl.Utf8,
    "f": pl.Float64,
    "w": pl.Float64,
    "latency_s": pl.Float64,
    "energy_j": pl.Float64,
    "cost": pl.Float64,
}


class EvalReport(BaseModel):
    """per_seed 每个 seed 一行；聚合值是这些行的算术平均"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    policy: str
    seeds: tuple[int, ...]
    per_seed: pl.DataFrame
    devices: pl.DataFrame

    @property
    def seed_count(self) -> int:
        return len(self.seeds)

    def _mean(self, column: str) -> float:
        if self.per_seed.is_empty():
            return 0.0
        return float(self.per_seed[column].mean())

    @property
    def mean_total_cost(self) -> float:
        return self._mean("total_cost")

    @property
    def mean_latency_s(self) -> float:
        return self._mean("mean_latency_s")

    @property
    def mean_energy_j(self) -> float:
        return self._mean("mean_energy_j")

    @property
    def fallback_count(self) -> int:
        return int(self.per_seed["fallback_count"].sum()) if not self.per_seed.is_empty() else 0


class OracleResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    plan: AllocationPlan
    cost: float = Field(ge=0)
    actions: tuple[int, ...]
    explored: int = Field(ge=0, description="访问过的搜索节点数")
