"""图表 sweep

每个网格点独立构造配置、环境与（必要时）模型；点之间可以用进程池并行，
输出行按 (点, 策略, seed) 的固定顺序合并，与并行度无关。
"""

from __future__ import annotations

from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path

import polars as pl
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..core.errors import AdmissionError, ConfigError, SizeError
from ..core.scenario import ExperimentConfig
from ..features.agent.network import QNetworkParams
from ..features.agent.service import train
from ..features.env.service import OffloadingEnv
from ..features.policies.models import PolicyName
from ..features.policies.service import build_policy, evaluate_policy
from .reporting import AGGREGATE_SEED, provenance_header, write_csv

SWEEP_SCHEMA = {
    "sweep_var": pl.Utf8,
    "sweep_value": pl.Float64,
    "policy": pl.Utf8,
    "seed": pl.Utf8,
    "total_cost": pl.Float64,
    "mean_latency_s": pl.Float64,
    "mean_energy_j": pl.Float64,
    "skipped": pl.Boolean,
    "reason": pl.Utf8,
}


class SweepVar(str, Enum):
    N_DEVICES = "n_devices"
    TASK_SIZE_MB = "task_size_mb"
    EDGE_CAPACITY_GHZ = "edge_capacity_ghz"
    BANDWIDTH_MHZ = "bandwidth_mhz"


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    sweep_var: SweepVar
    values: tuple[float, ...]
    policies: tuple[PolicyName, ...]
    seeds_per_point: int = Field(default=50, ge=1)
    base_overrides: dict[str, float | int] = Field(default_factory=dict, description="对基础配置的固定覆盖")
    shared_model: bool = False
    preset: str | None = None
    output: Path | None = None

    @field_validator("values")
    @classmethod
    def _increasing(cls, values: tuple[float, ...]) -> tuple[float, ...]:
        if not values:
            raise ValueError("sweep grid must not be empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        return values

    @field_validator("policies")
    @classmethod
    def _some_policy(cls, policies: tuple[PolicyName, ...]) -> tuple[PolicyName, ...]:
        if not policies:
            raise ValueError("at least one policy is required")
        return policies


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = round((stop - start) / step) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


_FIG8_POLICIES = (PolicyName.ADRLO, PolicyName.DRLO, PolicyName.EO, PolicyName.CO)

# 图表预设的云端固定传播时延；默认参数下 EO/CO 在 D* = d / 1.9e-7 bits（约 5 MB）处交叉
FIG_CLOUD_DELAY_S = 7.6

PRESETS: dict[str, SweepSpec] = {
    "fig8a": SweepSpec(
        sweep_var=SweepVar.N_DEVICES,
        values=_grid(2, 12, 2),
        policies=_FIG8_POLICIES,
        base_overrides={"task_min_mb": 0.1, "task_max_mb": 1.0, "cloud_propagation_s": FIG_CLOUD_DELAY_S},
        preset="fig8a",
    ),
    "fig8b": SweepSpec(
        sweep_var=SweepVar.TASK_SIZE_MB,
        values=_grid(2, 12, 2),
        policies=_FIG8_POLICIES,
        base_overrides={"n_devices": 1, "cloud_propagation_s": FIG_CLOUD_DELAY_S},
        preset="fig8b",
    ),
    "fig9a": SweepSpec(
        sweep_var=SweepVar.EDGE_CAPACITY_GHZ,
        values=_grid(0.5, 5.0, 0.5),
        policies=_FIG8_POLICIES,
        base_overrides={"cloud_propagation_s": FIG_CLOUD_DELAY_S},
        preset="fig9a",
    ),
    "fig9b": SweepSpec(
        sweep_var=SweepVar.BANDWIDTH_MHZ,
        values=_grid(1, 10, 1),
        policies=_FIG8_POLICIES,
        base_overrides={"cloud_propagation_s": FIG_CLOUD_DELAY_S},
        preset="fig9b",
    ),
    "fig10": SweepSpec(
        sweep_var=SweepVar.TASK_SIZE_MB,
        values=_grid(2, 12, 2),
        policies=(PolicyName.ADRLO, PolicyName.NO_EDGE_ALLOC, PolicyName.NO_BW_ALLOC),
        base_overrides={"n_devices": 8, "cloud_propagation_s": FIG_CLOUD_DELAY_S},
        preset="fig10",
    ),
}


def preset_spec(name: str, **changes) -> SweepSpec:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    return PRESETS[name].model_copy(update=changes)


def point_config(cfg: ExperimentConfig, var: SweepVar, value: float) -> ExperimentConfig:
    match var:
        case SweepVar.N_DEVICES:
            return cfg.with_overrides(n_devices=int(value))
        case SweepVar.TASK_SIZE_MB:
            return cfg.with_overrides(task_min_mb=value, task_max_mb=value)
        case SweepVar.EDGE_CAPACITY_GHZ:
            return cfg.with_overrides(edge_capacity_ghz=value)
        case SweepVar.BANDWIDTH_MHZ:
            return cfg.with_overrides(bandwidth_mhz=value)


def sweep_seeds(cfg: ExperimentConfig, spec: SweepSpec) -> list[int]:
    return [cfg.seed + k for k in range(spec.seeds_per_point)]


def train_learned(cfg: ExperimentConfig, policies: Iterable[PolicyName]) -> dict[PolicyName, QNetworkParams]:
    """ADRLO 与三个消融共享一份 ADRLO 模型；DRLO 单独训练"""
    needed = {PolicyName.DRLO if p is PolicyName.DRLO else PolicyName.ADRLO for p in policies if p.learned}
    env = OffloadingEnv(cfg.scenario, cfg.levels_f, cfg.levels_w)
    models = {}
    for name in sorted(needed, key=lambda p: p.value):
        dueling = name is PolicyName.ADRLO
        models[name] = train(env, cfg.agent, seed=cfg.seed, dueling=dueling, double=dueling).params
    return models


def _model_for(policy: PolicyName, models: dict[PolicyName, QNetworkParams]) -> QNetworkParams | None:
    if not policy.learned:
        return None
    return models[PolicyName.DRLO if policy is PolicyName.DRLO else PolicyName.ADRLO]


def _skipped_rows(spec: SweepSpec, value: float, policy: str, seeds: list[int], reason: str) -> list[dict]:
    return [
        {
            "sweep_var": spec.sweep_var.value,
            "sweep_value": value,
            "policy": policy,
            "seed": str(seed),
            "total_cost": None,
            "mean_latency_s": None,
            "mean_energy_j": None,
            "skipped": True,
            "reason": reason,
        }
        for seed in seeds
    ]


def run_point(
    cfg: ExperimentConfig,
    spec: SweepSpec,
    value: float,
    shared: dict[PolicyName, QNetworkParams] | None = None,
) -> list[dict]:
    """单个网格点的全部行：逐 seed 数据行 + 每个策略一行聚合，或逐 seed 的 skipped 行"""
    seeds = sweep_seeds(cfg, spec)
    point = point_config(cfg, spec.sweep_var, value)
    if point.n_devices > point.levels_w:
        reason = f"N={point.n_devices} > L_w={point.levels_w}"
        logger.warning(f"⏭️ [sweep] {spec.sweep_var.value}={value}: {reason}")
        return [row for p in spec.policies for row in _skipped_rows(spec, value, p.value, seeds, reason)]

    models = shared if shared is not None else train_learned(point, spec.policies)
    rows: list[dict] = []
    for name in spec.policies:
        policy = build_policy(name, _model_for(name, models))
        try:
            report = evaluate_policy(policy, point.scenario, seeds, point.levels_f, point.levels_w)
        except (AdmissionError, SizeError) as e:
            logger.warning(f"⏭️ [sweep] {spec.sweep_var.value}={value} {name.value}: {e}")
            rows.extend(_skipped_rows(spec, value, name.value, seeds, str(e)))
            continue
        for record in report.per_seed.iter_rows(named=True):
            rows.append(
                {
                    "sweep_var": spec.sweep_var.value,
                    "sweep_value": value,
                    "policy": name.value,
                    "seed": str(record["seed"]),
                    "total_cost": record["total_cost"],
                    "mean_latency_s": record["mean_latency_s"],
                    "mean_energy_j": record["mean_energy_j"],
                    "skipped": False,
                    "reason": "",
                }
            )
        rows.append(
            {
                "sweep_var": spec.sweep_var.value,
                "sweep_value": value,
                "policy": name.value,
                "seed": AGGREGATE_SEED,
                "total_cost": report.mean_total_cost,
                "mean_latency_s": report.mean_latency_s,
                "mean_energy_j": report.mean_energy_j,
                "skipped": False,
                "reason": "",
            }
        )
    return rows


def run_sweep(cfg: ExperimentConfig, spec: SweepSpec, workers: int = 1) -> pl.DataFrame:
    """返回 sweep 表；spec.output 给出时同时写出带溯源头的 CSV"""
    base = cfg.with_overrides(**spec.base_overrides) if spec.base_overrides else cfg
    seeds = sweep_seeds(base, spec)
    shared = train_learned(base, spec.policies) if spec.shared_model else None
    logger.info(
        f"🚀 [sweep] {spec.preset or spec.sweep_var.value}: {len(spec.values)} points x "
        f"{len(spec.policies)} policies x {len(seeds)} seeds, workers={workers}"
    )

    if workers > 1 and len(spec.values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_point, base, spec, value, shared) for value in spec.values]
            per_point = [future.result() for future in futures]
    else:
        per_point = [run_point(base, spec, value, shared) for value in spec.values]

    df = pl.DataFrame([row for rows in per_point for row in rows], schema=SWEEP_SCHEMA)
    if spec.output is not None:
        header = provenance_header(
            base, seeds, preset=spec.preset or "custom", shared_model=spec.shared_model
        )
        write_csv(df, spec.output, header)
    logger.info(f"✅ [sweep] {df.height} rows ({int(df['skipped'].sum())} skipped)")
    return df


__all__: Iterable[str] = (
    "SWEEP_SCHEMA",
    "SweepVar",
    "SweepSpec",
    "FIG_CLOUD_DELAY_S",
    "PRESETS",
    "preset_spec",
    "point_config",
    "sweep_seeds",
    "train_learned",
    "run_point",
    "run_sweep",
)
