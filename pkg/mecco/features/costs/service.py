"""代价模型（纯函数）

- transmission_rate：正交带宽下的香农速率
- edge_cost / cloud_cost：边缘 / 云端执行的时延与能耗
- device_cost：按卸载决策选择分支，得到加权代价 C_n
- system_cost：系统目标函数 sum(C_n)
- validate_plan：约束 C1..C6 的可行性判定

所有函数不修改入参，可以在线程间自由共享。
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

import numpy as np

from ...core.errors import ConstraintError, DomainError
from .models import (
    AllocationPlan,
    CloudShareMode,
    CostBreakdown,
    DeviceProfile,
    OffloadDecision,
    PlanCheck,
    ScenarioConfig,
    Task,
)

# 容量约束 C3 / C6 的相对容差，只吸收浮点求和误差
CAPACITY_RTOL = 1e-12

DEADLINE = "deadline"


# ---------------------------------------------------------------------------
# 速率与单分支代价
# ---------------------------------------------------------------------------


def transmission_rate(w: float, dev: DeviceProfile, cfg: ScenarioConfig) -> float:
    """r_n = w*B*log2(1 + p*h / (w*N0*B))"""
    if not 0 < w <= 1:
        raise DomainError(f"bandwidth fraction must be in (0, 1], got {w} (C5)")
    band = w * cfg.bandwidth_hz
    snr = dev.tx_power * dev.channel_gain / (band * cfg.noise_psd)
    return band * math.log2(1 + snr)


def edge_cost(
    task: Task, dev: DeviceProfile, f_e: float, w: float, cfg: ScenarioConfig
) -> tuple[float, float]:
    """边缘执行：(T_e, E_e)"""
    if f_e <= 0:
        raise DomainError(f"edge allocation must be positive, got {f_e}")
    upload = task.data_bits / transmission_rate(w, dev, cfg)
    execute = task.cycles / f_e
    latency = upload + execute
    energy = dev.tx_power * upload + dev.idle_power * execute
    return latency, energy


def cloud_cost(
    task: Task, dev: DeviceProfile, w: float, f_c: float, cfg: ScenarioConfig
) -> tuple[float, float]:
    """云端执行：(T_c, E_c)，多出有线回传和可选的固定传播时延"""
    if f_c <= 0:
        raise DomainError(f"cloud allocation must be positive, got {f_c}")
    upload = task.data_bits / transmission_rate(w, dev, cfg)
    # 设备在回传 + 云端执行期间处于空闲功耗
    waiting = task.data_bits / cfg.wired_rate + task.cycles / f_c + cfg.cloud_propagation_s
    latency = upload + waiting
    energy = dev.tx_power * upload + dev.idle_power * waiting
    return latency, energy


def cloud_share(cfg: ScenarioConfig, n_devices: int) -> float:
    """每个上云任务分到的云端算力 f_c"""
    if cfg.cloud_share_mode is CloudShareMode.FULL:
        return cfg.cloud_capacity
    return cfg.cloud_capacity / max(n_devices, 1)


def device_cost(
    task: Task,
    dev: DeviceProfile,
    decision: OffloadDecision,
    f_e: float,
    f_c: float,
    w: float,
    cfg: ScenarioConfig,
) -> CostBreakdown:
    """按 alpha 标志只计算一个分支，C_n = beta_t*T_n + beta_e*E_n"""
    flags = (decision.alpha_e, decision.alpha_c)
    if any(flag not in (0, 1) for flag in flags):
        raise ConstraintError(PlanCheck.C1.value, f"non-binary decision {flags}")
    if sum(flags) != 1:
        raise ConstraintError(PlanCheck.C2.value, f"decision {flags} must pick exactly one platform")

    if decision.alpha_e:
        latency, energy = edge_cost(task, dev, f_e, w, cfg)
    else:
        latency, energy = cloud_cost(task, dev, w, f_c, cfg)
    return CostBreakdown(
        latency=latency,
        energy=energy,
        weighted=cfg.beta_t * latency + cfg.beta_e * energy,
    )


# ---------------------------------------------------------------------------
# 方案级校验与目标函数
# ---------------------------------------------------------------------------


def validate_plan(plan: AllocationPlan, cfg: ScenarioConfig) -> PlanCheck:
    """返回第一个被违反的约束（C1..C6 顺序），全部满足时返回 OK"""
    flags = [(d.alpha_e, d.alpha_c) for d in plan.decisions]
    if any(a not in (0, 1) or c not in (0, 1) for a, c in flags):
        return PlanCheck.C1
    if any(a + c != 1 for a, c in flags):
        return PlanCheck.C2
    if math.fsum(plan.edge_alloc) > cfg.edge_capacity * (1 + CAPACITY_RTOL):
        return PlanCheck.C3
    if any(not (math.isfinite(f) and f >= 0) for f in plan.edge_alloc):
        return PlanCheck.C4
    # f_n 只属于 alpha_e = 1 的设备
    if any(f != 0 and not d.alpha_e for d, f in zip(plan.decisions, plan.edge_alloc)):
        return PlanCheck.C4
    if any(not 0 < w <= 1 for w in plan.bw_alloc):
        return PlanCheck.C5
    if math.fsum(plan.bw_alloc) > 1 + CAPACITY_RTOL:
        return PlanCheck.C6
    return PlanCheck.OK


def system_cost(
    plan: AllocationPlan,
    tasks: Sequence[Task],
    devs: Sequence[DeviceProfile],
    cfg: ScenarioConfig,
) -> tuple[float, tuple[CostBreakdown, ...]]:
    """系统总代价：sum(C_n) 以及逐设备明细"""
    verdict = validate_plan(plan, cfg)
    if verdict is not PlanCheck.OK:
        raise ConstraintError(verdict.value)
    if not len(plan) == len(tasks) == len(devs):
        raise DomainError(
            f"plan covers {len(plan)} devices but got {len(tasks)} tasks / {len(devs)} profiles"
        )

    f_c = cloud_share(cfg, len(plan))
    breakdown = tuple(
        device_cost(task, dev, decision, f_e, f_c, w, cfg)
        for task, dev, decision, f_e, w in zip(
            tasks, devs, plan.decisions, plan.edge_alloc, plan.bw_alloc
        )
    )
    if cfg.enforce_deadline:
        for index, (task, cost) in enumerate(zip(tasks, breakdown)):
            if cost.latency > task.deadline_s:
                raise ConstraintError(
                    DEADLINE, f"device {index}: T_n={cost.latency:.4g}s > tau_n={task.deadline_s}s"
                )
    # 从左到右累加，与环境逐步累加 tc 的浮点顺序一致
    total = sum(cost.weighted for cost in breakdown)
    return float(total), breakdown


# ---------------------------------------------------------------------------
# 任务生成
# ---------------------------------------------------------------------------


def make_task(data_bits: float, cfg: ScenarioConfig) -> Task:
    return Task(
        data_bits=data_bits,
        cycles=data_bits * cfg.cycles_per_bit,
        deadline_s=cfg.deadline_s,
    )


def generate_tasks(
    cfg: ScenarioConfig, seed: int | None = None, count: int | None = None
) -> tuple[Task, ...]:
    """D_n ~ U[task_min, task_max]（bits），X_n = D_n * cycles_per_bit"""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    sizes = rng.uniform(cfg.task_min_bits, cfg.task_max_bits, size=cfg.n_devices if count is None else count)
    return tuple(make_task(float(size), cfg) for size in sizes)


__all__: Iterable[str] = (
    "transmission_rate",
    "edge_cost",
    "cloud_cost",
    "cloud_share",
    "device_cost",
    "validate_plan",
    "system_cost",
    "make_task",
    "generate_tasks",
)
