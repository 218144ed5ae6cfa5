"""小规模实例的穷举 oracle

在环境的量化动作空间上做深度优先搜索：
- 每个设备的代价只依赖它自己的任务和动作（f_c 按 N 均分），先预计算代价表；
- 剩余资源档位与环境掩码规则一致（为后续设备各预留一个带宽档位）；
- 部分和 >= 当前最优时剪枝（代价非负），只在严格更小时替换，
  按动作下标的字典序遍历，于是并列时保留字典序最小的方案。
最终方案再交给 system_cost 复核。
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence

from loguru import logger

from ...core.errors import ConstraintError, SizeError
from ..costs.models import ScenarioConfig, Task
from ..costs.service import DEADLINE, generate_tasks, system_cost
from ..env.service import OffloadingEnv
from .models import OracleResult

SEARCH_LIMIT = 10**7


def search_size(n_devices: int, levels_f: int, levels_w: int) -> int:
    return (levels_w + levels_f * levels_w) ** n_devices


def brute_force_oracle(
    scenario: ScenarioConfig,
    levels_f: int = 8,
    levels_w: int = 16,
    tasks: Sequence[Task] | None = None,
) -> OracleResult:
    """tasks 缺省时按 scenario.seed 抽取 scenario.n_devices 个任务"""
    if tasks is None:
        tasks = generate_tasks(scenario)
    tasks = tuple(tasks)
    n = len(tasks)
    size = search_size(n, levels_f, levels_w)
    if size > SEARCH_LIMIT:
        raise SizeError(
            f"exhaustive search over {size:.3g} plans exceeds {SEARCH_LIMIT:.0e}; "
            "shrink n_devices, levels_f or levels_w"
        )

    env = OffloadingEnv(scenario, levels_f, levels_w)
    start = env.reset(tasks=tasks)
    f_need = [int(v) for v in env.f_levels]
    w_need = [int(v) for v in env.w_levels]
    table: list[list[float]] = []
    for device in range(n):
        at = start.model_copy(update={"cursor": device})
        row = []
        for index in range(env.n_actions):
            cost = env.preview_cost(at, index)
            late = scenario.enforce_deadline and cost.latency > tasks[device].deadline_s
            row.append(math.inf if late else cost.weighted)
        table.append(row)

    best_cost = math.inf
    best_actions: tuple[int, ...] | None = None
    explored = 0
    chosen: list[int] = []

    def dfs(device: int, ec: int, bw: int, partial: float) -> None:
        nonlocal best_cost, best_actions, explored
        explored += 1
        if partial >= best_cost:
            return
        if device == n:
            best_cost, best_actions = partial, tuple(chosen)
            return
        max_w = bw - (n - device - 1)
        row = table[device]
        for index in range(len(row)):
            if f_need[index] > ec or w_need[index] > max_w or row[index] == math.inf:
                continue
            chosen.append(index)
            dfs(device + 1, ec - f_need[index], bw - w_need[index], partial + row[index])
            chosen.pop()

    dfs(0, levels_f, levels_w, 0.0)
    if best_actions is None:
        raise ConstraintError(DEADLINE, "no quantized plan lets every device meet its deadline")

    final = env.rollout(start, best_actions)
    plan = env.plan_of(final)
    total, _ = system_cost(plan, tasks, scenario.device_profiles(n), scenario)
    logger.debug(f"🔎 [oracle] N={n}: optimum {total:.6g} after {explored} nodes")
    return OracleResult(plan=plan, cost=total, actions=best_actions, explored=explored)


__all__: Iterable[str] = ("SEARCH_LIMIT", "search_size", "brute_force_oracle")
