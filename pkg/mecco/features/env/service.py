"""顺序调度环境

一个 episode 依次为 N 个设备各做一次 (平台, f 档位, w 档位) 决策。
剩余资源以整数档位记账：
    ec = ec_levels * F_e / L_f
    bw = bw_levels / L_w
动作下标布局固定：先 cloud x L_w，再 edge x L_f x L_w。
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from typing import TextIO

import numpy as np
from loguru import logger

from ...core.errors import AdmissionError, ConstraintError
from ..costs.models import (
    AllocationPlan,
    CostBreakdown,
    OffloadDecision,
    PlanCheck,
    ScenarioConfig,
    Task,
)
from ..costs.service import DEADLINE, cloud_share, device_cost, generate_tasks
from .models import DiscreteAction, FeasibleActions, Platform, StepOutcome, SystemState

STATE_SIZE = 6


def build_action_space(levels_f: int, levels_w: int) -> tuple[DiscreteAction, ...]:
    cloud = [DiscreteAction(platform=Platform.CLOUD, w_level=w) for w in range(1, levels_w + 1)]
    edge = [
        DiscreteAction(platform=Platform.EDGE, f_level=f, w_level=w)
        for f in range(1, levels_f + 1)
        for w in range(1, levels_w + 1)
    ]
    return tuple(cloud + edge)


class OffloadingEnv:
    """联合卸载问题的 MDP 分解；同一实例只在一个线程里使用"""

    def __init__(
        self,
        scenario: ScenarioConfig,
        levels_f: int = 8,
        levels_w: int = 16,
        trajectory: TextIO | None = None,
    ):
        if levels_f < 1 or levels_w < 1:
            raise AdmissionError(f"levels must be positive, got L_f={levels_f}, L_w={levels_w}")
        self.scenario = scenario
        self.levels_f = levels_f
        self.levels_w = levels_w
        self.profile = scenario.device_profile()
        self.actions = build_action_space(levels_f, levels_w)
        self.trajectory = trajectory
        self._episode = -1

        # 每个动作消耗的档位，0 表示不占用边缘算力
        self.f_levels = np.array([a.f_level or 0 for a in self.actions], dtype=np.int64)
        self.w_levels = np.array([a.w_level for a in self.actions], dtype=np.int64)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    # --- 1. 动作与档位 ---
    def action_index(self, action: DiscreteAction) -> int:
        if action.platform is Platform.CLOUD:
            return action.w_level - 1
        assert action.f_level is not None
        return self.levels_w + (action.f_level - 1) * self.levels_w + (action.w_level - 1)

    def quanta(self, action: DiscreteAction) -> tuple[float, float]:
        """(f, w)：f = f_level*F_e/L_f，w = w_level/L_w"""
        f = 0.0
        if action.f_level is not None:
            f = self.scenario.edge_capacity * action.f_level / self.levels_f
        return f, action.w_level / self.levels_w

    def _resolve(self, action: DiscreteAction | int) -> tuple[int, DiscreteAction]:
        if isinstance(action, DiscreteAction):
            return self.action_index(action), action
        index = int(action)
        if not 0 <= index < self.n_actions:
            raise ConstraintError(PlanCheck.C1.value, f"action index {index} out of range")
        return index, self.actions[index]

    # --- 2. episode 生命周期 ---
    def reset(self, seed: int | None = None, tasks: Sequence[Task] | None = None) -> SystemState:
        """tc=0, ec=F_e, bw=1, cursor=0；tasks 为空时按 seed 均匀抽取"""
        if tasks is None:
            tasks = generate_tasks(self.scenario, seed=seed)
        tasks = tuple(tasks)
        n = len(tasks)
        if n > self.levels_w:
            raise AdmissionError(
                f"{n} devices cannot each receive a bandwidth quantum with L_w={self.levels_w}; "
                "raise levels_w or reduce n_devices"
            )
        self._episode += 1
        return SystemState(
            tc=0.0,
            ec_levels=self.levels_f,
            bw_levels=self.levels_w,
            cursor=0,
            levels_f=self.levels_f,
            levels_w=self.levels_w,
            tasks=tasks,
            cost_scale=self.cost_scale(tasks),
            scenario=self.scenario,
        )

    def cost_scale(self, tasks: Sequence[Task]) -> float:
        """全部上云、带宽均分 1/N 时的总代价，作为 tc 的归一化常数"""
        if not tasks:
            return 1.0
        n = len(tasks)
        f_c = cloud_share(self.scenario, n)
        total = sum(
            device_cost(task, self.profile, OffloadDecision.cloud(), 0.0, f_c, 1 / n, self.scenario).weighted
            for task in tasks
        )
        return total if total > 0 else 1.0

    def feasible_mask(self, state: SystemState) -> np.ndarray:
        if state.done:
            return np.zeros(self.n_actions, dtype=bool)
        # 给后面每个设备各预留一个最小带宽档位
        max_w = state.bw_levels - (state.remaining - 1)
        mask = (self.w_levels <= max_w) & (self.f_levels <= state.ec_levels)
        if self.scenario.enforce_deadline:
            task = state.tasks[state.cursor]
            for index in np.flatnonzero(mask):
                if self.preview_cost(state, int(index)).latency > task.deadline_s:
                    mask[index] = False
            if not mask.any():
                raise ConstraintError(
                    DEADLINE, f"device {state.cursor} cannot meet tau_n={task.deadline_s}s with any action"
                )
        return mask

    def feasible_actions(self, state: SystemState) -> FeasibleActions:
        mask = self.feasible_mask(state)
        return FeasibleActions(actions=self.actions, mask=tuple(bool(m) for m in mask))

    def preview_cost(self, state: SystemState, action: DiscreteAction | int) -> CostBreakdown:
        """当前设备执行该动作的即时代价，不检查可行性、不推进状态"""
        _, resolved = self._resolve(action)
        f, w = self.quanta(resolved)
        task = state.tasks[state.cursor]
        decision = (
            OffloadDecision.edge() if resolved.platform is Platform.EDGE else OffloadDecision.cloud()
        )
        f_c = cloud_share(self.scenario, state.n_devices)
        return device_cost(task, self.profile, decision, f, f_c, w, self.scenario)

    def step(self, state: SystemState, action: DiscreteAction | int) -> StepOutcome:
        index, resolved = self._resolve(action)
        if state.done:
            raise ConstraintError(PlanCheck.C1.value, "episode already finished")
        max_w = state.bw_levels - (state.remaining - 1)
        if self.f_levels[index] > state.ec_levels:
            raise ConstraintError(
                PlanCheck.C3.value, f"f_level {resolved.f_level} exceeds remaining {state.ec_levels}"
            )
        if self.w_levels[index] > max_w:
            raise ConstraintError(
                PlanCheck.C6.value, f"w_level {resolved.w_level} exceeds reservable {max_w}"
            )

        breakdown = self.preview_cost(state, resolved)
        if self.scenario.enforce_deadline and breakdown.latency > state.tasks[state.cursor].deadline_s:
            raise ConstraintError(DEADLINE, f"device {state.cursor} misses its deadline")

        next_state = state.model_copy(
            update={
                "tc": state.tc + breakdown.weighted,
                "ec_levels": state.ec_levels - int(self.f_levels[index]),
                "bw_levels": state.bw_levels - int(self.w_levels[index]),
                "cursor": state.cursor + 1,
                "actions": state.actions + (index,),
            }
        )
        if self.trajectory is not None:
            f, w = self.quanta(resolved)
            self.trajectory.write(
                f"{self._episode}\t{state.cursor}\t{index}\t{f!r}\t{w!r}\t"
                f"{resolved.platform.value}\t{breakdown.weighted!r}\n"
            )
        return StepOutcome(
            next_state=next_state,
            step_cost=breakdown.weighted,
            done=next_state.done,
            breakdown=breakdown,
        )

    # --- 3. 特征与方案 ---
    def encode_state(self, state: SystemState) -> np.ndarray:
        """[tc/(tc+scale), ec/F_e, bw, D/task_max, X/X_max, (N-cursor)/N]"""
        cfg = self.scenario
        features = np.zeros(STATE_SIZE, dtype=np.float64)
        features[0] = state.tc / (state.tc + state.cost_scale)
        features[1] = state.ec_levels / self.levels_f
        features[2] = state.bw_levels / self.levels_w
        if not state.done:
            task = state.tasks[state.cursor]
            features[3] = task.data_bits / cfg.task_max_bits
            features[4] = task.cycles / (cfg.task_max_bits * cfg.cycles_per_bit)
            features[5] = state.remaining / state.n_devices
        return features

    def plan_of(self, state: SystemState) -> AllocationPlan:
        """把已执行的动作拼成 AllocationPlan（只含已调度的设备）"""
        decisions, edge_alloc, bw_alloc = [], [], []
        for index in state.actions:
            action = self.actions[index]
            f, w = self.quanta(action)
            decisions.append(
                OffloadDecision.edge() if action.platform is Platform.EDGE else OffloadDecision.cloud()
            )
            edge_alloc.append(f)
            bw_alloc.append(w)
        return AllocationPlan(
            decisions=tuple(decisions), edge_alloc=tuple(edge_alloc), bw_alloc=tuple(bw_alloc)
        )

    def rollout(self, state: SystemState, actions: Iterable[int]) -> SystemState:
        for index in actions:
            state = self.step(state, index).next_state
        logger.debug(f"🧭 [env] rollout finished at cursor {state.cursor}, tc={state.tc:.6g}")
        return state


__all__: Iterable[str] = ("STATE_SIZE", "build_action_space", "OffloadingEnv")
