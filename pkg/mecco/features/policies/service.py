"""策略与评估

每个策略只做一件事：给定 (环境, 状态, 可行掩码) 返回一个可行动作下标。
- GreedyPlatformPolicy   EO / CO：在指定平台的可行动作里选即时 C_n 最小者
- EqualAllocationPolicy  固定某种资源为 floor(L/N) 档，其余交给内层策略
- LearnedPolicy          ADRLO / DRLO：masked Q 的 argmin
- RandomPolicy           可行集合上均匀抽样（按 seed 复现）
- OraclePolicy           回放穷举得到的最优动作序列
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from enum import Enum
from typing import TextIO

import numpy as np
import polars as pl
from loguru import logger

from ...core.errors import AdmissionError, ConfigError
from ..agent.network import QNetworkParams, forward
from ..costs.models import ScenarioConfig
from ..env.models import Platform, SystemState
from ..env.service import OffloadingEnv
from .models import DEVICE_SCHEMA, SEED_SCHEMA, EvalReport, PolicyChoice, PolicyName
from .oracle import brute_force_oracle


class Policy:
    name: str = "policy"

    def start_episode(self, env: OffloadingEnv, state: SystemState, seed: int) -> None:
        """每个 episode 开始时调用一次"""

    def choose(self, env: OffloadingEnv, state: SystemState, mask: np.ndarray) -> PolicyChoice:
        raise NotImplementedError


def _greedy(env: OffloadingEnv, state: SystemState, candidates: np.ndarray) -> int:
    """即时加权代价最小；并列取最小下标"""
    best_index, best_cost = -1, np.inf
    for index in np.flatnonzero(candidates):
        cost = env.preview_cost(state, int(index)).weighted
        if cost < best_cost:
            best_index, best_cost = int(index), cost
    return best_index


def platform_mask(env: OffloadingEnv, platform: Platform) -> np.ndarray:
    edge = env.f_levels > 0
    return edge if platform is Platform.EDGE else ~edge


def fair_share_mask(env: OffloadingEnv, state: SystemState) -> np.ndarray:
    """每个设备最多拿剩余资源的 1/remaining（至少一档）"""
    if state.done:
        return np.zeros(env.n_actions, dtype=bool)
    f_cap = max(1, state.ec_levels // state.remaining)
    w_cap = max(1, state.bw_levels // state.remaining)
    return (env.f_levels <= f_cap) & (env.w_levels <= w_cap)


class GreedyPlatformPolicy(Policy):
    """EO / CO：在公平份额内贪心；EO 在边缘耗尽时强制上云并标记 fallback"""

    def __init__(self, platform: Platform, name: str | None = None):
        self.platform = platform
        self.name = name or (PolicyName.EO.value if platform is Platform.EDGE else PolicyName.CO.value)

    def _pick(self, env: OffloadingEnv, state: SystemState, candidates: np.ndarray) -> int:
        capped = candidates & fair_share_mask(env, state)
        return _greedy(env, state, capped if capped.any() else candidates)

    def choose(self, env: OffloadingEnv, state: SystemState, mask: np.ndarray) -> PolicyChoice:
        candidates = mask & platform_mask(env, self.platform)
        if candidates.any():
            return PolicyChoice(self._pick(env, state, candidates))
        logger.warning(f"⚠️ [policy] {self.name}: no {self.platform.value} action for device {state.cursor}, forcing cloud")
        return PolicyChoice(self._pick(env, state, mask & platform_mask(env, Platform.CLOUD)), fallback=True)


class LearnedPolicy(Policy):
    def __init__(self, params: QNetworkParams, name: str = PolicyName.ADRLO.value):
        self.params = params
        self.name = name

    def choose(self, env: OffloadingEnv, state: SystemState, mask: np.ndarray) -> PolicyChoice:
        q = forward(self.params, env.encode_state(state), mask)
        return PolicyChoice(int(np.argmin(q)))


class RandomPolicy(Policy):
    name = PolicyName.RANDOM.value

    def __init__(self) -> None:
        self.rng = np.random.default_rng(0)

    def start_episode(self, env: OffloadingEnv, state: SystemState, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def choose(self, env: OffloadingEnv, state: SystemState, mask: np.ndarray) -> PolicyChoice:
        return PolicyChoice(int(self.rng.choice(np.flatnonzero(mask))))


class OraclePolicy(Policy):
    name = PolicyName.ORACLE.value

    def __init__(self) -> None:
        self.actions: tuple[int, ...] = ()

    def start_episode(self, env: OffloadingEnv, state: SystemState, seed: int) -> None:
        self.actions = brute_force_oracle(env.scenario, env.levels_f, env.levels_w, state.tasks).actions

    def choose(self, env: OffloadingEnv, state: SystemState, mask: np.ndarray) -> PolicyChoice:
        return PolicyChoice(self.actions[state.cursor])


class EqualShare(str, Enum):
    """被固定为均分的资源"""

    EDGE = "edge"
    BANDWIDTH = "bandwidth"
    BOTH = "both"


class EqualAllocationPolicy(Policy):
    """固定资源取 floor(L/N) 档，内层策略只在剩下的自由度上决策"""

    def __init__(self, variant: EqualShare, inner: Policy, name: str):
        self.variant = variant
        self.inner = inner
        self.name = name

    def restrict(self, env: OffloadingEnv, state: SystemState, mask: np.ndarray) -> np.ndarray:
        n = state.n_devices
        allowed = mask.copy()
        if self.variant in (EqualShare.BANDWIDTH, EqualShare.BOTH):
            if n > env.levels_w:
                raise AdmissionError(f"cannot split {env.levels_w} bandwidth levels equally over {n} devices")
            allowed &= env.w_levels == env.levels_w // n
        if self.variant in (EqualShare.EDGE, EqualShare.BOTH):
            if n > env.levels_f:
                raise AdmissionError(f"cannot split {env.levels_f} edge levels equally over {n} devices")
            # 云端动作不占边缘算力，不受限制
            allowed &= (env.f_levels == 0) | (env.f_levels == env.levels_f // n)
        return allowed

    def start_episode(self, env: OffloadingEnv, state: SystemState, seed: int) -> None:
        self.inner.start_episode(env, state, seed)

    def choose(self, env: OffloadingEnv, state: SystemState, mask: np.ndarray) -> PolicyChoice:
        return self.inner.choose(env, state, self.restrict(env, state, mask))


def build_policy(name: PolicyName | str, params: QNetworkParams | None = None) -> Policy:
    """按名字构造策略；学习类策略缺模型时抛 ConfigError"""
    try:
        name = PolicyName(name)
    except ValueError as e:
        choices = ", ".join(p.value for p in PolicyName)
        raise ConfigError(f"unknown policy {name!r}; expected one of {choices}") from e
    if name.learned and params is None:
        raise ConfigError(f"policy {name.value} needs a trained model (--model or inline training)")

    match name:
        case PolicyName.EO:
            return GreedyPlatformPolicy(Platform.EDGE)
        case PolicyName.CO:
            return GreedyPlatformPolicy(Platform.CLOUD)
        case PolicyName.EO_EQUAL:
            return EqualAllocationPolicy(EqualShare.BOTH, GreedyPlatformPolicy(Platform.EDGE), name.value)
        case PolicyName.CO_EQUAL:
            return EqualAllocationPolicy(EqualShare.BANDWIDTH, GreedyPlatformPolicy(Platform.CLOUD), name.value)
        case PolicyName.ADRLO | PolicyName.DRLO:
            return LearnedPolicy(params, name.value)
        case PolicyName.NO_EDGE_ALLOC:
            return EqualAllocationPolicy(EqualShare.EDGE, LearnedPolicy(params), name.value)
        case PolicyName.NO_BW_ALLOC:
            return EqualAllocationPolicy(EqualShare.BANDWIDTH, LearnedPolicy(params), name.value)
        case PolicyName.ORACLE:
            return OraclePolicy()
        case PolicyName.RANDOM:
            return RandomPolicy()
    raise ConfigError(f"unknown policy {name}")


# ---------------------------------------------------------------------------
# 评估
# ---------------------------------------------------------------------------


def run_episode(
    policy: Policy, env: OffloadingEnv, state: SystemState, seed: int
) -> tuple[SystemState, list[dict], int]:
    """跑完一个 epsilon=0 的 episode，返回 (终止状态, 逐设备明细, fallback 次数)"""
    policy.start_episode(env, state, seed)
    devices: list[dict] = []
    fallbacks = 0
    while not state.done:
        mask = env.feasible_mask(state)
        choice = policy.choose(env, state, mask)
        fallbacks += int(choice.fallback)
        outcome = env.step(state, choice.index)
        action = env.actions[choice.index]
        f, w = env.quanta(action)
        devices.append(
            {
                "seed": seed,
                "device": state.cursor,
                "action": choice.index,
                "platform": action.platform.value,
                "f": f,
                "w": w,
                "latency_s": outcome.breakdown.latency,
                "energy_j": outcome.breakdown.energy,
                "cost": outcome.step_cost,
            }
        )
        state = outcome.next_state
    return state, devices, fallbacks


def evaluate_policy(
    policy: Policy,
    scenario: ScenarioConfig,
    seeds: Sequence[int],
    levels_f: int = 8,
    levels_w: int = 16,
    trajectory: TextIO | None = None,
) -> EvalReport:
    """每个 seed 抽一组任务、贪心跑一个 episode，再按 seed 汇总"""
    env = OffloadingEnv(scenario, levels_f, levels_w, trajectory=trajectory)
    seed_rows: list[dict] = []
    device_rows: list[dict] = []
    for seed in seeds:
        final, devices, fallbacks = run_episode(policy, env, env.reset(seed=seed), seed)
        n = max(len(devices), 1)
        seed_rows.append(
            {
                "policy": policy.name,
                "seed": seed,
                "total_cost": final.tc,
                "mean_latency_s": sum(d["latency_s"] for d in devices) / n,
                "mean_energy_j": sum(d["energy_j"] for d in devices) / n,
                "edge_fraction": sum(d["platform"] == Platform.EDGE.value for d in devices) / n,
                "fallback_count": fallbacks,
            }
        )
        device_rows.extend(devices)

    report = EvalReport(
        policy=policy.name,
        seeds=tuple(seeds),
        per_seed=pl.DataFrame(seed_rows, schema=SEED_SCHEMA),
        devices=pl.DataFrame(device_rows, schema=DEVICE_SCHEMA),
    )
    if report.fallback_count:
        logger.warning(f"⚠️ [policy] {policy.name}: {report.fallback_count} forced-cloud fallbacks")
    logger.info(f"📊 [policy] {policy.name} over {len(seeds)} seeds: mean cost {report.mean_total_cost:.6g}")
    return report


__all__: Iterable[str] = (
    "Policy",
    "GreedyPlatformPolicy",
    "LearnedPolicy",
    "RandomPolicy",
    "OraclePolicy",
    "EqualShare",
    "EqualAllocationPolicy",
    "platform_mask",
    "fair_share_mask",
    "build_policy",
    "run_episode",
    "evaluate_policy",
)
