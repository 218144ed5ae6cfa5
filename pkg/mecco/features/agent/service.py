"""ADRLO 训练循环

- select_action：epsilon-greedy，argmin，并列取最小下标
- td_targets：double DQN（在线网络选、目标网络评）或 vanilla min 目标
- train_step：一次 MSE 梯度步 + Adam
- sync_target：每 period 步硬拷贝 θ -> θ′
- q_learning_update：表格形式的同一更新规则
- train：交互 / 存储 / 采样 / 训练 的完整循环
"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np
import polars as pl
from loguru import logger
from pydantic import BaseModel, ConfigDict

from ...core.errors import DomainError, TrainingError
from ..env.service import STATE_SIZE, OffloadingEnv
from .models import AgentConfig, Experience
from .network import QNetworkParams, forward, init_params, loss_and_grad
from .optim import Adam
from .replay import ReplayBuffer

TRACE_COLUMNS = ("episode", "epsilon", "episode_cost", "mean_loss")


class TrainResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: QNetworkParams
    trace: pl.DataFrame


# ---------------------------------------------------------------------------
# 动作选择与目标
# ---------------------------------------------------------------------------


def select_action(qvals: np.ndarray, mask: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    mask = np.asarray(mask, dtype=bool)
    feasible = np.flatnonzero(mask)
    if feasible.size == 0:
        raise DomainError("no feasible action to select from")
    if rng.random() < epsilon:
        return int(rng.choice(feasible))
    masked = np.where(mask, qvals, np.inf)
    # np.argmin 返回第一个最小值，即并列时的最小下标
    return int(np.argmin(masked))


def td_targets(
    costs: np.ndarray,
    dones: np.ndarray,
    q_online_next: np.ndarray,
    q_target_next: np.ndarray,
    gamma: float,
    double: bool = True,
) -> np.ndarray:
    """y = c                                   (done)
    y = c + gamma * Q′(s′, argmin_a Q(s′, a))  (double)
    y = c + gamma * min_a Q′(s′, a)            (vanilla)

    两组 Q 都已对 s′ 的不可行动作填 +inf。
    """
    costs = np.asarray(costs, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    q_online_next = np.atleast_2d(q_online_next)
    q_target_next = np.atleast_2d(q_target_next)
    rows = np.arange(len(costs))
    if double:
        chosen = np.argmin(q_online_next, axis=1)
        bootstrap = q_target_next[rows, chosen]
    else:
        bootstrap = q_target_next.min(axis=1)
    bootstrap = np.where(dones, 0.0, bootstrap)
    return costs + gamma * bootstrap


def batch_targets(
    online: QNetworkParams,
    target: QNetworkParams,
    batch: dict[str, np.ndarray],
    gamma: float,
    double: bool = True,
) -> np.ndarray:
    """θ′ 只参与前向，不会被任何梯度步修改"""
    q_target_next = forward(target, batch["next_states"], batch["next_masks"])
    q_online_next = forward(online, batch["next_states"], batch["next_masks"]) if double else q_target_next
    return td_targets(batch["costs"], batch["dones"], q_online_next, q_target_next, gamma, double)


def train_step(
    online: QNetworkParams,
    target: QNetworkParams,
    optimizer: Adam,
    batch: dict[str, np.ndarray],
    cfg: AgentConfig,
    double: bool = True,
) -> float:
    """返回本步损失；在线参数被 Adam 原地更新"""
    y = batch_targets(online, target, batch, cfg.gamma, double)
    loss, grads = loss_and_grad(online, batch["states"], batch["actions"], y, batch["masks"])
    bad = [name for name, g in grads.items() if not np.isfinite(g).all()]
    if not np.isfinite(loss) or bad:
        logger.error(f"💥 [agent] non-finite loss/gradient (loss={loss}, layers={bad})")
        raise TrainingError(f"non-finite gradient in {bad or 'loss'} at Adam step {optimizer.t + 1}")
    optimizer.step(online, grads)
    if not online.is_finite():
        raise TrainingError(f"parameters became non-finite after Adam step {optimizer.t}")
    return loss


def sync_target(online: QNetworkParams, target: QNetworkParams, step: int, period: int) -> QNetworkParams:
    if step % period == 0:
        return online.copy()
    return target


def q_learning_update(
    table: np.ndarray,
    state: int,
    action: int,
    cost: float,
    next_state: int,
    done: bool,
    alpha: float,
    gamma: float,
    next_mask: np.ndarray | None = None,
) -> float:
    """Q(s,a) <- Q(s,a) + alpha * (c + gamma * min_a′ Q(s′,a′) - Q(s,a))，返回 TD 误差"""
    target = cost
    if not done:
        row = table[next_state]
        if next_mask is not None:
            row = row[np.asarray(next_mask, dtype=bool)]
        target += gamma * float(row.min())
    td_error = target - table[state, action]
    table[state, action] += alpha * td_error
    return float(td_error)


# ---------------------------------------------------------------------------
# 训练循环
# ---------------------------------------------------------------------------


def train(
    env: OffloadingEnv,
    cfg: AgentConfig,
    seed: int = 0,
    dueling: bool = True,
    double: bool = True,
) -> TrainResult:
    """M 个 episode；每个 episode 的任务从 rng 派生的种子重新抽取。给定 seed 完全确定"""
    rng = np.random.default_rng(seed)
    online = init_params(STATE_SIZE, env.n_actions, cfg.hidden_units, dueling, seed)
    target = online.copy()
    optimizer = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
    buffer = ReplayBuffer(cfg.replay_capacity, STATE_SIZE, env.n_actions)
    name = "ADRLO" if dueling else "DRLO"
    logger.info(f"🚀 [agent] training {name}: {cfg.episodes} episodes, {env.n_actions} actions, seed {seed}")

    rows: list[dict] = []
    train_steps = 0
    report_every = max(1, cfg.episodes // 10)
    for episode in range(cfg.episodes):
        epsilon = cfg.epsilon_at(episode)
        state = env.reset(seed=int(rng.integers(2**32)))
        features, mask = env.encode_state(state), env.feasible_mask(state)
        losses: list[float] = []
        while not state.done:
            action = select_action(forward(online, features, mask), mask, epsilon, rng)
            outcome = env.step(state, action)
            next_state = outcome.next_state
            next_features, next_mask = env.encode_state(next_state), env.feasible_mask(next_state)
            buffer.push(
                Experience(
                    state=features,
                    action=action,
                    cost=outcome.step_cost,
                    next_state=next_features,
                    done=outcome.done,
                    mask=mask,
                    next_mask=next_mask,
                )
            )
            if len(buffer) >= cfg.batch_size:
                batch = buffer.sample(cfg.batch_size, rng)
                losses.append(train_step(online, target, optimizer, batch, cfg, double))
                train_steps += 1
                target = sync_target(online, target, train_steps, cfg.target_sync)
            state, features, mask = next_state, next_features, next_mask

        rows.append(
            {
                "episode": episode,
                "epsilon": epsilon,
                "episode_cost": state.tc,
                "mean_loss": float(np.mean(losses)) if losses else None,
            }
        )
        if (episode + 1) % report_every == 0:
            logger.debug(f"📈 [agent] episode {episode + 1}/{cfg.episodes} cost={state.tc:.6g} eps={epsilon:.3f}")

    trace = pl.DataFrame(
        rows,
        schema={
            "episode": pl.Int64,
            "epsilon": pl.Float64,
            "episode_cost": pl.Float64,
            "mean_loss": pl.Float64,
        },
    )
    logger.info(f"✅ [agent] {name} finished after {train_steps} train steps")
    return TrainResult(params=online, trace=trace)


def greedy_actions(params: QNetworkParams, features: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """批量 argmin，用于比较两份模型的决策"""
    return np.argmin(forward(params, features, masks), axis=1)


__all__: Iterable[str] = (
    "TRACE_COLUMNS",
    "TrainResult",
    "select_action",
    "td_targets",
    "batch_targets",
    "train_step",
    "sync_target",
    "q_learning_update",
    "train",
    "greedy_actions",
)
