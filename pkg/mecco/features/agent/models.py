"""学习器的超参数与经验元组"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class AgentConfig(BaseModel):
    """全部可由配置文件覆盖，并写入模型文件的 metadata"""

    model_config = ConfigDict(frozen=True)

    # 网络
    hidden_units: int = Field(default=64, ge=1, description="两层隐层宽度")
    levels_f: int = Field(default=8, ge=1, description="边缘算力档位数 L_f")
    levels_w: int = Field(default=16, ge=1, description="带宽档位数 L_w")

    # Q-learning
    gamma: float = Field(default=0.9, gt=0, lt=1, description="折扣因子")
    learning_rate: float = Field(default=1e-3, gt=0, description="Adam 步长 alpha")
    adam_beta1: float = Field(default=0.9, ge=0, lt=1)
    adam_beta2: float = Field(default=0.999, ge=0, lt=1)
    adam_eps: float = Field(default=1e-8, gt=0)

    # 训练循环
    batch_size: int = Field(default=64, ge=1)
    replay_capacity: int = Field(default=10_000, ge=1)
    target_sync: int = Field(default=100, ge=1, description="每多少次训练步硬拷贝 θ -> θ′")
    episodes: int = Field(default=3000, ge=0, description="训练 episode 数 M")
    epsilon_start: float = Field(default=1.0, ge=0, le=1)
    epsilon_end: float = Field(default=0.05, ge=0, le=1)
    epsilon_decay_fraction: float = Field(
        default=0.8, gt=0, le=1, description="epsilon 在前多少比例的 episode 内线性衰减"
    )

    @model_validator(mode="after")
    def _batch_fits(self) -> "AgentConfig":
        if self.batch_size > self.replay_capacity:
            raise ValueError("batch_size must not exceed replay_capacity")
        return self

    def epsilon_at(self, episode: int) -> float:
        """线性衰减，到 decay_fraction * M 之后保持 epsilon_end"""
        horizon = self.epsilon_decay_fraction * self.episodes
        if horizon <= 0:
            return self.epsilon_end
        progress = min(episode / horizon, 1.0)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * progress


class Experience(BaseModel):
    """(s, a, c, s', done) + s 与 s' 的可行掩码"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    state: np.ndarray
    action: int = Field(ge=0)
    cost: float = Field(ge=0)
    next_state: np.ndarray
    done: bool
    mask: np.ndarray
    next_mask: np.ndarray

    @model_validator(mode="after")
    def _check(self) -> "Experience":
        if self.action >= len(self.mask):
            raise ValueError(f"action {self.action} outside action count {len(self.mask)}")
        if not self.done and not self.next_mask.any():
            raise ValueError("non-terminal experience needs a non-empty next mask")
        return self
