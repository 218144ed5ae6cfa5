"""定长经验回放：预分配 numpy 环形缓冲，满了以后覆盖最旧的条目"""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

from .models import Experience


class ReplayBuffer:
    def __init__(self, capacity: int, state_size: int, n_actions: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_size), dtype=np.float64)
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.costs = np.zeros(capacity, dtype=np.float64)
        self.next_states = np.zeros((capacity, state_size), dtype=np.float64)
        self.dones = np.zeros(capacity, dtype=bool)
        self.masks = np.zeros((capacity, n_actions), dtype=bool)
        self.next_masks = np.zeros((capacity, n_actions), dtype=bool)
        self.index = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, exp: Experience) -> None:
        i = self.index
        self.states[i] = exp.state
        self.actions[i] = exp.action
        self.costs[i] = exp.cost
        self.next_states[i] = exp.next_state
        self.dones[i] = exp.done
        self.masks[i] = exp.mask
        self.next_masks[i] = exp.next_mask
        self.index = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """有放回均匀抽样，返回列式 batch"""
        idx = rng.integers(0, self.size, size=batch_size)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "costs": self.costs[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
            "masks": self.masks[idx],
            "next_masks": self.next_masks[idx],
        }

    def get(self, position: int) -> Experience:
        """按插入顺序取第 position 条（0 为当前最旧的一条）"""
        if not 0 <= position < self.size:
            raise IndexError(position)
        start = self.index if self.size == self.capacity else 0
        i = (start + position) % self.capacity
        return Experience(
            state=self.states[i].copy(),
            action=int(self.actions[i]),
            cost=float(self.costs[i]),
            next_state=self.next_states[i].copy(),
            done=bool(self.dones[i]),
            mask=self.masks[i].copy(),
            next_mask=self.next_masks[i].copy(),
        )


__all__: Iterable[str] = ("ReplayBuffer",)
