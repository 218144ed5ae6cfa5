"""全连接 Q 网络（numpy, float64）

结构：input -> hidden -> hidden（ReLU）-> 头部
    dueling=True : value (hidden -> 1) + advantage (hidden -> n_actions)
                   Q = V + (A - mean_{可行 a} A)
    dueling=False: 单头 q (hidden -> n_actions)

权重初始化：每层 W、b 都从 U(-1/sqrt(fan_in), 1/sqrt(fan_in)) 抽取，
按层顺序使用同一个 numpy Generator(seed)。

不可行动作输出 +inf，argmin 永远不会选中它们。
"""

from __future__ import annotations

from collections.abc import Iterable, Iterator

import numpy as np

from ...core.errors import DomainError

MASKED = np.inf

TRUNK = ("trunk1", "trunk2")
DUELING_HEADS = ("value", "advantage")
SINGLE_HEAD = ("q",)


class QNetworkParams:
    """按层名保存的参数数组，名字形如 "trunk1.W" / "trunk1.b" """

    def __init__(self, arrays: dict[str, np.ndarray], dueling: bool):
        self.arrays = {name: np.asarray(value, dtype=np.float64) for name, value in arrays.items()}
        self.dueling = dueling

    @property
    def layers(self) -> tuple[str, ...]:
        return TRUNK + (DUELING_HEADS if self.dueling else SINGLE_HEAD)

    @property
    def n_inputs(self) -> int:
        return self.arrays["trunk1.W"].shape[0]

    @property
    def hidden(self) -> int:
        return self.arrays["trunk1.W"].shape[1]

    @property
    def n_actions(self) -> int:
        head = "advantage" if self.dueling else "q"
        return self.arrays[f"{head}.W"].shape[1]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def copy(self) -> "QNetworkParams":
        return QNetworkParams({k: v.copy() for k, v in self.arrays.items()}, self.dueling)

    def is_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())

    def equals(self, other: "QNetworkParams") -> bool:
        return (
            self.dueling == other.dueling
            and self.arrays.keys() == other.arrays.keys()
            and all(np.array_equal(v, other.arrays[k]) for k, v in self.arrays.items())
        )


def init_params(
    n_inputs: int, n_actions: int, hidden: int = 64, dueling: bool = True, seed: int = 0
) -> QNetworkParams:
    rng = np.random.default_rng(seed)
    shapes = [("trunk1", n_inputs, hidden), ("trunk2", hidden, hidden)]
    if dueling:
        shapes += [("value", hidden, 1), ("advantage", hidden, n_actions)]
    else:
        shapes += [("q", hidden, n_actions)]

    arrays: dict[str, np.ndarray] = {}
    for name, fan_in, fan_out in shapes:
        bound = 1.0 / np.sqrt(fan_in)
        arrays[f"{name}.W"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        arrays[f"{name}.b"] = rng.uniform(-bound, bound, size=fan_out)
    return QNetworkParams(arrays, dueling)


# ---------------------------------------------------------------------------
# 前向
# ---------------------------------------------------------------------------


def _as_batch(params: QNetworkParams, features: np.ndarray, mask: np.ndarray | None):
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != params.n_inputs:
        raise DomainError(f"expected features of length {params.n_inputs}, got shape {np.shape(features)}")
    if mask is None:
        m = np.ones((x.shape[0], params.n_actions), dtype=bool)
    else:
        m = np.atleast_2d(np.asarray(mask, dtype=bool))
        if m.shape != (x.shape[0], params.n_actions):
            raise DomainError(f"mask shape {np.shape(mask)} does not match {params.n_actions} actions")
    return x, m, single


def _forward_cache(params: QNetworkParams, x: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, dict]:
    """返回未遮罩的 Q 以及反向传播需要的中间量"""
    z1 = x @ params["trunk1.W"] + params["trunk1.b"]
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ params["trunk2.W"] + params["trunk2.b"]
    h2 = np.maximum(z2, 0.0)
    cache = {"x": x, "z1": z1, "h1": h1, "z2": z2, "h2": h2, "m": m}

    if not params.dueling:
        return h2 @ params["q.W"] + params["q.b"], cache

    value = h2 @ params["value.W"] + params["value.b"]
    advantage = h2 @ params["advantage.W"] + params["advantage.b"]
    count = np.maximum(m.sum(axis=1, keepdims=True), 1)
    mean_adv = (advantage * m).sum(axis=1, keepdims=True) / count
    cache["count"] = count
    return value + advantage - mean_adv, cache


def forward(params: QNetworkParams, features: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """每个动作的 Q 值，不可行位置为 +inf；一维输入返回一维结果"""
    x, m, single = _as_batch(params, features, mask)
    q, _ = _forward_cache(params, x, m)
    q = np.where(m, q, MASKED)
    return q[0] if single else q


# ---------------------------------------------------------------------------
# 损失与梯度
# ---------------------------------------------------------------------------


def loss_and_grad(
    params: QNetworkParams,
    features: np.ndarray,
    actions: np.ndarray,
    targets: np.ndarray,
    masks: np.ndarray | None = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """L = mean_j (y_j - Q(s_j, a_j))^2 及其对全部参数的解析梯度"""
    x, m, _ = _as_batch(params, features, masks)
    actions = np.asarray(actions, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.float64)
    batch = x.shape[0]
    rows = np.arange(batch)

    q, cache = _forward_cache(params, x, m)
    residual = q[rows, actions] - targets
    loss = float(np.mean(residual**2))
    g = 2.0 * residual / batch

    onehot = np.zeros_like(q)
    onehot[rows, actions] = 1.0
    grads: dict[str, np.ndarray] = {}
    h2 = cache["h2"]

    if params.dueling:
        d_value = g[:, None]
        d_adv = g[:, None] * (onehot - m / cache["count"])
        grads["value.W"] = h2.T @ d_value
        grads["value.b"] = d_value.sum(axis=0)
        grads["advantage.W"] = h2.T @ d_adv
        grads["advantage.b"] = d_adv.sum(axis=0)
        d_h2 = d_value @ params["value.W"].T + d_adv @ params["advantage.W"].T
    else:
        d_q = g[:, None] * onehot
        grads["q.W"] = h2.T @ d_q
        grads["q.b"] = d_q.sum(axis=0)
        d_h2 = d_q @ params["q.W"].T

    d_z2 = d_h2 * (cache["z2"] > 0)
    grads["trunk2.W"] = cache["h1"].T @ d_z2
    grads["trunk2.b"] = d_z2.sum(axis=0)
    d_h1 = d_z2 @ params["trunk2.W"].T
    d_z1 = d_h1 * (cache["z1"] > 0)
    grads["trunk1.W"] = x.T @ d_z1
    grads["trunk1.b"] = d_z1.sum(axis=0)
    return loss, grads


__all__: Iterable[str] = (
    "MASKED",
    "QNetworkParams",
    "init_params",
    "forward",
    "loss_and_grad",
)
