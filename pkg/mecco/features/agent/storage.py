"""模型文件：带版本号的 JSON 文本

    {
      "format": "mecco-qnet",
      "version": 1,
      "dueling": true,
      "n_inputs": 6, "n_actions": 144, "hidden": 64,
      "metadata": {...},                       # AgentConfig、训练种子等
      "arrays": {"trunk1.W": {"shape": [6, 64], "values": [...]}, ...}
    }

values 按行优先展开，浮点数以 repr 写出，读回后逐位一致。
"""

from __future__ import annotations

import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, ValidationError

from ...core.errors import DecodeError
from .network import QNetworkParams

MODEL_FORMAT = "mecco-qnet"
MODEL_VERSION = 1


class _ArrayRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: list[int]
    values: list[float]


class _ModelFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: str
    version: int
    dueling: bool
    n_inputs: int
    n_actions: int
    hidden: int
    metadata: dict[str, Any] = {}
    arrays: dict[str, _ArrayRecord]


def save_model(params: QNetworkParams, path: Path, metadata: dict[str, Any] | None = None) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "dueling": params.dueling,
        "n_inputs": params.n_inputs,
        "n_actions": params.n_actions,
        "hidden": params.hidden,
        "metadata": metadata or {},
        "arrays": {
            name: {"shape": list(params[name].shape), "values": params[name].ravel().tolist()}
            for name in params
        },
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    logger.info(f"💾 [agent] model written to {path}")


def _offset(text: str, *keys: object) -> int:
    """最后一个能在文本中找到的键的位置；都找不到时为 0"""
    for key in reversed(keys):
        if isinstance(key, str) and (found := text.find(f"\"{key}\"")) >= 0:
            return found
    return 0


def load_model(path: Path) -> tuple[QNetworkParams, dict[str, Any]]:
    """返回 (参数, metadata)；任何结构或数值问题都抛 DecodeError"""
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise DecodeError(f"model file is not valid JSON: {e.msg}", e.pos) from e
    try:
        doc = _ModelFile.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        raise DecodeError(
            f"model file has an unexpected structure at {list(first['loc'])}: {first['msg']}",
            _offset(text, *first["loc"]),
        ) from e
    if doc.format != MODEL_FORMAT or doc.version != MODEL_VERSION:
        key = "format" if doc.format != MODEL_FORMAT else "version"
        raise DecodeError(f"unsupported model format {doc.format!r} v{doc.version}", _offset(text, key))

    arrays: dict[str, np.ndarray] = {}
    for name, record in doc.arrays.items():
        if int(np.prod(record.shape)) != len(record.values):
            raise DecodeError(
                f"array {name} declares shape {record.shape} but holds {len(record.values)} values",
                _offset(text, name),
            )
        arrays[name] = np.array(record.values, dtype=np.float64).reshape(record.shape)

    params = QNetworkParams(arrays, doc.dueling)
    expected = set(f"{layer}.{part}" for layer in params.layers for part in ("W", "b"))
    if set(arrays) != expected:
        raise DecodeError(
            f"model arrays {sorted(arrays)} do not match layers {sorted(expected)}",
            _offset(text, "arrays", *sorted(set(arrays) - expected)),
        )
    if (params.n_inputs, params.n_actions, params.hidden) != (doc.n_inputs, doc.n_actions, doc.hidden):
        raise DecodeError("array shapes disagree with the declared network dimensions", _offset(text, "n_inputs"))
    for name, values in arrays.items():
        if not np.isfinite(values).all():
            raise DecodeError(f"array {name} contains non-finite weights", _offset(text, name))
    return params, doc.metadata


__all__: Iterable[str] = ("MODEL_FORMAT", "MODEL_VERSION", "save_model", "load_model")
