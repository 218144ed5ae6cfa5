"""测试公共夹具"""

import numpy as np
import pytest

from mecco.core.config import get_settings
from mecco.features.agent.models import AgentConfig
from mecco.features.costs.models import BITS_PER_MB, ScenarioConfig
from mecco.features.env.service import OffloadingEnv


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """每个测试使用独立的输出目录，且不读取本地 .env"""
    monkeypatch.setenv("MECCO_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("MECCO_WORKERS", "1")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def scenario() -> ScenarioConfig:
    return ScenarioConfig(n_devices=3, seed=7)


@pytest.fixture
def small_scenario() -> ScenarioConfig:
    """N=2，L_f=2，L_w=4 时整个计划空间只有 144 个点"""
    return ScenarioConfig(
        n_devices=2,
        task_min_bits=0.5 * BITS_PER_MB,
        task_max_bits=2 * BITS_PER_MB,
        seed=3,
    )


@pytest.fixture
def small_env(small_scenario) -> OffloadingEnv:
    return OffloadingEnv(small_scenario, levels_f=2, levels_w=4)


@pytest.fixture
def tiny_agent() -> AgentConfig:
    return AgentConfig(
        hidden_units=8,
        levels_f=2,
        levels_w=4,
        batch_size=4,
        replay_capacity=32,
        target_sync=5,
        episodes=6,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
