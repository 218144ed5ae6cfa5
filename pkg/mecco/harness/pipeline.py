"""访问控制 + 计算卸载的联合流水线

阶段 0：管理员把未列入 unregistered 的 MD 写入合约，出块。
阶段 1：每个 MD 发送卸载请求交易，经 AccessManager 验证；
        被拒请求产生处罚交易并立即出块，通过的请求暂存。
阶段 2：只在通过验证的子集 N′ 上运行卸载策略，
        然后提交暂存的请求交易并出块。
结束时 verify_chain 必须为真。
"""

from __future__ import annotations

from collections.abc import Collection, Iterable

import polars as pl
from loguru import logger
from pydantic import BaseModel, ConfigDict

from ..core.errors import MeccoError
from ..core.scenario import ExperimentConfig
from ..features.chain.contract import AccessManager, rebuild_policy_table
from ..features.chain.crypto import digest
from ..features.chain.ledger import Ledger, verify_chain
from ..features.chain.models import AccessResult, Account, Transaction
from ..features.chain.service import build_offload_tx, new_account
from ..features.costs.service import generate_tasks
from ..features.env.service import OffloadingEnv
from ..features.policies.models import DEVICE_SCHEMA
from ..features.policies.service import Policy, run_episode

# 设备账户种子 = seed * DEVICE_SEED_STRIDE + n
DEVICE_SEED_STRIDE = 100_000


def device_id(n: int) -> str:
    return f"md-{n}"


def device_account(seed: int, n: int) -> Account:
    return new_account(seed * DEVICE_SEED_STRIDE + n, role="device")


class PipelineRun(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    seed: int
    accounts: dict[str, bytes]
    verdicts: dict[str, AccessResult]
    authorized: tuple[str, ...]
    offloading: pl.DataFrame
    total_cost: float
    ledger: Ledger
    chain_valid: bool

    @property
    def denied(self) -> tuple[str, ...]:
        return tuple(d for d, result in self.verdicts.items() if not result.granted)


def _request_digest(n: int, data_bits: float) -> bytes:
    return digest(b"offload", device_id(n).encode("utf-8"), repr(data_bits).encode("ascii"))


def run_pipeline(
    cfg: ExperimentConfig,
    seed: int,
    policy: Policy,
    unregistered: Collection[int] = (),
    ledger: Ledger | None = None,
) -> PipelineRun:
    scenario = cfg.scenario.model_copy(update={"seed": seed})
    n_devices = scenario.n_devices
    ledger = ledger or Ledger.create(cfg.chain)
    admin = new_account(cfg.chain.admin_seed, role="admin")
    manager = AccessManager(admin, ledger, rebuild_policy_table(ledger, admin.public_key))
    logger.info(f"🚀 [pipeline] seed {seed}: {n_devices} MDs, {len(unregistered)} unregistered")

    # --- 0. 注册 ---
    accounts = {device_id(n): device_account(seed, n) for n in range(n_devices)}
    for acct in accounts.values():
        # 复用已有账本时接着链上的 nonce 继续
        acct.nonce = max(acct.nonce, ledger.last_nonce(acct.public_key) + 1)
    for n in range(n_devices):
        if n not in unregistered:
            manager.register(accounts[device_id(n)].public_key, device_id(n))
    ledger.mine()

    # --- 1. 访问控制 ---
    tasks = generate_tasks(scenario, seed=seed)
    verdicts: dict[str, AccessResult] = {}
    granted: list[tuple[int, Transaction]] = []
    for n, task in enumerate(tasks):
        tx = build_offload_tx(accounts[device_id(n)], device_id(n), _request_digest(n, task.data_bits))
        result = manager.handle_request(tx, commit_granted=False)
        verdicts[device_id(n)] = result
        if result.granted:
            granted.append((n, tx))
    ledger.mine()

    # --- 2. 计算卸载（只在 N′ 上） ---
    authorized = tuple(device_id(n) for n, _ in granted)
    rows: list[dict] = []
    total_cost = 0.0
    if granted:
        subset = [tasks[n] for n, _ in granted]
        env = OffloadingEnv(
            scenario.model_copy(update={"n_devices": len(subset)}), cfg.levels_f, cfg.levels_w
        )
        final, rows, _ = run_episode(policy, env, env.reset(tasks=subset), seed)
        total_cost = final.tc
        for n, tx in granted:
            ledger.submit(tx)
        ledger.mine()
    else:
        logger.warning("⚠️ [pipeline] no authorized MDs, offloading phase is empty")

    offloading = pl.DataFrame(rows, schema=DEVICE_SCHEMA).with_columns(
        pl.Series("device_id", list(authorized), dtype=pl.Utf8)
    )
    chain_valid = verify_chain(ledger)
    if not chain_valid:
        raise MeccoError("ledger failed verification after the pipeline run")
    logger.info(
        f"✅ [pipeline] N′={len(authorized)}/{n_devices}, cost {total_cost:.6g}, height {ledger.height}"
    )
    return PipelineRun(
        seed=seed,
        accounts={d: acct.public_key for d, acct in accounts.items()},
        verdicts=verdicts,
        authorized=authorized,
        offloading=offloading,
        total_cost=total_cost,
        ledger=ledger,
        chain_valid=chain_valid,
    )


__all__: Iterable[str] = ("DEVICE_SEED_STRIDE", "device_id", "device_account", "PipelineRun", "run_pipeline")
