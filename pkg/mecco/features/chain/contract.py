"""AccessControl 合约与 MECCO manager

合约函数：
    contract_add_md：AddMD(PK)，管理员专用
    contract_delete_md：DeleteMD(PK)，管理员专用
    policy_list：PolicyList(PK)
    verify_request：访问控制协议的验证阶段（纯函数）

AccessManager 负责预处理（取出发送方 PK）、调用合约、把授权请求或处罚警告送进交易池。
"""

from __future__ import annotations

from collections.abc import Iterable

from loguru import logger

from ...core.errors import AuthorizationError, DomainError
from .dependencies import require_admin
from .ledger import Ledger
from .models import (
    FAILURE_MESSAGE,
    SUCCESS_MESSAGE,
    AccessResult,
    AccessVerdict,
    Account,
    PolicyTable,
    Transaction,
    TxKind,
    deregistration_digest,
    registration_digest,
)
from .service import (
    build_deregistration_tx,
    build_penalty_tx,
    build_registration_tx,
    get_sender_public_key,
)

_require_registration = require_admin(TxKind.REGISTRATION)
_require_deregistration = require_admin(TxKind.DEREGISTRATION)


# ---------------------------------------------------------------------------
# 合约函数
# ---------------------------------------------------------------------------


def contract_add_md(
    admin_signed: Transaction, pk: bytes, device_id: str, table: PolicyTable
) -> PolicyTable:
    """AddMD：把 (PK, D_ID) 加入策略表，重复添加是幂等的"""
    tx = _require_registration(admin_signed, table)
    if not device_id:
        raise DomainError("device_id must not be empty")
    if (
        tx.subject_pk != pk
        or tx.device_id != device_id
        or tx.payload_digest != registration_digest(pk, device_id)
    ):
        raise AuthorizationError("registration transaction does not authorize this (PK, device) pair")
    return table.with_entry(pk, device_id)


def contract_delete_md(admin_signed: Transaction, pk: bytes, table: PolicyTable) -> PolicyTable:
    """DeleteMD：删除 PK 的全部设备信息；PK 不存在时为空操作"""
    tx = _require_deregistration(admin_signed, table)
    if tx.subject_pk != pk or tx.payload_digest != deregistration_digest(pk):
        raise AuthorizationError("deregistration transaction does not name this PK")
    return table.without(pk)


def policy_list(table: PolicyTable, pk: bytes) -> frozenset[str]:
    return table.policy_list(pk)


def verify_request(tx: Transaction | bytes, table: PolicyTable) -> AccessResult:
    """签名有效 且 PK 在策略表 且 D_ID 在 PK 的授权集合中 -> granted"""
    if isinstance(tx, (bytes, bytearray)):
        tx = Transaction.decode(bytes(tx))
    pk = get_sender_public_key(tx)
    authorized = (
        tx.kind is TxKind.OFFLOAD_REQUEST
        and tx.verify_signature()
        and pk in table.entries
        and tx.device_id in table.entries[pk]
    )
    if authorized:
        return AccessResult(
            verdict=AccessVerdict.GRANTED,
            message=SUCCESS_MESSAGE,
            penalty_issued=False,
            sender_pk=pk,
            device_id=tx.device_id,
        )
    return AccessResult(
        verdict=AccessVerdict.DENIED,
        message=FAILURE_MESSAGE,
        penalty_issued=True,
        sender_pk=pk,
        device_id=tx.device_id,
    )


def rebuild_policy_table(ledger: Ledger, admin_pk: bytes) -> PolicyTable:
    """按顺序重放账本上的注册 / 注销交易，恢复合约状态"""
    table = PolicyTable(admin_pk=admin_pk)
    for tx in ledger.transactions():
        if tx.sender_pk != admin_pk:
            continue
        if tx.kind is TxKind.REGISTRATION:
            table = contract_add_md(tx, tx.subject_pk, tx.device_id, table)
        elif tx.kind is TxKind.DEREGISTRATION:
            table = contract_delete_md(tx, tx.subject_pk, table)
    return table


def penalty_counts(ledger: Ledger) -> dict[bytes, int]:
    """每个 PK 收到的警告次数"""
    counts: dict[bytes, int] = {}
    for tx in ledger.transactions():
        if tx.kind is TxKind.PENALTY_NOTICE:
            counts[tx.subject_pk] = counts.get(tx.subject_pk, 0) + 1
    return counts


# ---------------------------------------------------------------------------
# MECCO manager
# ---------------------------------------------------------------------------


class AccessManager:
    """单进程内的 manager + admin 流水线，所有写入都经过 ledger 的有序入口"""

    def __init__(self, admin: Account, ledger: Ledger, table: PolicyTable | None = None):
        self.admin = admin
        self.ledger = ledger
        self.table = table or PolicyTable(admin_pk=admin.public_key)
        # 管理员 nonce 接着账本上最后一次提交的继续
        admin.nonce = max(admin.nonce, ledger.last_nonce(admin.public_key) + 1)

    def register(self, pk: bytes, device_id: str) -> Transaction:
        tx = build_registration_tx(self.admin, pk, device_id)
        self.table = contract_add_md(tx, pk, device_id, self.table)
        self.ledger.submit(tx)
        logger.info(f"📝 [chain] registered {device_id} for {pk.hex()[:12]}")
        return tx

    def deregister(self, pk: bytes) -> Transaction:
        tx = build_deregistration_tx(self.admin, pk)
        self.table = contract_delete_md(tx, pk, self.table)
        self.ledger.submit(tx)
        logger.info(f"🗑️ [chain] removed {pk.hex()[:12]} from the policy list")
        return tx

    def handle_request(self, tx: Transaction, commit_granted: bool = True) -> AccessResult:
        """预处理 -> 合约验证；拒绝时提交一笔处罚交易，请求本身被丢弃"""
        result = verify_request(tx, self.table)
        if result.granted:
            if commit_granted:
                self.ledger.submit(tx)
            logger.info(f"✅ [chain] {tx.device_id}: {result.message}")
        else:
            self.ledger.submit(build_penalty_tx(self.admin, tx))
            logger.warning(f"🚫 [chain] {tx.device_id or '<no device>'}: {result.message}, penalty issued")
        return result


__all__: Iterable[str] = (
    "contract_add_md",
    "contract_delete_md",
    "policy_list",
    "verify_request",
    "rebuild_policy_table",
    "penalty_counts",
    "AccessManager",
)
