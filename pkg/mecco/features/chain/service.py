"""账户与交易构造"""

from __future__ import annotations

from collections.abc import Iterable

from ...core.errors import DomainError
from .crypto import DEFAULT_SCHEME, digest
from .models import (
    FAILURE_MESSAGE,
    Account,
    Transaction,
    TxKind,
    deregistration_digest,
    registration_digest,
)


def new_account(seed: int, role: str = "device") -> Account:
    """按种子确定性派生密钥对；role 做域分离，避免管理员与设备种子撞车"""
    material = b"mecco/" + role.encode("utf-8") + b"/" + seed.to_bytes(16, "big", signed=True)
    secret, public = DEFAULT_SCHEME.derive_keypair(material)
    return Account(public_key=public, secret_key=secret)


def sign_transaction(acct: Account, unsigned: Transaction) -> Transaction:
    return unsigned.model_copy(update={"signature": acct.sign(unsigned.signing_bytes())})


def _build(
    acct: Account,
    kind: TxKind,
    device_id: str,
    payload_digest: bytes,
    subject_pk: bytes = b"",
) -> Transaction:
    unsigned = Transaction(
        sender_pk=acct.public_key,
        device_id=device_id,
        kind=kind,
        payload_digest=payload_digest,
        nonce=acct.next_nonce(),
        subject_pk=subject_pk,
    )
    return sign_transaction(acct, unsigned)


def build_offload_tx(acct: Account, device_id: str, payload_digest: bytes) -> Transaction:
    """MD 发起卸载请求交易"""
    if not device_id:
        raise DomainError("device_id must not be empty")
    return _build(acct, TxKind.OFFLOAD_REQUEST, device_id, payload_digest)


def build_registration_tx(admin: Account, pk: bytes, device_id: str) -> Transaction:
    """管理员签名的 AddMD 交易"""
    if not device_id:
        raise DomainError("device_id must not be empty")
    return _build(admin, TxKind.REGISTRATION, device_id, registration_digest(pk, device_id), pk)


def build_deregistration_tx(admin: Account, pk: bytes) -> Transaction:
    """管理员签名的 DeleteMD 交易"""
    return _build(admin, TxKind.DEREGISTRATION, "", deregistration_digest(pk), pk)


def build_penalty_tx(admin: Account, request: Transaction) -> Transaction:
    """对被拒请求发出的警告（Penalty），摘要绑定被拒请求与警告消息"""
    payload = digest(request.encode(), FAILURE_MESSAGE.encode("utf-8"))
    return _build(admin, TxKind.PENALTY_NOTICE, request.device_id, payload, request.sender_pk)


def get_sender_public_key(tx: Transaction | bytes) -> bytes:
    """Tx.getSenderPublicKey()：只做字段投影，不校验签名或策略"""
    if isinstance(tx, (bytes, bytearray)):
        tx = Transaction.decode(bytes(tx))
    return tx.sender_pk


def verify_tx(tx: Transaction) -> bool:
    return tx.verify_signature()


__all__: Iterable[str] = (
    "new_account",
    "sign_transaction",
    "build_offload_tx",
    "build_registration_tx",
    "build_deregistration_tx",
    "build_penalty_tx",
    "get_sender_public_key",
    "verify_tx",
)
