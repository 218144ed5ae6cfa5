"""链上数据结构：账户、交易、区块、策略表、访问结果"""

from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ...core.errors import DecodeError
from .crypto import DEFAULT_SCHEME, ByteReader, digest, lp, sha256, u64


class TxKind(str, Enum):
    OFFLOAD_REQUEST = "offload_request"
    REGISTRATION = "registration"
    DEREGISTRATION = "deregistration"
    PENALTY_NOTICE = "penalty_notice"


class AccessVerdict(str, Enum):
    GRANTED = "granted"
    DENIED = "denied"


SUCCESS_MESSAGE = "Successful!"
FAILURE_MESSAGE = "Failed"


class ChainConfig(BaseModel):
    """链配置（来自实验配置文件的 admin_seed / n_miners）"""

    model_config = ConfigDict(frozen=True)

    admin_seed: int = Field(default=0, ge=0, description="管理员账户种子")
    n_miners: int = Field(default=3, ge=1, description="轮值出块的矿工数")


# --- 1. 账户 ---
class Account(BaseModel):
    """密钥对 + 本地 nonce 计数器（nonce 是唯一的可变状态）"""

    public_key: bytes
    secret_key: bytes = Field(repr=False)
    nonce: int = Field(default=0, ge=0, description="下一笔交易使用的 nonce")

    def sign(self, message: bytes) -> bytes:
        return DEFAULT_SCHEME.sign(self.secret_key, message)

    def next_nonce(self) -> int:
        value = self.nonce
        self.nonce += 1
        return value


# --- 2. 交易 ---
class Transaction(BaseModel):
    model_config = ConfigDict(frozen=True)

    sender_pk: bytes
    device_id: str
    kind: TxKind
    payload_digest: bytes
    nonce: int = Field(ge=0)
    subject_pk: bytes = Field(default=b"", description="注册/注销/处罚所针对的账户")
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        """除签名外所有字段的规范化序列化"""
        return (
            lp(self.sender_pk)
            + lp(self.device_id.encode("utf-8"))
            + lp(self.kind.value.encode("utf-8"))
            + lp(self.payload_digest)
            + u64(self.nonce)
            + lp(self.subject_pk)
        )

    def encode(self) -> bytes:
        return self.signing_bytes() + lp(self.signature)

    @property
    def tx_id(self) -> bytes:
        return sha256(self.encode())

    def verify_signature(self) -> bool:
        return DEFAULT_SCHEME.verify(self.sender_pk, self.signing_bytes(), self.signature)

    @classmethod
    def read_from(cls, reader: ByteReader) -> "Transaction":
        sender_pk = reader.read_lp()
        device_id = reader.read_text()
        kind_offset = reader.offset
        kind_raw = reader.read_text()
        try:
            kind = TxKind(kind_raw)
        except ValueError as e:
            raise DecodeError(f"unknown transaction kind {kind_raw!r}", kind_offset) from e
        payload = reader.read_lp()
        nonce = reader.read_u64()
        subject = reader.read_lp()
        signature = reader.read_lp()
        return cls(
            sender_pk=sender_pk,
            device_id=device_id,
            kind=kind,
            payload_digest=payload,
            nonce=nonce,
            subject_pk=subject,
            signature=signature,
        )

    @classmethod
    def decode(cls, data: bytes) -> "Transaction":
        reader = ByteReader(data)
        tx = cls.read_from(reader)
        reader.finish()
        return tx


def registration_digest(pk: bytes, device_id: str) -> bytes:
    return digest(b"AddMD", pk, device_id.encode("utf-8"))


def deregistration_digest(pk: bytes) -> bytes:
    return digest(b"DeleteMD", pk)


# --- 3. 策略表 ---
class PolicyTable(BaseModel):
    """合约的 PolicyList：PK -> 授权设备 ID 集合；只返回新表，不原地修改"""

    model_config = ConfigDict(frozen=True)

    admin_pk: bytes
    entries: dict[bytes, frozenset[str]] = Field(default_factory=dict)

    def policy_list(self, pk: bytes) -> frozenset[str]:
        return self.entries.get(pk, frozenset())

    def lookup(self, pk: bytes, device_id: str) -> bool:
        return pk in self.entries and device_id in self.entries[pk]

    def with_entry(self, pk: bytes, device_id: str) -> "PolicyTable":
        entries = dict(self.entries)
        entries[pk] = self.policy_list(pk) | {device_id}
        return PolicyTable(admin_pk=self.admin_pk, entries=entries)

    def without(self, pk: bytes) -> "PolicyTable":
        entries = {key: ids for key, ids in self.entries.items() if key != pk}
        return PolicyTable(admin_pk=self.admin_pk, entries=entries)


# --- 4. 区块 ---
class Block(BaseModel):
    model_config = ConfigDict(frozen=True)

    height: int = Field(ge=0)
    prev_hash: bytes
    tx_root: bytes
    timestamp: int = Field(ge=0, description="逻辑时间戳（单调计数器）")
    miner_id: str
    block_hash: bytes
    transactions: tuple[Transaction, ...] = ()
    seal: bytes = Field(default=b"", description="出块矿工对 block_hash 的签名")

    def header_bytes(self) -> bytes:
        return (
            u64(self.height)
            + self.prev_hash
            + self.tx_root
            + u64(self.timestamp)
            + lp(self.miner_id.encode("utf-8"))
        )

    def compute_hash(self) -> bytes:
        return sha256(self.header_bytes())

    def encode(self) -> bytes:
        body = b"".join(lp(tx.encode()) for tx in self.transactions)
        return (
            u64(self.height)
            + lp(self.prev_hash)
            + lp(self.tx_root)
            + u64(self.timestamp)
            + lp(self.miner_id.encode("utf-8"))
            + lp(self.block_hash)
            + len(self.transactions).to_bytes(4, "big")
            + body
            + lp(self.seal)
        )

    @classmethod
    def decode(cls, data: bytes, base_offset: int = 0) -> "Block":
        reader = ByteReader(data, base_offset)
        height = reader.read_u64()
        prev_hash = reader.read_lp()
        tx_root = reader.read_lp()
        timestamp = reader.read_u64()
        miner_id = reader.read_text()
        block_hash = reader.read_lp()
        count = reader.read_u32()
        transactions = []
        for _ in range(count):
            raw = ByteReader(reader.read_lp(), reader.offset)
            transactions.append(Transaction.read_from(raw))
            raw.finish()
        seal = reader.read_lp()
        reader.finish()
        return cls(
            height=height,
            prev_hash=prev_hash,
            tx_root=tx_root,
            timestamp=timestamp,
            miner_id=miner_id,
            block_hash=block_hash,
            transactions=tuple(transactions),
            seal=seal,
        )


def compute_tx_root(transactions: tuple[Transaction, ...] | list[Transaction]) -> bytes:
    return sha256(b"".join(lp(tx.encode()) for tx in transactions))


# --- 5. 访问结果 ---
class AccessResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    verdict: AccessVerdict
    message: str
    penalty_issued: bool
    sender_pk: bytes = b""
    device_id: str = ""

    @model_validator(mode="after")
    def _consistent(self) -> "AccessResult":
        denied = self.verdict is AccessVerdict.DENIED
        if denied != self.penalty_issued or denied != (self.message == FAILURE_MESSAGE):
            raise ValueError("denied verdict <=> penalty issued <=> message 'Failed'")
        return self

    @property
    def granted(self) -> bool:
        return self.verdict is AccessVerdict.GRANTED
