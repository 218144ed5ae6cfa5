"""哈希链账本 + 轮值 PoA 出块

- 交易池按到达顺序先来先服务（FCFS），所有写入经同一把锁串行化
- 矿工按高度轮值出块，并对区块哈希签名（seal）
- 创世块的 tx_root 承诺了矿工注册表，篡改注册表同样会被 verify_chain 发现
"""

from __future__ import annotations

import threading
from collections.abc import Iterable, Iterator, Sequence

from loguru import logger

from ...core.errors import DecodeError, MeccoError
from .crypto import DEFAULT_SCHEME, ZERO_HASH, lp, sha256
from .models import Account, Block, ChainConfig, Transaction, TxKind, compute_tx_root
from .service import new_account

GENESIS_MINER = "genesis"


def miner_registry_root(miners: Sequence[tuple[str, bytes]]) -> bytes:
    return sha256(b"".join(lp(mid.encode("utf-8")) + lp(pk) for mid, pk in miners))


def make_genesis(miners: Sequence[tuple[str, bytes]]) -> Block:
    draft = Block(
        height=0,
        prev_hash=ZERO_HASH,
        tx_root=miner_registry_root(miners),
        timestamp=0,
        miner_id=GENESIS_MINER,
        block_hash=b"",
    )
    return draft.model_copy(update={"block_hash": draft.compute_hash()})


def miner_accounts(cfg: ChainConfig) -> list[tuple[str, Account]]:
    return [(f"miner-{i}", new_account(i, role="miner")) for i in range(cfg.n_miners)]


class TransactionPool:
    """FCFS 交易池；arrival 序号单调递增，不会出现并列"""

    def __init__(self) -> None:
        self._items: list[tuple[int, Transaction]] = []
        self._arrivals = 0

    def push(self, tx: Transaction) -> int:
        index = self._arrivals
        self._items.append((index, tx))
        self._arrivals += 1
        return index

    def drain(self) -> list[Transaction]:
        items = sorted(self._items, key=lambda item: item[0])
        self._items.clear()
        return [tx for _, tx in items]

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Transaction]:
        return iter(tx for _, tx in self._items)


class Ledger:
    """单协调者持有的账本；已提交区块可并发只读"""

    def __init__(
        self,
        miners: Sequence[tuple[str, bytes]],
        blocks: Sequence[Block] | None = None,
        sealers: dict[str, Account] | None = None,
    ):
        if not miners:
            raise ValueError("at least one miner is required")
        self.miners: tuple[tuple[str, bytes], ...] = tuple(miners)
        self.blocks: list[Block] = list(blocks) if blocks else [make_genesis(self.miners)]
        self.pool = TransactionPool()
        self._sealers: dict[str, Account] = dict(sealers or {})
        self._lock = threading.Lock()
        self._last_nonce: dict[bytes, int] = {}
        for tx in self.transactions():
            self._last_nonce[tx.sender_pk] = max(self._last_nonce.get(tx.sender_pk, -1), tx.nonce)

    @classmethod
    def create(cls, cfg: ChainConfig) -> "Ledger":
        accounts = miner_accounts(cfg)
        return cls(
            miners=[(mid, acct.public_key) for mid, acct in accounts],
            sealers=dict(accounts),
        )

    def attach_sealers(self, cfg: ChainConfig) -> None:
        """重新加载后挂上矿工私钥，公钥必须与注册表一致"""
        registry = dict(self.miners)
        for mid, acct in miner_accounts(cfg):
            if registry.get(mid) != acct.public_key:
                raise DecodeError(f"miner {mid} does not match the ledger's registry")
            self._sealers[mid] = acct

    # --- 查询 ---
    @property
    def head(self) -> Block:
        return self.blocks[-1]

    @property
    def height(self) -> int:
        return self.head.height

    def transactions(self) -> Iterator[Transaction]:
        for block in self.blocks:
            yield from block.transactions

    def last_nonce(self, pk: bytes) -> int:
        return self._last_nonce.get(pk, -1)

    def count_kinds(self) -> dict[TxKind, int]:
        counts = {kind: 0 for kind in TxKind}
        for tx in self.transactions():
            counts[tx.kind] += 1
        return counts

    def expected_miner(self, height: int) -> str:
        return self.miners[(height - 1) % len(self.miners)][0]

    # --- 写入 ---
    def submit(self, tx: Transaction) -> int:
        with self._lock:
            return self.pool.push(tx)

    def mine(self) -> Block | None:
        """打包交易池；空池或全部被拒时返回 None"""
        with self._lock:
            pending = self.pool.drain()
            if not pending:
                logger.debug("[chain] empty pool, no block")
                return None

            accepted: list[Transaction] = []
            seen = dict(self._last_nonce)
            for tx in pending:
                if not tx.verify_signature():
                    logger.warning(f"⚠️ [chain] rejected tx {tx.tx_id.hex()[:12]}: bad signature")
                    continue
                if tx.nonce <= seen.get(tx.sender_pk, -1):
                    logger.warning(f"⚠️ [chain] rejected tx {tx.tx_id.hex()[:12]}: stale nonce {tx.nonce}")
                    continue
                seen[tx.sender_pk] = tx.nonce
                accepted.append(tx)
            if not accepted:
                logger.warning("⚠️ [chain] every pooled transaction was rejected, no block")
                return None

            height = self.height + 1
            miner_id = self.expected_miner(height)
            sealer = self._sealers.get(miner_id)
            if sealer is None:
                raise MeccoError(f"no signing key attached for {miner_id}")
            draft = Block(
                height=height,
                prev_hash=self.head.block_hash,
                tx_root=compute_tx_root(accepted),
                timestamp=self.head.timestamp + 1,
                miner_id=miner_id,
                block_hash=b"",
                transactions=tuple(accepted),
            )
            block_hash = draft.compute_hash()
            block = draft.model_copy(
                update={"block_hash": block_hash, "seal": sealer.sign(block_hash)}
            )
            self.blocks.append(block)
            self._last_nonce = seen
        logger.info(f"⛏️ [chain] block #{block.height} sealed by {miner_id} with {len(accepted)} txs")
        return block


def mine_block(pool: TransactionPool, ledger: Ledger) -> Block | None:
    """把 pool 中的交易打包进 ledger；pool 必须是 ledger 自己的交易池"""
    if pool is not ledger.pool:
        for tx in pool.drain():
            ledger.submit(tx)
    return ledger.mine()


def verify_chain(ledger: Ledger) -> bool:
    """从创世块开始重新校验哈希、链接、签名、出块顺序"""
    blocks = ledger.blocks
    if not blocks or blocks[0] != make_genesis(ledger.miners):
        logger.warning("⚠️ [chain] genesis block mismatch")
        return False

    registry = dict(ledger.miners)
    last_nonce: dict[bytes, int] = {}
    for index, block in enumerate(blocks[1:], start=1):
        prev = blocks[index - 1]
        problems = []
        if block.height != index:
            problems.append("height")
        if block.prev_hash != prev.block_hash:
            problems.append("prev_hash")
        if block.timestamp <= prev.timestamp:
            problems.append("timestamp")
        if block.tx_root != compute_tx_root(block.transactions):
            problems.append("tx_root")
        if block.block_hash != block.compute_hash():
            problems.append("block_hash")
        if block.miner_id != ledger.expected_miner(index):
            problems.append("miner order")
        miner_pk = registry.get(block.miner_id)
        if miner_pk is None or not DEFAULT_SCHEME.verify(miner_pk, block.block_hash, block.seal):
            problems.append("seal")
        for tx in block.transactions:
            if not tx.verify_signature():
                problems.append(f"signature of {tx.tx_id.hex()[:12]}")
            if tx.nonce <= last_nonce.get(tx.sender_pk, -1):
                problems.append(f"nonce of {tx.tx_id.hex()[:12]}")
            last_nonce[tx.sender_pk] = tx.nonce
        if problems:
            logger.warning(f"⚠️ [chain] block #{index} failed: {', '.join(problems)}")
            return False
    return True


__all__: Iterable[str] = (
    "GENESIS_MINER",
    "make_genesis",
    "miner_accounts",
    "TransactionPool",
    "Ledger",
    "mine_block",
    "verify_chain",
)
