"""账本持久化：追加写的长度前缀区块文件

文件布局（全部大端）::

    magic      8 bytes   b"MECCOLDG"
    version    u16       1
    n_miners   u32
    miners     n_miners * (lp(miner_id utf-8) || lp(public_key))
    records    直到 EOF: u32 length || Block.encode()

lp(x) = u32 长度 || x。Block.encode() 的字段顺序见 models.Block.encode。
重新加载后 verify_chain 必须通过；任何截断或多余字节都会抛出 DecodeError。
"""

from __future__ import annotations

import struct
from collections.abc import Iterable
from pathlib import Path

from loguru import logger

from ...core.errors import DecodeError
from .crypto import ByteReader, lp
from .ledger import Ledger
from .models import Block

MAGIC = b"MECCOLDG"
VERSION = 1


def _record(block: Block) -> bytes:
    payload = block.encode()
    return struct.pack(">I", len(payload)) + payload


def save_ledger(ledger: Ledger, path: Path) -> None:
    """整体写出（init 时使用）"""
    header = MAGIC + struct.pack(">H", VERSION) + struct.pack(">I", len(ledger.miners))
    header += b"".join(lp(mid.encode("utf-8")) + lp(pk) for mid, pk in ledger.miners)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(header)
        for block in ledger.blocks:
            fh.write(_record(block))
    logger.info(f"💾 [chain] ledger written to {path} (height {ledger.height})")


def append_blocks(path: Path, blocks: Iterable[Block]) -> None:
    """只追加新区块，不改写已有字节"""
    with path.open("ab") as fh:
        for block in blocks:
            fh.write(_record(block))


def load_ledger(path: Path) -> Ledger:
    data = path.read_bytes()
    reader = ByteReader(data)
    if reader.read(len(MAGIC)) != MAGIC:
        raise DecodeError("not a mecco ledger file", 0)
    version = struct.unpack(">H", reader.read(2))[0]
    if version != VERSION:
        raise DecodeError(f"unsupported ledger version {version}", len(MAGIC))
    miners = []
    for _ in range(reader.read_u32()):
        miner_id = reader.read_text()
        miners.append((miner_id, reader.read_lp()))
    if not miners:
        raise DecodeError("ledger declares no miners", reader.offset)

    blocks = []
    while reader.offset < len(data):
        size = reader.read_u32()
        start = reader.offset
        blocks.append(Block.decode(reader.read(size), start))
    if not blocks:
        raise DecodeError("ledger has no genesis block", reader.offset)
    return Ledger(miners=miners, blocks=blocks)


__all__: Iterable[str] = ("MAGIC", "VERSION", "save_ledger", "append_blocks", "load_ledger")
