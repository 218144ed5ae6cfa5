"""哈希、签名与规范化编码

- 哈希：SHA-256，输入统一使用长度前缀编码，避免拼接歧义
- 签名：可插拔的 SignatureScheme，默认 Ed25519（确定性签名，便于复现账本字节）
"""

from __future__ import annotations

import hashlib
import struct
from collections.abc import Iterable
from typing import Protocol

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from ...core.errors import DecodeError

HASH_SIZE = 32
ZERO_HASH = bytes(HASH_SIZE)


# ---------------------------------------------------------------------------
# 编码工具
# ---------------------------------------------------------------------------


def lp(data: bytes) -> bytes:
    """4 字节大端长度前缀"""
    return struct.pack(">I", len(data)) + data


def u64(value: int) -> bytes:
    return struct.pack(">Q", value)


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def digest(*parts: bytes) -> bytes:
    """H(lp(p1) || lp(p2) || ...)"""
    return sha256(b"".join(lp(part) for part in parts))


class ByteReader:
    """顺序读取器，越界时抛出带偏移量的 DecodeError"""

    def __init__(self, data: bytes, base_offset: int = 0):
        self._data = data
        self._pos = 0
        self._base = base_offset

    @property
    def offset(self) -> int:
        return self._base + self._pos

    def read(self, size: int) -> bytes:
        if size < 0 or self._pos + size > len(self._data):
            raise DecodeError(f"truncated input: need {size} bytes", self.offset)
        chunk = self._data[self._pos : self._pos + size]
        self._pos += size
        return chunk

    def read_u32(self) -> int:
        return struct.unpack(">I", self.read(4))[0]

    def read_u64(self) -> int:
        return struct.unpack(">Q", self.read(8))[0]

    def read_lp(self) -> bytes:
        return self.read(self.read_u32())

    def read_text(self) -> str:
        start = self.offset
        raw = self.read_lp()
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DecodeError(f"invalid utf-8 text: {e}", start) from e

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise DecodeError(f"{len(self._data) - self._pos} trailing bytes", self.offset)


# ---------------------------------------------------------------------------
# 签名方案
# ---------------------------------------------------------------------------


class SignatureScheme(Protocol):
    name: str

    def derive_keypair(self, seed_material: bytes) -> tuple[bytes, bytes]: ...

    def sign(self, secret_key: bytes, message: bytes) -> bytes: ...

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool: ...


class Ed25519Scheme:
    name = "ed25519"

    def derive_keypair(self, seed_material: bytes) -> tuple[bytes, bytes]:
        secret = sha256(seed_material)
        public = (
            Ed25519PrivateKey.from_private_bytes(secret)
            .public_key()
            .public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)
        )
        return secret, public

    def sign(self, secret_key: bytes, message: bytes) -> bytes:
        return Ed25519PrivateKey.from_private_bytes(secret_key).sign(message)

    def verify(self, public_key: bytes, message: bytes, signature: bytes) -> bool:
        try:
            Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


DEFAULT_SCHEME: SignatureScheme = Ed25519Scheme()


__all__: Iterable[str] = (
    "HASH_SIZE",
    "ZERO_HASH",
    "lp",
    "u64",
    "sha256",
    "digest",
    "ByteReader",
    "SignatureScheme",
    "Ed25519Scheme",
    "DEFAULT_SCHEME",
)
