"""Two-tier block encryption.

Data blocks use convergent encryption: the block key is derived from the
block's SHA-256 digest and the zone's inner key, and the block is encrypted
with AES-256-CBC under a fixed IV, so equal plaintext under equal inner keys
always yields equal ciphertext.  Metadata blocks use AES-256-GCM under the
outer key with a fresh random nonce.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Callable

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import InvalidArgumentError, MetadataIntegrityError

KEY_BYTES = 32
HASH_BYTES = 32
IV_FIELD_BYTES = 16
GCM_NONCE_BYTES = 12
TAG_BYTES = 16

FIXED_IV = bytes(16)
ZERO_KEY = bytes(KEY_BYTES)

# Callable returning n random bytes; tests may swap in a seeded source.
RandomSource = Callable[[int], bytes]


@dataclass(frozen=True)
class SecretKeyPair:
    inner_key: bytes = field(repr=False)
    outer_key: bytes = field(repr=False)
    zone_id: int = 0

    def __post_init__(self):
        if len(self.inner_key) != KEY_BYTES or len(self.outer_key) != KEY_BYTES:
            raise InvalidArgumentError("inner and outer keys must be 32 bytes each")
        if self.zone_id < 0:
            raise InvalidArgumentError("zone_id must be non-negative")

    @classmethod
    def generate(cls, zone_id: int = 0, random: RandomSource = os.urandom) -> "SecretKeyPair":
        return cls(random(KEY_BYTES), random(KEY_BYTES), zone_id)


def _check_len(data: bytes, expected: int, what: str) -> None:
    if len(data) != expected:
        raise InvalidArgumentError(f"{what} must be {expected} bytes, got {len(data)}")


def hash_block(block: bytes, block_size: int | None = None) -> bytes:
    """SHA-256 digest of a data block."""
    if block_size is not None:
        _check_len(block, block_size, "block")
    elif not block:
        raise InvalidArgumentError("block must not be empty")
    return hashlib.sha256(block).digest()


def derive_cekey(block_hash: bytes, inner_key: bytes) -> bytes:
    """Convergent key for a block: AES-256-CBC(zero IV) of its hash under the inner key."""
    _check_len(block_hash, HASH_BYTES, "block hash")
    _check_len(inner_key, KEY_BYTES, "inner key")
    enc = Cipher(algorithms.AES(inner_key), modes.CBC(FIXED_IV)).encryptor()
    return enc.update(block_hash) + enc.finalize()


def block_key(block: bytes, inner_key: bytes) -> bytes:
    return derive_cekey(hashlib.sha256(block).digest(), inner_key)


def _check_block(data: bytes, block_size: int | None) -> None:
    if block_size is not None:
        _check_len(data, block_size, "block")
    if not data or len(data) % 16:
        raise InvalidArgumentError("block length must be a positive multiple of 16")


def encrypt_data_block(block: bytes, key: bytes, block_size: int | None = None) -> bytes:
    _check_block(block, block_size)
    _check_len(key, KEY_BYTES, "convergent key")
    enc = Cipher(algorithms.AES(key), modes.CBC(FIXED_IV)).encryptor()
    return enc.update(block) + enc.finalize()


def decrypt_data_block(cipher: bytes, key: bytes, block_size: int | None = None) -> bytes:
    _check_block(cipher, block_size)
    _check_len(key, KEY_BYTES, "convergent key")
    dec = Cipher(algorithms.AES(key), modes.CBC(FIXED_IV)).decryptor()
    return dec.update(cipher) + dec.finalize()


def new_iv(random: RandomSource = os.urandom) -> bytes:
    """A 16-byte IV field: 12 random nonce bytes followed by 4 zero bytes."""
    return random(GCM_NONCE_BYTES) + bytes(IV_FIELD_BYTES - GCM_NONCE_BYTES)


def _nonce(iv: bytes) -> bytes:
    _check_len(iv, IV_FIELD_BYTES, "iv")
    return iv[:GCM_NONCE_BYTES]


def encrypt_metadata(plain: bytes, outer_key: bytes, iv: bytes, aad: bytes) -> tuple[bytes, bytes]:
    """AES-256-GCM; returns (ciphertext, 16-byte tag)."""
    _check_len(outer_key, KEY_BYTES, "outer key")
    sealed = AESGCM(outer_key).encrypt(_nonce(iv), plain, aad)
    return sealed[:-TAG_BYTES], sealed[-TAG_BYTES:]


def decrypt_metadata(cipher: bytes, outer_key: bytes, iv: bytes, tag: bytes, aad: bytes) -> bytes:
    _check_len(outer_key, KEY_BYTES, "outer key")
    _check_len(tag, TAG_BYTES, "tag")
    try:
        return AESGCM(outer_key).decrypt(_nonce(iv), cipher + tag, aad)
    except InvalidTag:
        raise MetadataIntegrityError("metadata authentication failed") from None
