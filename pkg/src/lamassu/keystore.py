"""Local passphrase-protected store of per-zone key pairs.

File layout (big-endian)::

    magic "LMSK" | version u8 | scrypt log2(n) u8 | r u8 | p u8 | salt 16 | nonce 12 | AES-GCM(json)

The 36-byte header is the GCM associated data, so tampering with the KDF
parameters is detected as well.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import struct
import threading
from pathlib import Path

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .crypto import KEY_BYTES, RandomSource, SecretKeyPair
from .errors import AlreadyExistsError, FormatError, KeyStoreAuthError, NotFoundError

MAGIC = b"LMSK"
VERSION = 1
PASSPHRASE_ENV = "LAMASSU_PASSPHRASE"
_HEADER = struct.Struct(">4sBBBB16s12s")

DEFAULT_LOG_N = 15
DEFAULT_R = 8
DEFAULT_P = 1


def _derive(passphrase: str, salt: bytes, log_n: int, r: int, p: int) -> bytes:
    return hashlib.scrypt(passphrase.encode(), salt=salt, n=1 << log_n, r=r, p=p,
                          maxmem=256 * 1024 * 1024, dklen=KEY_BYTES)


class KeyStore:
    """Zone id -> (inner key, outer key), persisted encrypted at ``path``.

    ``log_n`` trades unlock time for brute-force cost; tests lower it.
    """

    def __init__(self, path: str | os.PathLike, passphrase: str | None = None,
                 log_n: int = DEFAULT_LOG_N, random: RandomSource = os.urandom):
        if passphrase is None:
            passphrase = os.environ.get(PASSPHRASE_ENV)
        if not passphrase:
            raise KeyStoreAuthError(f"no passphrase given (set {PASSPHRASE_ENV})")
        self.path = Path(path)
        self._passphrase = passphrase
        self._log_n = log_n
        self._random = random
        self._lock = threading.Lock()
        self._zones: dict[int, SecretKeyPair] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        raw = self.path.read_bytes()
        if len(raw) < _HEADER.size + 16:
            raise FormatError("keystore file is truncated")
        magic, version, log_n, r, p, salt, nonce = _HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise FormatError(f"not a keystore file (magic {magic!r})")
        if version != VERSION:
            raise FormatError(f"unsupported keystore version {version}")
        key = _derive(self._passphrase, salt, log_n, r, p)
        try:
            plain = AESGCM(key).decrypt(nonce, raw[_HEADER.size:], raw[:_HEADER.size])
        except InvalidTag:
            raise KeyStoreAuthError("wrong passphrase or corrupted keystore") from None
        self._log_n = log_n
        self._zones = {
            int(z): SecretKeyPair(base64.b64decode(v["inner"]), base64.b64decode(v["outer"]), int(z))
            for z, v in json.loads(plain).items()
        }

    def _save(self) -> None:
        salt, nonce = self._random(16), self._random(12)
        header = _HEADER.pack(MAGIC, VERSION, self._log_n, DEFAULT_R, DEFAULT_P, salt, nonce)
        key = _derive(self._passphrase, salt, self._log_n, DEFAULT_R, DEFAULT_P)
        body = json.dumps({
            str(z): {"inner": base64.b64encode(k.inner_key).decode(),
                     "outer": base64.b64encode(k.outer_key).decode()}
            for z, k in sorted(self._zones.items())
        }).encode()
        tmp = self.path.with_name(self.path.name + ".tmp")
        tmp.write_bytes(header + AESGCM(key).encrypt(nonce, body, header))
        os.replace(tmp, self.path)

    def zones(self) -> list[int]:
        return sorted(self._zones)

    def create_zone(self, zone_id: int) -> SecretKeyPair:
        with self._lock:
            if zone_id in self._zones:
                raise AlreadyExistsError(f"zone {zone_id} already exists")
            keys = SecretKeyPair.generate(zone_id, self._random)
            self._zones[zone_id] = keys
            self._save()
            return keys

    def fetch_zone(self, zone_id: int) -> SecretKeyPair:
        try:
            return self._zones[zone_id]
        except KeyError:
            raise NotFoundError(f"no keys for zone {zone_id}") from None
