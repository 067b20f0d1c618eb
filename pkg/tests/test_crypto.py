import hashlib
import os
import random

import pytest
from hypothesis import given, settings, strategies as st

from lamassu import crypto
from lamassu.errors import InvalidArgumentError, MetadataIntegrityError

# Frozen with the OpenSSL 3.0 command line tools (dgst -sha256, enc -aes-256-cbc -nopad).
SHA256_4096_ZERO = "ad7facb2586fc6e966c004d7d1d16b024f5805ff7cb47c7a85dabd8b48892ca7"
SHA256_ONE_BIT = "f0c500e2401e1aee33d11ae25ae14e574820fbdb1731670af1888f88f3c17794"
KDF_ZERO_ZERO = "dc95c078a2408989ad48a2149284208708c374848c228233c2b34f332bd2e9d3"
KDF_ZERO_ONES = "7298caa565031eadc6ce23d23ea66378edb362172954509df657f1f5cf382222"
KEY_00_1F = bytes(range(32))
KDF_ZEROBLOCK_KEY = "9977cbe979454f2e628785ee951ae92354c21c65e7641e6a7b8ebca4b7f00679"
CT_ZEROBLOCK_HEAD = "6d0f345ca96049f7a0145057a10c8d88b2f2a99df0e8383c5bb21bec9046f5e3"
CT_ZEROBLOCK_SHA = "95444709456fcf7d4067a5f5e8e530f53ba5061515f00422d846e05b871293ed"

blocks = st.integers(0, 2**64).map(lambda seed: random.Random(seed).randbytes(4096))
keys32 = st.binary(min_size=32, max_size=32)


def test_hash_reference_vectors():
    assert crypto.hash_block(bytes(4096), 4096).hex() == SHA256_4096_ZERO
    one = b"\x01" + bytes(4095)
    assert crypto.hash_block(one, 4096).hex() == SHA256_ONE_BIT
    assert crypto.hash_block(one) != crypto.hash_block(bytes(4096))


def test_hash_rejects_wrong_length():
    with pytest.raises(InvalidArgumentError):
        crypto.hash_block(bytes(4095), 4096)


def test_kdf_reference_vectors():
    assert crypto.derive_cekey(bytes(32), bytes(32)).hex() == KDF_ZERO_ZERO
    assert crypto.derive_cekey(bytes(32), b"\x01" * 32).hex() == KDF_ZERO_ONES
    h = bytes.fromhex(SHA256_4096_ZERO)
    assert crypto.derive_cekey(h, KEY_00_1F).hex() == KDF_ZEROBLOCK_KEY


def test_data_block_reference_vector():
    key = bytes.fromhex(KDF_ZEROBLOCK_KEY)
    ct = crypto.encrypt_data_block(bytes(4096), key, 4096)
    assert ct[:32].hex() == CT_ZEROBLOCK_HEAD
    assert hashlib.sha256(ct).hexdigest() == CT_ZEROBLOCK_SHA
    assert crypto.block_key(bytes(4096), KEY_00_1F) == key


@pytest.mark.parametrize("bad", [b"", bytes(4095), bytes(17)])
def test_data_block_length_checks(bad):
    with pytest.raises(InvalidArgumentError):
        crypto.encrypt_data_block(bad, bytes(32))
    with pytest.raises(InvalidArgumentError):
        crypto.decrypt_data_block(bad, bytes(32))


def test_wrong_length_for_configured_block_size():
    with pytest.raises(InvalidArgumentError):
        crypto.encrypt_data_block(bytes(1024), bytes(32), block_size=4096)


@settings(max_examples=50, deadline=None)
@given(blocks, keys32)
def test_convergence_and_round_trip(block, inner):
    key = crypto.block_key(block, inner)
    ct1 = crypto.encrypt_data_block(block, key)
    ct2 = crypto.encrypt_data_block(block, crypto.derive_cekey(crypto.hash_block(block), inner))
    assert ct1 == ct2
    assert len(ct1) == len(block)
    pt = crypto.decrypt_data_block(ct1, key)
    assert pt == block
    # Self-verification: rehash of the decrypted block reproduces the key.
    assert crypto.block_key(pt, inner) == key


def test_wrong_key_detected_by_rehash():
    block = os.urandom(4096)
    inner = os.urandom(32)
    key = crypto.block_key(block, inner)
    ct = crypto.encrypt_data_block(block, key)
    wrong = crypto.block_key(os.urandom(4096), inner)
    pt = crypto.decrypt_data_block(ct, wrong)
    assert crypto.block_key(pt, inner) != wrong


def test_different_inner_keys_give_different_cekeys():
    h = crypto.hash_block(bytes(4096))
    assert crypto.derive_cekey(h, bytes(32)) != crypto.derive_cekey(h, b"\x01" + bytes(31))


def test_zone_separation_over_1000_blocks():
    k1, k2 = os.urandom(32), os.urandom(32)
    seen1, seen2 = set(), set()
    for _ in range(1000):
        b = os.urandom(4096)
        seen1.add(crypto.encrypt_data_block(b, crypto.block_key(b, k1)))
        seen2.add(crypto.encrypt_data_block(b, crypto.block_key(b, k2)))
    assert not seen1 & seen2


def test_metadata_round_trip_and_tamper():
    key = os.urandom(32)
    iv = crypto.new_iv()
    assert len(iv) == 16 and iv[12:] == bytes(4)
    ct, tag = crypto.encrypt_metadata(b"hello metadata", key, iv, b"aad")
    assert len(tag) == 16
    assert crypto.decrypt_metadata(ct, key, iv, tag, b"aad") == b"hello metadata"
    flipped = bytes([ct[0] ^ 1]) + ct[1:]
    with pytest.raises(MetadataIntegrityError):
        crypto.decrypt_metadata(flipped, key, iv, tag, b"aad")
    with pytest.raises(MetadataIntegrityError):
        crypto.decrypt_metadata(ct, key, iv, tag, b"other")
    with pytest.raises(MetadataIntegrityError):
        crypto.decrypt_metadata(ct, os.urandom(32), iv, tag, b"aad")


def test_fresh_ivs_differ():
    assert len({crypto.new_iv() for _ in range(100)}) == 100


def test_key_pair_validation():
    with pytest.raises(InvalidArgumentError):
        crypto.SecretKeyPair(bytes(31), bytes(32))
    pair = crypto.SecretKeyPair.generate(zone_id=7)
    assert pair.zone_id == 7 and len(pair.inner_key) == 32 and pair.inner_key != pair.outer_key
    assert "inner_key" not in repr(pair)
