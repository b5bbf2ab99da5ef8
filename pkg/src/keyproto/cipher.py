"""Pluggable authenticated encryption for protocol payloads."""

from typing import Protocol

from cryptography.hazmat.primitives import constant_time, hashes, hmac
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

KEY_BYTES = 16
TAG_BYTES = 8


class ProtocolError(Exception):
    """A protocol message was malformed, unexpected or failed a check."""


class IntegrityError(ProtocolError):
    """Ciphertext did not authenticate under the given key."""


class CipherSuite(Protocol):
    """Authenticated symmetric encryption: decrypt(k, encrypt(k, m)) == m, wrong key raises."""

    def encrypt(self, key: bytes, plaintext: bytes) -> bytes: ...

    def decrypt(self, key: bytes, ciphertext: bytes) -> bytes: ...


class DeterministicCipher:
    """
    Deterministic AEAD in synthetic-IV style.

    tag = HMAC-SHA256(key, plaintext)[:8]; the tag (zero-padded to 16 bytes) is the
    AES-128-CTR initial counter block; output is tag || ciphertext. Equal inputs give
    equal outputs, so protocol traces are reproducible from the run seed.
    """

    def _tag(self, key: bytes, plaintext: bytes) -> bytes:
        mac = hmac.HMAC(key, hashes.SHA256())
        mac.update(plaintext)
        return mac.finalize()[:TAG_BYTES]

    def _ctr(self, key: bytes, tag: bytes) -> Cipher:
        return Cipher(algorithms.AES(key), modes.CTR(tag + bytes(16 - TAG_BYTES)))

    def encrypt(self, key: bytes, plaintext: bytes) -> bytes:
        _check_key(key)
        tag = self._tag(key, plaintext)
        encryptor = self._ctr(key, tag).encryptor()
        return tag + encryptor.update(plaintext) + encryptor.finalize()

    def decrypt(self, key: bytes, ciphertext: bytes) -> bytes:
        _check_key(key)
        if len(ciphertext) < TAG_BYTES:
            raise IntegrityError("Ciphertext shorter than its tag")
        tag, body = ciphertext[:TAG_BYTES], ciphertext[TAG_BYTES:]
        decryptor = self._ctr(key, tag).decryptor()
        plaintext = decryptor.update(body) + decryptor.finalize()
        if not constant_time.bytes_eq(self._tag(key, plaintext), tag):
            raise IntegrityError("Authentication tag mismatch")
        return plaintext


def _check_key(key: bytes) -> None:
    if len(key) != KEY_BYTES:
        raise ValueError(f"Keys must be {KEY_BYTES} bytes, got {len(key)}")


default_cipher = DeterministicCipher()
