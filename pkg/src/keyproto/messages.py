"""Protocol message kinds and their big-endian plaintext layouts."""

import struct
from dataclasses import dataclass
from enum import Enum

from src.keyproto.cipher import KEY_BYTES, ProtocolError

ID_BYTES = 2
NONCE_BYTES = 8
RN_BYTES = 8
LENGTH_PREFIX_BYTES = 2

BS_ID = 0xFFFF
NONCE_MOD = 1 << 64
MAX_CHILDREN = 255


class MessageKind(str, Enum):
    """Key establishment and refresh message kinds."""

    DA_NOTIFICATION = "DANotification"
    SEED_SECRET_KEY = "SeedSecretKey"
    NEW_PAIRWISE_KEY = "NewPairwiseKey"
    NEW_PAIRWISE_KEY_ACK = "NewPairwiseKeyAck"
    REFRESH_REQUEST = "RefreshRequest"
    REFRESH_RESPONSE = "RefreshResponse"
    REFRESH_ACK = "RefreshAck"


@dataclass(frozen=True, slots=True)
class ProtocolMessage:
    """One message on the simulated channel; payload is ciphertext (or framed ciphertexts)."""

    kind: MessageKind
    sender: int
    receiver: int
    payload: bytes

    def with_payload(self, payload: bytes) -> "ProtocolMessage":
        return ProtocolMessage(self.kind, self.sender, self.receiver, payload)


def increment(nonce: int) -> int:
    return (nonce + 1) % NONCE_MOD


def temp_key(rn_agg: int, rn_child: int) -> bytes:
    """Temporary key: the full 128-bit product of two 64-bit random numbers, big-endian."""
    return (rn_agg * rn_child).to_bytes(KEY_BYTES, "big")


# DA-Notification: agg id | nonce | child count | child ids
def pack_da_notification(agg: int, nonce: int, children: list[int]) -> bytes:
    if len(children) > MAX_CHILDREN:
        raise ValueError(f"At most {MAX_CHILDREN} children per notification, got {len(children)}")
    return struct.pack(f">HQB{len(children)}H", agg, nonce, len(children), *children)


def unpack_da_notification(plaintext: bytes) -> tuple[int, int, list[int]]:
    header = struct.calcsize(">HQB")
    if len(plaintext) < header:
        raise ProtocolError("DA-Notification too short")
    agg, nonce, count = struct.unpack_from(">HQB", plaintext)
    if len(plaintext) != header + ID_BYTES * count:
        raise ProtocolError("DA-Notification child list length mismatch")
    children = list(struct.unpack_from(f">{count}H", plaintext, header))
    return agg, nonce, children


# Seed-Secret-Key, aggregator component: BS tag | nonce + 1 | RN(A) | RN(c)...
def pack_agg_component(nonce_echo: int, rn_agg: int, rn_children: list[int]) -> bytes:
    return struct.pack(f">HQQ{len(rn_children)}Q", BS_ID, nonce_echo, rn_agg, *rn_children)


def unpack_agg_component(plaintext: bytes) -> tuple[int, int, list[int]]:
    header = struct.calcsize(">HQQ")
    body = len(plaintext) - header
    if body < 0 or body % RN_BYTES:
        raise ProtocolError("Aggregator seed component has a bad length")
    tag, nonce_echo, rn_agg = struct.unpack_from(">HQQ", plaintext)
    if tag != BS_ID:
        raise ProtocolError("Aggregator seed component not issued by the base station")
    rn_children = list(struct.unpack_from(f">{body // RN_BYTES}Q", plaintext, header))
    return nonce_echo, rn_agg, rn_children


# Seed-Secret-Key, child component: BS tag | agg id | RN(A) | RN(c)
_CHILD_COMPONENT = struct.Struct(">HHQQ")


def pack_child_component(agg: int, rn_agg: int, rn_child: int) -> bytes:
    return _CHILD_COMPONENT.pack(BS_ID, agg, rn_agg, rn_child)


def unpack_child_component(plaintext: bytes) -> tuple[int, int, int]:
    if len(plaintext) != _CHILD_COMPONENT.size:
        raise ProtocolError("Child seed component has a bad length")
    tag, agg, rn_agg, rn_child = _CHILD_COMPONENT.unpack(plaintext)
    if tag != BS_ID:
        raise ProtocolError("Child seed component not issued by the base station")
    return agg, rn_agg, rn_child


def frame_components(components: list[bytes]) -> bytes:
    """Concatenate ciphertext components, each behind a 2-byte length prefix."""
    return b"".join(struct.pack(">H", len(c)) + c for c in components)


def split_components(payload: bytes) -> list[bytes]:
    components = []
    offset = 0
    while offset < len(payload):
        if offset + LENGTH_PREFIX_BYTES > len(payload):
            raise ProtocolError("Truncated component length prefix")
        (length,) = struct.unpack_from(">H", payload, offset)
        offset += LENGTH_PREFIX_BYTES
        if offset + length > len(payload):
            raise ProtocolError("Truncated component body")
        components.append(payload[offset : offset + length])
        offset += length
    return components


# Key + nonce (NewPairwiseKey), nonce (acks, refresh request), nonce | key | nonce (refresh response)
_KEY_NONCE = struct.Struct(f">{KEY_BYTES}sQ")
_NONCE = struct.Struct(">Q")
_NONCE_KEY_NONCE = struct.Struct(f">Q{KEY_BYTES}sQ")


def pack_key_nonce(key: bytes, nonce: int) -> bytes:
    return _KEY_NONCE.pack(key, nonce)


def unpack_key_nonce(plaintext: bytes) -> tuple[bytes, int]:
    if len(plaintext) != _KEY_NONCE.size:
        raise ProtocolError("Key/nonce block has a bad length")
    key, nonce = _KEY_NONCE.unpack(plaintext)
    return key, nonce


def pack_nonce(nonce: int) -> bytes:
    return _NONCE.pack(nonce)


def unpack_nonce(plaintext: bytes) -> int:
    if len(plaintext) != _NONCE.size:
        raise ProtocolError("Nonce block has a bad length")
    return _NONCE.unpack(plaintext)[0]


def pack_refresh_response(nonce_echo: int, key: bytes, nonce: int) -> bytes:
    return _NONCE_KEY_NONCE.pack(nonce_echo, key, nonce)


def unpack_refresh_response(plaintext: bytes) -> tuple[int, bytes, int]:
    if len(plaintext) != _NONCE_KEY_NONCE.size:
        raise ProtocolError("Refresh response has a bad length")
    nonce_echo, key, nonce = _NONCE_KEY_NONCE.unpack(plaintext)
    return nonce_echo, key, nonce
