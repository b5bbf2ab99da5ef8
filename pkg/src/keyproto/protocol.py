"""Message handlers for pairwise key establishment and refresh.

Each handler is a pure function of its inputs (plus the caller's rng) and raises
ProtocolError/IntegrityError on any failed check; state lives in keyproto.agents.
"""

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from src.keyproto.cipher import KEY_BYTES, CipherSuite, ProtocolError, default_cipher
from src.keyproto.messages import (
    BS_ID,
    MessageKind,
    ProtocolMessage,
    frame_components,
    increment,
    pack_agg_component,
    pack_child_component,
    pack_da_notification,
    pack_key_nonce,
    pack_nonce,
    pack_refresh_response,
    split_components,
    temp_key,
    unpack_agg_component,
    unpack_child_component,
    unpack_da_notification,
    unpack_key_nonce,
    unpack_nonce,
    unpack_refresh_response,
)


def random_u64(rng: np.random.Generator) -> int:
    return int(rng.integers(0, np.iinfo(np.uint64).max, dtype=np.uint64, endpoint=True))


def random_key(rng: np.random.Generator) -> bytes:
    return rng.bytes(KEY_BYTES)


@dataclass(frozen=True, slots=True)
class SeedGrant:
    """What the aggregator learns from its own Seed-Secret-Key component."""

    rn_agg: int
    rn_children: dict[int, int]
    forwards: list[ProtocolMessage]


@dataclass(frozen=True, slots=True)
class ChildPending:
    """Child side of an establishment awaiting the aggregator's acknowledgment."""

    agg: int
    new_key: bytes
    nonce: int


# Establishment (DA-Notification -> Seed-Secret-Key -> NewPairwiseKey -> Ack)


def build_da_notification(
    agg: int,
    children_missing_keys: list[int],
    bs_key: bytes,
    rng: np.random.Generator,
    cipher: CipherSuite = default_cipher,
) -> tuple[ProtocolMessage, int] | None:
    """
    DA-Notification for the children the aggregator shares no key with.

    Returns:
        (message to the BS, pending nonce N_A), or None when the list is empty
    """
    if not children_missing_keys:
        return None
    nonce = random_u64(rng)
    plaintext = pack_da_notification(agg, nonce, children_missing_keys)
    message = ProtocolMessage(
        MessageKind.DA_NOTIFICATION, agg, BS_ID, cipher.encrypt(bs_key, plaintext)
    )
    return message, nonce


def bs_handle_notification(
    msg: ProtocolMessage,
    bs_key_table: Mapping[int, bytes],
    rng: np.random.Generator,
    cipher: CipherSuite = default_cipher,
) -> ProtocolMessage:
    """
    Base station answer to a DA-Notification.

    One 64-bit random number per participant; the aggregator component carries
    N_A + 1 and every RN, each child component carries the aggregator id, RN(A)
    and its own RN. Components are length-prefixed, aggregator first.
    """
    if msg.kind is not MessageKind.DA_NOTIFICATION:
        raise ProtocolError(f"Base station cannot handle {msg.kind.value}")
    sender_key = bs_key_table.get(msg.sender)
    if sender_key is None:
        raise ProtocolError(f"No base-station key for node {msg.sender}")
    agg, nonce, children = unpack_da_notification(cipher.decrypt(sender_key, msg.payload))
    if agg != msg.sender:
        raise ProtocolError(f"Notification names aggregator {agg} but came from {msg.sender}")
    if any(child not in bs_key_table for child in children):
        raise ProtocolError("Notification names an unknown child")

    rn_agg = random_u64(rng)
    rn_children = [random_u64(rng) for _ in children]
    components = [
        cipher.encrypt(sender_key, pack_agg_component(increment(nonce), rn_agg, rn_children))
    ]
    components.extend(
        cipher.encrypt(bs_key_table[child], pack_child_component(agg, rn_agg, rn_child))
        for child, rn_child in zip(children, rn_children, strict=True)
    )
    return ProtocolMessage(MessageKind.SEED_SECRET_KEY, BS_ID, agg, frame_components(components))


def agg_handle_seed(
    msg: ProtocolMessage,
    agg_bs_key: bytes,
    pending_nonce: int,
    requested_children: list[int],
    cipher: CipherSuite = default_cipher,
) -> SeedGrant:
    """
    Aggregator side of the Seed-Secret-Key message.

    Checks the nonce echo, extracts the random numbers and re-addresses each child
    component, unchanged, to its child.
    """
    if msg.kind is not MessageKind.SEED_SECRET_KEY or msg.sender != BS_ID:
        raise ProtocolError("Expected a Seed-Secret-Key message from the base station")
    components = split_components(msg.payload)
    if len(components) != len(requested_children) + 1:
        raise ProtocolError("Seed-Secret-Key component count does not match the request")
    nonce_echo, rn_agg, rn_children = unpack_agg_component(
        cipher.decrypt(agg_bs_key, components[0])
    )
    if nonce_echo != increment(pending_nonce):
        raise ProtocolError("Seed-Secret-Key nonce echo mismatch")
    if len(rn_children) != len(requested_children):
        raise ProtocolError("Seed-Secret-Key random-number count mismatch")

    forwards = [
        ProtocolMessage(MessageKind.SEED_SECRET_KEY, msg.receiver, child, component)
        for child, component in zip(requested_children, components[1:], strict=True)
    ]
    return SeedGrant(
        rn_agg=rn_agg,
        rn_children=dict(zip(requested_children, rn_children, strict=True)),
        forwards=forwards,
    )


def child_handle_seed(
    component: ProtocolMessage,
    child_bs_key: bytes,
    rng: np.random.Generator,
    cipher: CipherSuite = default_cipher,
) -> tuple[ProtocolMessage, ChildPending]:
    """
    Child side of a forwarded seed component.

    The component must name the forwarding node as aggregator. The child picks a
    fresh 128-bit key and nonce and sends them under the temporary key RN(A) * RN(c).
    """
    if component.kind is not MessageKind.SEED_SECRET_KEY:
        raise ProtocolError("Expected a forwarded Seed-Secret-Key component")
    agg, rn_agg, rn_child = unpack_child_component(
        cipher.decrypt(child_bs_key, component.payload)
    )
    if agg != component.sender:
        raise ProtocolError(
            f"Seed component names aggregator {agg} but was forwarded by {component.sender}"
        )
    new_key = random_key(rng)
    nonce = random_u64(rng)
    payload = cipher.encrypt(temp_key(rn_agg, rn_child), pack_key_nonce(new_key, nonce))
    message = ProtocolMessage(MessageKind.NEW_PAIRWISE_KEY, component.receiver, agg, payload)
    return message, ChildPending(agg=agg, new_key=new_key, nonce=nonce)


def agg_handle_new_key(
    msg: ProtocolMessage,
    rn_agg: int,
    rn_child: int,
    cipher: CipherSuite = default_cipher,
) -> tuple[ProtocolMessage, bytes]:
    """
    Aggregator side of NewPairwiseKey: recover K_new and acknowledge with N_c + 1 under K_new.

    Returns:
        (acknowledgment, new pairwise key)
    """
    if msg.kind is not MessageKind.NEW_PAIRWISE_KEY:
        raise ProtocolError("Expected a NewPairwiseKey message")
    new_key, nonce = unpack_key_nonce(cipher.decrypt(temp_key(rn_agg, rn_child), msg.payload))
    ack = ProtocolMessage(
        MessageKind.NEW_PAIRWISE_KEY_ACK,
        msg.receiver,
        msg.sender,
        cipher.encrypt(new_key, pack_nonce(increment(nonce))),
    )
    return ack, new_key


def child_handle_new_key_ack(
    msg: ProtocolMessage, pending: ChildPending, cipher: CipherSuite = default_cipher
) -> bytes:
    """Child validates N_c + 1 under K_new; returns the now-established key."""
    if msg.kind is not MessageKind.NEW_PAIRWISE_KEY_ACK or msg.sender != pending.agg:
        raise ProtocolError("Expected a NewPairwiseKeyAck from the pending aggregator")
    if unpack_nonce(cipher.decrypt(pending.new_key, msg.payload)) != increment(pending.nonce):
        raise ProtocolError("NewPairwiseKeyAck nonce mismatch")
    return pending.new_key


# Refresh (Request -> Response -> Ack), all under the currently shared key


def build_refresh_request(
    agg: int,
    child: int,
    current_key: bytes,
    rng: np.random.Generator,
    cipher: CipherSuite = default_cipher,
) -> tuple[ProtocolMessage, int]:
    nonce = random_u64(rng)
    message = ProtocolMessage(
        MessageKind.REFRESH_REQUEST, agg, child, cipher.encrypt(current_key, pack_nonce(nonce))
    )
    return message, nonce


def child_handle_refresh_request(
    msg: ProtocolMessage,
    current_key: bytes,
    rng: np.random.Generator,
    cipher: CipherSuite = default_cipher,
) -> tuple[ProtocolMessage, bytes, int]:
    """
    Returns:
        (response carrying N_a + 1 | K_new | N_b under K_cur, K_new, N_b)
    """
    if msg.kind is not MessageKind.REFRESH_REQUEST:
        raise ProtocolError("Expected a RefreshRequest")
    nonce_a = unpack_nonce(cipher.decrypt(current_key, msg.payload))
    new_key = random_key(rng)
    nonce_b = random_u64(rng)
    payload = cipher.encrypt(
        current_key, pack_refresh_response(increment(nonce_a), new_key, nonce_b)
    )
    response = ProtocolMessage(MessageKind.REFRESH_RESPONSE, msg.receiver, msg.sender, payload)
    return response, new_key, nonce_b


def agg_handle_refresh_response(
    msg: ProtocolMessage,
    current_key: bytes,
    pending_nonce: int,
    cipher: CipherSuite = default_cipher,
) -> tuple[ProtocolMessage, bytes]:
    """
    Returns:
        (acknowledgment carrying N_b + 1 under K_new, K_new)
    """
    if msg.kind is not MessageKind.REFRESH_RESPONSE:
        raise ProtocolError("Expected a RefreshResponse")
    nonce_echo, new_key, nonce_b = unpack_refresh_response(
        cipher.decrypt(current_key, msg.payload)
    )
    if nonce_echo != increment(pending_nonce):
        raise ProtocolError("RefreshResponse nonce echo mismatch")
    ack = ProtocolMessage(
        MessageKind.REFRESH_ACK,
        msg.receiver,
        msg.sender,
        cipher.encrypt(new_key, pack_nonce(increment(nonce_b))),
    )
    return ack, new_key


def child_handle_refresh_ack(
    msg: ProtocolMessage,
    new_key: bytes,
    pending_nonce: int,
    cipher: CipherSuite = default_cipher,
) -> None:
    if msg.kind is not MessageKind.REFRESH_ACK:
        raise ProtocolError("Expected a RefreshAck")
    if unpack_nonce(cipher.decrypt(new_key, msg.payload)) != increment(pending_nonce):
        raise ProtocolError("RefreshAck nonce mismatch")
