"""Key caches and the per-node / base-station protocol state machines."""

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from src.core.logging import get_logger
from src.keyproto import protocol
from src.keyproto.cipher import CipherSuite, ProtocolError, default_cipher
from src.keyproto.messages import ProtocolMessage
from src.keyproto.protocol import ChildPending, SeedGrant

logger = get_logger(__name__)


@dataclass(slots=True)
class KeyCache:
    """A node's pairwise keys plus the key it shares with the base station."""

    owner: int
    bs_key: bytes
    keys: dict[int, bytes] = field(default_factory=dict)

    def has(self, peer: int) -> bool:
        return peer in self.keys

    def get(self, peer: int) -> bytes | None:
        return self.keys.get(peer)

    def store(self, peer: int, key: bytes) -> None:
        self.keys[peer] = key


class BaseStation:
    """Trusted key authority answering DA-Notifications with Seed-Secret-Key messages."""

    def __init__(
        self,
        bs_key_table: Mapping[int, bytes],
        rng: np.random.Generator,
        cipher: CipherSuite = default_cipher,
    ):
        self.bs_key_table = dict(bs_key_table)
        self.rng = rng
        self.cipher = cipher
        self.errors = 0

    def handle(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        try:
            return protocol.bs_handle_notification(msg, self.bs_key_table, self.rng, self.cipher)
        except ProtocolError as e:
            self.errors += 1
            logger.warning("Base station dropped notification", sender=msg.sender, error=str(e))
            return None


class SensorKeyAgent:
    """
    One node's key-agreement state in both roles.

    As aggregator it stages keys recovered from NewPairwiseKey / RefreshResponse and
    commits them only once the child has accepted the acknowledgment, so an aborted
    exchange leaves both caches as they were.
    """

    def __init__(
        self,
        cache: KeyCache,
        rng: np.random.Generator,
        cipher: CipherSuite = default_cipher,
    ):
        self.cache = cache
        self.rng = rng
        self.cipher = cipher
        self.failures = 0
        # aggregator role
        self._notification: tuple[int, list[int]] | None = None
        self._grant: SeedGrant | None = None
        self._staged: dict[int, bytes] = {}
        self._refresh_nonces: dict[int, int] = {}
        # child role
        self._establishing: dict[int, ChildPending] = {}
        self._refreshing: dict[int, tuple[bytes, int]] = {}

    @property
    def node(self) -> int:
        return self.cache.owner

    def _reject(self, event: str, msg: ProtocolMessage, error: ProtocolError) -> None:
        self.failures += 1
        logger.warning(event, node=self.node, kind=msg.kind.value, sender=msg.sender, error=str(error))

    # aggregator role: establishment

    def start_establishment(self, children: list[int]) -> ProtocolMessage | None:
        built = protocol.build_da_notification(
            self.node, children, self.cache.bs_key, self.rng, self.cipher
        )
        if built is None:
            return None
        message, nonce = built
        self._notification = (nonce, list(children))
        self._grant = None
        return message

    def on_seed(self, msg: ProtocolMessage) -> list[ProtocolMessage]:
        """Validate the Seed-Secret-Key message and return the components to forward."""
        if self._notification is None:
            self._reject("Unsolicited seed message", msg, ProtocolError("no pending notification"))
            return []
        nonce, children = self._notification
        # one seed answer per notification
        self._notification = None
        try:
            self._grant = protocol.agg_handle_seed(
                msg, self.cache.bs_key, nonce, children, self.cipher
            )
        except ProtocolError as e:
            self._reject("Seed message rejected", msg, e)
            return []
        return list(self._grant.forwards)

    def on_new_key(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        child = msg.sender
        if self._grant is None or child not in self._grant.rn_children:
            self._reject("Unexpected new key", msg, ProtocolError("no seed for this child"))
            return None
        try:
            ack, new_key = protocol.agg_handle_new_key(
                msg, self._grant.rn_agg, self._grant.rn_children[child], self.cipher
            )
        except ProtocolError as e:
            self._reject("New key rejected", msg, e)
            return None
        self._staged[child] = new_key
        return ack

    # aggregator role: refresh

    def start_refresh(self, child: int) -> ProtocolMessage | None:
        current = self.cache.get(child)
        if current is None:
            return None
        message, nonce = protocol.build_refresh_request(
            self.node, child, current, self.rng, self.cipher
        )
        self._refresh_nonces[child] = nonce
        return message

    def on_refresh_response(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        child = msg.sender
        nonce = self._refresh_nonces.pop(child, None)
        current = self.cache.get(child)
        if nonce is None or current is None:
            self._reject("Unexpected refresh response", msg, ProtocolError("no pending refresh"))
            return None
        try:
            ack, new_key = protocol.agg_handle_refresh_response(msg, current, nonce, self.cipher)
        except ProtocolError as e:
            self._reject("Refresh response rejected", msg, e)
            return None
        self._staged[child] = new_key
        return ack

    def confirm(self, child: int) -> None:
        """Child accepted the acknowledgment: the staged key becomes the pairwise key."""
        new_key = self._staged.pop(child, None)
        if new_key is not None:
            self.cache.store(child, new_key)

    def abort(self, child: int) -> None:
        self._staged.pop(child, None)
        self._refresh_nonces.pop(child, None)

    # child role

    def on_seed_component(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        try:
            reply, pending = protocol.child_handle_seed(msg, self.cache.bs_key, self.rng, self.cipher)
        except ProtocolError as e:
            self._reject("Seed component rejected", msg, e)
            return None
        self._establishing[pending.agg] = pending
        return reply

    def on_new_key_ack(self, msg: ProtocolMessage) -> bool:
        pending = self._establishing.pop(msg.sender, None)
        if pending is None:
            self._reject("Unexpected key acknowledgment", msg, ProtocolError("no pending key"))
            return False
        try:
            key = protocol.child_handle_new_key_ack(msg, pending, self.cipher)
        except ProtocolError as e:
            self._reject("Key acknowledgment rejected", msg, e)
            return False
        self.cache.store(pending.agg, key)
        return True

    def on_refresh_request(self, msg: ProtocolMessage) -> ProtocolMessage | None:
        current = self.cache.get(msg.sender)
        if current is None:
            self._reject("Refresh request without a shared key", msg, ProtocolError("no key"))
            return None
        try:
            response, new_key, nonce = protocol.child_handle_refresh_request(
                msg, current, self.rng, self.cipher
            )
        except ProtocolError as e:
            self._reject("Refresh request rejected", msg, e)
            return None
        self._refreshing[msg.sender] = (new_key, nonce)
        return response

    def on_refresh_ack(self, msg: ProtocolMessage) -> bool:
        pending = self._refreshing.pop(msg.sender, None)
        if pending is None:
            self._reject("Unexpected refresh acknowledgment", msg, ProtocolError("no pending refresh"))
            return False
        new_key, nonce = pending
        try:
            protocol.child_handle_refresh_ack(msg, new_key, nonce, self.cipher)
        except ProtocolError as e:
            self._reject("Refresh acknowledgment rejected", msg, e)
            return False
        self.cache.store(msg.sender, new_key)
        return True
