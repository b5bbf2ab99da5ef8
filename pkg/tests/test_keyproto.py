"""Tests for the pairwise key establishment and refresh protocol."""

import networkx as nx
import numpy as np
import pytest

from src.keyproto.channel import SimulatedChannel
from src.keyproto.cipher import KEY_BYTES, DeterministicCipher, IntegrityError, ProtocolError
from src.keyproto.establishment import (
    KeyAgreementNetwork,
    establish_exchange,
    refresh_exchange,
    run_key_establishment_for_tree,
)
from src.keyproto.messages import (
    MessageKind,
    ProtocolMessage,
    pack_da_notification,
    pack_nonce,
    split_components,
    temp_key,
    unpack_da_notification,
)
from src.keyproto.protocol import (
    build_da_notification,
    build_refresh_request,
    child_handle_refresh_ack,
    child_handle_refresh_request,
    random_key,
)
from src.simulation.topology import root_tree
from tests.conftest import tree_from_parents

cipher = DeterministicCipher()


def network(num_nodes: int, seed: int = 0) -> KeyAgreementNetwork:
    return KeyAgreementNetwork(num_nodes, np.random.default_rng(seed))


def replace_kind(kind: MessageKind, replace):
    """Interceptor applying `replace` to every message of one kind."""

    def interceptor(msg: ProtocolMessage) -> ProtocolMessage | None:
        return replace(msg) if msg.kind is kind else msg

    return interceptor


def flip_first_byte(msg: ProtocolMessage) -> ProtocolMessage:
    payload = bytearray(msg.payload)
    payload[0] ^= 0x01
    return msg.with_payload(bytes(payload))


class TestEncoding:
    def test_notification_layout(self):
        plaintext = pack_da_notification(3, 100, [7, 9])

        assert plaintext == bytes.fromhex("0003" "0000000000000064" "02" "0007" "0009")
        assert unpack_da_notification(plaintext) == (3, 100, [7, 9])

    def test_no_notification_without_children(self):
        assert build_da_notification(3, [], random_key(np.random.default_rng(0)), np.random.default_rng(1)) is None

    def test_truncated_notification_rejected(self):
        with pytest.raises(ProtocolError, match="length mismatch"):
            unpack_da_notification(pack_da_notification(3, 100, [7, 9])[:-1])

    def test_temp_key_is_full_width_product(self):
        assert temp_key(2, 3) == (6).to_bytes(16, "big")
        top = 2**64 - 1
        assert temp_key(top, top) == (2**128 - 2**65 + 1).to_bytes(16, "big")


class TestCipher:
    def test_round_trip_and_determinism(self):
        key = bytes(range(KEY_BYTES))
        sealed = cipher.encrypt(key, b"nonce and key")

        assert cipher.decrypt(key, sealed) == b"nonce and key"
        assert cipher.encrypt(key, b"nonce and key") == sealed

    def test_wrong_key_fails_integrity(self):
        sealed = cipher.encrypt(bytes(KEY_BYTES), b"payload")
        with pytest.raises(IntegrityError):
            cipher.decrypt(bytes([1] * KEY_BYTES), sealed)

    def test_tampered_ciphertext_fails_integrity(self):
        key = bytes(KEY_BYTES)
        sealed = bytearray(cipher.encrypt(key, b"payload"))
        sealed[-1] ^= 0x80
        with pytest.raises(IntegrityError):
            cipher.decrypt(key, bytes(sealed))

    def test_key_length_checked(self):
        with pytest.raises(ValueError, match="16 bytes"):
            cipher.encrypt(b"short", b"payload")


class TestEstablishment:
    def test_base_station_answers_with_one_component_per_party(self):
        net = network(4)
        notification = net.agents[0].start_establishment([2, 3])

        seed = net.base_station.handle(notification)

        assert seed.kind is MessageKind.SEED_SECRET_KEY
        assert len(split_components(seed.payload)) == 3
        forwards = net.agents[0].on_seed(seed)
        assert [(f.sender, f.receiver) for f in forwards] == [(0, 2), (0, 3)]

    def test_honest_exchange_gives_both_sides_the_key(self):
        net = network(3)

        established = establish_exchange(net, 0, [1, 2], SimulatedChannel())

        assert established == [1, 2]
        assert net.shared_key(0, 1) is not None
        assert net.shared_key(0, 1) != net.shared_key(0, 2)
        assert net.failures == 0

    def test_impersonated_forward_rejected(self):
        net = network(3)
        seed = net.base_station.handle(net.agents[0].start_establishment([1]))
        forward = net.agents[0].on_seed(seed)[0]

        spoofed = ProtocolMessage(forward.kind, 2, forward.receiver, forward.payload)

        assert net.agents[1].on_seed_component(spoofed) is None
        assert net.agents[1].failures == 1

    def test_tampered_new_key_is_not_acknowledged(self):
        net = network(2)
        channel = SimulatedChannel(interceptor=replace_kind(MessageKind.NEW_PAIRWISE_KEY, flip_first_byte))

        assert establish_exchange(net, 0, [1], channel) == []
        assert not net.agents[0].cache.has(1)
        assert not net.agents[1].cache.has(0)
        assert net.agents[0].failures == 1

    def test_lost_ack_leaves_no_key_on_either_side(self):
        net = network(2)
        channel = SimulatedChannel(interceptor=replace_kind(MessageKind.NEW_PAIRWISE_KEY_ACK, lambda _: None))

        assert establish_exchange(net, 0, [1], channel) == []
        assert net.key_pairs() == set()

    def test_replayed_notification_caught_by_nonce_echo(self):
        net = network(2)
        recorder = SimulatedChannel(record_trace=True)
        establish_exchange(net, 0, [1], recorder)
        old_notification = recorder.log[0]
        first_key = net.shared_key(0, 1)

        channel = SimulatedChannel(
            interceptor=replace_kind(MessageKind.DA_NOTIFICATION, lambda _: old_notification)
        )

        assert establish_exchange(net, 0, [1], channel) == []
        assert net.base_station.errors == 0
        assert net.agents[0].failures == 1
        assert net.shared_key(0, 1) == first_key


class TestRefresh:
    def test_refresh_replaces_the_key(self):
        net = network(2)
        establish_exchange(net, 0, [1], SimulatedChannel())
        before = net.shared_key(0, 1)

        assert refresh_exchange(net, 0, 1, SimulatedChannel())
        after = net.shared_key(0, 1)
        assert after is not None
        assert after != before

    def test_refresh_without_key_is_skipped(self):
        assert not refresh_exchange(network(2), 0, 1, SimulatedChannel())

    def test_replayed_response_aborts(self):
        net = network(2)
        establish_exchange(net, 0, [1], SimulatedChannel())
        recorder = SimulatedChannel(record_trace=True)
        refresh_exchange(net, 0, 1, recorder)
        old_response = recorder.log[1]
        current = net.shared_key(0, 1)

        channel = SimulatedChannel(
            interceptor=replace_kind(MessageKind.REFRESH_RESPONSE, lambda _: old_response)
        )

        assert not refresh_exchange(net, 0, 1, channel)
        assert net.shared_key(0, 1) == current

    def test_ack_without_increment_rejected(self):
        rng = np.random.default_rng(4)
        current = random_key(rng)
        request, _ = build_refresh_request(0, 1, current, rng)
        _, new_key, nonce_b = child_handle_refresh_request(request, current, rng)

        bad_ack = ProtocolMessage(MessageKind.REFRESH_ACK, 0, 1, cipher.encrypt(new_key, pack_nonce(nonce_b)))

        with pytest.raises(ProtocolError, match="nonce mismatch"):
            child_handle_refresh_ack(bad_ack, new_key, nonce_b)


class TestTreePass:
    def test_star_establishes_then_refreshes(self):
        n = 6
        net = network(n)
        tree = root_tree(nx.star_graph(n - 1), 0)

        first = run_key_establishment_for_tree(tree, net, SimulatedChannel())
        keys = {child: net.shared_key(0, child) for child in range(1, n)}
        second = run_key_establishment_for_tree(tree, net, SimulatedChannel())

        assert (first.established, first.refreshed, first.failures) == (n - 1, 0, 0)
        assert (second.established, second.refreshed, second.failures) == (0, n - 1, 0)
        assert all(net.shared_key(0, c) not in (None, keys[c]) for c in range(1, n))

    def test_key_pairs_are_the_union_of_tree_edges(self):
        net = network(6)
        path = tree_from_parents({1: 0, 2: 1, 3: 2, 4: 3, 5: 4})
        star = tree_from_parents({c: 0 for c in range(1, 6)})

        run_key_establishment_for_tree(path, net, SimulatedChannel())
        report = run_key_establishment_for_tree(star, net, SimulatedChannel())

        expected = {tuple(sorted(e)) for tree in (path, star) for e in tree.edges()}
        assert net.key_pairs() == expected
        assert (report.established, report.refreshed) == (4, 1)

    def test_excluded_children_are_skipped(self):
        net = network(4)
        tree = tree_from_parents({1: 0, 2: 0, 3: 0})

        report = run_key_establishment_for_tree(tree, net, SimulatedChannel(), excluded={0: {2}})

        assert report.established == 2
        assert net.key_pairs() == {(0, 1), (0, 3)}

    def test_base_station_messages_cross_the_tree(self):
        net = network(3)
        tree = tree_from_parents({1: 0, 2: 1})

        report = run_key_establishment_for_tree(tree, net, SimulatedChannel())

        # sink-local BS exchange for node 0, one hop each way for node 1
        assert report.messages == 10
        assert report.transmissions == 3 + 5

    def test_trace_dump(self, tmp_path):
        net = network(3)
        channel = SimulatedChannel(record_trace=True)
        channel.round_index = 1
        run_key_establishment_for_tree(tree_from_parents({1: 0, 2: 0}), net, channel)
        path = tmp_path / "trace" / "protocol.txt"

        channel.write_trace(path)

        lines = path.read_text().splitlines()
        assert len(lines) == channel.message_count == 8
        round_index, kind, sender, receiver, payload = lines[0].split()
        assert (round_index, kind, sender, receiver) == ("1", "DANotification", "0", "65535")
        assert bytes.fromhex(payload) == channel.log[0].payload


ESTABLISHMENT_STAGES = [
    MessageKind.DA_NOTIFICATION,
    MessageKind.SEED_SECRET_KEY,
    MessageKind.SEED_SECRET_KEY,
    MessageKind.NEW_PAIRWISE_KEY,
    MessageKind.NEW_PAIRWISE_KEY_ACK,
]
REFRESH_STAGES = [MessageKind.REFRESH_REQUEST, MessageKind.REFRESH_RESPONSE, MessageKind.REFRESH_ACK]
STAGE_IDS = ["notification", "seed", "forwarded-component", "new-key", "new-key-ack"]
SESSION_SEED = 7


def nth_message(index: int, replace):
    """Interceptor applying `replace` to the index-th message on the channel only."""
    seen = {"count": 0}

    def interceptor(msg: ProtocolMessage) -> ProtocolMessage | None:
        position = seen["count"]
        seen["count"] += 1
        return replace(msg) if position == index else msg

    return interceptor


def xor_at(position: int, mask: int):
    def replace(msg: ProtocolMessage) -> ProtocolMessage:
        payload = bytearray(msg.payload)
        payload[position] ^= mask
        return msg.with_payload(bytes(payload))

    return replace


def recorded_session() -> list[ProtocolMessage]:
    """Establishment followed by one refresh on a two-node network."""
    channel = SimulatedChannel(record_trace=True)
    net = network(2, SESSION_SEED)
    establish_exchange(net, 0, [1], channel)
    refresh_exchange(net, 0, 1, channel)
    return list(channel.log)


def bit_sample(length: int, seed: int, count: int = 32) -> list[tuple[int, int]]:
    rng = np.random.default_rng(seed)
    return [(int(rng.integers(0, length)), 1 << int(rng.integers(0, 8))) for _ in range(count)]


def test_session_message_order():
    kinds = [msg.kind for msg in recorded_session()]

    assert kinds == ESTABLISHMENT_STAGES + REFRESH_STAGES


class TestTampering:
    def assert_establishment_rejects(self, index: int, replace) -> None:
        net = network(2, SESSION_SEED)
        channel = SimulatedChannel(interceptor=nth_message(index, replace))

        assert establish_exchange(net, 0, [1], channel) == []
        assert not net.agents[0].cache.has(1)
        assert not net.agents[1].cache.has(0)

    def assert_refresh_rejects(self, index: int, replace) -> None:
        net = network(2, SESSION_SEED)
        establish_exchange(net, 0, [1], SimulatedChannel())
        before = net.shared_key(0, 1)
        channel = SimulatedChannel(interceptor=nth_message(index, replace))

        assert not refresh_exchange(net, 0, 1, channel)
        assert net.agents[0].cache.get(1) == before
        assert net.agents[1].cache.get(0) == before

    @pytest.mark.parametrize("index", range(len(ESTABLISHMENT_STAGES)), ids=STAGE_IDS)
    def test_every_establishment_byte(self, index):
        length = len(recorded_session()[index].payload)
        for position in range(length):
            self.assert_establishment_rejects(index, xor_at(position, 0xFF))

    @pytest.mark.parametrize("index", range(len(ESTABLISHMENT_STAGES)), ids=STAGE_IDS)
    def test_establishment_bit_sample(self, index):
        length = len(recorded_session()[index].payload)
        for position, mask in bit_sample(length, seed=index):
            self.assert_establishment_rejects(index, xor_at(position, mask))

    @pytest.mark.parametrize("index", range(len(REFRESH_STAGES)), ids=["request", "response", "ack"])
    def test_every_refresh_byte(self, index):
        length = len(recorded_session()[len(ESTABLISHMENT_STAGES) + index].payload)
        for position in range(length):
            self.assert_refresh_rejects(index, xor_at(position, 0xFF))

    @pytest.mark.parametrize("index", range(len(REFRESH_STAGES)), ids=["request", "response", "ack"])
    def test_refresh_bit_sample(self, index):
        length = len(recorded_session()[len(ESTABLISHMENT_STAGES) + index].payload)
        for position, mask in bit_sample(length, seed=100 + index):
            self.assert_refresh_rejects(index, xor_at(position, mask))

    def test_dropped_seed_component_establishes_nothing(self):
        self.assert_establishment_rejects(2, lambda _: None)


SESSION_LENGTH = len(ESTABLISHMENT_STAGES) + len(REFRESH_STAGES)


class TestReplay:
    """Every message of an earlier session, injected at every stage of a later one."""

    @staticmethod
    def network_after_session() -> tuple[KeyAgreementNetwork, list[ProtocolMessage]]:
        net = network(2, SESSION_SEED)
        recorder = SimulatedChannel(record_trace=True)
        establish_exchange(net, 0, [1], recorder)
        refresh_exchange(net, 0, 1, recorder)
        return net, list(recorder.log)

    @pytest.mark.parametrize("old", range(SESSION_LENGTH))
    @pytest.mark.parametrize("stage", range(len(ESTABLISHMENT_STAGES)), ids=STAGE_IDS)
    def test_establishment_stage(self, stage, old):
        net, log = self.network_after_session()
        before = net.shared_key(0, 1)
        channel = SimulatedChannel(interceptor=nth_message(stage, lambda _: log[old]))

        assert establish_exchange(net, 0, [1], channel) == []
        assert net.shared_key(0, 1) == before
        assert net.key_pairs() == {(0, 1)}

    @pytest.mark.parametrize("old", range(SESSION_LENGTH))
    @pytest.mark.parametrize("stage", range(len(REFRESH_STAGES)), ids=["request", "response", "ack"])
    def test_refresh_stage(self, stage, old):
        net, log = self.network_after_session()
        before = net.shared_key(0, 1)
        channel = SimulatedChannel(interceptor=nth_message(stage, lambda _: log[old]))

        assert not refresh_exchange(net, 0, 1, channel)
        assert net.agents[0].cache.get(1) == before
        assert net.agents[1].cache.get(0) == before
