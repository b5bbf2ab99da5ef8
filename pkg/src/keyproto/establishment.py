"""Drives key establishment and refresh exchanges over a data-gathering tree."""

from collections.abc import Collection, Mapping
from dataclasses import dataclass

import numpy as np

from src.core.logging import get_logger
from src.keyproto.agents import BaseStation, KeyCache, SensorKeyAgent
from src.keyproto.channel import SimulatedChannel
from src.keyproto.cipher import CipherSuite, default_cipher
from src.keyproto.protocol import random_key
from src.simulation.topology import DGTree

logger = get_logger(__name__)


@dataclass(slots=True)
class KeyEstablishmentReport:
    """Outcome of one pass over a tree."""

    established: int = 0
    refreshed: int = 0
    failures: int = 0
    messages: int = 0
    transmissions: int = 0


class KeyAgreementNetwork:
    """
    Every node's key agent plus the base station that shares a key with each of them.

    Args:
        num_nodes: Sensor count; node ids are 0..num_nodes-1
        rng: Generator for BS keys, nonces, random numbers and new keys
        cipher: Authenticated cipher used by every party
    """

    def __init__(
        self,
        num_nodes: int,
        rng: np.random.Generator,
        cipher: CipherSuite = default_cipher,
    ):
        if num_nodes < 1:
            raise ValueError(f"num_nodes must be >= 1, got {num_nodes}")
        self.cipher = cipher
        bs_keys = {node: random_key(rng) for node in range(num_nodes)}
        self.agents = {
            node: SensorKeyAgent(KeyCache(owner=node, bs_key=key), rng, cipher)
            for node, key in bs_keys.items()
        }
        self.base_station = BaseStation(bs_keys, rng, cipher)

    def shared_key(self, a: int, b: int) -> bytes | None:
        """The pairwise key of (a, b) if both caches hold the same one."""
        key_a = self.agents[a].cache.get(b)
        if key_a is not None and key_a == self.agents[b].cache.get(a):
            return key_a
        return None

    def key_pairs(self) -> set[tuple[int, int]]:
        pairs = set()
        for node, agent in self.agents.items():
            for peer in agent.cache.keys:
                if node < peer and self.shared_key(node, peer) is not None:
                    pairs.add((node, peer))
        return pairs

    @property
    def failures(self) -> int:
        return self.base_station.errors + sum(a.failures for a in self.agents.values())


def establish_exchange(
    network: KeyAgreementNetwork,
    agg: int,
    children: list[int],
    channel: SimulatedChannel,
    hops_to_bs: int = 1,
) -> list[int]:
    """
    DA-Notification, Seed-Secret-Key, then NewPairwiseKey / Ack for each child.

    BS messages travel `hops_to_bs` hops along the tree; all others are one hop.

    Returns:
        Children that now share a new key with the aggregator
    """
    agg_agent = network.agents[agg]
    notification = agg_agent.start_establishment(children)
    if notification is None:
        return []
    delivered = channel.deliver(notification, hops_to_bs)
    seed = network.base_station.handle(delivered) if delivered is not None else None
    if seed is None:
        return []
    delivered = channel.deliver(seed, hops_to_bs)
    forwards = agg_agent.on_seed(delivered) if delivered is not None else []

    established = []
    for forward in forwards:
        child = forward.receiver
        child_agent = network.agents[child]
        ok = False
        component = channel.deliver(forward)
        reply = child_agent.on_seed_component(component) if component is not None else None
        if reply is not None:
            delivered = channel.deliver(reply)
            ack = agg_agent.on_new_key(delivered) if delivered is not None else None
            if ack is not None:
                delivered = channel.deliver(ack)
                ok = delivered is not None and child_agent.on_new_key_ack(delivered)
        if ok:
            agg_agent.confirm(child)
            established.append(child)
        else:
            agg_agent.abort(child)
    return established


def refresh_exchange(
    network: KeyAgreementNetwork,
    agg: int,
    child: int,
    channel: SimulatedChannel,
) -> bool:
    """
    RefreshRequest / RefreshResponse / RefreshAck under the current pairwise key.

    Returns:
        True when both sides replaced their key; on any failure both keep the old one
    """
    agg_agent = network.agents[agg]
    child_agent = network.agents[child]
    request = agg_agent.start_refresh(child)
    if request is None:
        return False
    ok = False
    delivered = channel.deliver(request)
    response = child_agent.on_refresh_request(delivered) if delivered is not None else None
    if response is not None:
        delivered = channel.deliver(response)
        ack = agg_agent.on_refresh_response(delivered) if delivered is not None else None
        if ack is not None:
            delivered = channel.deliver(ack)
            ok = delivered is not None and child_agent.on_refresh_ack(delivered)
    if ok:
        agg_agent.confirm(child)
    else:
        agg_agent.abort(child)
    return ok


def run_key_establishment_for_tree(
    tree: DGTree,
    network: KeyAgreementNetwork,
    channel: SimulatedChannel,
    excluded: Mapping[int, Collection[int]] | None = None,
) -> KeyEstablishmentReport:
    """
    Refresh or establish a key on every parent-child link of a freshly built tree.

    Aggregators are visited in BFS order. Each splits its children into those it
    already shares a key with (refreshed) and the rest (one DA-Notification).

    Args:
        tree: Newly built data-gathering tree
        network: Key agents and base station
        channel: Channel carrying (and counting) every message
        excluded: Per-aggregator children to leave out (locally blacklisted nodes)

    Returns:
        Counts for this pass
    """
    report = KeyEstablishmentReport()
    messages_before = channel.message_count
    transmissions_before = channel.transmissions
    excluded = excluded or {}

    for agg in tree.intermediates:
        skip = excluded.get(agg, ())
        children = [c for c in tree.children[agg] if c not in skip]
        cache = network.agents[agg].cache
        sharing = [c for c in children if cache.has(c)]
        missing = [c for c in children if not cache.has(c)]

        for child in sharing:
            if refresh_exchange(network, agg, child, channel):
                report.refreshed += 1
            else:
                report.failures += 1

        if missing:
            established = establish_exchange(network, agg, missing, channel, tree.level[agg])
            report.established += len(established)
            report.failures += len(missing) - len(established)

    report.messages = channel.message_count - messages_before
    report.transmissions = channel.transmissions - transmissions_before
    logger.debug(
        "Key establishment pass",
        build_round=tree.build_round,
        established=report.established,
        refreshed=report.refreshed,
        failures=report.failures,
    )
    return report
