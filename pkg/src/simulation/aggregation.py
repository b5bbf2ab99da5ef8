"""Bottom-up sum aggregation along the DG-tree with per-parent CF filtering."""

from collections.abc import Collection, Mapping
from dataclasses import dataclass

from src.simulation.topology import DGTree


@dataclass(frozen=True, slots=True)
class AggregatePacket:
    """Aggregated sum plus the numSDAUsedNodes header."""

    value: float
    num_sda_used_nodes: int


def aggregate_tree(
    tree: DGTree,
    beacons: Mapping[int, float],
    blacklists: Mapping[int, Collection[int]],
) -> AggregatePacket | None:
    """
    Aggregate from the leaves up to the root.

    Each node adds its own reading to the packets of the children it has not
    blacklisted; a blacklisted child's packet (its whole subtree) is dropped. A node
    without a reading in `beacons` forwards only what its children sent.

    Args:
        tree: Live data-gathering tree
        beacons: Reading per node for this round
        blacklists: Children each observer has locally classified as CF

    Returns:
        Packet arriving at the root, or None when nothing usable reached it
    """
    packets: dict[int, AggregatePacket] = {}
    for node in reversed(tree.bfs_order):
        rejected = blacklists.get(node, ())
        value = 0.0
        count = 0
        if node in beacons:
            value = beacons[node]
            count = 1
        for child in tree.children[node]:
            if child in rejected or child not in packets:
                continue
            packet = packets[child]
            value += packet.value
            count += packet.num_sda_used_nodes
        if count:
            packets[node] = AggregatePacket(value=value, num_sda_used_nodes=count)
    return packets.get(tree.root)


def sink_average(packet: AggregatePacket) -> float:
    """Field average estimated by the sink."""
    if packet.num_sda_used_nodes < 1:
        raise ValueError("Aggregate packet has no contributing nodes")
    return packet.value / packet.num_sda_used_nodes
