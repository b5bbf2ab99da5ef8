"""Per-round simulation loop and per-profile metrics."""

import statistics
from dataclasses import dataclass, field

import numpy as np

from src.core.logging import get_logger
from src.keyproto.channel import SimulatedChannel
from src.keyproto.establishment import KeyAgreementNetwork, run_key_establishment_for_tree
from src.models.metrics import MetricsRecord
from src.models.scenario import SINK_ID, ScenarioConfig, TreeType
from src.simulation.aggregation import AggregatePacket, aggregate_tree, sink_average
from src.simulation.mobility import MobilityTrace, Point, generate_trace
from src.simulation.sensing import (
    BeaconWindow,
    CFState,
    DataGenParams,
    DataSource,
    RandomDataSource,
    cf_enable,
    record_beacon,
)
from src.simulation.topology import DGTree, build_dg_tree, build_graph, distance_matrix, tree_alive
from src.simulation.trust import (
    NeighborTrustState,
    TrustScoreBuffer,
    append_trust_score,
    check_cf_status,
    est_avg_trust,
    raw_trust_score,
    roll_association,
)

logger = get_logger(__name__)

# SeedSequence stream ids, one per concern
CF_STREAM = 1
DATA_STREAM = 2
KEY_STREAM = 3


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def profile_trace(config: ScenarioConfig, seed: int) -> MobilityTrace:
    """Random Waypoint trace for one profile, with the sink pinned at its position."""
    return generate_trace(
        seed=seed,
        num_nodes=config.num_nodes,
        area=config.area,
        vmax=config.vmax,
        horizon=config.horizon_s,
        anchors={SINK_ID: Point(config.sink_x, config.sink_y)},
    )


@dataclass(slots=True)
class RoundOutcome:
    """What happened in one round."""

    round_index: int
    tree_rebuilt: bool = False
    has_tree: bool = False
    packet: AggregatePacket | None = None
    newly_flagged: list[tuple[int, int]] = field(default_factory=list)


@dataclass(slots=True)
class ProfileCounters:
    rounds_without_tree: int = 0
    tree_rebuilds: int = 0
    tree_lifetimes: list[int] = field(default_factory=list)
    sink_averages: list[float] = field(default_factory=list)
    sink_contributors: list[int] = field(default_factory=list)
    keys_refreshed: int = 0
    key_failures: int = 0
    key_messages: int = 0
    key_transmissions: int = 0
    first_tree_key_pairs: int | None = None


class WorldState:
    """
    Everything one profile run owns: positions source, CF state, per-pair beacon
    windows and trust state, the current tree and the key-agreement network.
    """

    def __init__(
        self,
        config: ScenarioConfig,
        trace: MobilityTrace,
        seed: int,
        data_source: DataSource | None = None,
        channel: SimulatedChannel | None = None,
    ):
        if trace.num_nodes != config.num_nodes:
            raise ValueError(
                f"Trace has {trace.num_nodes} nodes but the scenario expects {config.num_nodes}"
            )
        self.config = config
        self.trace = trace
        self.seed = seed
        self.cf = CFState.initial(
            num_nodes=config.num_nodes,
            max_cf_nodes=config.max_cf_nodes,
            cf_prob=config.cf_prob,
            start_round=config.cf_start_round,
            exempt={SINK_ID},
        )
        self.cf_rng = stream_rng(seed, CF_STREAM)
        params = DataGenParams(config.mean_data, config.stdd_data, config.cf_multiplier)
        self.data_source = data_source or RandomDataSource(params, stream_rng(seed, DATA_STREAM))
        self.channel = channel or SimulatedChannel()
        self.keys = (
            KeyAgreementNetwork(config.num_nodes, stream_rng(seed, KEY_STREAM))
            if config.key_establishment
            else None
        )

        self.tree: DGTree | None = None
        self.windows: dict[tuple[int, int], BeaconWindow] = {}
        self.trust: dict[tuple[int, int], NeighborTrustState] = {}
        self.blacklists: dict[int, set[int]] = {}
        # subject -> earliest round any observer flagged it
        self.first_flagged: dict[int, int] = {}
        self.key_pairs: set[tuple[int, int]] = set()
        # (parent, child) links of the most recent tree
        self.last_links: set[tuple[int, int]] = set()
        self.counters = ProfileCounters()

    def window(self, observer: int, subject: int) -> BeaconWindow:
        key = (observer, subject)
        window = self.windows.get(key)
        if window is None:
            window = self.windows[key] = BeaconWindow(self.config.max_bw_size)
        return window

    def trust_state(self, parent: int, child: int) -> NeighborTrustState:
        key = (parent, child)
        state = self.trust.get(key)
        if state is None:
            state = self.trust[key] = NeighborTrustState(
                window=self.window(parent, child),
                buffer=TrustScoreBuffer(self.config.max_tsb_size),
            )
        return state

    def is_blacklisted(self, observer: int, subject: int) -> bool:
        return subject in self.blacklists.get(observer, ())


def _rebuild_tree(world: WorldState, round_index: int, positions: np.ndarray, t: float) -> None:
    config = world.config
    velocities = world.trace.velocities_at(t) if config.tree_type is TreeType.LET else None
    graph = build_graph(positions, config.trans_range, velocities)
    world.tree = build_dg_tree(
        graph,
        config.tree_type.value,
        SINK_ID,
        round_index,
        let_objective=config.let_objective,
    )
    if world.tree is None:
        world.last_links = set()
        return

    counters = world.counters
    counters.tree_rebuilds += 1
    links = set(world.tree.edges())
    rolled = 0
    for pair, state in world.trust.items():
        # dissolved and re-formed associations start a new current segment
        if pair not in links or pair not in world.last_links:
            roll_association(state.buffer)
            rolled += 1
    world.last_links = links

    if world.keys is not None:
        world.channel.round_index = round_index
        excluded = None if config.keys_for_blacklisted else world.blacklists
        report = run_key_establishment_for_tree(world.tree, world.keys, world.channel, excluded)
        for parent, child in world.tree.edges():
            if world.keys.shared_key(parent, child) is not None:
                world.key_pairs.add((min(parent, child), max(parent, child)))
        counters.keys_refreshed += report.refreshed
        counters.key_failures += report.failures
        counters.key_messages += report.messages
        counters.key_transmissions += report.transmissions
        if counters.first_tree_key_pairs is None:
            counters.first_tree_key_pairs = len(world.key_pairs)

    logger.debug(
        "Tree rebuilt",
        round=round_index,
        tree_type=config.tree_type.value,
        height=world.tree.height,
        rolled_buffers=rolled,
    )


def _exchange_beacons(world: WorldState, readings: list[float], positions: np.ndarray) -> None:
    """Every in-range neighbor records the sender's beacon, unless it blacklisted the sender."""
    in_range = distance_matrix(positions) <= world.config.trans_range
    np.fill_diagonal(in_range, False)
    observers, senders = np.nonzero(in_range)
    skip_sink = not world.config.sink_senses
    for observer, sender in zip(observers.tolist(), senders.tolist(), strict=True):
        if skip_sink and sender == SINK_ID:
            continue
        if world.is_blacklisted(observer, sender):
            continue
        record_beacon(world.window(observer, sender), readings[sender])


def _evaluate_trust(
    world: WorldState, tree: DGTree, readings: list[float], round_index: int
) -> list[tuple[int, int]]:
    config = world.config
    flagged = []
    for parent, child in tree.edges():
        if world.is_blacklisted(parent, child):
            continue
        state = world.trust_state(parent, child)
        score = raw_trust_score(state.window, readings[child])
        append_trust_score(state.buffer, score)
        est = est_avg_trust(state.buffer, config.history_weight)
        if est is None:
            continue
        was_flagged = state.assessment.is_cf_locally
        check_cf_status(state.assessment, est, config.trust_threshold, round_index)
        if state.assessment.is_cf_locally and not was_flagged:
            world.blacklists.setdefault(parent, set()).add(child)
            world.first_flagged.setdefault(child, round_index)
            flagged.append((parent, child))
            logger.debug("Node flagged as CF", round=round_index, observer=parent, subject=child, est=est)
    return flagged


def run_round(world: WorldState, round_index: int) -> RoundOutcome:
    """
    Advance the world by one (1-indexed) round.

    Positions, CF activation, tree check and rebuild (with key establishment and
    association roll for
    dissolved and re-formed links), beacons, trust evaluation on parent-child links, then
    aggregation at the sink.
    """
    config = world.config
    outcome = RoundOutcome(round_index=round_index)
    t = min(config.round_time(round_index), world.trace.horizon)
    positions = world.trace.positions_at(t)

    cf_enable(round_index, world.cf, world.cf_rng)

    if world.tree is not None and not tree_alive(world.tree, positions, config.trans_range):
        world.counters.tree_lifetimes.append(round_index - world.tree.build_round)
        world.tree = None
    if world.tree is None:
        _rebuild_tree(world, round_index, positions, t)
        outcome.tree_rebuilt = world.tree is not None

    readings = world.data_source.read(round_index, world.cf.cf_flags)
    _exchange_beacons(world, readings, positions)

    tree = world.tree
    if tree is None:
        world.counters.rounds_without_tree += 1
        return outcome
    outcome.has_tree = True

    if config.trust_enabled:
        outcome.newly_flagged = _evaluate_trust(world, tree, readings, round_index)

    beacons = {node: readings[node] for node in tree.bfs_order}
    if not config.sink_senses:
        beacons.pop(SINK_ID, None)
    packet = aggregate_tree(tree, beacons, world.blacklists if config.trust_enabled else {})
    outcome.packet = packet
    if packet is not None:
        world.counters.sink_averages.append(sink_average(packet))
        world.counters.sink_contributors.append(packet.num_sda_used_nodes)
    return outcome


def finalize_metrics(world: WorldState, last_round: int) -> MetricsRecord:
    """Per-profile metrics from the state left after the last round."""
    counters = world.counters
    lifetimes = list(counters.tree_lifetimes)
    if world.tree is not None:
        lifetimes.append(last_round + 1 - world.tree.build_round)

    deltas = []
    undetected = 0
    false_positives = 0
    cf_nodes = set(world.cf.cf_nodes())
    for node in cf_nodes:
        flagged = world.first_flagged.get(node)
        onset = world.cf.cf_onset_round[node]
        if flagged is None:
            undetected += 1
        else:
            deltas.append(max(flagged, onset) - onset)
    for node, flagged in world.first_flagged.items():
        onset = world.cf.cf_onset_round[node]
        if node not in cf_nodes or flagged < onset:
            false_positives += 1

    return MetricsRecord(
        median_detect_rounds=statistics.median(deltas) if deltas else None,
        avg_sink_value=statistics.fmean(counters.sink_averages) if counters.sink_averages else None,
        false_positive_count=false_positives,
        keys_established=len(world.key_pairs),
        rounds_without_tree=counters.rounds_without_tree,
        cf_node_count=len(cf_nodes),
        detected_cf_count=len(deltas),
        undetected_cf_count=undetected,
        tree_rebuilds=counters.tree_rebuilds,
        avg_tree_lifetime_rounds=statistics.fmean(lifetimes) if lifetimes else None,
        aggregation_rounds=len(counters.sink_averages),
        avg_sink_contributors=(
            statistics.fmean(counters.sink_contributors) if counters.sink_contributors else None
        ),
        keys_refreshed=counters.keys_refreshed,
        key_failures=counters.key_failures,
        key_messages=counters.key_messages,
        key_transmissions=counters.key_transmissions,
        first_tree_key_pairs=counters.first_tree_key_pairs or 0,
    )


def run_profile(
    config: ScenarioConfig,
    trace: MobilityTrace,
    seed: int,
    data_source: DataSource | None = None,
    channel: SimulatedChannel | None = None,
    num_rounds: int | None = None,
) -> MetricsRecord:
    """
    Run one mobility profile for the whole horizon.

    Args:
        config: Scenario cell
        trace: Mobility trace for this profile (sink pinned at node 0)
        seed: Profile seed; CF, data and key streams derive from it
        data_source: Readings override (scripted scenarios)
        channel: Key-protocol channel override (trace dumps, interceptors)
        num_rounds: Round count override; defaults to horizon * rounds_per_second

    Returns:
        MetricsRecord for this profile
    """
    world = WorldState(config, trace, seed, data_source=data_source, channel=channel)
    last_round = num_rounds if num_rounds is not None else config.num_rounds
    for round_index in range(1, last_round + 1):
        run_round(world, round_index)
    metrics = finalize_metrics(world, last_round)
    logger.info(
        "Profile finished",
        seed=seed,
        median_detect_rounds=metrics.median_detect_rounds,
        avg_sink_value=metrics.avg_sink_value,
        rounds_without_tree=metrics.rounds_without_tree,
    )
    return metrics
