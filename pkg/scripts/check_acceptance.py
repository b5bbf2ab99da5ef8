"""Desk-scale acceptance run: worked example, oracles, protocol suite and trends."""

import argparse
import math
import statistics
import sys
import tempfile
import time
from collections.abc import Callable
from pathlib import Path

import networkx as nx
import numpy as np

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.core.logging import configure_logging, get_logger
from src.keyproto.channel import SimulatedChannel
from src.keyproto.establishment import (
    KeyAgreementNetwork,
    establish_exchange,
    refresh_exchange,
)
from src.keyproto.messages import ProtocolMessage
from src.models.scenario import ScenarioConfig, SweepGrid, TreeType
from src.services.results_export import results_exporter
from src.services.sweep_service import run_cell, sweep_service
from src.services.trend_service import TrendCheck, trend_service
from src.simulation.aggregation import aggregate_tree, sink_average
from src.simulation.engine import profile_trace, run_profile
from src.simulation.sensing import BeaconWindow
from src.simulation.topology import DGTree, root_tree
from src.simulation.trust import grubbs_threshold, raw_trust_score

logger = get_logger(__name__)

T_ROWS = [
    (1, 12.706), (2, 4.303), (3, 3.182), (4, 2.776), (5, 2.571), (6, 2.447), (7, 2.365),
    (8, 2.306), (9, 2.262), (10, 2.228), (15, 2.131), (20, 2.086), (25, 2.060), (30, 2.042),
    (40, 2.021), (60, 2.000), (120, 1.980), (5000, 1.960),
]


def tree_from_parents(parents: dict[int, int], root: int = 0) -> DGTree:
    graph = nx.Graph()
    graph.add_node(root)
    graph.add_edges_from(parents.items())
    return root_tree(graph, root)


def check_worked_example() -> bool:
    # sink 0 has no reading of its own; L=1, M=2 (CF), R=3
    parents = {1: 0, 2: 0, 3: 0, 4: 1, 5: 1, 6: 1, 7: 1, 8: 3, 9: 3, 10: 2, 11: 2}
    beacons = {1: 87, 2: 140, 3: 95, 4: 82, 5: 75, 6: 90, 7: 45, 8: 93, 9: 73, 10: 70, 11: 300}
    packet = aggregate_tree(tree_from_parents(parents), beacons, {0: {2}, 1: {7}})
    ok = packet is not None and (packet.value, packet.num_sda_used_nodes) == (595, 7)
    ok = ok and sink_average(packet) == 85.0
    print(f"   {'✓' if ok else '❌'} sink packet {packet} average {sink_average(packet) if packet else None}")
    return ok


def t_oracle(n: int) -> float:
    if n >= 5000:
        return 1.960
    for (n0, t0), (n1, t1) in zip(T_ROWS, T_ROWS[1:]):
        if n0 <= n <= n1:
            return t0 + (n - n0) / (n1 - n0) * (t1 - t0)
    raise ValueError(n)


def check_grubbs(windows: int) -> bool:
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(windows):
        n = int(rng.integers(3, 121))
        values = rng.uniform(60, 100, size=n).tolist()
        if rng.random() < 0.5:
            values[-1] = float(rng.uniform(0, 400))
        window = BeaconWindow(n)
        window.values.extend(values)
        inserted = values[-1]
        mean = sum(values) / n
        sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
        t = t_oracle(n)
        g = (n - 1) / math.sqrt(n) * math.sqrt(t * t / (n - 2 + t * t))
        outlier = (inserted == min(values) and abs(mean - inserted) / sd > g) or (
            inserted == max(values) and abs(mean - inserted) / sd > g
        )
        if raw_trust_score(window, inserted) != (0 if outlier else 1):
            mismatches += 1
    worst = max(abs(grubbs_threshold(n) - _g_reference(n)) / _g_reference(n) for n in range(3, 121))
    ok = mismatches == 0 and worst < 1e-9
    print(f"   {'✓' if ok else '❌'} {windows} windows, {mismatches} mismatches, worst G error {worst:.2e}")
    return ok


def _g_reference(n: int) -> float:
    from decimal import Decimal, getcontext

    getcontext().prec = 50
    t = Decimal(str(round(t_oracle(n), 12)))
    d = Decimal(n)
    return float((d - 1) / d.sqrt() * (t * t / (d - 2 + t * t)).sqrt())


def pair_network(seed: int) -> tuple[KeyAgreementNetwork, SimulatedChannel]:
    return KeyAgreementNetwork(2, np.random.default_rng(seed)), SimulatedChannel(record_trace=True)


def _nth(k: int, replace: Callable[[ProtocolMessage], ProtocolMessage]):
    seen = {"count": 0}

    def interceptor(msg: ProtocolMessage) -> ProtocolMessage:
        seen["count"] += 1
        return replace(msg) if seen["count"] == k + 1 else msg

    return interceptor


def check_protocol(sessions: int) -> bool:
    asymmetric = stale = accepted_tampered = accepted_replays = 0
    rng = np.random.default_rng(11)
    for session in range(sessions):
        net, channel = pair_network(session)
        establish_exchange(net, 0, [1], channel)
        first = net.shared_key(0, 1)
        refresh_exchange(net, 0, 1, channel)
        second = net.shared_key(0, 1)
        if first is None or second is None:
            asymmetric += 1
        elif first == second:
            stale += 1

        # single-byte fuzz on one message of a fresh establishment and refresh
        net, channel = pair_network(session)
        log_len = 4
        k = int(rng.integers(0, log_len + 1))

        def flip(msg: ProtocolMessage) -> ProtocolMessage:
            payload = bytearray(msg.payload)
            payload[int(rng.integers(0, len(payload)))] ^= 1 << int(rng.integers(0, 8))
            return msg.with_payload(bytes(payload))

        channel.interceptor = _nth(k, flip)
        established = establish_exchange(net, 0, [1], channel)
        if established or net.agents[0].cache.has(1) or net.agents[1].cache.has(0):
            accepted_tampered += 1

        net, channel = pair_network(session)
        establish_exchange(net, 0, [1], channel)
        old = net.shared_key(0, 1)
        channel.interceptor = _nth(int(rng.integers(0, 3)), flip)
        if refresh_exchange(net, 0, 1, channel) or net.shared_key(0, 1) != old:
            accepted_tampered += 1

        if session < max(sessions // 100, 10):
            accepted_replays += _replays_accepted(session)

    ok = asymmetric == stale == accepted_tampered == accepted_replays == 0
    print(
        f"   {'✓' if ok else '❌'} {sessions} sessions: asymmetric={asymmetric} stale={stale} "
        f"tampered accepted={accepted_tampered} replays accepted={accepted_replays}"
    )
    return ok


def _replays_accepted(seed: int) -> int:
    """Replay every recorded message of one session into a fresh session of the same pair."""
    accepted = 0
    net, channel = pair_network(seed)
    establish_exchange(net, 0, [1], channel)
    refresh_exchange(net, 0, 1, channel)
    recorded = list(channel.log)
    establish_log, refresh_log = recorded[:5], recorded[5:]

    for k, old in enumerate(establish_log):
        net, channel = pair_network(seed)
        channel.interceptor = _nth(k, lambda msg, old=old: old)
        # fresh rng state so the replayed session is not a byte-for-byte repeat
        for agent in net.agents.values():
            agent.rng = np.random.default_rng(seed + 1_000_000)
        net.base_station.rng = np.random.default_rng(seed + 2_000_000)
        if establish_exchange(net, 0, [1], channel) or net.agents[1].cache.has(0):
            accepted += 1

    for k, old in enumerate(refresh_log):
        net, channel = pair_network(seed)
        establish_exchange(net, 0, [1], channel)
        for agent in net.agents.values():
            agent.rng = np.random.default_rng(seed + 3_000_000)
        before = net.shared_key(0, 1)
        channel.interceptor = _nth(k, lambda msg, old=old: old)
        if refresh_exchange(net, 0, 1, channel) or net.shared_key(0, 1) != before:
            accepted += 1
    return accepted


def check_conservation(trees: int) -> bool:
    rng = np.random.default_rng(5)
    failures = 0
    for _ in range(trees):
        n = int(rng.integers(1, 31))
        parents = {node: int(rng.integers(0, node)) for node in range(1, n)}
        values = {node: float(rng.uniform(60, 100)) for node in range(n)}
        packet = aggregate_tree(tree_from_parents(parents), values, {})
        if packet is None or packet.num_sda_used_nodes != n or not math.isclose(
            packet.value, math.fsum(values.values()), rel_tol=1e-12
        ):
            failures += 1
    print(f"   {'✓' if failures == 0 else '❌'} {trees} random trees, {failures} failures")
    return failures == 0


def report(checks: list[TrendCheck]) -> bool:
    for check in checks:
        print(f"   {'✓' if check.passed else '❌'} {check.name}: {check.detail}")
    return all(c.passed for c in checks)


def check_trends(profiles: int, seed: int, base: ScenarioConfig) -> bool:
    def cell(**updates) -> ScenarioConfig:
        return ScenarioConfig(**{**base.model_dump(), **updates})

    stability_cells = [
        cell(tree_type=TreeType.MST, vmax=3.0),
        cell(tree_type=TreeType.MST, vmax=10.0),
        cell(tree_type=TreeType.LET, vmax=10.0),
        cell(tree_type=TreeType.MST, vmax=10.0, max_bw_size=50),
        cell(tree_type=TreeType.MST, vmax=10.0, max_tsb_size=50, trust_threshold=0.5),
        cell(tree_type=TreeType.MST, vmax=10.0, max_tsb_size=50, trust_threshold=0.9),
    ]
    rows = [run_cell(c, seed, profiles) for c in stability_cells]
    frame = results_exporter.to_frame(rows)
    for tree_type, means in trend_service.summarize(frame).items():
        shown = ", ".join(f"{k}={'n/a' if v is None else f'{v:g}'}" for k, v in means.items())
        print(f"   {tree_type}: {shown}")

    ok = report(trend_service.tree_stability(frame.iloc[:3]))
    ok &= report([trend_service.beacon_window_insensitivity(frame.iloc[[1, 3]])])
    ok &= report([trend_service.threshold_effect(frame.iloc[4:6])])

    trust_on = run_cell(cell(vmax=10.0, max_cf_nodes=40), seed, profiles).metrics
    trust_off = run_cell(cell(vmax=10.0, max_cf_nodes=40, trust_enabled=False), seed, profiles).metrics
    ok &= report([trend_service.trust_ablation(trust_on, trust_off)])

    mobile = cell(vmax=10.0)
    growth = run_profile(mobile, profile_trace(mobile, seed), seed)
    ok &= report([trend_service.key_growth(growth)])
    return ok


def check_determinism(profiles: int, seed: int, base: ScenarioConfig) -> bool:
    cells = SweepGrid.desk().cells(base)
    with tempfile.TemporaryDirectory() as tmp:
        outputs = []
        for attempt in ("a", "b"):
            out_dir = Path(tmp) / attempt
            sweep_service.run_sweep(cells, profiles, seed_base=seed, out_dir=out_dir, persist=False)
            outputs.append((out_dir / "sweep.csv").read_bytes())
    ok = outputs[0] == outputs[1]
    print(f"   {'✓' if ok else '❌'} {len(cells)}-cell sweep run twice, identical CSV bytes: {ok}")
    return ok


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--profiles", type=int, default=10)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--sessions", type=int, default=100_000)
    parser.add_argument("--horizon", type=float, default=None, help="Shorter horizon for quick runs")
    parser.add_argument("--skip-trends", action="store_true")
    args = parser.parse_args()
    configure_logging("WARNING")

    base = ScenarioConfig(
        trans_range=25.0, max_tsb_size=30, trust_threshold=0.7, history_weight=0.7, max_cf_nodes=20
    )
    if args.horizon:
        base = ScenarioConfig(**{**base.model_dump(), "horizon_s": args.horizon})

    steps: list[tuple[str, Callable[[], bool]]] = [
        ("Worked aggregation example", check_worked_example),
        ("Grubbs oracle equivalence", lambda: check_grubbs(10_000)),
        ("Protocol suite", lambda: check_protocol(args.sessions)),
        ("Aggregation conservation", lambda: check_conservation(1_000)),
    ]
    if not args.skip_trends:
        steps.append(("Trends", lambda: check_trends(args.profiles, args.seed, base)))
        steps.append(("Determinism", lambda: check_determinism(args.profiles, args.seed, base)))

    print("=" * 60)
    print("Acceptance Check")
    print("=" * 60)
    results = []
    for index, (name, step) in enumerate(steps, start=1):
        print(f"\n{index}. {name}...")
        started = time.perf_counter()
        results.append(step())
        print(f"   ({time.perf_counter() - started:.1f}s)")

    print()
    passed = sum(results)
    print(f"{'✓' if passed == len(results) else '❌'} {passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
