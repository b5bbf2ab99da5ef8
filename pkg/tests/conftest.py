"""Shared fixtures."""

import networkx as nx
import pytest

from src.core.logging import configure_logging
from src.models.scenario import ScenarioConfig
from src.simulation.mobility import Leg, MobilityTrace, Point
from src.simulation.topology import DGTree, root_tree


def tree_from_parents(parents: dict[int, int], root: int = 0) -> DGTree:
    """DGTree from a child -> parent map."""
    graph = nx.Graph()
    graph.add_node(root)
    graph.add_edges_from(parents.items())
    return root_tree(graph, root)


def static_trace(points: list[tuple[float, float]], horizon: float = 10.0) -> MobilityTrace:
    """Every node parked at its point for the whole horizon."""
    legs = [[Leg(Point(x, y), Point(x, y), 0.0, 0.0)] for x, y in points]
    return MobilityTrace(legs=legs, horizon=horizon, vmax=0.0, seed=0)


@pytest.fixture(autouse=True, scope="session")
def quiet_logging():
    configure_logging("WARNING")


@pytest.fixture
def small_config() -> ScenarioConfig:
    """A 20-node, 30-second scenario that runs in well under a second."""
    return ScenarioConfig(
        num_nodes=20,
        horizon_s=30.0,
        vmax=3.0,
        trans_range=35.0,
        max_bw_size=10,
        max_tsb_size=10,
        trust_threshold=0.7,
        history_weight=0.7,
        max_cf_nodes=4,
    )


@pytest.fixture
def db_url(tmp_path) -> str:
    return f"sqlite:///{tmp_path / 'results.db'}"
