"""Sensed data generation, CF-node activation and per-neighbor beacon windows."""

from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from src.core.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True, slots=True)
class DataGenParams:
    """Sensor data model: normal data in [mean - stdd, mean + stdd], CF data in [0, k * mean]."""

    mean_data: float = 80.0
    stdd_data: float = 20.0
    cf_multiplier: float = 5.0

    def __post_init__(self) -> None:
        if self.mean_data <= 0:
            raise ValueError(f"mean_data must be positive, got {self.mean_data}")
        if self.stdd_data < 0:
            raise ValueError(f"stdd_data must be non-negative, got {self.stdd_data}")


@dataclass(slots=True)
class CFState:
    """Which nodes are compromised or faulty, and since when."""

    cf_flags: list[bool]
    cf_onset_round: list[int | None]
    max_cf_nodes: int
    cf_prob: float
    start_round: int = 10
    exempt: frozenset[int] = frozenset()

    @classmethod
    def initial(
        cls,
        num_nodes: int,
        max_cf_nodes: int,
        cf_prob: float,
        start_round: int = 10,
        exempt: Iterable[int] = (),
    ) -> "CFState":
        return cls(
            cf_flags=[False] * num_nodes,
            cf_onset_round=[None] * num_nodes,
            max_cf_nodes=max_cf_nodes,
            cf_prob=cf_prob,
            start_round=start_round,
            exempt=frozenset(exempt),
        )

    @property
    def count(self) -> int:
        return sum(self.cf_flags)

    @property
    def cap_reached(self) -> bool:
        return self.count >= self.max_cf_nodes

    def cf_nodes(self) -> list[int]:
        return [node for node, flag in enumerate(self.cf_flags) if flag]


@dataclass(slots=True)
class BeaconWindow:
    """Bounded FIFO of a neighbor's most recent raw beacon values."""

    capacity: int
    values: deque[float] = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError(f"Beacon window capacity must be at least 1, got {self.capacity}")
        self.values = deque(self.values, maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.values)

    def as_list(self) -> list[float]:
        return list(self.values)


def generate_datum(cf: bool, params: DataGenParams, rng: np.random.Generator) -> float:
    """
    One sensed value.

    Normal nodes report mean +/- stdd * x with x ~ U[0, 1] and a fair random sign;
    CF nodes report U[0, cf_multiplier * mean].
    """
    if cf:
        return float(rng.uniform(0.0, params.cf_multiplier * params.mean_data))
    x = float(rng.random())
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return params.mean_data + sign * params.stdd_data * x


def generate_round_data(
    cf_flags: list[bool], params: DataGenParams, rng: np.random.Generator
) -> list[float]:
    """Vectorized generate_datum for every node; draws a fixed amount per round."""
    n = len(cf_flags)
    x = rng.random(n)
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    normal = params.mean_data + signs * params.stdd_data * x
    corrupt = rng.uniform(0.0, params.cf_multiplier * params.mean_data, size=n)
    return np.where(np.asarray(cf_flags, dtype=bool), corrupt, normal).tolist()


def cf_enable(round_index: int, state: CFState, rng: np.random.Generator) -> CFState:
    """
    Run the CF activation routine for one round.

    Every not-yet-CF node, in ascending id order, turns CF when a U[0, 1] draw is
    <= cf_prob. Flips beyond max_cf_nodes are discarded, keeping the lowest ids.
    Nothing happens before start_round or once the cap is met.

    Returns:
        The same state object, updated in place
    """
    if round_index < state.start_round or state.cap_reached:
        return state

    candidates = [
        node
        for node, flag in enumerate(state.cf_flags)
        if not flag and node not in state.exempt
    ]
    if not candidates:
        return state
    draws = rng.random(len(candidates))
    room = state.max_cf_nodes - state.count
    flipped = [node for node, draw in zip(candidates, draws, strict=True) if draw <= state.cf_prob]
    for node in flipped[:room]:
        state.cf_flags[node] = True
        state.cf_onset_round[node] = round_index
    if flipped:
        logger.debug("CF nodes enabled", round=round_index, nodes=flipped[:room], total=state.count)
    return state


def record_beacon(window: BeaconWindow, value: float) -> BeaconWindow:
    """Append a beacon value, evicting the oldest one when the window is full."""
    window.values.append(value)
    return window


class DataSource(Protocol):
    """Per-round sensor readings for every node."""

    def read(self, round_index: int, cf_flags: list[bool]) -> list[float]: ...


class RandomDataSource:
    """Readings drawn from the uniform normal/CF data model."""

    def __init__(self, params: DataGenParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng

    def read(self, round_index: int, cf_flags: list[bool]) -> list[float]:  # noqa: ARG002
        return generate_round_data(cf_flags, self.params, self.rng)


class ScriptedDataSource:
    """Readings replayed from a fixed per-round table (golden scenarios)."""

    def __init__(self, rounds: dict[int, list[float]]):
        self.rounds = rounds

    def read(self, round_index: int, cf_flags: list[bool]) -> list[float]:  # noqa: ARG002
        try:
            return list(self.rounds[round_index])
        except KeyError:
            raise ValueError(f"No scripted readings for round {round_index}") from None
