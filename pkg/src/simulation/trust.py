"""Grubbs'-test raw trust scores, association-segmented trust buffers and CF classification."""

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from src.core.logging import get_logger
from src.simulation.sensing import BeaconWindow

logger = get_logger(__name__)

# Two-sided 95% t-scores indexed by sample count; counts >= 5000 use the last row.
T_SCORE_TABLE: tuple[tuple[int, float], ...] = (
    (1, 12.706),
    (2, 4.303),
    (3, 3.182),
    (4, 2.776),
    (5, 2.571),
    (6, 2.447),
    (7, 2.365),
    (8, 2.306),
    (9, 2.262),
    (10, 2.228),
    (15, 2.131),
    (20, 2.086),
    (25, 2.060),
    (30, 2.042),
    (40, 2.021),
    (60, 2.000),
    (120, 1.980),
    (5000, 1.960),
)
_T_COUNTS = np.array([row[0] for row in T_SCORE_TABLE], dtype=float)
_T_VALUES = np.array([row[1] for row in T_SCORE_TABLE], dtype=float)

MIN_GRUBBS_SAMPLES = 3
SD_EPSILON = 1e-9


class Association(str, Enum):
    """Which parent-child association a raw trust score was collected in."""

    PREVIOUS = "previous"
    CURRENT = "current"


@dataclass(slots=True)
class TrustScoreBuffer:
    """Bounded FIFO of (score, association) pairs kept by a parent for one child."""

    capacity: int
    entries: deque[tuple[int, Association]] = field(default_factory=deque)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError(f"Trust score buffer capacity must be at least 1, got {self.capacity}")
        self.entries = deque(self.entries, maxlen=self.capacity)

    def __len__(self) -> int:
        return len(self.entries)

    def scores(self, association: Association | None = None) -> list[int]:
        return [s for s, tag in self.entries if association is None or tag is association]


@dataclass(slots=True)
class TrustAssessment:
    """Observer's verdict on one neighbor; the CF flag latches."""

    est_avg_trust: float | None = None
    is_cf_locally: bool = False
    detection_round: int | None = None


@dataclass(slots=True)
class NeighborTrustState:
    """Everything an observer keeps about one neighbor."""

    window: BeaconWindow
    buffer: TrustScoreBuffer
    assessment: TrustAssessment = field(default_factory=TrustAssessment)


def t_score(n: int) -> float:
    """
    t-score for a sample count: exact table value, linear interpolation between
    bracketing rows, 1.960 from 5000 samples on.
    """
    if n < 1:
        raise ValueError(f"Sample count must be at least 1, got {n}")
    return float(np.interp(n, _T_COUNTS, _T_VALUES))


def grubbs_threshold(n: int) -> float:
    """G_thresh = ((n - 1) / sqrt(n)) * sqrt(t^2 / (n - 2 + t^2)) with t = t_score(n)."""
    if n < MIN_GRUBBS_SAMPLES:
        raise ValueError(f"Grubbs threshold needs at least {MIN_GRUBBS_SAMPLES} samples, got {n}")
    t_sq = t_score(n) ** 2
    return (n - 1) / math.sqrt(n) * math.sqrt(t_sq / (n - 2 + t_sq))


def raw_trust_score(window: BeaconWindow, inserted: float) -> int:
    """
    Two-sided Grubbs' test on the newest beacon.

    Returns 0 when the inserted value is the window minimum or maximum and its
    distance from the mean exceeds G_thresh standard deviations (sample SD, n - 1
    divisor); 1 otherwise, including windows under three samples or with zero spread.
    """
    values = window.values
    n = len(values)
    if n == 0:
        raise ValueError("Cannot score an empty beacon window")
    if n < MIN_GRUBBS_SAMPLES:
        return 1

    mean = sum(values) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    if sd < SD_EPSILON:
        return 1

    g_thresh = grubbs_threshold(n)
    low, high = min(values), max(values)
    if inserted == low and abs(mean - low) / sd > g_thresh:
        return 0
    if inserted == high and abs(mean - high) / sd > g_thresh:
        return 0
    return 1


def append_trust_score(buffer: TrustScoreBuffer, score: int) -> TrustScoreBuffer:
    """Append a raw score tagged as current association; the oldest entry is evicted when full."""
    if score not in (0, 1):
        raise ValueError(f"Raw trust score must be 0 or 1, got {score}")
    buffer.entries.append((score, Association.CURRENT))
    return buffer


def roll_association(buffer: TrustScoreBuffer) -> TrustScoreBuffer:
    """Retag every current-association score as previous."""
    if any(tag is Association.CURRENT for _, tag in buffer.entries):
        buffer.entries = deque(
            ((score, Association.PREVIOUS) for score, _ in buffer.entries),
            maxlen=buffer.capacity,
        )
    return buffer


def est_avg_trust(buffer: TrustScoreBuffer, history_weight: float) -> float | None:
    """
    Estimated average trust score.

    hw * avg(previous scores) + (1 - hw) * avg(current scores); when one segment is
    empty the other segment's plain average is used. Undefined (None) until the
    buffer holds at least ceil(capacity / 2) scores.
    """
    if not 0.0 <= history_weight <= 1.0:
        raise ValueError(f"history_weight must be in [0, 1], got {history_weight}")
    if len(buffer) < math.ceil(buffer.capacity / 2):
        return None

    previous = buffer.scores(Association.PREVIOUS)
    current = buffer.scores(Association.CURRENT)
    if not previous:
        return sum(current) / len(current)
    if not current:
        return sum(previous) / len(previous)
    return (
        history_weight * (sum(previous) / len(previous))
        + (1.0 - history_weight) * (sum(current) / len(current))
    )


def check_cf_status(
    assessment: TrustAssessment, est: float, threshold: float, round_index: int
) -> TrustAssessment:
    """Flag the neighbor as CF when est < threshold; once flagged it stays flagged."""
    assessment.est_avg_trust = est
    if not assessment.is_cf_locally and est < threshold:
        assessment.is_cf_locally = True
        assessment.detection_round = round_index
    return assessment
