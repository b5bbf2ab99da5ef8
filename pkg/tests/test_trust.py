"""Tests for Grubbs'-test trust scoring and CF classification."""

import math

import numpy as np
import pytest

from src.simulation.sensing import BeaconWindow
from src.simulation.trust import (
    T_SCORE_TABLE,
    Association,
    TrustAssessment,
    TrustScoreBuffer,
    append_trust_score,
    check_cf_status,
    est_avg_trust,
    grubbs_threshold,
    raw_trust_score,
    roll_association,
    t_score,
)


def window_of(values: list[float]) -> BeaconWindow:
    return BeaconWindow(len(values), values=list(values))


def buffer_of(previous: list[int], current: list[int], capacity: int = 10) -> TrustScoreBuffer:
    buffer = TrustScoreBuffer(capacity)
    for score in previous:
        append_trust_score(buffer, score)
    roll_association(buffer)
    for score in current:
        append_trust_score(buffer, score)
    return buffer


class TestTScore:
    def test_table_is_monotone(self):
        counts = [n for n, _ in T_SCORE_TABLE]
        scores = [t for _, t in T_SCORE_TABLE]
        assert counts == sorted(set(counts))
        assert all(a > b for a, b in zip(scores, scores[1:]))

    def test_listed_rows_are_exact(self):
        for n, t in T_SCORE_TABLE:
            assert t_score(n) == t

    def test_interpolates_between_rows(self):
        assert t_score(12) == pytest.approx(2.1892, abs=1e-12)

    def test_large_counts_use_last_row(self):
        assert t_score(7000) == 1.960

    def test_rejects_zero(self):
        with pytest.raises(ValueError, match="at least 1"):
            t_score(0)


class TestGrubbsThreshold:
    def test_known_values(self):
        assert grubbs_threshold(10) == pytest.approx(1.7612, abs=5e-4)
        assert grubbs_threshold(3) == pytest.approx(1.1016, abs=5e-4)

    def test_grows_with_window_size(self):
        assert grubbs_threshold(120) > grubbs_threshold(30) > grubbs_threshold(10)

    def test_matches_formula(self):
        for n in range(3, 121):
            t = t_score(n)
            expected = (n - 1) / math.sqrt(n) * math.sqrt(t * t / (n - 2 + t * t))
            assert grubbs_threshold(n) == pytest.approx(expected, rel=1e-12)

    def test_needs_three_samples(self):
        with pytest.raises(ValueError, match="at least 3"):
            grubbs_threshold(2)


class TestRawTrustScore:
    def test_spike_is_an_outlier(self):
        window = window_of([80.0] * 9 + [300.0])
        assert raw_trust_score(window, 300.0) == 0

    def test_interior_value_is_trusted(self):
        window = window_of([78, 82, 80, 79, 81, 80, 80, 80, 80, 80])
        assert raw_trust_score(window, 80) == 1

    def test_constant_window_is_trusted(self):
        assert raw_trust_score(window_of([80.0] * 10), 80.0) == 1

    def test_short_window_is_trusted(self):
        assert raw_trust_score(window_of([80.0, 400.0]), 400.0) == 1

    def test_empty_window_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            raw_trust_score(BeaconWindow(5), 80.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(13)
        for _ in range(2000):
            n = int(rng.integers(3, 60))
            values = rng.uniform(60, 100, size=n).tolist()
            if rng.random() < 0.5:
                values[-1] = float(rng.uniform(0, 400))
            inserted = values[-1]

            mean = sum(values) / n
            sd = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
            g = grubbs_threshold(n)
            outlier = (inserted == min(values) or inserted == max(values)) and abs(
                mean - inserted
            ) / sd > g

            assert raw_trust_score(window_of(values), inserted) == (0 if outlier else 1)


class TestTrustBuffer:
    def test_append_tags_current(self):
        buffer = append_trust_score(TrustScoreBuffer(10), 1)
        assert list(buffer.entries) == [(1, Association.CURRENT)]

    def test_append_evicts_oldest(self):
        buffer = buffer_of([], [0, 1, 1], capacity=3)
        assert append_trust_score(buffer, 0).scores() == [1, 1, 0]

    def test_append_keeps_last_scores(self):
        rng = np.random.default_rng(6)
        scores = rng.integers(0, 2, size=500).tolist()
        buffer = TrustScoreBuffer(30)
        for score in scores:
            append_trust_score(buffer, score)
        assert buffer.scores() == scores[-30:]

    def test_append_rejects_non_binary(self):
        with pytest.raises(ValueError, match="0 or 1"):
            append_trust_score(TrustScoreBuffer(3), 2)

    def test_roll_retags_everything(self):
        buffer = buffer_of([1], [0])
        roll_association(buffer)
        assert list(buffer.entries) == [(1, Association.PREVIOUS), (0, Association.PREVIOUS)]
        assert len(roll_association(TrustScoreBuffer(4))) == 0


class TestEstAvgTrust:
    def test_weighted_segments(self):
        buffer = buffer_of([1, 1, 1, 1], [1, 0])
        assert est_avg_trust(buffer, 0.3) == pytest.approx(0.65)

    def test_full_history_weight_uses_previous_only(self):
        buffer = buffer_of([1, 0, 1, 1], [0, 0])
        assert est_avg_trust(buffer, 1.0) == 0.75

    def test_zero_history_weight_uses_current_only(self):
        buffer = buffer_of([1, 1, 1], [0, 1, 0, 0])
        assert est_avg_trust(buffer, 0.0) == 0.25

    def test_single_segment_falls_back_to_plain_average(self):
        assert est_avg_trust(buffer_of([], [1, 1, 0, 1, 1]), 0.7) == 0.8
        assert est_avg_trust(buffer_of([1, 0, 1, 0, 1, 1], []), 0.7) == pytest.approx(4 / 6)

    def test_undefined_below_half_full(self):
        assert est_avg_trust(buffer_of([1], [1, 1]), 0.5) is None
        assert est_avg_trust(buffer_of([], [1, 1, 1], capacity=5), 0.5) == 1.0

    def test_bounded(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            prev = rng.integers(0, 2, size=int(rng.integers(0, 6))).tolist()
            cur = rng.integers(0, 2, size=int(rng.integers(1, 15))).tolist()
            est = est_avg_trust(buffer_of(prev, cur, capacity=20), float(rng.random()))
            if len(prev) + len(cur) < 10:
                assert est is None
            else:
                assert 0.0 <= est <= 1.0

    def test_history_weight_validated(self):
        with pytest.raises(ValueError, match="history_weight"):
            est_avg_trust(TrustScoreBuffer(2), 1.5)


class TestCFStatus:
    def test_below_threshold_flags(self):
        assessment = check_cf_status(TrustAssessment(), 0.4, 0.5, round_index=17)
        assert assessment.is_cf_locally
        assert assessment.detection_round == 17

    def test_threshold_boundary_is_not_flagged(self):
        assert not check_cf_status(TrustAssessment(), 0.5, 0.5, round_index=1).is_cf_locally

    def test_flag_latches(self):
        assessment = check_cf_status(TrustAssessment(), 0.1, 0.5, round_index=3)
        for r, est in enumerate([1.0, 0.9, 0.2, 1.0], start=4):
            check_cf_status(assessment, est, 0.5, round_index=r)
        assert assessment.is_cf_locally
        assert assessment.detection_round == 3
        assert assessment.est_avg_trust == 1.0
