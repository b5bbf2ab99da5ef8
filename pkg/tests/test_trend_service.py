"""Tests for the trend checks."""

import pandas as pd

from src.models.metrics import MetricsRecord
from src.services.trend_service import trend_service


def frame(rows: list[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows)


def test_metric_mean_ignores_missing_values():
    table = frame([
        {"tree_type": "MST", "median_detect_rounds": 4.0},
        {"tree_type": "MST", "median_detect_rounds": None},
        {"tree_type": "LET", "median_detect_rounds": 2.0},
    ])

    assert trend_service.metric_mean(table, "median_detect_rounds", tree_type="MST") == 4.0
    assert trend_service.metric_mean(table, "median_detect_rounds", tree_type="BFS") is None


def test_tree_stability():
    table = frame([
        {"tree_type": "MST", "vmax": 3.0, "median_detect_rounds": 10.0},
        {"tree_type": "MST", "vmax": 10.0, "median_detect_rounds": 25.0},
        {"tree_type": "LET", "vmax": 10.0, "median_detect_rounds": 18.0},
    ])

    growth, let_vs_mst = trend_service.tree_stability(table)

    assert growth.passed
    assert let_vs_mst.passed


def test_tree_stability_fails_without_growth():
    table = frame([
        {"tree_type": "MST", "vmax": 3.0, "median_detect_rounds": 10.0},
        {"tree_type": "MST", "vmax": 10.0, "median_detect_rounds": 12.0},
        {"tree_type": "LET", "vmax": 10.0, "median_detect_rounds": 30.0},
    ])

    assert not any(check.passed for check in trend_service.tree_stability(table))


def test_beacon_window_insensitivity():
    close = frame([{"bw_size": 10, "median_detect_rounds": 20.0}, {"bw_size": 50, "median_detect_rounds": 22.0}])
    far = frame([{"bw_size": 10, "median_detect_rounds": 20.0}, {"bw_size": 50, "median_detect_rounds": 40.0}])

    assert trend_service.beacon_window_insensitivity(close).passed
    assert not trend_service.beacon_window_insensitivity(far).passed


def test_threshold_effect():
    table = frame([
        {"trust_threshold": 0.5, "median_detect_rounds": 30.0},
        {"trust_threshold": 0.9, "median_detect_rounds": 12.0},
    ])
    assert trend_service.threshold_effect(table).passed


def test_trust_ablation_needs_a_margin():
    on = MetricsRecord(avg_sink_value=82.0)

    assert trend_service.trust_ablation(on, MetricsRecord(avg_sink_value=120.0)).passed
    assert not trend_service.trust_ablation(on, MetricsRecord(avg_sink_value=85.0)).passed
    assert not trend_service.trust_ablation(MetricsRecord(), MetricsRecord(avg_sink_value=85.0)).passed


def test_key_growth():
    assert trend_service.key_growth(MetricsRecord(first_tree_key_pairs=99, keys_established=240)).passed
    assert not trend_service.key_growth(MetricsRecord(first_tree_key_pairs=99, keys_established=99)).passed


def test_summarize():
    table = frame([
        {"tree_type": "MST", "median_detect_rounds": 4.0, "avg_sink_value": 80.0, "false_positives": 0.0, "rounds_without_tree": 1.0},
        {"tree_type": "LET", "median_detect_rounds": 2.0, "avg_sink_value": 82.0, "false_positives": 1.0, "rounds_without_tree": 3.0},
    ])

    summary = trend_service.summarize(table)

    assert list(summary) == ["LET", "MST"]
    assert summary["MST"]["avg_sink_value"] == 80.0
