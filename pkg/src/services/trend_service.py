"""Service for checking qualitative trends over sweep results."""

import math
from dataclasses import dataclass, field
from typing import Any

import pandas as pd

from src.core.logging import get_logger
from src.models.metrics import MetricsRecord

logger = get_logger(__name__)


@dataclass(slots=True)
class TrendCheck:
    """Outcome of one directional comparison."""

    name: str
    passed: bool
    observed: dict[str, Any] = field(default_factory=dict)
    detail: str = ""


class TrendService:
    """Directional checks on detection latency, sink accuracy and key growth."""

    def metric_mean(self, frame: pd.DataFrame, metric: str, **filters: Any) -> float | None:
        """
        Mean of a metric over the rows matching every filter.

        Args:
            frame: Sweep table (CSV columns)
            metric: Column to average
            filters: column=value equality filters

        Returns:
            Mean over defined values, or None when nothing matches
        """
        selected = frame
        for column, value in filters.items():
            selected = selected[selected[column] == value]
        values = selected[metric].dropna()
        if values.empty:
            return None
        return float(values.mean())

    def _compare(self, name: str, lhs: float | None, rhs: float | None, relation: str) -> TrendCheck:
        observed = {"lhs": lhs, "rhs": rhs}
        if lhs is None or rhs is None or math.isnan(lhs) or math.isnan(rhs):
            return TrendCheck(name, False, observed, "missing values")
        passed = lhs >= rhs if relation == ">=" else lhs <= rhs
        return TrendCheck(name, passed, observed, f"{lhs:.3f} {relation} {rhs:.3f}")

    def tree_stability(self, frame: pd.DataFrame, low_vmax: float = 3.0, high_vmax: float = 10.0) -> list[TrendCheck]:
        """MST detection latency grows at least 2x with speed; LET stays at or below MST."""
        mst_low = self.metric_mean(frame, "median_detect_rounds", tree_type="MST", vmax=low_vmax)
        mst_high = self.metric_mean(frame, "median_detect_rounds", tree_type="MST", vmax=high_vmax)
        let_high = self.metric_mean(frame, "median_detect_rounds", tree_type="LET", vmax=high_vmax)
        return [
            self._compare(
                "MST latency grows with mobility",
                mst_high,
                2 * mst_low if mst_low is not None else None,
                ">=",
            ),
            self._compare("LET latency at or below MST", let_high, mst_high, "<="),
        ]

    def beacon_window_insensitivity(
        self, frame: pd.DataFrame, small: int = 10, large: int = 50, tolerance: float = 0.25
    ) -> TrendCheck:
        a = self.metric_mean(frame, "median_detect_rounds", bw_size=small)
        b = self.metric_mean(frame, "median_detect_rounds", bw_size=large)
        name = "Beacon window size has little effect"
        if a is None or b is None:
            return TrendCheck(name, False, {"small": a, "large": b}, "missing values")
        relative = abs(a - b) / max(a, b) if max(a, b) > 0 else 0.0
        return TrendCheck(
            name,
            relative <= tolerance,
            {"small": a, "large": b, "relative": relative},
            f"relative difference {relative:.1%} (limit {tolerance:.0%})",
        )

    def threshold_effect(self, frame: pd.DataFrame, low: float = 0.5, high: float = 0.9) -> TrendCheck:
        return self._compare(
            "Higher threshold detects sooner",
            self.metric_mean(frame, "median_detect_rounds", trust_threshold=high),
            self.metric_mean(frame, "median_detect_rounds", trust_threshold=low),
            "<=",
        )

    def trust_ablation(
        self, trust_on: MetricsRecord, trust_off: MetricsRecord, margin: float = 10.0
    ) -> TrendCheck:
        """Without trust filtering the sink average must be inflated by at least `margin`."""
        on, off = trust_on.avg_sink_value, trust_off.avg_sink_value
        return self._compare(
            "Trust filtering protects the sink average",
            off,
            on + margin if on is not None else None,
            ">=",
        )

    def key_growth(self, metrics: MetricsRecord) -> TrendCheck:
        grown = metrics.keys_established > metrics.first_tree_key_pairs
        return TrendCheck(
            "Key pairs grow under mobility",
            grown,
            {"first_tree": metrics.first_tree_key_pairs, "final": metrics.keys_established},
            f"{metrics.first_tree_key_pairs:g} -> {metrics.keys_established:g}",
        )

    def summarize(self, frame: pd.DataFrame) -> dict[str, dict[str, float | None]]:
        """Per tree type averages of the headline metrics."""
        summary = {}
        for tree_type in sorted(frame["tree_type"].unique()):
            summary[tree_type] = {
                metric: self.metric_mean(frame, metric, tree_type=tree_type)
                for metric in ("median_detect_rounds", "avg_sink_value", "false_positives", "rounds_without_tree")
            }
        return summary


trend_service = TrendService()
