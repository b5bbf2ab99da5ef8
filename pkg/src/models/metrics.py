"""Run metrics and sweep result rows."""

from statistics import fmean
from typing import Any

from pydantic import BaseModel

from src.models.scenario import ScenarioConfig

CSV_COLUMNS = [
    "tree_type",
    "vmax",
    "trans_range",
    "bw_size",
    "tsb_size",
    "trust_threshold",
    "history_weight",
    "max_cf_nodes",
    "seed_base",
    "num_profiles",
    "median_detect_rounds",
    "avg_sink_value",
    "false_positives",
    "keys_established",
    "rounds_without_tree",
]


class MetricsRecord(BaseModel):
    """Outcome of one profile, or the average over several."""

    median_detect_rounds: float | None = None
    avg_sink_value: float | None = None
    false_positive_count: float = 0
    keys_established: float = 0
    rounds_without_tree: float = 0

    # Diagnostics
    cf_node_count: float = 0
    detected_cf_count: float = 0
    undetected_cf_count: float = 0
    tree_rebuilds: float = 0
    avg_tree_lifetime_rounds: float | None = None
    aggregation_rounds: float = 0
    avg_sink_contributors: float | None = None
    keys_refreshed: float = 0
    key_failures: float = 0
    key_messages: float = 0
    key_transmissions: float = 0
    first_tree_key_pairs: float = 0

    @classmethod
    def average(cls, records: list["MetricsRecord"]) -> "MetricsRecord":
        """
        Field-wise mean over profiles.

        Optional fields average only the profiles where they are defined and stay
        None when no profile defines them.
        """
        if not records:
            raise ValueError("Cannot average an empty list of metrics records")
        averaged: dict[str, Any] = {}
        for name in cls.model_fields:
            values = [getattr(r, name) for r in records if getattr(r, name) is not None]
            averaged[name] = fmean(values) if values else None
        return cls(**{k: v for k, v in averaged.items() if v is not None})

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump()


class SweepRow(BaseModel):
    """One CSV row: a cell, the seeds it ran with, and its averaged metrics."""

    config: ScenarioConfig
    seed_base: int
    num_profiles: int
    metrics: MetricsRecord

    def to_csv_dict(self) -> dict[str, Any]:
        c, m = self.config, self.metrics
        return {
            "tree_type": c.tree_type.value,
            "vmax": c.vmax,
            "trans_range": c.trans_range,
            "bw_size": c.max_bw_size,
            "tsb_size": c.max_tsb_size,
            "trust_threshold": c.trust_threshold,
            "history_weight": c.history_weight,
            "max_cf_nodes": c.max_cf_nodes,
            "seed_base": self.seed_base,
            "num_profiles": self.num_profiles,
            "median_detect_rounds": m.median_detect_rounds,
            "avg_sink_value": m.avg_sink_value,
            "false_positives": m.false_positive_count,
            "keys_established": m.keys_established,
            "rounds_without_tree": m.rounds_without_tree,
        }

    def to_dict(self) -> dict[str, Any]:
        """JSON-friendly form (config, seeds and full metrics)."""
        return {
            "config": self.config.model_dump(mode="json"),
            "seed_base": self.seed_base,
            "num_profiles": self.num_profiles,
            "metrics": self.metrics.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SweepRow":
        return cls(
            config=ScenarioConfig(**data["config"]),
            seed_base=data["seed_base"],
            num_profiles=data["num_profiles"],
            metrics=MetricsRecord(**data["metrics"]),
        )
