"""Scenario (experiment cell) models and the sweep grid."""

import hashlib
import itertools
import json
from enum import Enum
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.core.config import settings

SINK_ID = 0


class TreeType(str, Enum):
    """Data-gathering tree construction."""

    MST = "MST"
    LET = "LET"


class ScenarioConfig(BaseModel):
    """One experiment cell plus the physical parameters shared by all cells."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Swept parameters
    tree_type: TreeType = TreeType.MST
    vmax: float = Field(default=3.0, ge=0)
    trans_range: float = Field(default=25.0, gt=0)
    max_bw_size: int = Field(default=10, ge=1)
    max_tsb_size: int = Field(default=30, ge=1)
    trust_threshold: float = Field(default=0.7, gt=0, le=1)
    history_weight: float = Field(default=0.7, ge=0, le=1)
    max_cf_nodes: int = Field(default=20, ge=0)

    # Fixed physical parameters
    num_nodes: int = Field(default_factory=lambda: settings.NUM_NODES, ge=1, le=0xFFFE)
    area_width: float = Field(default_factory=lambda: settings.AREA_WIDTH, gt=0)
    area_height: float = Field(default_factory=lambda: settings.AREA_HEIGHT, gt=0)
    sink_x: float = Field(default_factory=lambda: settings.SINK_X, ge=0)
    sink_y: float = Field(default_factory=lambda: settings.SINK_Y, ge=0)
    horizon_s: float = Field(default_factory=lambda: settings.HORIZON_S, gt=0)
    rounds_per_second: int = Field(default_factory=lambda: settings.ROUNDS_PER_SECOND, ge=1)
    mean_data: float = Field(default_factory=lambda: settings.MEAN_DATA, gt=0)
    stdd_data: float = Field(default_factory=lambda: settings.STDD_DATA, ge=0)
    cf_multiplier: float = Field(default_factory=lambda: settings.CF_MULTIPLIER, gt=0)
    cf_prob: float = Field(default_factory=lambda: settings.CF_PROB, ge=0, le=1)
    cf_start_round: int = Field(default_factory=lambda: settings.CF_START_ROUND, ge=1)

    # Switches
    trust_enabled: bool = True
    key_establishment: bool = True
    keys_for_blacklisted: bool = True
    sink_senses: bool = True
    let_objective: Literal["total", "bottleneck"] = "total"

    @model_validator(mode="after")
    def _sink_inside_area(self) -> "ScenarioConfig":
        if self.sink_x > self.area_width or self.sink_y > self.area_height:
            raise ValueError(
                f"Sink ({self.sink_x}, {self.sink_y}) lies outside the "
                f"{self.area_width}x{self.area_height} area"
            )
        return self

    @property
    def area(self) -> tuple[float, float]:
        return (self.area_width, self.area_height)

    @property
    def num_rounds(self) -> int:
        return int(round(self.horizon_s * self.rounds_per_second))

    def round_time(self, round_index: int) -> float:
        """Simulation time of a 1-indexed round."""
        return (round_index - 1) / self.rounds_per_second

    def cell_key(self) -> str:
        """Stable identifier of this configuration (all fields)."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def label(self) -> str:
        return (
            f"{self.tree_type.value} v={self.vmax:g} r={self.trans_range:g} "
            f"bw={self.max_bw_size} tsb={self.max_tsb_size} th={self.trust_threshold:g} "
            f"hw={self.history_weight:g} cf={self.max_cf_nodes}"
        )

    @classmethod
    def from_file(cls, path: Path, **overrides: Any) -> "ScenarioConfig":
        """
        Load a `key = value` scenario file.

        Args:
            path: Scenario file; `#` starts a comment, blank lines are ignored
            overrides: Values that take precedence over the file (e.g. CLI flags)

        Returns:
            Validated ScenarioConfig
        """
        values = parse_config_text(Path(path).read_text(encoding="utf-8"))
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_values(values)

    @classmethod
    def from_values(cls, values: dict[str, Any]) -> "ScenarioConfig":
        unknown = sorted(set(values) - set(cls.model_fields))
        if unknown:
            raise ValueError(f"Unknown scenario key(s): {', '.join(unknown)}")
        try:
            return cls(**values)
        except ValidationError as e:
            raise ValueError(f"Invalid scenario: {e}") from e


def parse_config_text(text: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"Line {lineno}: expected `key = value`, got {raw!r}")
        values[key.strip()] = value.strip()
    return values


class SweepGrid(BaseModel):
    """Cross-product of swept parameter values."""

    tree_types: list[TreeType] = Field(default_factory=lambda: [TreeType.MST, TreeType.LET])
    vmaxes: list[float] = Field(default_factory=lambda: [10.0])
    trans_ranges: list[float] = Field(default_factory=lambda: [25.0])
    bw_sizes: list[int] = Field(default_factory=lambda: [10])
    tsb_sizes: list[int] = Field(default_factory=lambda: [30, 50])
    trust_thresholds: list[float] = Field(default_factory=lambda: [0.5, 0.9])
    history_weights: list[float] = Field(default_factory=lambda: [0.7])
    max_cf_nodes: list[int] = Field(default_factory=lambda: [20])

    @classmethod
    def desk(cls, tree_types: list[TreeType] | None = None) -> "SweepGrid":
        """2 tree types x 2 TSB sizes x 2 thresholds."""
        return cls(tree_types=tree_types or [TreeType.MST, TreeType.LET])

    @classmethod
    def paper(cls, tree_types: list[TreeType] | None = None) -> "SweepGrid":
        """The published grid: 720 cells per tree type."""
        return cls(
            tree_types=tree_types or [TreeType.MST, TreeType.LET],
            vmaxes=[3.0, 10.0],
            trans_ranges=[25.0, 35.0],
            bw_sizes=[10, 50],
            tsb_sizes=[10, 30, 50],
            trust_thresholds=[0.5, 0.7, 0.9],
            history_weights=[0.3, 0.5, 0.7, 0.9, 1.0],
            max_cf_nodes=[20, 40],
        )

    @classmethod
    def extended(cls, tree_types: list[TreeType] | None = None) -> "SweepGrid":
        """Published grid plus thresholds 0.6 / 0.8 and TSB size 70."""
        grid = cls.paper(tree_types)
        grid.tsb_sizes = [10, 30, 50, 70]
        grid.trust_thresholds = [0.5, 0.6, 0.7, 0.8, 0.9]
        return grid

    def __len__(self) -> int:
        return (
            len(self.tree_types)
            * len(self.vmaxes)
            * len(self.trans_ranges)
            * len(self.bw_sizes)
            * len(self.tsb_sizes)
            * len(self.trust_thresholds)
            * len(self.history_weights)
            * len(self.max_cf_nodes)
        )

    def cells(self, base: ScenarioConfig | None = None) -> list[ScenarioConfig]:
        """Every cell in grid order; unswept fields come from `base`."""
        if len(self) == 0:
            raise ValueError("Sweep grid is empty")
        base = base or ScenarioConfig()
        product = itertools.product(
            self.tree_types,
            self.vmaxes,
            self.trans_ranges,
            self.bw_sizes,
            self.tsb_sizes,
            self.trust_thresholds,
            self.history_weights,
            self.max_cf_nodes,
        )
        return [
            ScenarioConfig(
                **{
                    **base.model_dump(),
                    "tree_type": tree_type,
                    "vmax": vmax,
                    "trans_range": trans_range,
                    "max_bw_size": bw,
                    "max_tsb_size": tsb,
                    "trust_threshold": threshold,
                    "history_weight": hw,
                    "max_cf_nodes": cf,
                }
            )
            for tree_type, vmax, trans_range, bw, tsb, threshold, hw, cf in product
        ]
