"""SQLAlchemy database models."""

from datetime import UTC, datetime

from sqlalchemy import JSON, DateTime, Float, Integer, String, UniqueConstraint
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


class Base(DeclarativeBase):
    """Base class for all models."""

    pass


class SweepResult(Base):
    """One sweep row: a scenario cell averaged over its profiles."""

    __tablename__ = "sweep_results"
    __table_args__ = (
        UniqueConstraint("cell_key", "seed_base", "num_profiles", name="uq_sweep_cell_run"),
    )

    id: Mapped[int] = mapped_column(Integer, primary_key=True, autoincrement=True)
    cell_key: Mapped[str] = mapped_column(String(32), nullable=False, index=True)
    seed_base: Mapped[int] = mapped_column(Integer, nullable=False)
    num_profiles: Mapped[int] = mapped_column(Integer, nullable=False)

    # Cell
    tree_type: Mapped[str] = mapped_column(String(8), nullable=False, index=True)
    vmax: Mapped[float] = mapped_column(Float, nullable=False)
    trans_range: Mapped[float] = mapped_column(Float, nullable=False)
    bw_size: Mapped[int] = mapped_column(Integer, nullable=False)
    tsb_size: Mapped[int] = mapped_column(Integer, nullable=False)
    trust_threshold: Mapped[float] = mapped_column(Float, nullable=False)
    history_weight: Mapped[float] = mapped_column(Float, nullable=False)
    max_cf_nodes: Mapped[int] = mapped_column(Integer, nullable=False)

    # Headline metrics
    median_detect_rounds: Mapped[float | None] = mapped_column(Float, nullable=True)
    avg_sink_value: Mapped[float | None] = mapped_column(Float, nullable=True)
    false_positives: Mapped[float] = mapped_column(Float, nullable=False, default=0)
    keys_established: Mapped[float] = mapped_column(Float, nullable=False, default=0)
    rounds_without_tree: Mapped[float] = mapped_column(Float, nullable=False, default=0)

    # Full scenario and the complete MetricsRecord (diagnostics included)
    config: Mapped[dict] = mapped_column(JSON, nullable=False)
    metrics: Mapped[dict] = mapped_column(JSON, nullable=False)

    created_at: Mapped[datetime] = mapped_column(
        DateTime(timezone=True), default=lambda: datetime.now(UTC), nullable=False
    )
