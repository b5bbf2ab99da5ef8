"""Service for persisting sweep rows in the results database."""

from sqlalchemy import select
from sqlalchemy.orm import Session

from src.core.logging import get_logger
from src.database.models import SweepResult
from src.models.metrics import MetricsRecord, SweepRow
from src.models.scenario import ScenarioConfig

logger = get_logger(__name__)


class ResultsStore:
    """Service for storing and reloading sweep rows."""

    def _find(
        self, session: Session, cell_key: str, seed_base: int, num_profiles: int
    ) -> SweepResult | None:
        stmt = select(SweepResult).where(
            SweepResult.cell_key == cell_key,
            SweepResult.seed_base == seed_base,
            SweepResult.num_profiles == num_profiles,
        )
        return session.execute(stmt).scalar_one_or_none()

    def save_row(self, session: Session, row: SweepRow) -> SweepResult:
        """
        Create or update the record for a sweep row.

        Args:
            session: Database session
            row: Completed sweep row

        Returns:
            SweepResult
        """
        cell_key = row.config.cell_key()
        record = self._find(session, cell_key, row.seed_base, row.num_profiles)
        csv = row.to_csv_dict()
        values = {
            "tree_type": csv["tree_type"],
            "vmax": csv["vmax"],
            "trans_range": csv["trans_range"],
            "bw_size": csv["bw_size"],
            "tsb_size": csv["tsb_size"],
            "trust_threshold": csv["trust_threshold"],
            "history_weight": csv["history_weight"],
            "max_cf_nodes": csv["max_cf_nodes"],
            "median_detect_rounds": csv["median_detect_rounds"],
            "avg_sink_value": csv["avg_sink_value"],
            "false_positives": csv["false_positives"],
            "keys_established": csv["keys_established"],
            "rounds_without_tree": csv["rounds_without_tree"],
            "config": row.config.model_dump(mode="json"),
            "metrics": row.metrics.to_dict(),
        }

        if record:
            for name, value in values.items():
                setattr(record, name, value)
            logger.debug("Updated sweep result", cell_key=cell_key)
        else:
            record = SweepResult(
                cell_key=cell_key,
                seed_base=row.seed_base,
                num_profiles=row.num_profiles,
                **values,
            )
            session.add(record)
            logger.debug("Stored sweep result", cell_key=cell_key)

        session.flush()
        return record

    def get_row(
        self,
        session: Session,
        config: ScenarioConfig,
        seed_base: int,
        num_profiles: int,
    ) -> SweepRow | None:
        """Previously stored row for exactly this cell and seeding, if any."""
        record = self._find(session, config.cell_key(), seed_base, num_profiles)
        if record is None:
            return None
        return self._to_row(record)

    def list_rows(self, session: Session, tree_type: str | None = None) -> list[SweepRow]:
        stmt = select(SweepResult).order_by(SweepResult.id)
        if tree_type:
            stmt = stmt.where(SweepResult.tree_type == tree_type)
        return [self._to_row(r) for r in session.execute(stmt).scalars().all()]

    def _to_row(self, record: SweepResult) -> SweepRow:
        return SweepRow(
            config=ScenarioConfig(**record.config),
            seed_base=record.seed_base,
            num_profiles=record.num_profiles,
            metrics=MetricsRecord(**record.metrics),
        )


results_store = ResultsStore()
