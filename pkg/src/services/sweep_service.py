"""Service for running scenario cells and parameter sweeps."""

from collections.abc import Iterator
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from src.core.config import settings
from src.core.logging import bind_run_context, clear_run_context, get_logger
from src.database.connection import close_db, init_db, session_scope
from src.models.metrics import MetricsRecord, SweepRow
from src.models.scenario import ScenarioConfig
from src.services.results_export import results_exporter
from src.services.results_store import results_store
from src.services.trace_store import TraceStore
from src.simulation.engine import profile_trace, run_profile

logger = get_logger(__name__)


def run_cell(
    config: ScenarioConfig,
    seed_base: int,
    num_profiles: int,
    trace_dir: str | None = None,
) -> SweepRow:
    """
    Run every profile of one cell and average the metrics.

    Args:
        config: Scenario cell
        seed_base: Profile p runs with seed seed_base + p
        num_profiles: Number of mobility profiles
        trace_dir: Directory of stored traces; traces are generated in memory when None

    Returns:
        SweepRow for the cell
    """
    if num_profiles < 1:
        raise ValueError(f"num_profiles must be >= 1, got {num_profiles}")
    store = TraceStore(Path(trace_dir)) if trace_dir else None
    records = []
    try:
        for profile in range(num_profiles):
            seed = seed_base + profile
            bind_run_context(cell=config.cell_key(), profile=profile)
            trace = store.load(config, seed) if store else profile_trace(config, seed)
            records.append(run_profile(config, trace, seed))
    finally:
        clear_run_context()
    return SweepRow(
        config=config,
        seed_base=seed_base,
        num_profiles=num_profiles,
        metrics=MetricsRecord.average(records),
    )


def _run_cell_job(job: tuple[ScenarioConfig, int, int, str | None]) -> SweepRow:
    return run_cell(*job)


class SweepService:
    """Runs grids of cells, writing rows in grid order as they complete."""

    def _compute(
        self,
        jobs: list[tuple[ScenarioConfig, int, int, str | None]],
        workers: int,
    ) -> Iterator[SweepRow]:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                # map yields in submission order whatever the completion order
                yield from pool.map(_run_cell_job, jobs)
        else:
            for job in jobs:
                yield _run_cell_job(job)

    def run_sweep(
        self,
        cells: list[ScenarioConfig],
        num_profiles: int,
        seed_base: int | None = None,
        out_dir: Path | None = None,
        workers: int | None = None,
        resume: bool = False,
        db_url: str | None = None,
        persist: bool = True,
        trace_dir: str | None = None,
    ) -> list[SweepRow]:
        """
        Run a sweep.

        Args:
            cells: Grid cells in grid order
            num_profiles: Profiles per cell
            seed_base: First profile seed (settings.SEED_BASE by default)
            out_dir: Directory for sweep.csv, written row by row; no CSV when None
            workers: Worker processes (settings.SWEEP_WORKERS by default)
            resume: Reuse rows already stored for the same cell and seeding
            db_url: Results database (settings.results_db_url by default)
            persist: Store rows in the results database
            trace_dir: Stored traces to replay instead of generating them

        Returns:
            One row per cell, in grid order
        """
        if not cells:
            raise ValueError("Sweep grid is empty")
        seed_base = settings.SEED_BASE if seed_base is None else seed_base
        workers = workers or settings.SWEEP_WORKERS
        if persist or resume:
            init_db(db_url)

        stored: dict[int, SweepRow] = {}
        if resume:
            with session_scope(db_url) as session:
                for index, cell in enumerate(cells):
                    row = results_store.get_row(session, cell, seed_base, num_profiles)
                    if row is not None:
                        stored[index] = row
            logger.info("Resuming sweep", cells=len(cells), reused=len(stored))

        csv_path = out_dir / "sweep.csv" if out_dir else None
        if csv_path:
            results_exporter.start_csv(csv_path)

        jobs = [
            (cell, seed_base, num_profiles, trace_dir)
            for index, cell in enumerate(cells)
            if index not in stored
        ]
        computed = self._compute(jobs, workers)
        rows = []
        try:
            for index, cell in enumerate(cells):
                reused = index in stored
                row = stored[index] if reused else next(computed)
                rows.append(row)
                if csv_path:
                    results_exporter.append_csv_row(row, csv_path)
                if persist and not reused:
                    self._persist(row, db_url)
                logger.info(
                    "Cell finished",
                    index=index + 1,
                    total=len(cells),
                    cell=cell.label(),
                    reused=reused,
                )
        finally:
            computed.close()
            if persist or resume:
                close_db(db_url)
        return rows

    def _persist(self, row: SweepRow, db_url: str | None) -> None:
        try:
            with session_scope(db_url) as session:
                results_store.save_row(session, row)
        except Exception as e:
            logger.error("Failed to store sweep row", cell=row.config.label(), error=str(e))
            raise


sweep_service = SweepService()
