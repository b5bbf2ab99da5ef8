"""CSV emission, plot-data grouping and optional figure rendering."""

from pathlib import Path

import pandas as pd

from src.core.logging import get_logger
from src.models.metrics import CSV_COLUMNS, SweepRow

logger = get_logger(__name__)

PLOT_METRICS = ("median_detect_rounds", "avg_sink_value")
PLOT_GROUP_KEYS = ("vmax", "bw_size")
PLOT_COLUMNS = [
    "tree_type",
    "trans_range",
    "tsb_size",
    "trust_threshold",
    "history_weight",
    "max_cf_nodes",
]


class ResultsExporter:
    """Writes sweep tables and the per-figure plot-data files."""

    def to_frame(self, rows: list[SweepRow]) -> pd.DataFrame:
        return pd.DataFrame([row.to_csv_dict() for row in rows], columns=CSV_COLUMNS)

    def write_csv(self, rows: list[SweepRow], path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame(rows).to_csv(path, index=False)
        logger.info("Results CSV written", path=str(path), rows=len(rows))
        return path

    def start_csv(self, path: Path) -> None:
        """Header-only CSV, ready for append_csv_row."""
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame([]).to_csv(path, index=False)

    def append_csv_row(self, row: SweepRow, path: Path) -> None:
        self.to_frame([row]).to_csv(path, mode="a", header=False, index=False)

    def read_csv(self, path: Path) -> pd.DataFrame:
        frame = pd.read_csv(path)
        missing = [c for c in CSV_COLUMNS if c not in frame.columns]
        if missing:
            raise ValueError(f"{path} is missing column(s): {', '.join(missing)}")
        return frame

    def plot_data(self, frame: pd.DataFrame) -> dict[tuple[str, float, int], pd.DataFrame]:
        """
        One table per (metric, vmax, bw_size).

        Returns:
            Mapping from (metric, vmax, bw_size) to the rows of that figure panel
        """
        groups: dict[tuple[str, float, int], pd.DataFrame] = {}
        if frame.empty:
            return groups
        for (vmax, bw_size), group in frame.groupby(list(PLOT_GROUP_KEYS), sort=True):
            for metric in PLOT_METRICS:
                groups[(metric, float(vmax), int(bw_size))] = group[PLOT_COLUMNS + [metric]].reset_index(
                    drop=True
                )
        return groups

    def write_plot_data(self, frame: pd.DataFrame, out_dir: Path) -> list[Path]:
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for (metric, vmax, bw_size), group in self.plot_data(frame).items():
            path = out_dir / f"{metric}_v{vmax:g}_bw{bw_size}.csv"
            group.to_csv(path, index=False)
            paths.append(path)
        logger.info("Plot data written", directory=str(out_dir), files=len(paths))
        return paths

    def render_plots(self, frame: pd.DataFrame, out_dir: Path) -> list[Path]:
        """
        PNG per plot-data group: metric against history weight, one line per
        (tree type, TSB size), averaged over the remaining parameters.

        Skipped with a warning when matplotlib is not installed.
        """
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            logger.warning("matplotlib not installed, skipping figures")
            return []

        out_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for (metric, vmax, bw_size), group in self.plot_data(frame).items():
            lines = group.groupby(["tree_type", "tsb_size", "history_weight"])[metric].mean()
            fig, ax = plt.subplots(figsize=(6, 4))
            try:
                for (tree_type, tsb_size), series in lines.groupby(level=[0, 1]):
                    ax.plot(
                        series.index.get_level_values("history_weight"),
                        series.values,
                        marker="o",
                        label=f"{tree_type} TSB={tsb_size}",
                    )
                ax.set_xlabel("history weight")
                ax.set_ylabel(metric.replace("_", " "))
                ax.set_title(f"vmax={vmax:g} m/s, BW={bw_size}")
                ax.legend(fontsize="small")
                path = out_dir / f"{metric}_v{vmax:g}_bw{bw_size}.png"
                fig.savefig(path, dpi=120, bbox_inches="tight")
                paths.append(path)
            except Exception as e:
                logger.error("Failed to render figure", metric=metric, error=str(e), exc_info=True)
            finally:
                plt.close(fig)
        return paths

    def emit_results(self, rows: list[SweepRow], out_dir: Path, figures: bool = False) -> list[Path]:
        """sweep.csv plus plot-data files (and PNGs when requested) under out_dir."""
        csv_path = self.write_csv(rows, out_dir / "sweep.csv")
        frame = self.to_frame(rows)
        paths = [csv_path, *self.write_plot_data(frame, out_dir / "plots")]
        if figures:
            paths.extend(self.render_plots(frame, out_dir / "plots"))
        return paths


results_exporter = ResultsExporter()
