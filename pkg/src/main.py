"""Command-line entry point."""

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from sqlalchemy.exc import SQLAlchemyError

from src.core.config import settings
from src.core.logging import bind_run_context, clear_run_context, configure_logging, get_logger
from src.keyproto.channel import SimulatedChannel
from src.models.metrics import MetricsRecord, SweepRow
from src.models.scenario import ScenarioConfig, SweepGrid, TreeType
from src.services.results_export import results_exporter
from src.services.sweep_service import sweep_service
from src.services.trace_store import TraceStore
from src.simulation.engine import profile_trace, run_profile
from src.simulation.mobility import read_trace

logger = get_logger(__name__)

# CLI flag -> ScenarioConfig field
SCENARIO_FLAGS = {
    "tree_type": "tree_type",
    "vmax": "vmax",
    "trans_range": "trans_range",
    "bw_size": "max_bw_size",
    "tsb_size": "max_tsb_size",
    "trust_threshold": "trust_threshold",
    "history_weight": "history_weight",
    "max_cf_nodes": "max_cf_nodes",
}


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {value!r}")
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdasim",
        description="Secure data aggregation simulator for mobile sensor networks",
    )
    parser.add_argument("--log-level", default=None, help="Override LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-traces", help="Generate offline mobility profiles")
    gen.add_argument("--config", type=Path, help="Scenario file for node count, area and horizon")
    gen.add_argument("--vmax", type=float, nargs="+", default=[3.0, 10.0])
    gen.add_argument("--profiles", type=int, default=settings.DEFAULT_PROFILES)
    gen.add_argument("--seed", type=int, default=settings.SEED_BASE)
    gen.add_argument("--out", type=Path, default=Path(settings.TRACE_DIR))

    run = commands.add_parser("run", help="Run one scenario cell")
    run.add_argument("--config", type=Path, help="`key = value` scenario file")
    run.add_argument("--tree-type", choices=["MST", "LET"])
    run.add_argument("--vmax", type=float)
    run.add_argument("--trans-range", type=float)
    run.add_argument("--bw-size", type=int)
    run.add_argument("--tsb-size", type=int)
    run.add_argument("--trust-threshold", type=float)
    run.add_argument("--history-weight", type=float)
    run.add_argument("--max-cf-nodes", type=int)
    run.add_argument("--trust", type=_on_off, default=None, metavar="on|off")
    run.add_argument("--seed", type=int, default=settings.SEED_BASE)
    run.add_argument("--profiles", type=int, default=settings.DEFAULT_PROFILES)
    run.add_argument("--trace-file", type=Path, help="Replay a stored trace (single profile)")
    run.add_argument("--trace-dir", type=Path, help="Stored traces to replay when present")
    run.add_argument("--trace-dump", type=Path, help="Write the first profile's protocol messages")
    run.add_argument("--out", type=Path, default=Path(settings.OUTPUT_DIR))

    sweep = commands.add_parser("sweep", help="Run a parameter sweep")
    grid = sweep.add_mutually_exclusive_group()
    grid.add_argument("--paper-grid", action="store_true", help="Full published grid")
    grid.add_argument("--extended-grid", action="store_true", help="Published grid plus extra values")
    sweep.add_argument(
        "--tree-type",
        dest="tree_types",
        nargs="+",
        choices=["MST", "LET"],
        help="Restrict the grid to these tree types (both by default)",
    )
    sweep.add_argument("--config", type=Path, help="Base scenario for unswept fields")
    sweep.add_argument("--profiles", type=int, default=settings.DEFAULT_PROFILES)
    sweep.add_argument("--seed", type=int, default=settings.SEED_BASE)
    sweep.add_argument("--out", type=Path, default=Path(settings.OUTPUT_DIR))
    sweep.add_argument("--workers", type=int, default=settings.SWEEP_WORKERS)
    sweep.add_argument("--resume", action="store_true", help="Reuse rows stored by an earlier run")
    sweep.add_argument("--trust", type=_on_off, default=None, metavar="on|off")
    sweep.add_argument("--trace-dir", type=Path, help="Stored traces to replay when present")
    sweep.add_argument("--db-url", default=None, help="Override RESULTS_DB_URL")
    sweep.add_argument("--no-db", action="store_true", help="Do not persist rows")

    plots = commands.add_parser("emit-plots", help="Plot-data files (and PNGs) from a sweep CSV")
    plots.add_argument("--csv", type=Path, default=Path(settings.OUTPUT_DIR) / "sweep.csv")
    plots.add_argument("--out", type=Path, default=Path(settings.OUTPUT_DIR) / "plots")
    return parser


def load_scenario(args: argparse.Namespace) -> ScenarioConfig:
    """Scenario file (if any) overlaid with the flags given on the command line."""
    overrides: dict[str, Any] = {
        field: getattr(args, flag)
        for flag, field in SCENARIO_FLAGS.items()
        if getattr(args, flag, None) is not None
    }
    if getattr(args, "trust", None) is not None:
        overrides["trust_enabled"] = args.trust
    if args.config:
        return ScenarioConfig.from_file(args.config, **overrides)
    return ScenarioConfig.from_values(overrides)


def cmd_gen_traces(args: argparse.Namespace) -> int:
    config = ScenarioConfig.from_file(args.config) if args.config else ScenarioConfig()
    paths = TraceStore(args.out).generate(config, args.vmax, args.profiles, args.seed)
    print(json.dumps({"traces": [str(p) for p in paths]}, indent=2))
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = load_scenario(args)
    store = TraceStore(args.trace_dir) if args.trace_dir else None
    num_profiles = 1 if args.trace_file else args.profiles
    if num_profiles < 1:
        raise ValueError(f"--profiles must be >= 1, got {num_profiles}")

    records = []
    for profile in range(num_profiles):
        seed = args.seed + profile
        bind_run_context(cell=config.cell_key(), profile=profile)
        if args.trace_file:
            trace = read_trace(args.trace_file, area=config.area)
        elif store:
            trace = store.load(config, seed)
        else:
            trace = profile_trace(config, seed)
        channel = SimulatedChannel(record_trace=True) if args.trace_dump and profile == 0 else None
        records.append(run_profile(config, trace, seed, channel=channel))
        if channel is not None:
            channel.write_trace(args.trace_dump)
    clear_run_context()

    row = SweepRow(
        config=config,
        seed_base=args.seed,
        num_profiles=num_profiles,
        metrics=MetricsRecord.average(records),
    )
    results_exporter.write_csv([row], args.out / "run.csv")
    print(json.dumps(row.to_dict(), indent=2))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    tree_types = [TreeType(t) for t in args.tree_types] if args.tree_types else None
    if args.paper_grid:
        grid = SweepGrid.paper(tree_types)
    elif args.extended_grid:
        grid = SweepGrid.extended(tree_types)
    else:
        grid = SweepGrid.desk(tree_types)
    base = load_scenario(args)
    cells = grid.cells(base)
    logger.info("Starting sweep", cells=len(cells), profiles=args.profiles, workers=args.workers)

    rows = sweep_service.run_sweep(
        cells,
        num_profiles=args.profiles,
        seed_base=args.seed,
        out_dir=args.out,
        workers=args.workers,
        resume=args.resume,
        db_url=args.db_url,
        persist=not args.no_db,
        trace_dir=str(args.trace_dir) if args.trace_dir else None,
    )
    print(json.dumps({"rows": len(rows), "csv": str(args.out / "sweep.csv")}))
    return 0


def cmd_emit_plots(args: argparse.Namespace) -> int:
    frame = results_exporter.read_csv(args.csv)
    paths = results_exporter.write_plot_data(frame, args.out)
    paths.extend(results_exporter.render_plots(frame, args.out))
    print(json.dumps({"files": [str(p) for p in paths]}, indent=2))
    return 0


COMMANDS = {
    "gen-traces": cmd_gen_traces,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "emit-plots": cmd_emit_plots,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError) as e:
        logger.error("Command failed", command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SQLAlchemyError as e:
        logger.error("Results database error", command=args.command, error=str(e))
        print(f"error: results database: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
