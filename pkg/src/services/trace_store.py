"""Service for generating and loading offline mobility profiles."""

from pathlib import Path

from src.core.config import settings
from src.core.logging import get_logger
from src.models.scenario import ScenarioConfig
from src.simulation.engine import profile_trace
from src.simulation.mobility import MobilityTrace, read_trace, write_trace

logger = get_logger(__name__)


class TraceStore:
    """Mobility traces stored as `trace_v{vmax}_s{seed}.txt` under one directory."""

    def __init__(self, base_dir: Path | None = None):
        self.base_dir = Path(base_dir or settings.TRACE_DIR)

    def path_for(self, vmax: float, seed: int) -> Path:
        return self.base_dir / f"trace_v{vmax:g}_s{seed}.txt"

    def generate(
        self,
        config: ScenarioConfig,
        vmaxes: list[float],
        num_profiles: int,
        seed_base: int,
    ) -> list[Path]:
        """
        Generate and store one trace per (vmax, profile).

        Args:
            config: Supplies node count, area, sink position and horizon
            vmaxes: Maximum speeds to generate for
            num_profiles: Profiles per speed; profile p uses seed seed_base + p
            seed_base: First profile seed

        Returns:
            Written trace paths
        """
        paths = []
        for vmax in vmaxes:
            cell = config.model_copy(update={"vmax": vmax})
            for profile in range(num_profiles):
                seed = seed_base + profile
                path = self.path_for(vmax, seed)
                write_trace(profile_trace(cell, seed), path)
                paths.append(path)
        logger.info("Traces generated", count=len(paths), directory=str(self.base_dir))
        return paths

    def load(self, config: ScenarioConfig, seed: int) -> MobilityTrace:
        """Stored trace for (config.vmax, seed) when present, else a freshly generated one."""
        path = self.path_for(config.vmax, seed)
        if path.exists():
            trace = read_trace(path, area=config.area)
            if trace.num_nodes == config.num_nodes and trace.horizon >= config.horizon_s:
                return trace
            logger.warning(
                "Stored trace does not match scenario, regenerating",
                path=str(path),
                num_nodes=trace.num_nodes,
                horizon=trace.horizon,
            )
        return profile_trace(config, seed)
