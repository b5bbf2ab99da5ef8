"""Application configuration."""

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings."""

    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = True

    # Deployment field
    AREA_WIDTH: float = 100.0
    AREA_HEIGHT: float = 100.0
    NUM_NODES: int = 100
    SINK_X: float = 100.0
    SINK_Y: float = 100.0

    # Simulation clock
    HORIZON_S: float = 1000.0
    ROUNDS_PER_SECOND: int = 4

    # Data generation
    MEAN_DATA: float = 80.0
    STDD_DATA: float = 20.0
    CF_MULTIPLIER: float = 5.0

    # Compromised/faulty node selection
    CF_PROB: float = 0.005
    CF_START_ROUND: int = 10

    # Experiment harness
    SEED_BASE: int = 1
    DEFAULT_PROFILES: int = 10
    SWEEP_WORKERS: int = 1
    OUTPUT_DIR: str = "./results"
    TRACE_DIR: str = "./traces"
    RESULTS_DB_URL: str | None = None

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    @property
    def results_db_url(self) -> str:
        """Get results database URL."""
        if self.RESULTS_DB_URL:
            return self.RESULTS_DB_URL
        return f"sqlite:///{Path(self.OUTPUT_DIR) / 'sweep.db'}"


settings = Settings()
