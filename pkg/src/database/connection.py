"""Database connection setup."""

from collections.abc import Iterator
from contextlib import contextmanager
from functools import lru_cache
from pathlib import Path

from sqlalchemy import Engine, create_engine
from sqlalchemy.orm import Session, sessionmaker

from src.core.config import settings
from src.core.logging import get_logger

logger = get_logger(__name__)


@lru_cache(maxsize=8)
def get_engine(url: str | None = None) -> Engine:
    """
    Engine for a database URL (settings.results_db_url by default).

    SQLite parent directories are created on first use.
    """
    url = url or settings.results_db_url
    if url.startswith("sqlite:///") and url != "sqlite:///:memory:":
        Path(url.removeprefix("sqlite:///")).parent.mkdir(parents=True, exist_ok=True)
    return create_engine(url, echo=settings.DEBUG, future=True)


@lru_cache(maxsize=8)
def get_session_factory(url: str | None = None) -> sessionmaker[Session]:
    return sessionmaker(
        get_engine(url),
        expire_on_commit=False,
        autoflush=False,
    )


@contextmanager
def session_scope(url: str | None = None) -> Iterator[Session]:
    """
    Transactional session: commits on success, rolls back on error.

    Yields:
        Database session
    """
    session = get_session_factory(url)()
    try:
        yield session
        session.commit()
    except Exception:
        session.rollback()
        raise
    finally:
        session.close()


def init_db(url: str | None = None) -> None:
    """Initialize database (create tables)."""
    from src.database.models import Base

    try:
        Base.metadata.create_all(get_engine(url))
        logger.info("Database initialized", url=url or settings.results_db_url)
    except Exception as e:
        logger.error("Failed to initialize database", error=str(e))
        raise


def close_db(url: str | None = None) -> None:
    """Close database connections."""
    get_engine(url).dispose()
    logger.info("Database connections closed")
