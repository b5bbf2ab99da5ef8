"""Structured logging configuration."""

import logging
import sys

import structlog

from src.core.config import settings


def configure_logging(level: str | None = None) -> None:
    """
    Configure structured logging.

    Logs go to stderr; stdout is reserved for command output (JSON/CSV).

    Args:
        level: Override for settings.LOG_LEVEL (e.g. "DEBUG")
    """
    level_name = (level or ("DEBUG" if settings.DEBUG else settings.LOG_LEVEL)).upper()
    log_level = logging.getLevelNamesMapping().get(level_name, logging.INFO)
    renderer = (
        structlog.processors.JSONRenderer()
        if settings.LOG_JSON and not settings.DEBUG
        else structlog.dev.ConsoleRenderer()
    )

    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.StackInfoRenderer(),
            structlog.dev.set_exc_info,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(log_level),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )

    logging.basicConfig(format="%(message)s", stream=sys.stderr, level=log_level)


def bind_run_context(**values: object) -> None:
    """Bind key-value pairs (cell, profile, ...) to every log line of this context."""
    structlog.contextvars.bind_contextvars(**values)


def clear_run_context() -> None:
    """Drop all bound run context."""
    structlog.contextvars.clear_contextvars()


def get_logger(name: str) -> structlog.BoundLogger:
    """Get a logger instance."""
    return structlog.get_logger(name)
