"""
Structured logging setup shared by every subcommand
"""

import logging
import sys

import structlog

from .settings import LoggingSettings


def configure_logging(settings: LoggingSettings) -> None:
    """Route structlog events to stderr as JSON or console lines"""
    level = logging.getLevelName(settings.level.upper())
    if not isinstance(level, int):
        level = logging.INFO

    logging.basicConfig(level=level, stream=sys.stderr, format="%(message)s", force=True)

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if settings.format.lower() == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso", utc=True),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )
