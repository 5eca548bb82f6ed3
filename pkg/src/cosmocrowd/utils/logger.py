"""structlog setup shared by the ingest daemon and the CLI.

Everything is written to stderr: CLI subcommands stream protocol lines, CSV and
GeoJSON on stdout, and the daemon's access log goes through the same handler.
"""

import logging
import sys
from typing import TextIO

import structlog

# Processors applied before rendering, in both output formats
SHARED_PROCESSORS: list = [
    structlog.contextvars.merge_contextvars,
    structlog.processors.add_log_level,
    structlog.processors.TimeStamper(fmt="iso"),
    structlog.stdlib.ExtraAdder(),
    structlog.processors.format_exc_info,
]


def _renderer(json_format: bool, stream: TextIO) -> structlog.typing.Processor:
    if json_format:
        return structlog.processors.JSONRenderer()
    return structlog.dev.ConsoleRenderer(colors=stream.isatty())


def configure_logging(
    log_level: str = "INFO",
    json_format: bool = False,
    stream: TextIO | None = None,
) -> None:
    """Route structlog and stdlib logging (uvicorn) to one stream.

    Args:
        log_level: Minimum level name; unknown names fall back to INFO.
        json_format: One JSON object per event instead of console output.
        stream: Target stream, stderr by default.
    """
    out = stream or sys.stderr
    level = logging.getLevelNamesMapping().get(log_level.upper(), logging.INFO)

    logging.basicConfig(format="%(message)s", stream=out, level=level)

    structlog.configure(
        processors=[*SHARED_PROCESSORS, _renderer(json_format, out)],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=out),
        # Reason: Each CLI run reconfigures the stream; cached loggers would keep
        # the stream of the first run.
        cache_logger_on_first_use=False,
    )


def get_logger(name: str | None = None) -> structlog.stdlib.BoundLogger:
    """Logger bound to ``logger=name`` when a name is given."""
    logger = structlog.get_logger()
    return logger.bind(logger=name) if name else logger
