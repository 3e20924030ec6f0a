"""Logging and tracing helpers shared by the library modules and the CLI."""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    import hunter

LOGGER_NAME = "overlap_bounds"
DEFAULT_LOG_PATH = Path("/tmp/overlap-bounds.log")
TRACE_PATH = Path("/tmp/overlap-bounds.trace")

_logger: logging.Logger | None = None
_console_handler: logging.Handler | None = None
_hunter_trace: hunter.Tracer | None = None

_FORMATTER = logging.Formatter(
    "%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    datefmt="%H:%M:%S",
)


def resolve_log_path() -> Path:
    override = os.environ.get("OVERLAP_BOUNDS_LOG")
    if override:
        return Path(override)
    return DEFAULT_LOG_PATH


def get_logger() -> logging.Logger:
    """Return the project logger; the file handler is attached on first use."""
    global _logger
    if _logger is not None:
        return _logger

    _logger = logging.getLogger(LOGGER_NAME)
    _logger.setLevel(logging.DEBUG)

    try:
        log_file = resolve_log_path()
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handler: logging.Handler = logging.FileHandler(log_file, mode="a")
    except OSError:
        handler = logging.NullHandler()
    handler.setLevel(logging.DEBUG)
    handler.setFormatter(_FORMATTER)

    _logger.addHandler(handler)
    _logger.debug("Logging initialized")

    return _logger


def enable_console(level: int = logging.INFO) -> None:
    """Mirror log records to stderr (used by the CLI ``--verbose`` flag)."""
    global _console_handler
    logger = get_logger()
    if _console_handler is not None:
        _console_handler.setLevel(level)
        return
    _console_handler = logging.StreamHandler(sys.stderr)
    _console_handler.setLevel(level)
    _console_handler.setFormatter(_FORMATTER)
    logger.addHandler(_console_handler)


def start_trace() -> None:
    """Start a Hunter trace of project code (stdlib and numpy excluded)."""
    global _hunter_trace
    if _hunter_trace is not None:
        return

    import hunter

    stream = TRACE_PATH.open("a", buffering=1, encoding="utf-8")

    _hunter_trace = hunter.trace(
        ~hunter.Q(stdlib=True),
        ~hunter.Q(module_startswith="numpy"),
        action=hunter.CallPrinter(stream=stream, force_colors=False),
        threading_support=True,
    )

    get_logger().info("Hunter trace started → %s", TRACE_PATH)


def stop_trace() -> None:
    """Stop Hunter trace if running."""
    global _hunter_trace
    if _hunter_trace is None:
        return

    import hunter

    hunter.stop()
    _hunter_trace = None

    get_logger().info("Hunter trace stopped")
