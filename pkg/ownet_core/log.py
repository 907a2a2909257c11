"""Structured stderr diagnostics for the ownet command line."""

from __future__ import annotations

import logging
import sys
from typing import Any, Mapping, Optional, TextIO

from .colors import LEVEL_COLORS, MUTED, paint

ROOT_LOGGER = "ownet_core"

_FIELDS_ATTR = "fields"


def _format_field(value: Any) -> str:
    text = str(value)
    if not text or any(ch.isspace() for ch in text) or "=" in text or '"' in text:
        escaped = text.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    return text


class StructuredFormatter(logging.Formatter):
    """Render records as ``LEVEL logger message key=value ...`` lines."""

    def __init__(self, color: bool = False) -> None:
        super().__init__()
        self.color = color

    def format(self, record: logging.LogRecord) -> str:
        level = paint(
            f"{record.levelname:<7}", LEVEL_COLORS.get(record.levelname, ""), self.color
        )
        name = paint(record.name, MUTED, self.color)
        parts = [level, name, record.getMessage()]
        fields: Optional[Mapping[str, Any]] = getattr(record, _FIELDS_ATTR, None)
        if fields:
            parts.extend(
                f"{key}={_format_field(value)}" for key, value in fields.items()
            )
        line = " ".join(parts)
        if record.exc_info:
            line = f"{line}\n{self.formatException(record.exc_info)}"
        return line


def configure_logging(
    verbosity: int = 0,
    *,
    color: bool = True,
    stream: Optional[TextIO] = None,
) -> logging.Logger:
    """Install a single structured handler on the ``ownet_core`` logger.

    ``verbosity`` > 0 enables DEBUG, < 0 restricts output to errors.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    target = stream if stream is not None else sys.stderr
    handler = logging.StreamHandler(target)
    use_color = color and hasattr(target, "isatty") and target.isatty()
    handler.setFormatter(StructuredFormatter(color=use_color))
    logger.addHandler(handler)
    if verbosity > 0:
        logger.setLevel(logging.DEBUG)
    elif verbosity < 0:
        logger.setLevel(logging.ERROR)
    else:
        logger.setLevel(logging.INFO)
    logger.propagate = False
    return logger


def log_event(
    logger: logging.Logger, level: int, message: str, **fields: Any
) -> None:
    """Log ``message`` with structured ``key=value`` fields."""
    logger.log(level, message, extra={_FIELDS_ATTR: fields})
