"""Logging and counters shared by the library, the CLI and the scripts.

Every CLI run gets a correlation id; records carry it together with any
``extra`` fields. Library modules only obtain loggers; handlers are installed
by :func:`configure_logging` from an entry point.
"""
from __future__ import annotations

import contextlib
import contextvars
import enum
import json
import logging
import sys
import threading
import uuid
from collections import Counter
from datetime import datetime, timezone
from typing import Any, Dict, Iterator, Optional

__all__ = [
    "Metrics",
    "configure_logging",
    "correlation_scope",
    "current_correlation_id",
    "generate_correlation_id",
    "get_logger",
    "metrics",
]

ROOT_LOGGER = "qbk"

# ---------------------------------------------------------------------------
# Correlation ids
# ---------------------------------------------------------------------------

_run_id: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar("qbk_correlation_id", default=None)


def current_correlation_id() -> Optional[str]:
    """Id of the enclosing :func:`correlation_scope`, or ``None`` outside one."""

    return _run_id.get()


@contextlib.contextmanager
def correlation_scope(correlation_id: Optional[str]) -> Iterator[None]:
    """Tag records logged inside the block; ``None`` keeps the enclosing id."""

    token = _run_id.set(correlation_id) if correlation_id is not None else None
    try:
        yield
    finally:
        if token is not None:
            _run_id.reset(token)


def generate_correlation_id() -> str:
    """Fresh 32-character hex id for one CLI run."""

    return uuid.uuid4().hex


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

_configured = False

# Everything a bare LogRecord carries; the rest came in through ``extra``.
_STANDARD_FIELDS = frozenset(vars(logging.LogRecord("", logging.INFO, "", 0, "", None, None))) | {
    "message",
    "asctime",
    "correlation_id",
}


def _plain(value: Any) -> Any:
    """JSON-compatible form of an ``extra`` value."""

    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, enum.Enum):
        return _plain(value.value)
    if isinstance(value, (set, frozenset)):
        return sorted((_plain(item) for item in value), key=str)
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    # Formulas, model classes and other domain objects log as their text form.
    return str(value)


class _JsonFormatter(logging.Formatter):
    """One JSON object per record, keys sorted."""

    def format(self, record: logging.LogRecord) -> str:
        stamp = datetime.fromtimestamp(record.created, tz=timezone.utc)
        payload: Dict[str, Any] = {
            "timestamp": stamp.isoformat(timespec="milliseconds").replace("+00:00", "Z"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        run = getattr(record, "correlation_id", None) or current_correlation_id()
        if run:
            payload["correlation_id"] = run
        payload.update(
            (key, _plain(value))
            for key, value in vars(record).items()
            if key not in _STANDARD_FIELDS and not key.startswith("_")
        )
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload, sort_keys=True, ensure_ascii=False)


class _CorrelationIdFilter(logging.Filter):
    """Stamps records with the current correlation id unless they carry one."""

    def filter(self, record: logging.LogRecord) -> bool:
        if getattr(record, "correlation_id", None) is None:
            record.correlation_id = current_correlation_id()
        return True


def configure_logging(level: str | None = None, fmt: str | None = None, *, force: bool = False) -> None:
    """Install the stderr handler on the ``qbk`` logger.

    Unset arguments fall back to :class:`qbk.config.Settings`. Without
    ``force`` only the first call has an effect.
    """

    global _configured
    if _configured and not force:
        return

    if level is None or fmt is None:
        from .config import get_settings

        settings = get_settings()
        level = level or settings.log_level
        fmt = fmt or settings.log_format

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        logging.Formatter("%(levelname)s %(name)s: %(message)s") if fmt == "text" else _JsonFormatter()
    )
    handler.addFilter(_CorrelationIdFilter())

    root = logging.getLogger(ROOT_LOGGER)
    root.setLevel(level.upper())
    root.handlers = [handler]
    root.propagate = False
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Logger below ``qbk``; foreign names are nested under it."""

    if name != ROOT_LOGGER and not name.startswith(ROOT_LOGGER + "."):
        name = f"{ROOT_LOGGER}.{name}"
    return logging.getLogger(name)


# ---------------------------------------------------------------------------
# Counters
# ---------------------------------------------------------------------------


class Metrics:
    """Thread-safe named counters: models enumerated, lines checked and so on."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._counts: Counter[str] = Counter()

    def increment(self, name: str, amount: int = 1) -> None:
        """Add ``amount`` to ``name``; zero and negative amounts are ignored."""

        if amount > 0:
            with self._lock:
                self._counts[name] += amount

    def get(self, name: str) -> int:
        """Current value, 0 for a counter never incremented."""

        with self._lock:
            return self._counts[name]

    def reset(self) -> None:
        """Drop every counter."""

        with self._lock:
            self._counts.clear()

    def snapshot(self) -> Dict[str, int]:
        """Copy of the non-zero counters, sorted by name."""

        with self._lock:
            return dict(sorted(self._counts.items()))


metrics = Metrics()
