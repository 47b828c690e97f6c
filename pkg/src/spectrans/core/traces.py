"""
Structured logging for long-running operations.

Training loops, dataset generation and audio generation accept an
optional `Tracer` and record messages with arbitrary JSON-serializable
metadata. Logs are exported as plain records that commands dump next to
their outputs.
"""

import threading
from collections.abc import Iterable
from dataclasses import dataclass
from datetime import datetime
from typing import Literal, TypeGuard

from spectrans.utils.typing import dump_typed

type LogLevel = Literal["trace", "debug", "info", "warn", "error"]


_LEVELS: tuple[LogLevel, ...] = ("trace", "debug", "info", "warn", "error")


def log_level_greater_or_equal(lhs: LogLevel, rhs: LogLevel) -> bool:
    return _LEVELS.index(lhs) >= _LEVELS.index(rhs)


def valid_log_level(level: str) -> TypeGuard[LogLevel]:
    return level in _LEVELS


@dataclass(frozen=True, kw_only=True)
class LogMessage:
    """
    A log message.

    Attributes:
        message: A short identifier-like message (e.g. `train_step`).
        level: Severity level.
        time: Time at which the message was produced.
        metadata: Optional metadata, as an object that pydantic can
            serialize to JSON.
    """

    message: str
    level: LogLevel
    time: datetime
    metadata: object | None = None


@dataclass(frozen=True, kw_only=True)
class ExportableLogMessage:
    message: str
    level: LogLevel
    time: datetime | None = None
    metadata: object | None = None


class Tracer:
    """
    A mutable, thread-safe list of log messages.

    Messages below `log_level` are dropped on arrival.
    """

    def __init__(self, log_level: LogLevel = "info"):
        self.messages: list[LogMessage] = []
        self.log_level: LogLevel = log_level
        self.lock = threading.RLock()

    def log(
        self, level: LogLevel, message: str, metadata: object | None = None
    ) -> None:
        if not log_level_greater_or_equal(level, self.log_level):
            return
        msg = LogMessage(
            message=message,
            level=level,
            time=datetime.now(),
            metadata=metadata,
        )
        with self.lock:
            self.messages.append(msg)

    def trace(self, message: str, metadata: object | None = None) -> None:
        self.log("trace", message, metadata)

    def debug(self, message: str, metadata: object | None = None) -> None:
        self.log("debug", message, metadata)

    def info(self, message: str, metadata: object | None = None) -> None:
        self.log("info", message, metadata)

    def warn(self, message: str, metadata: object | None = None) -> None:
        self.log("warn", message, metadata)

    def error(self, message: str, metadata: object | None = None) -> None:
        self.log("error", message, metadata)

    def export_log(
        self, *, remove_timing_info: bool = False
    ) -> Iterable[ExportableLogMessage]:
        """
        Export the log into an easily serializable format.
        """
        with self.lock:
            messages = list(self.messages)
        for m in messages:
            yield ExportableLogMessage(
                message=m.message,
                level=m.level,
                time=None if remove_timing_info else m.time,
                metadata=dump_typed(object, m.metadata),
            )


def log_to(
    tracer: "Tracer | None",
    level: LogLevel,
    message: str,
    metadata: object | None = None,
) -> None:
    """
    Log a message if a tracer is provided.
    """
    if tracer is not None:
        tracer.log(level, message, metadata)
