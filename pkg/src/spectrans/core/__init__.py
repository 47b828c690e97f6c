"""
Spectrans Core: errors and structured logging
"""

# ruff: noqa: F401
# pyright: reportUnusedImport=false

from spectrans.core.errors import (
    ConfigError,
    ContractError,
    DegenerateInputError,
    FormatError,
    NumericError,
    ParseError,
    RangeError,
    SpectransError,
    UnsupportedError,
)
from spectrans.core.traces import (
    ExportableLogMessage,
    LogLevel,
    LogMessage,
    Tracer,
    log_to,
    valid_log_level,
)
