"""
Error hierarchy for spectrans.

Every user-facing failure is an instance of `SpectransError`, which
carries the process exit code that the command line interface reports
for it.
"""

import pprint
from typing import Any, ClassVar


class SpectransError(Exception):
    """
    Base class of all spectrans errors.

    Attributes:
        label: Snake-case identifier of the failure (`invalid_hop`).
        description: Human-readable explanation.
        meta: Offending values (shapes, paths, parameters), shown
            pretty-printed after the description.
    """

    exit_code: ClassVar[int] = 2

    def __init__(
        self,
        label: str | None = None,
        description: str | None = None,
        *,
        meta: Any | None = None,
    ):
        assert label is None or label, "empty error label"
        self.label = label
        self.description = description
        self.meta = meta
        super().__init__(str(self))

    def __str__(self):
        shown = pprint.pformat(self.meta) if self.meta else None
        parts = (self.label, self.description, shown)
        return "\n\n".join(p for p in parts if p)


class ConfigError(SpectransError):
    """
    Invalid configuration value or inconsistent configuration sections.
    """


class ContractError(SpectransError):
    """
    An operation was called with arguments violating its contract, such
    as mismatched shapes or channel counts.
    """


class DegenerateInputError(SpectransError):
    """
    The input carries no usable information (empty or all-zero signal,
    zero reference...).
    """


class UnsupportedError(SpectransError):
    """
    Well-formed input using a feature that is not supported (e.g. a WAV
    encoding other than PCM-16 or float-32).
    """


class RangeError(SpectransError):
    """
    A value lies outside its admissible range.
    """


class ParseError(SpectransError):
    """
    A text document could not be parsed.

    Attributes:
        line: One-based line number of the offending line, if known.
    """

    def __init__(self, description: str, *, line: int | None = None):
        self.line = line
        label = f"parse_error (line {line})" if line else "parse_error"
        super().__init__(label, description)


class FormatError(SpectransError):
    """
    A binary or structured file is malformed (bad magic, truncated
    content, checksum mismatch...).
    """

    exit_code: ClassVar[int] = 3


class NumericError(SpectransError):
    """
    A non-finite value appeared during training, which is aborted.
    """

    exit_code: ClassVar[int] = 4
