"""Exception taxonomy shared across the toolkit.

Every error raised on purpose derives from :class:`HsisegError`, so callers
(and the CLI) can distinguish "the input is wrong" from a genuine bug.
"""

from __future__ import annotations


class HsisegError(Exception):
    """Base class for all toolkit errors."""


class StructuralError(HsisegError, ValueError):
    """Inputs violate a structural contract (shapes, batch size, missing class)."""


class ConfigurationError(HsisegError, ValueError):
    """A parameter or configuration value is out of its documented domain."""


class ValidationError(HsisegError, ValueError):
    """A dataset-level consistency rule is broken (splits, duplicate ids)."""


class ParseError(HsisegError, ValueError):
    """A file could not be parsed.

    Carries the offending path and, when known, the line number (text
    formats) or byte offset (binary payloads) of the problem.
    """

    def __init__(
        self,
        message: str,
        *,
        path: str | None = None,
        line: int | None = None,
        offset: int | None = None,
    ) -> None:
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{': '.join(where)}: {message}"
        super().__init__(message)


class SynthesisError(HsisegError, RuntimeError):
    """A dataset synthesis job aborted partway.

    ``written`` lists the output files that were already produced, so a
    partial run can be inspected or cleaned up.
    """

    def __init__(self, message: str, *, written: list[str] | None = None) -> None:
        self.written = list(written or [])
        if self.written:
            message = f"{message} ({len(self.written)} files already written)"
        super().__init__(message)
