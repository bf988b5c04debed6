"""Exception types shared across the package."""

from __future__ import annotations


class SessError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SessError):
    """Syntax or validation error in concrete syntax, with source position."""

    def __init__(self, msg: str, filename: str = "<input>", line: int = 0, col: int = 0):
        super().__init__(msg)
        self.msg = msg
        self.filename = filename
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"{self.filename}:{self.line}:{self.col}: {self.msg}"


class DefError(SessError):
    """Bad definition environment: dangling name, unguarded cycle, duplicate."""


class NotEnabled(SessError):
    """A communication was fired in a state where its rule does not apply."""


class CapExceeded(SessError):
    """A bounded search or closure outgrew its configured cap.

    Raised instead of silently answering false; callers surface it as a
    distinct exit code.
    """


class PreconditionError(SessError):
    """An operation was invoked outside its stated precondition."""
