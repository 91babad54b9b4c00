"""Errors raised by the MiniLang toolchain."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .source import SourceLocation


class MiniLangError(Exception):
    """Base class for every MiniLang-related failure."""


@dataclass
class MiniLangSyntaxError(MiniLangError):
    message: str
    loc: Optional[SourceLocation]

    def __str__(self) -> str:
        if self.loc is None:
            return self.message
        return f"{self.loc}: {self.message}"


@dataclass
class MiniLangRuntimeError(MiniLangError):
    message: str
    loc: Optional[SourceLocation]

    def __str__(self) -> str:
        if self.loc is None:
            return self.message
        return f"{self.loc}: {self.message}"


@dataclass
class AssertionFailure(MiniLangError):
    # Raised when assert() sees false; loc is the assert call site.
    loc: Optional[SourceLocation]

    def __str__(self) -> str:
        return f"{self.loc}: assertion failed"


@dataclass
class PatchError(MiniLangError):
    message: str

    def __str__(self) -> str:
        return self.message
