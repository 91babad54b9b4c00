"""Source positions shared by the lexer, parser, and everything downstream."""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class SourceLocation:
    """1-based line/column position in a named source file."""

    file: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"

    def to_json(self) -> list:
        return [self.file, self.line, self.col]

    @staticmethod
    def from_json(data: list) -> "SourceLocation":
        return SourceLocation(str(data[0]), int(data[1]), int(data[2]))


def normalize_newlines(text: str) -> str:
    """Collapse CRLF and lone CR to LF so locations are stable across platforms."""
    return text.replace("\r\n", "\n").replace("\r", "\n")
