"""Region-based patching: swap a span of whole statements for replacement text.

A region names a file and an inclusive 1-based line span.  It must cover whole
statements inside a single function body: a statement that straddles the
boundary, or a function header or closing brace inside the span, rejects the
patch.  The original program is never mutated; patching re-parses the edited
sources into a fresh Program.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from . import ast
from .errors import MiniLangError, MiniLangSyntaxError, PatchError
from .parser import parse
from .source import normalize_newlines

_REGION_RE = re.compile(r"^(?P<file>.+):(?P<start>\d+)-(?P<end>\d+)$")


@dataclass(frozen=True)
class Region:
    file: str
    start_line: int
    end_line: int

    def __post_init__(self) -> None:
        if self.start_line < 1 or self.end_line < self.start_line:
            raise PatchError(f"bad region span {self.start_line}-{self.end_line}")

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}-{self.end_line}"

    @staticmethod
    def parse(text: str) -> "Region":
        m = _REGION_RE.match(text)
        if m is None:
            raise PatchError(f"bad region {text!r}, expected file:start-end")
        return Region(m.group("file"), int(m.group("start")), int(m.group("end")))

    def contains_line(self, file: str, line: int) -> bool:
        return file == self.file and self.start_line <= line <= self.end_line

    def line_count(self) -> int:
        return self.end_line - self.start_line + 1


def _check_region(program: ast.Program, region: Region) -> ast.FunctionDecl:
    if region.file not in program.sources:
        raise PatchError(f"region file {region.file!r} not in program")
    total = normalize_newlines(program.sources[region.file]).count("\n") + 1
    if region.end_line > total:
        raise PatchError(f"region {region} extends past end of file ({total} lines)")

    host = None
    for fn in program.functions:
        if fn.loc.file != region.file:
            continue
        if region.start_line <= fn.loc.line <= region.end_line:
            raise PatchError(f"region {region} covers the header of function {fn.name!r}")
        if region.start_line <= fn.end_loc.line <= region.end_line:
            raise PatchError(f"region {region} covers the closing brace of function {fn.name!r}")
        if fn.loc.line < region.start_line and region.end_line < fn.end_loc.line:
            host = fn
    if host is None:
        raise PatchError(f"region {region} is not inside a function body")

    covered = 0
    for stmt in ast.walk_stmts(host.body):
        first, last = stmt.loc.line, stmt.end_loc.line
        if last < region.start_line or first > region.end_line:
            continue
        if first < region.start_line and last > region.end_line:
            # A compound statement wrapping the whole region is fine; the
            # region addresses statements of its body, checked separately.
            continue
        if first < region.start_line or last > region.end_line:
            raise PatchError(
                f"region {region} splits the statement spanning lines {first}-{last}"
            )
        covered += 1
    if covered == 0:
        raise PatchError(f"region {region} contains no statements")
    return host


def region_text(program: ast.Program, region: Region) -> str:
    """The source lines a region covers, without a trailing newline."""
    _check_region(program, region)
    lines = normalize_newlines(program.sources[region.file]).split("\n")
    return "\n".join(lines[region.start_line - 1 : region.end_line])


def apply_patch(program: ast.Program, region: Region, replacement: str) -> ast.Program:
    """Replace the region with replacement text and re-parse.

    The replacement may span any number of lines (empty text deletes the
    statements).  A replacement that does not parse in context raises
    PatchError with the underlying syntax message.
    """
    _check_region(program, region)
    lines = normalize_newlines(program.sources[region.file]).split("\n")
    repl = normalize_newlines(replacement)
    if repl.endswith("\n"):
        repl = repl[:-1]
    repl_lines = repl.split("\n") if repl else []
    new_lines = lines[: region.start_line - 1] + repl_lines + lines[region.end_line :]
    new_sources = dict(program.sources)
    new_sources[region.file] = "\n".join(new_lines)
    try:
        return parse(new_sources)
    except MiniLangSyntaxError as e:
        raise PatchError(f"patched program does not parse: {e}") from e


def patched_region(region: Region, replacement: str) -> Region:
    """The line span the replacement occupies after patching."""
    repl = normalize_newlines(replacement)
    if repl.endswith("\n"):
        repl = repl[:-1]
    count = len(repl.split("\n")) if repl else 0
    if count == 0:
        # Degenerate: nothing occupies the span; keep a zero-width marker line.
        return Region(region.file, region.start_line, region.start_line)
    return Region(region.file, region.start_line, region.start_line + count - 1)


def line_delta(region: Region, replacement: str) -> int:
    """How far lines after the region shift when the replacement goes in."""
    repl = normalize_newlines(replacement)
    if repl.endswith("\n"):
        repl = repl[:-1]
    count = len(repl.split("\n")) if repl else 0
    return count - region.line_count()


def first_statement_in_region(program: ast.Program, region: Region) -> ast.Stmt | None:
    """The region's first statement in source order, or None if empty."""
    host = _check_region(program, region)
    best: ast.Stmt | None = None
    for stmt in ast.walk_stmts(host.body):
        if not (region.start_line <= stmt.loc.line and stmt.end_loc.line <= region.end_line):
            continue
        if best is None or (stmt.loc.line, stmt.loc.col) < (best.loc.line, best.loc.col):
            best = stmt
    return best


def function_containing(program: ast.Program, file: str, line: int) -> ast.FunctionDecl | None:
    for fn in program.functions:
        if fn.loc.file == file and fn.loc.line <= line <= fn.end_loc.line:
            return fn
    return None
