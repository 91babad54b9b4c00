"""Token-level edit distance between patch texts.

Patches are compared as token sequences, not characters: `pos + 1` and
`pos+1` are identical here, while renaming one identifier costs exactly 1.
Tokenization is lenient (unknown characters become single-character tokens)
because candidate texts are compared before anyone checks that they parse.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .minilang.lexer import lex


def tokenize(text: str) -> tuple[str, ...]:
    """Lexemes of the text, comments and whitespace dropped."""
    return tuple(t.lexeme for t in lex(text, strict=False)[:-1])


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Edit distance with unit-cost insert, delete, and substitute."""
    if a == b:
        return 0
    # Keep the shorter sequence as the row to minimize memory traffic.
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i, ca in enumerate(a, start=1):
        cur[0] = i
        for j, cb in enumerate(b, start=1):
            if ca == cb:
                cur[j] = prev[j - 1]
            else:
                best = prev[j - 1]
                if prev[j] < best:
                    best = prev[j]
                if cur[j - 1] < best:
                    best = cur[j - 1]
                cur[j] = best + 1
        prev, cur = cur, prev
    return prev[len(b)]


@dataclass(frozen=True)
class DiffOp:
    """One step of a minimal token-level edit script."""

    op: str  # "equal" | "sub" | "del" | "ins"
    a: str | None = None
    b: str | None = None


def token_diff(a: Sequence[str], b: Sequence[str]) -> list[DiffOp]:
    """A minimal edit script from a to b; its non-equal ops count levenshtein(a, b).

    Ties prefer substitution, then deletion, then insertion, so scripts are
    deterministic.
    """
    n, m = len(a), len(b)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        dist[i][0] = i
    for j in range(m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            dist[i][j] = min(dist[i - 1][j - 1] + cost, dist[i - 1][j] + 1, dist[i][j - 1] + 1)
    ops: list[DiffOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (0 if a[i - 1] == b[j - 1] else 1):
            if a[i - 1] == b[j - 1]:
                ops.append(DiffOp("equal", a[i - 1], b[j - 1]))
            else:
                ops.append(DiffOp("sub", a[i - 1], b[j - 1]))
            i -= 1
            j -= 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            ops.append(DiffOp("del", a[i - 1], None))
            i -= 1
        else:
            ops.append(DiffOp("ins", None, b[j - 1]))
            j -= 1
    ops.reverse()
    return ops


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise distances with a zero diagonal."""

    n: int
    entries: tuple[tuple[int, ...], ...]

    def get(self, i: int, j: int) -> int:
        return self.entries[i][j]


def distance_matrix(seqs: Sequence[Sequence[str]]) -> DistanceMatrix:
    n = len(seqs)
    rows = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = levenshtein(seqs[i], seqs[j])
            rows[i][j] = d
            rows[j][i] = d
    return DistanceMatrix(n, tuple(tuple(r) for r in rows))
