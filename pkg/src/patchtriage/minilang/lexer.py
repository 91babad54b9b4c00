"""Tokenizer for MiniLang source text.

Two modes share one scanner: strict mode raises `MiniLangSyntaxError` on the
first bad character or unterminated string, while lenient mode turns anything
unrecognized into a single-character token and keeps going.  Lenient mode is
what patch-distance tokenization uses, since candidate patches are compared
before they are known to parse.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import MiniLangSyntaxError
from .source import SourceLocation, normalize_newlines

KEYWORDS = frozenset({"fn", "let", "if", "else", "while", "return", "true", "false"})

# Longest first so "==" wins over "=".
OPERATORS = [
    "&&", "||", "==", "!=", "<=", ">=",
    "<", ">", "+", "-", "*", "/", "%", "!", "=",
    "(", ")", "{", "}", "[", "]", ",", ";",
]

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "keyword", "int", "float", "string", "op", "eof"
    lexeme: str
    loc: SourceLocation
    # Decoded payload for string tokens; same as lexeme otherwise.
    text: str = ""


def lex(source: str, file: str = "<input>", strict: bool = True) -> list[Token]:
    """Scan source into tokens, dropping whitespace and // comments."""
    src = normalize_newlines(source)
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(src)

    def here() -> SourceLocation:
        return SourceLocation(file, line, col)

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if src[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        ch = src[i]
        if ch in " \t\n":
            advance(1)
            continue
        if ch == "/" and i + 1 < n and src[i + 1] == "/":
            while i < n and src[i] != "\n":
                advance(1)
            continue
        loc = here()
        if ch.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            is_float = False
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            if j < n and src[j] in "eE":
                k = j + 1
                if k < n and src[k] in "+-":
                    k += 1
                if k < n and src[k].isdigit():
                    is_float = True
                    k += 1
                    while k < n and src[k].isdigit():
                        k += 1
                    j = k
            lexeme = src[i:j]
            tokens.append(Token("float" if is_float else "int", lexeme, loc, lexeme))
            advance(j - i)
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            lexeme = src[i:j]
            kind = "keyword" if lexeme in KEYWORDS else "ident"
            tokens.append(Token(kind, lexeme, loc, lexeme))
            advance(j - i)
            continue
        if ch == '"':
            j = i + 1
            decoded: list[str] = []
            ok = True
            while True:
                if j >= n or src[j] == "\n":
                    if strict:
                        raise MiniLangSyntaxError("unterminated string literal", loc)
                    ok = False
                    break
                c = src[j]
                if c == '"':
                    j += 1
                    break
                if c == "\\":
                    if j + 1 >= n or src[j + 1] not in _ESCAPES:
                        if strict:
                            raise MiniLangSyntaxError(
                                "bad string escape", SourceLocation(file, line, col + (j - i))
                            )
                        ok = False
                        break
                    decoded.append(_ESCAPES[src[j + 1]])
                    j += 2
                else:
                    decoded.append(c)
                    j += 1
            if not ok:
                # Lenient fallback: the quote itself becomes a token.
                tokens.append(Token("op", ch, loc, ch))
                advance(1)
                continue
            tokens.append(Token("string", src[i:j], loc, "".join(decoded)))
            advance(j - i)
            continue
        matched = None
        for op in OPERATORS:
            if src.startswith(op, i):
                matched = op
                break
        if matched is not None:
            tokens.append(Token("op", matched, loc, matched))
            advance(len(matched))
            continue
        if strict:
            raise MiniLangSyntaxError(f"unexpected character {ch!r}", loc)
        tokens.append(Token("op", ch, loc, ch))
        advance(1)

    tokens.append(Token("eof", "", here(), ""))
    return tokens
