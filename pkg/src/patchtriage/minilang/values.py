"""Runtime value helpers.

MiniLang values map onto Python as: int (wrapped to 64-bit two's complement),
float, bool, str, tuple (lists are immutable, which makes value semantics
free), and the UNIT singleton.  `render` is the canonical serialization used
by traces; `display` is what print() emits (strings unquoted).
"""
from __future__ import annotations

_I64_MIN = -(2**63)
_U64 = 2**64


class Unit:
    _instance = None

    def __new__(cls) -> "Unit":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "unit"


UNIT = Unit()

Value = object


def wrap64(x: int) -> int:
    """Wrap an arbitrary int into signed 64-bit two's complement."""
    return (x - _I64_MIN) % _U64 + _I64_MIN


def type_name(v: Value) -> str:
    if v is UNIT:
        return "unit"
    if type(v) is bool:
        return "bool"
    if type(v) is int:
        return "int"
    if type(v) is float:
        return "float"
    if type(v) is str:
        return "string"
    if type(v) is tuple:
        return "list"
    raise TypeError(f"not a MiniLang value: {v!r}")


def _escape(text: str) -> str:
    out = []
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ch == '"':
            out.append('\\"')
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ch == "\r":
            out.append("\\r")
        else:
            out.append(ch)
    return "".join(out)


def render(v: Value) -> str:
    """Canonical text form.  Floats use shortest round-trip notation."""
    if v is UNIT:
        return "unit"
    if type(v) is bool:
        return "true" if v else "false"
    if type(v) is int:
        return str(v)
    if type(v) is float:
        return repr(v)
    if type(v) is str:
        return f'"{_escape(v)}"'
    if type(v) is tuple:
        return "[" + ", ".join(render(item) for item in v) + "]"
    raise TypeError(f"not a MiniLang value: {v!r}")


def display(v: Value) -> str:
    """print() form: bare strings, everything else as rendered."""
    if type(v) is str:
        return v
    return render(v)


def value_equal(a: Value, b: Value) -> bool:
    """Structural equality.  Tags must match: 1 is not equal to 1.0."""
    if type(a) is not type(b):
        return False
    if type(a) is tuple:
        return len(a) == len(b) and all(value_equal(x, y) for x, y in zip(a, b))
    return a == b
