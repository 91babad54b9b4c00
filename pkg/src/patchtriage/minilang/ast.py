"""AST node definitions for MiniLang.

Nodes carry the location of their first token.  Statements additionally record
the location of their last token so that line-span checks (patch regions) can
tell whether a statement sits entirely inside a range.  Node equality is
object identity; use `structural_equal` to compare trees while ignoring
locations.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional, Union

from .source import SourceLocation


@dataclass(eq=False)
class Node:
    loc: SourceLocation


# --- expressions ---


@dataclass(eq=False)
class IntLit(Node):
    value: int


@dataclass(eq=False)
class FloatLit(Node):
    value: float


@dataclass(eq=False)
class StrLit(Node):
    value: str


@dataclass(eq=False)
class BoolLit(Node):
    value: bool


@dataclass(eq=False)
class ListLit(Node):
    items: list["Expr"]


@dataclass(eq=False)
class Var(Node):
    name: str


@dataclass(eq=False)
class Unary(Node):
    op: str  # "-" or "!"
    operand: "Expr"


@dataclass(eq=False)
class Binary(Node):
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(eq=False)
class Call(Node):
    callee: str
    args: list["Expr"]


@dataclass(eq=False)
class Index(Node):
    base: "Expr"
    index: "Expr"


Expr = Union[IntLit, FloatLit, StrLit, BoolLit, ListLit, Var, Unary, Binary, Call, Index]


# --- statements ---


@dataclass(eq=False)
class Stmt(Node):
    end_loc: SourceLocation = field(init=False)

    def __post_init__(self) -> None:
        # Parser overwrites this once the statement's last token is known.
        self.end_loc = self.loc


@dataclass(eq=False)
class Let(Stmt):
    name: str
    value: Expr


@dataclass(eq=False)
class Assign(Stmt):
    name: str
    value: Expr


@dataclass(eq=False)
class If(Stmt):
    cond: Expr
    then_body: list["Stmt"]
    else_body: Optional[list["Stmt"]]


@dataclass(eq=False)
class While(Stmt):
    cond: Expr
    body: list["Stmt"]


@dataclass(eq=False)
class Return(Stmt):
    value: Optional[Expr]


@dataclass(eq=False)
class ExprStmt(Stmt):
    expr: Expr


@dataclass(eq=False)
class FunctionDecl(Node):
    name: str
    params: list[str]
    param_locs: list[SourceLocation]
    body: list[Stmt]
    end_loc: SourceLocation = None  # type: ignore[assignment]


@dataclass(eq=False)
class Program:
    """A parsed multi-file program.  Functions keep file-then-declaration order."""

    sources: dict[str, str]
    functions: list[FunctionDecl]

    def __post_init__(self) -> None:
        self.by_name: dict[str, FunctionDecl] = {f.name: f for f in self.functions}

    def function(self, name: str) -> FunctionDecl:
        return self.by_name[name]

    def test_names(self) -> list[str]:
        return [f.name for f in self.functions if f.name.startswith("test_")]


_IGNORED_FIELDS = {"loc", "end_loc", "param_locs"}


def structural_equal(a: object, b: object) -> bool:
    """Tree equality that ignores source locations."""
    if type(a) is not type(b):
        return False
    if isinstance(a, Node):
        for f in fields(a):
            if f.name in _IGNORED_FIELDS:
                continue
            if not structural_equal(getattr(a, f.name), getattr(b, f.name)):
                return False
        return True
    if isinstance(a, Program):
        assert isinstance(b, Program)
        if len(a.functions) != len(b.functions):
            return False
        return all(structural_equal(x, y) for x, y in zip(a.functions, b.functions))
    if isinstance(a, list):
        assert isinstance(b, list)
        if len(a) != len(b):
            return False
        return all(structural_equal(x, y) for x, y in zip(a, b))
    return a == b


def walk_expr(expr: Expr):
    """Yield expr and every descendant expression, preorder."""
    yield expr
    if isinstance(expr, ListLit):
        for item in expr.items:
            yield from walk_expr(item)
    elif isinstance(expr, Unary):
        yield from walk_expr(expr.operand)
    elif isinstance(expr, Binary):
        yield from walk_expr(expr.left)
        yield from walk_expr(expr.right)
    elif isinstance(expr, Call):
        for arg in expr.args:
            yield from walk_expr(arg)
    elif isinstance(expr, Index):
        yield from walk_expr(expr.base)
        yield from walk_expr(expr.index)


def stmt_exprs(stmt: Stmt) -> list[Expr]:
    """Top-level expressions evaluated by a statement (not descending into bodies)."""
    if isinstance(stmt, (Let, Assign)):
        return [stmt.value]
    if isinstance(stmt, (If, While)):
        return [stmt.cond]
    if isinstance(stmt, Return):
        return [] if stmt.value is None else [stmt.value]
    if isinstance(stmt, ExprStmt):
        return [stmt.expr]
    raise TypeError(f"unknown statement {type(stmt).__name__}")


def walk_stmts(body: list[Stmt]):
    """Yield every statement in a body, preorder, descending into blocks."""
    for stmt in body:
        yield stmt
        if isinstance(stmt, If):
            yield from walk_stmts(stmt.then_body)
            if stmt.else_body is not None:
                yield from walk_stmts(stmt.else_body)
        elif isinstance(stmt, While):
            yield from walk_stmts(stmt.body)
