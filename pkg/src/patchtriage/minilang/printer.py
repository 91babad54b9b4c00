"""Pretty-printer: AST back to canonical MiniLang text.

Parenthesization is minimal-by-precedence, so parse(print(parse(s))) yields a
tree structurally equal to parse(s).  Expression text produced here is also
what trace hook labels display.
"""
from __future__ import annotations

from . import ast

_PREC = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}
_UNARY_PREC = 7
_POSTFIX_PREC = 8
_ATOM_PREC = 9


def _prec(expr: ast.Expr) -> int:
    if isinstance(expr, ast.Binary):
        return _PREC[expr.op]
    if isinstance(expr, ast.Unary):
        return _UNARY_PREC
    if isinstance(expr, ast.Index):
        return _POSTFIX_PREC
    return _ATOM_PREC


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


def print_expr(expr: ast.Expr) -> str:
    if isinstance(expr, ast.IntLit):
        return str(expr.value)
    if isinstance(expr, ast.FloatLit):
        return repr(expr.value)
    if isinstance(expr, ast.StrLit):
        return f'"{_escape(expr.value)}"'
    if isinstance(expr, ast.BoolLit):
        return "true" if expr.value else "false"
    if isinstance(expr, ast.ListLit):
        return "[" + ", ".join(print_expr(item) for item in expr.items) + "]"
    if isinstance(expr, ast.Var):
        return expr.name
    if isinstance(expr, ast.Unary):
        operand = print_expr(expr.operand)
        if _prec(expr.operand) < _UNARY_PREC:
            operand = f"({operand})"
        return f"{expr.op}{operand}"
    if isinstance(expr, ast.Binary):
        mine = _PREC[expr.op]
        left = print_expr(expr.left)
        if _prec(expr.left) < mine:
            left = f"({left})"
        right = print_expr(expr.right)
        if _prec(expr.right) <= mine:
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    if isinstance(expr, ast.Call):
        return f"{expr.callee}(" + ", ".join(print_expr(a) for a in expr.args) + ")"
    if isinstance(expr, ast.Index):
        base = print_expr(expr.base)
        if _prec(expr.base) < _POSTFIX_PREC:
            base = f"({base})"
        return f"{base}[{print_expr(expr.index)}]"
    raise TypeError(f"unknown expression {type(expr).__name__}")


def _print_block(body: list[ast.Stmt], indent: int, out: list[str]) -> None:
    for stmt in body:
        _print_stmt(stmt, indent, out)


def _print_stmt(stmt: ast.Stmt, indent: int, out: list[str]) -> None:
    pad = " " * indent
    if isinstance(stmt, ast.Let):
        out.append(f"{pad}let {stmt.name} = {print_expr(stmt.value)};")
    elif isinstance(stmt, ast.Assign):
        out.append(f"{pad}{stmt.name} = {print_expr(stmt.value)};")
    elif isinstance(stmt, ast.If):
        out.append(f"{pad}if ({print_expr(stmt.cond)}) {{")
        _print_block(stmt.then_body, indent + 4, out)
        current = stmt
        while True:
            els = current.else_body
            if els is None:
                out.append(f"{pad}}}")
                break
            if len(els) == 1 and isinstance(els[0], ast.If):
                nested = els[0]
                out.append(f"{pad}}} else if ({print_expr(nested.cond)}) {{")
                _print_block(nested.then_body, indent + 4, out)
                current = nested
                continue
            out.append(f"{pad}}} else {{")
            _print_block(els, indent + 4, out)
            out.append(f"{pad}}}")
            break
    elif isinstance(stmt, ast.While):
        out.append(f"{pad}while ({print_expr(stmt.cond)}) {{")
        _print_block(stmt.body, indent + 4, out)
        out.append(f"{pad}}}")
    elif isinstance(stmt, ast.Return):
        if stmt.value is None:
            out.append(f"{pad}return;")
        else:
            out.append(f"{pad}return {print_expr(stmt.value)};")
    elif isinstance(stmt, ast.ExprStmt):
        out.append(f"{pad}{print_expr(stmt.expr)};")
    else:
        raise TypeError(f"unknown statement {type(stmt).__name__}")


def print_function(fn: ast.FunctionDecl) -> str:
    out = [f"fn {fn.name}({', '.join(fn.params)}) {{"]
    _print_block(fn.body, 4, out)
    out.append("}")
    return "\n".join(out)


def print_program(program: ast.Program) -> str:
    return "\n\n".join(print_function(fn) for fn in program.functions) + "\n"
