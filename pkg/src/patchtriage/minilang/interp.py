"""Deterministic tree-walking interpreter with optional observation hooks.

Semantics in brief:

- Integers are 64-bit two's complement and wrap on +, -, *, and unary minus.
  Integer division truncates toward zero; % takes the sign of the dividend.
  Mixed int/float arithmetic promotes to float.  Division (and %) by zero is
  a runtime error, as is % on floats.
- Equality is structural and total; comparisons require two numbers (mixed
  int/float allowed) or two strings.  && and || short-circuit on bools.
- Lists are immutable values; indexing is read-only and bounds-checked.
- Assignment binds in the current function's scope, creating the variable if
  needed; there are no globals.
- Every statement execution and expression evaluation costs one step against
  a per-test-run budget, so runaway patches terminate deterministically.

Hooks (`ExecutionHooks`) observe execution without changing it: the
interpreter never consults their return values.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import ast
from .errors import AssertionFailure, MiniLangError, MiniLangRuntimeError
from .source import SourceLocation
from .values import UNIT, Value, display, type_name, value_equal, wrap64

DEFAULT_STEP_BUDGET = 10_000_000
DEFAULT_MAX_CALL_DEPTH = 500

# The walker burns ~10 Python frames per MiniLang call, so the default Python
# limit would fire long before max_call_depth does.
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20_000))


class ExecutionHooks:
    """Base observer; all callbacks are no-ops.  Subclass what you need."""

    def before_statement(self, stmt: ast.Stmt, interp: "Interpreter") -> None:
        pass

    def after_assign(self, stmt: ast.Stmt, name: str, value: Value) -> None:
        pass

    def after_expr(self, expr: ast.Expr, value: Value) -> None:
        pass


@dataclass
class Frame:
    function: str
    env: dict[str, Value] = field(default_factory=dict)
    current_stmt: Optional[ast.Stmt] = None


@dataclass(frozen=True)
class TestOutcome:
    test: str
    status: str  # "pass" | "assertion-failure" | "runtime-error"
    message: Optional[str] = None
    loc: Optional[SourceLocation] = None
    prints: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.status == "pass"


class UnknownTestError(MiniLangError):
    pass


class _ReturnSignal(Exception):
    def __init__(self, value: Value):
        self.value = value


class Interpreter:
    def __init__(
        self,
        program: ast.Program,
        step_budget: int = DEFAULT_STEP_BUDGET,
        max_call_depth: int = DEFAULT_MAX_CALL_DEPTH,
        hooks: Optional[ExecutionHooks] = None,
    ):
        self.program = program
        self.step_budget = step_budget
        self.max_call_depth = max_call_depth
        self.hooks = hooks
        self.frames: list[Frame] = []
        self.steps = 0
        self.prints: list[str] = []

    # --- entry points ---

    def run_test(self, test: str) -> TestOutcome:
        fn = self.program.by_name.get(test)
        if fn is None:
            raise UnknownTestError(f"unknown test {test!r}")
        if fn.params:
            raise UnknownTestError(f"test {test!r} must take no parameters")
        self.frames = []
        self.steps = 0
        self.prints = []
        try:
            self.call_function(test, [], fn.loc)
        except AssertionFailure as e:
            return TestOutcome(test, "assertion-failure", "assertion failed", e.loc, tuple(self.prints))
        except MiniLangRuntimeError as e:
            return TestOutcome(test, "runtime-error", e.message, e.loc, tuple(self.prints))
        return TestOutcome(test, "pass", None, None, tuple(self.prints))

    def call_function(self, name: str, args: list[Value], call_loc: SourceLocation) -> Value:
        fn = self.program.by_name.get(name)
        if fn is None:
            return self._call_builtin(name, args, call_loc)
        if len(args) != len(fn.params):
            raise MiniLangRuntimeError(
                f"{name}() expects {len(fn.params)} argument(s), got {len(args)}", call_loc
            )
        if len(self.frames) >= self.max_call_depth:
            raise MiniLangRuntimeError("call depth exceeded", call_loc)
        frame = Frame(name, dict(zip(fn.params, args)))
        self.frames.append(frame)
        try:
            self._exec_block(fn.body, frame)
        except _ReturnSignal as r:
            return r.value
        finally:
            self.frames.pop()
        return UNIT

    # --- statements ---

    def _step(self, loc: SourceLocation) -> None:
        self.steps += 1
        if self.steps > self.step_budget:
            raise MiniLangRuntimeError("step budget exceeded", loc)

    def _exec_block(self, body: list[ast.Stmt], frame: Frame) -> None:
        for stmt in body:
            self._exec_stmt(stmt, frame)

    def _exec_stmt(self, stmt: ast.Stmt, frame: Frame) -> None:
        frame.current_stmt = stmt
        self._step(stmt.loc)
        if self.hooks is not None:
            self.hooks.before_statement(stmt, self)
        if isinstance(stmt, (ast.Let, ast.Assign)):
            value = self._eval(stmt.value, frame)
            frame.env[stmt.name] = value
            if self.hooks is not None:
                self.hooks.after_assign(stmt, stmt.name, value)
        elif isinstance(stmt, ast.If):
            cond = self._eval_bool(stmt.cond, frame, "if condition")
            if cond:
                self._exec_block(stmt.then_body, frame)
            elif stmt.else_body is not None:
                self._exec_block(stmt.else_body, frame)
        elif isinstance(stmt, ast.While):
            while True:
                if not self._eval_bool(stmt.cond, frame, "while condition"):
                    break
                self._exec_block(stmt.body, frame)
                # Each re-test of the guard counts as revisiting the statement.
                frame.current_stmt = stmt
                self._step(stmt.loc)
                if self.hooks is not None:
                    self.hooks.before_statement(stmt, self)
        elif isinstance(stmt, ast.Return):
            value = UNIT if stmt.value is None else self._eval(stmt.value, frame)
            raise _ReturnSignal(value)
        elif isinstance(stmt, ast.ExprStmt):
            self._eval(stmt.expr, frame)
        else:
            raise TypeError(f"unknown statement {type(stmt).__name__}")

    # --- expressions ---

    def _eval_bool(self, expr: ast.Expr, frame: Frame, what: str) -> bool:
        value = self._eval(expr, frame)
        if type(value) is not bool:
            raise MiniLangRuntimeError(f"{what} must be bool, got {type_name(value)}", expr.loc)
        return value

    def _eval(self, expr: ast.Expr, frame: Frame) -> Value:
        self._step(expr.loc)
        value = self._eval_inner(expr, frame)
        if self.hooks is not None:
            self.hooks.after_expr(expr, value)
        return value

    def _eval_inner(self, expr: ast.Expr, frame: Frame) -> Value:
        if isinstance(expr, ast.IntLit):
            return wrap64(expr.value)
        if isinstance(expr, (ast.FloatLit, ast.StrLit, ast.BoolLit)):
            return expr.value
        if isinstance(expr, ast.ListLit):
            return tuple(self._eval(item, frame) for item in expr.items)
        if isinstance(expr, ast.Var):
            try:
                return frame.env[expr.name]
            except KeyError:
                raise MiniLangRuntimeError(f"undefined variable {expr.name!r}", expr.loc) from None
        if isinstance(expr, ast.Unary):
            return self._eval_unary(expr, frame)
        if isinstance(expr, ast.Binary):
            return self._eval_binary(expr, frame)
        if isinstance(expr, ast.Call):
            args = [self._eval(a, frame) for a in expr.args]
            return self.call_function(expr.callee, args, expr.loc)
        if isinstance(expr, ast.Index):
            return self._eval_index(expr, frame)
        raise TypeError(f"unknown expression {type(expr).__name__}")

    def _eval_unary(self, expr: ast.Unary, frame: Frame) -> Value:
        v = self._eval(expr.operand, frame)
        if expr.op == "-":
            if type(v) is int:
                return wrap64(-v)
            if type(v) is float:
                return -v
            raise MiniLangRuntimeError(f"unary - needs a number, got {type_name(v)}", expr.loc)
        if expr.op == "!":
            if type(v) is bool:
                return not v
            raise MiniLangRuntimeError(f"! needs a bool, got {type_name(v)}", expr.loc)
        raise TypeError(f"unknown unary operator {expr.op!r}")

    def _eval_binary(self, expr: ast.Binary, frame: Frame) -> Value:
        op = expr.op
        if op in ("&&", "||"):
            left = self._eval(expr.left, frame)
            if type(left) is not bool:
                raise MiniLangRuntimeError(f"{op} needs bools, got {type_name(left)}", expr.loc)
            if op == "&&" and not left:
                return False
            if op == "||" and left:
                return True
            right = self._eval(expr.right, frame)
            if type(right) is not bool:
                raise MiniLangRuntimeError(f"{op} needs bools, got {type_name(right)}", expr.loc)
            return right
        left = self._eval(expr.left, frame)
        right = self._eval(expr.right, frame)
        if op == "==":
            return value_equal(left, right)
        if op == "!=":
            return not value_equal(left, right)
        if op in ("<", "<=", ">", ">="):
            return self._compare(op, left, right, expr.loc)
        if op in ("+", "-", "*", "/", "%"):
            return self._arith(op, left, right, expr.loc)
        raise TypeError(f"unknown binary operator {op!r}")

    @staticmethod
    def _is_number(v: Value) -> bool:
        return type(v) is int or type(v) is float

    def _compare(self, op: str, left: Value, right: Value, loc: SourceLocation) -> bool:
        if self._is_number(left) and self._is_number(right):
            pass
        elif type(left) is str and type(right) is str:
            pass
        else:
            raise MiniLangRuntimeError(
                f"{op} needs two numbers or two strings, got {type_name(left)} and {type_name(right)}",
                loc,
            )
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        return left >= right

    def _arith(self, op: str, left: Value, right: Value, loc: SourceLocation) -> Value:
        if not (self._is_number(left) and self._is_number(right)):
            raise MiniLangRuntimeError(
                f"{op} needs numbers, got {type_name(left)} and {type_name(right)}", loc
            )
        if type(left) is int and type(right) is int:
            if op == "+":
                return wrap64(left + right)
            if op == "-":
                return wrap64(left - right)
            if op == "*":
                return wrap64(left * right)
            if right == 0:
                raise MiniLangRuntimeError("division by zero", loc)
            if op == "/":
                q = abs(left) // abs(right)
                if (left < 0) != (right < 0):
                    q = -q
                return wrap64(q)
            r = abs(left) % abs(right)
            return wrap64(-r if left < 0 else r)
        lf = float(left)
        rf = float(right)
        if op == "+":
            return lf + rf
        if op == "-":
            return lf - rf
        if op == "*":
            return lf * rf
        if op == "%":
            raise MiniLangRuntimeError("% needs integer operands", loc)
        if rf == 0.0:
            raise MiniLangRuntimeError("division by zero", loc)
        return lf / rf

    def _eval_index(self, expr: ast.Index, frame: Frame) -> Value:
        base = self._eval(expr.base, frame)
        index = self._eval(expr.index, frame)
        if type(base) is not tuple:
            raise MiniLangRuntimeError(f"indexing needs a list, got {type_name(base)}", expr.loc)
        if type(index) is not int:
            raise MiniLangRuntimeError(f"index must be int, got {type_name(index)}", expr.loc)
        if index < 0 or index >= len(base):
            raise MiniLangRuntimeError(
                f"index {index} out of range for list of length {len(base)}", expr.loc
            )
        return base[index]

    # --- builtins ---

    def _call_builtin(self, name: str, args: list[Value], loc: SourceLocation) -> Value:
        if name == "sqrt":
            self._need_args(name, args, 1, loc)
            (v,) = args
            if not self._is_number(v):
                raise MiniLangRuntimeError(f"sqrt needs a number, got {type_name(v)}", loc)
            if v < 0:
                raise MiniLangRuntimeError("sqrt of a negative number", loc)
            try:
                return math.sqrt(v)
            except OverflowError:
                raise MiniLangRuntimeError("sqrt argument out of float range", loc) from None
        if name == "abs":
            self._need_args(name, args, 1, loc)
            (v,) = args
            if type(v) is int:
                return wrap64(abs(v))
            if type(v) is float:
                return abs(v)
            raise MiniLangRuntimeError(f"abs needs a number, got {type_name(v)}", loc)
        if name == "len":
            self._need_args(name, args, 1, loc)
            (v,) = args
            if type(v) is tuple or type(v) is str:
                return len(v)
            raise MiniLangRuntimeError(f"len needs a list or string, got {type_name(v)}", loc)
        if name == "floor":
            self._need_args(name, args, 1, loc)
            (v,) = args
            if type(v) is int:
                return v
            if type(v) is float:
                if math.isnan(v) or math.isinf(v):
                    raise MiniLangRuntimeError("floor of a non-finite float", loc)
                return wrap64(math.floor(v))
            raise MiniLangRuntimeError(f"floor needs a number, got {type_name(v)}", loc)
        if name == "print":
            self.prints.append(" ".join(display(a) for a in args))
            return UNIT
        if name == "assert":
            self._need_args(name, args, 1, loc)
            (v,) = args
            if type(v) is not bool:
                raise MiniLangRuntimeError(f"assert needs a bool, got {type_name(v)}", loc)
            if not v:
                raise AssertionFailure(loc)
            return UNIT
        raise MiniLangRuntimeError(f"unknown function {name!r}", loc)

    @staticmethod
    def _need_args(name: str, args: list[Value], count: int, loc: SourceLocation) -> None:
        if len(args) != count:
            raise MiniLangRuntimeError(f"{name}() expects {count} argument(s), got {len(args)}", loc)


def run_test(
    program: ast.Program,
    test: str,
    hooks: Optional[ExecutionHooks] = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> TestOutcome:
    return Interpreter(program, step_budget=step_budget, hooks=hooks).run_test(test)


def run_suite(
    program: ast.Program,
    hooks: Optional[ExecutionHooks] = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> list[TestOutcome]:
    """Run every test_ function in declaration order, each in a fresh interpreter."""
    return [run_test(program, name, hooks=hooks, step_budget=step_budget) for name in program.test_names()]
