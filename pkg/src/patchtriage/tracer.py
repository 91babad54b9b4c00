"""Dynamic tracing: call-stack capture, hook planning, and indexed trace events.

The static side (analysis) decides which variables and sites matter; this
module turns those decisions into interpreter hooks, runs a test with the
hooks installed, and emits one event per dynamic evaluation of a hooked
site.  Events are indexed by occurrence so that traces from different
program variants can later be aligned row-by-row even when loop iteration
counts differ.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .analysis import AffectedSet, CallStackTrace, StackFrame
from .minilang import ast
from .minilang.errors import MiniLangError
from .minilang.interp import (
    DEFAULT_MAX_CALL_DEPTH,
    DEFAULT_STEP_BUDGET,
    ExecutionHooks,
    Interpreter,
    TestOutcome,
)
from .minilang.patch import Region
from .minilang.printer import print_expr
from .minilang.source import SourceLocation
from .minilang.values import UNIT, Value, render

__all__ = [
    "TraceError",
    "TraceFormatError",
    "TraceEvent",
    "HookPoint",
    "HookPlan",
    "TraceResult",
    "VALUE_LIMIT",
    "serialize_value",
    "capture_stack",
    "plan_hooks",
    "trace_run",
    "serialize_trace",
    "deserialize_trace",
]

EVENT_KINDS = ("def", "use", "subexpr", "call")

# Serialized values longer than this are cut; the full length is kept in the
# type tag so the table stays narrow without losing the fact of truncation.
VALUE_LIMIT = 256


class TraceError(MiniLangError):
    """Hook planning or tracing failed."""


class TraceFormatError(TraceError):
    """A serialized trace record could not be parsed."""


def serialize_value(value: Value) -> tuple[str, str]:
    """Render a runtime value as a (type, text) pair of plain strings.

    Floats use repr, the shortest decimal form that round-trips to the same
    64-bit value, so equality of serialized text is equality of values.
    Text longer than VALUE_LIMIT is truncated and the full length recorded
    as a suffix on the type tag ("string@1024").
    """
    if value is UNIT:
        base, text = "unit", "()"
    elif type(value) is bool:
        base, text = "bool", ("true" if value else "false")
    elif type(value) is int:
        base, text = "int", str(value)
    elif type(value) is float:
        base, text = "float", repr(value)
    elif type(value) is str:
        base, text = "string", value
    elif type(value) is tuple:
        base, text = "list", render(value)
    else:
        raise TraceError(f"cannot serialize value of type {type(value).__name__}")
    if len(text) > VALUE_LIMIT:
        return f"{base}@{len(text)}", text[:VALUE_LIMIT]
    return base, text


@dataclass(frozen=True)
class TraceEvent:
    """One logged runtime value.

    occurrence is a 1-based index over dynamic evaluations of this
    (variant, location, label) triple, in emission order; it is the key
    that aligns loop iterations across variants.
    """

    variant: str
    location: SourceLocation
    kind: str
    label: str
    occurrence: int
    value_type: str
    value: str


@dataclass(frozen=True)
class HookPoint:
    """A planned instrumentation site: where, what kind, and the label."""

    location: SourceLocation
    kind: str
    label: str


@dataclass
class HookPlan:
    """Instrumentation plan bound to one specific Program object.

    points is the declarative surface (used for reporting and plan-soundness
    checks); the private tables map runtime AST identity to points so the
    interpreter hooks can fire without re-matching expressions.
    """

    points: tuple[HookPoint, ...]
    _def_points: dict[tuple[str, SourceLocation], HookPoint] = field(repr=False, default_factory=dict)
    _expr_points: dict[int, HookPoint] = field(repr=False, default_factory=dict)
    # Strong references keep id()-keyed entries valid for the plan's lifetime.
    _expr_nodes: list[ast.Expr] = field(repr=False, default_factory=list)

    def is_empty(self) -> bool:
        return not self.points


@dataclass(frozen=True)
class TraceResult:
    """Events plus the test outcome of the instrumented run.

    truncated is set when the step budget cut the run short; the events
    gathered up to that point are still returned.
    """

    events: tuple[TraceEvent, ...]
    outcome: TestOutcome
    truncated: bool


class _CaptureSignal(Exception):
    def __init__(self, frames: tuple[StackFrame, ...]):
        self.frames = frames


class _CaptureHooks(ExecutionHooks):
    def __init__(self, target: SourceLocation):
        self.target = target

    def before_statement(self, stmt: ast.Stmt, interp: Interpreter) -> None:
        if stmt.loc != self.target:
            return
        frames = []
        for fr in reversed(interp.frames):
            site = fr.current_stmt.loc if fr.current_stmt is not None else self.target
            frames.append(StackFrame(fr.function, site))
        raise _CaptureSignal(tuple(frames))


def capture_stack(
    program: ast.Program,
    test: str,
    target: SourceLocation,
    *,
    step_budget: int = DEFAULT_STEP_BUDGET,
    max_call_depth: int = DEFAULT_MAX_CALL_DEPTH,
) -> CallStackTrace:
    """Run a test and snapshot the frame stack at the target statement.

    The snapshot happens at the first dynamic execution of the statement
    and aborts the run; the innermost frame's site is the target itself,
    outer frames carry the statement containing their active call.  If the
    test finishes without reaching the target, the trace is empty and
    carries a diagnostic instead.
    """
    interp = Interpreter(
        program,
        step_budget=step_budget,
        max_call_depth=max_call_depth,
        hooks=_CaptureHooks(target),
    )
    try:
        outcome = interp.run_test(test)
    except _CaptureSignal as sig:
        return CallStackTrace(sig.frames, None)
    detail = f"test outcome: {outcome.status}"
    return CallStackTrace(
        (),
        f"statement at {target.file}:{target.line} never executed by {test!r} ({detail})",
    )


def _arithmetic(node: ast.Expr) -> bool:
    if isinstance(node, ast.Binary):
        return node.op in ("+", "-", "*", "/", "%")
    if isinstance(node, ast.Unary):
        return node.op == "-"
    return False


def _qualifying(node: ast.Expr) -> bool:
    """A node whose runtime value is worth logging on its own: a call
    (test-harness builtins excluded) or a compound arithmetic expression."""
    if isinstance(node, ast.Call):
        return node.callee not in ("print", "assert")
    return _arithmetic(node)


def _mentions(node: ast.Expr, variables: frozenset[str]) -> bool:
    return any(isinstance(n, ast.Var) and n.name in variables for n in ast.walk_expr(node))


def _hook_exprs(expr: ast.Expr, variables: frozenset[str]) -> list[ast.Expr]:
    """Innermost qualifying nodes: each use of an affected variable is
    covered by the smallest call or arithmetic expression enclosing it."""
    out: list[ast.Expr] = []

    def visit(node: ast.Expr) -> bool:
        """Returns True when some node in this subtree was hooked."""
        hooked_below = False
        for child in _children(node):
            if visit(child):
                hooked_below = True
        if hooked_below:
            return True
        if _qualifying(node) and _mentions(node, variables):
            out.append(node)
            return True
        return False

    visit(expr)
    return out


def _children(node: ast.Expr) -> list[ast.Expr]:
    if isinstance(node, ast.Unary):
        return [node.operand]
    if isinstance(node, ast.Binary):
        return [node.left, node.right]
    if isinstance(node, ast.Call):
        return list(node.args)
    if isinstance(node, ast.Index):
        return [node.base, node.index]
    if isinstance(node, ast.ListLit):
        return list(node.items)
    return []


def _outermost_calls(expr: ast.Expr, callee: str) -> list[ast.Call]:
    out: list[ast.Call] = []

    def visit(node: ast.Expr) -> None:
        if isinstance(node, ast.Call) and node.callee == callee:
            out.append(node)
            return
        for child in _children(node):
            visit(child)

    visit(expr)
    return out


def _suppressed(loc: SourceLocation, region: Optional[Region]) -> bool:
    return region is not None and region.contains_line(loc.file, loc.line)


def plan_hooks(
    affected: Sequence[AffectedSet],
    program: ast.Program,
    region: Optional[Region] = None,
) -> HookPlan:
    """Build the instrumentation plan for a set of per-frame affected sets.

    Hook kinds:
      def      one per affected definition site (value after the assignment)
      use      one per affected variable per use-site statement
      subexpr  one per innermost call/arithmetic expression enclosing an
               affected-variable use
      call     the invocation carrying the seed value out of a frame whose
               call-site statement assigns nothing

    Use, subexpr, and call hooks inside the patched region are dropped:
    their shapes are variant-specific by construction and would never align.
    Definition hooks stay, since the values a variant writes at the patch
    site are exactly what the comparison is after.
    """
    plan = HookPlan(points=())
    points: list[HookPoint] = []
    seen: set[HookPoint] = set()

    def add(point: HookPoint) -> None:
        if point not in seen:
            seen.add(point)
            points.append(point)

    for aset in affected:
        fn = program.by_name.get(aset.function)
        if fn is None:
            raise TraceError(f"function {aset.function!r} not found in program (stale plan)")
        stmts: dict[SourceLocation, ast.Stmt] = {}
        for stmt in ast.walk_stmts(fn.body):
            stmts[stmt.loc] = stmt

        def located(loc: SourceLocation) -> ast.Stmt:
            stmt = stmts.get(loc)
            if stmt is None:
                raise TraceError(
                    f"no statement at {loc.file}:{loc.line}:{loc.col} "
                    f"in {aset.function!r} (stale plan)"
                )
            return stmt

        for var, loc in sorted(aset.def_sites):
            located(loc)
            key = (var, loc)
            point = HookPoint(loc, "def", var)
            add(point)
            plan._def_points[key] = point

        use_locs = sorted({loc for _, loc in aset.use_sites})
        for loc in use_locs:
            stmt = located(loc)
            if _suppressed(loc, region):
                continue
            use_vars = {var for var, l in aset.use_sites if l == loc}
            for expr in ast.stmt_exprs(stmt):
                for node in ast.walk_expr(expr):
                    if isinstance(node, ast.Var) and node.name in use_vars:
                        point = HookPoint(loc, "use", node.name)
                        add(point)
                        plan._expr_points[id(node)] = point
                        plan._expr_nodes.append(node)
                for node in _hook_exprs(expr, aset.variables):
                    point = HookPoint(loc, "subexpr", print_expr(node))
                    add(point)
                    plan._expr_points[id(node)] = point
                    plan._expr_nodes.append(node)

        if aset.seed_callee is not None:
            for loc in sorted(aset.extra_locations):
                stmt = located(loc)
                if _suppressed(loc, region):
                    continue
                for expr in ast.stmt_exprs(stmt):
                    for node in _outermost_calls(expr, aset.seed_callee):
                        point = HookPoint(loc, "call", print_expr(node))
                        add(point)
                        plan._expr_points[id(node)] = point
                        plan._expr_nodes.append(node)

    plan.points = tuple(points)
    return plan


class _TraceHooks(ExecutionHooks):
    def __init__(self, plan: HookPlan, variant: str):
        self.plan = plan
        self.variant = variant
        self.events: list[TraceEvent] = []
        self.counters: dict[tuple[SourceLocation, str], int] = {}

    def _emit(self, point: HookPoint, value: Value) -> None:
        key = (point.location, point.label)
        occ = self.counters.get(key, 0) + 1
        self.counters[key] = occ
        vtype, text = serialize_value(value)
        self.events.append(
            TraceEvent(self.variant, point.location, point.kind, point.label, occ, vtype, text)
        )

    def after_assign(self, stmt: ast.Stmt, name: str, value: Value) -> None:
        point = self.plan._def_points.get((name, stmt.loc))
        if point is not None:
            self._emit(point, value)

    def after_expr(self, expr: ast.Expr, value: Value) -> None:
        point = self.plan._expr_points.get(id(expr))
        if point is not None:
            self._emit(point, value)


def trace_run(
    program: ast.Program,
    test: str,
    plan: HookPlan,
    variant: str,
    *,
    step_budget: int = DEFAULT_STEP_BUDGET,
    max_call_depth: int = DEFAULT_MAX_CALL_DEPTH,
) -> TraceResult:
    """Run a test with the plan's hooks installed and collect events.

    Hooks observe and never mutate, so the outcome (status, location,
    prints) is identical to an uninstrumented run.  A run that blows the
    step budget still returns the events gathered so far, marked truncated.
    """
    hooks = _TraceHooks(plan, variant)
    interp = Interpreter(
        program, step_budget=step_budget, max_call_depth=max_call_depth, hooks=hooks
    )
    outcome = interp.run_test(test)
    truncated = outcome.status == "runtime-error" and outcome.message == "step budget exceeded"
    return TraceResult(tuple(hooks.events), outcome, truncated)


# --- trace files ---
#
# One record per line, tab-separated, fields in fixed order:
#   variant  file  line  col  kind  label  occ  type  value
# Tabs, newlines, and backslashes inside a field are escaped so the format
# stays line- and field-delimited under arbitrary string values.

_ESCAPES = (("\\", "\\\\"), ("\t", "\\t"), ("\n", "\\n"), ("\r", "\\r"))


def _escape(text: str) -> str:
    for raw, esc in _ESCAPES:
        text = text.replace(raw, esc)
    return text


def _unescape(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text):
                raise ValueError("dangling escape")
            nxt = text[i + 1]
            if nxt == "\\":
                out.append("\\")
            elif nxt == "t":
                out.append("\t")
            elif nxt == "n":
                out.append("\n")
            elif nxt == "r":
                out.append("\r")
            else:
                raise ValueError(f"unknown escape \\{nxt}")
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def serialize_trace(events: Iterable[TraceEvent]) -> bytes:
    lines = []
    for e in events:
        lines.append(
            "\t".join(
                (
                    _escape(e.variant),
                    _escape(e.location.file),
                    str(e.location.line),
                    str(e.location.col),
                    e.kind,
                    _escape(e.label),
                    str(e.occurrence),
                    _escape(e.value_type),
                    _escape(e.value),
                )
            )
        )
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_trace(data: bytes | str) -> tuple[TraceEvent, ...]:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    events: list[TraceEvent] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if line == "":
            continue
        fields = line.split("\t")
        if len(fields) != 9:
            raise TraceFormatError(f"line {lineno}: expected 9 fields, got {len(fields)}")
        variant_raw, file_raw, line_s, col_s, kind, label_raw, occ_s, type_raw, value_raw = fields
        try:
            variant = _unescape(variant_raw)
            file = _unescape(file_raw)
            label = _unescape(label_raw)
            value_type = _unescape(type_raw)
            value = _unescape(value_raw)
        except ValueError as e:
            raise TraceFormatError(f"line {lineno}: {e}") from None
        try:
            line_no = int(line_s)
            col_no = int(col_s)
            occ = int(occ_s)
        except ValueError:
            raise TraceFormatError(f"line {lineno}: non-integer line/col/occ") from None
        if kind not in EVENT_KINDS:
            raise TraceFormatError(f"line {lineno}: unknown kind {kind!r}")
        if occ < 1:
            raise TraceFormatError(f"line {lineno}: occurrence must be >= 1, got {occ}")
        events.append(
            TraceEvent(
                variant, SourceLocation(file, line_no, col_no), kind, label, occ, value_type, value
            )
        )
    return tuple(events)
