"""Static dataflow over MiniLang functions.

Builds a statement-level control-flow graph, runs reaching definitions to a
fixpoint, and derives def-use / use-def chains.  On top of that sits the
affected-variable closure: starting from the variable a statement defines,
follow its uses, pick up every variable defined from them, and repeat until
nothing new appears.  The interprocedural variant walks a captured call stack
outward, seeding the same closure at each call site.

Definition sites are statement locations (parameters use their own location
on the function header).  Use sites are also statement locations; a while
guard's uses sit on the while statement itself.  Control dependence is out of
scope on purpose: conditions contribute use sites, not affected variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .minilang import ast
from .minilang.source import SourceLocation


class AnalysisError(Exception):
    pass


# --- control-flow graph ---


@dataclass
class CfgNode:
    node_id: int
    stmt: ast.Stmt
    uses: frozenset[str]
    defines: Optional[str]
    successors: list[int] = field(default_factory=list)


@dataclass
class Cfg:
    function: ast.FunctionDecl
    nodes: list[CfgNode]
    entry: Optional[int]  # None for an empty body
    param_defs: frozenset[tuple[str, SourceLocation]]


def _expr_vars(exprs: list[ast.Expr]) -> frozenset[str]:
    names = set()
    for expr in exprs:
        for node in ast.walk_expr(expr):
            if isinstance(node, ast.Var):
                names.add(node.name)
    return frozenset(names)


def build_cfg(fn: ast.FunctionDecl) -> Cfg:
    """Statement-level CFG; if/while branch, loops close with a back edge."""
    nodes: list[CfgNode] = []

    def new_node(stmt: ast.Stmt) -> CfgNode:
        node = CfgNode(len(nodes), stmt, _expr_vars(ast.stmt_exprs(stmt)), defined_variable(stmt))
        nodes.append(node)
        return node

    EXIT = -1

    def build_block(body: list[ast.Stmt], next_id: int) -> int:
        """Wire a block so its last statement flows to next_id; returns entry."""
        entry = next_id
        for stmt in reversed(body):
            if isinstance(stmt, ast.If):
                node = new_node(stmt)
                then_entry = build_block(stmt.then_body, entry)
                else_entry = build_block(stmt.else_body, entry) if stmt.else_body is not None else entry
                node.successors = [s for s in (then_entry, else_entry) if s != EXIT]
                if then_entry == EXIT or else_entry == EXIT:
                    # A branch may still fall through via the other arm; the
                    # successor list above already reflects that.
                    pass
                entry = node.node_id
            elif isinstance(stmt, ast.While):
                node = new_node(stmt)
                body_entry = build_block(stmt.body, node.node_id)
                node.successors = []
                if body_entry != EXIT:
                    node.successors.append(body_entry)
                if entry != EXIT:
                    node.successors.append(entry)
                entry = node.node_id
            elif isinstance(stmt, ast.Return):
                node = new_node(stmt)
                node.successors = []
                entry = node.node_id
            else:
                node = new_node(stmt)
                node.successors = [entry] if entry != EXIT else []
                entry = node.node_id
        return entry

    entry = build_block(fn.body, EXIT)
    params = frozenset(zip(fn.params, fn.param_locs))
    return Cfg(fn, nodes, None if entry == EXIT else entry, params)


# --- reaching definitions and chains ---

DefUseChains = dict[tuple[str, SourceLocation], frozenset[SourceLocation]]
UseDefChains = dict[SourceLocation, frozenset[str]]


def _reaching_in(cfg: Cfg) -> dict[int, set[tuple[str, SourceLocation]]]:
    preds: dict[int, list[int]] = {n.node_id: [] for n in cfg.nodes}
    for node in cfg.nodes:
        for succ in node.successors:
            preds[succ].append(node.node_id)

    in_sets: dict[int, set[tuple[str, SourceLocation]]] = {n.node_id: set() for n in cfg.nodes}
    out_sets: dict[int, set[tuple[str, SourceLocation]]] = {n.node_id: set() for n in cfg.nodes}
    if cfg.entry is None:
        return in_sets

    changed = True
    while changed:
        changed = False
        for node in cfg.nodes:
            nid = node.node_id
            new_in = set()
            if nid == cfg.entry:
                new_in |= cfg.param_defs
            for p in preds[nid]:
                new_in |= out_sets[p]
            if node.defines is not None:
                new_out = {pair for pair in new_in if pair[0] != node.defines}
                new_out.add((node.defines, node.stmt.loc))
            else:
                new_out = set(new_in)
            if new_in != in_sets[nid] or new_out != out_sets[nid]:
                in_sets[nid] = new_in
                out_sets[nid] = new_out
                changed = True
    return in_sets


def def_use_analysis(fn: ast.FunctionDecl) -> tuple[DefUseChains, UseDefChains]:
    """Def-use and use-def chains from a reaching-definitions fixpoint.

    DU maps (variable, definition site) to the statement locations that may
    read that definition.  UD maps a use site to the variable its statement
    assigns (empty set when it assigns nothing).
    """
    cfg = build_cfg(fn)
    in_sets = _reaching_in(cfg)
    du: dict[tuple[str, SourceLocation], set[SourceLocation]] = {}
    ud: dict[SourceLocation, set[str]] = {}
    for pair in cfg.param_defs:
        du.setdefault(pair, set())
    for node in cfg.nodes:
        if node.defines is not None:
            du.setdefault((node.defines, node.stmt.loc), set())
        if not node.uses:
            continue
        site = node.stmt.loc
        ud.setdefault(site, set())
        if node.defines is not None:
            ud[site].add(node.defines)
        for var, dloc in in_sets[node.node_id]:
            if var in node.uses:
                du.setdefault((var, dloc), set()).add(site)
    return (
        {pair: frozenset(sites) for pair, sites in du.items()},
        {site: frozenset(names) for site, names in ud.items()},
    )


def defined_variable(stmt: ast.Stmt) -> Optional[str]:
    """The left-hand side of a let/assignment; None for anything else."""
    if isinstance(stmt, (ast.Let, ast.Assign)):
        return stmt.name
    return None


# --- affected-variable closure ---


@dataclass(frozen=True)
class AffectedSet:
    """Variables and sites downstream of one seed statement in one function."""

    function: str
    seed: Optional[SourceLocation]
    seed_callee: Optional[str]  # for outer frames: the function invoked at the seed
    variables: frozenset[str]
    def_sites: frozenset[tuple[str, SourceLocation]]
    use_sites: frozenset[tuple[str, SourceLocation]]
    extra_locations: frozenset[SourceLocation]
    diagnostic: Optional[str]

    @property
    def locations(self) -> frozenset[SourceLocation]:
        locs = {loc for _, loc in self.def_sites} | {loc for _, loc in self.use_sites}
        return frozenset(locs | self.extra_locations)

    def rows(self) -> list[tuple[str, str, list[SourceLocation]]]:
        """(function, variable, locations) rows; extra locations use ''."""
        per_var: dict[str, set[SourceLocation]] = {}
        for var, loc in self.def_sites | self.use_sites:
            per_var.setdefault(var, set()).add(loc)
        out = [(self.function, var, sorted(per_var[var])) for var in sorted(per_var)]
        if self.extra_locations:
            out.append((self.function, "", sorted(self.extra_locations)))
        return out


def _empty_affected(
    fn_name: str,
    seed: Optional[SourceLocation],
    seed_callee: Optional[str],
    extra: frozenset[SourceLocation],
    diagnostic: Optional[str],
) -> AffectedSet:
    return AffectedSet(
        fn_name, seed, seed_callee, frozenset(), frozenset(), frozenset(), extra, diagnostic
    )


def affected_variables(
    fn: ast.FunctionDecl,
    stmt: ast.Stmt,
    seed_callee: Optional[str] = None,
) -> AffectedSet:
    """Worklist closure from the statement's defined variable.

    Pops are bounded by the number of (variable, definition site) pairs in
    the function, so the loop always terminates.
    """
    d = defined_variable(stmt)
    if d is None:
        return _empty_affected(
            fn.name, stmt.loc, seed_callee, frozenset(), "statement defines no variable"
        )
    du, ud = def_use_analysis(fn)
    seed_pair = (d, stmt.loc)
    seen = {seed_pair}
    variables = {d}
    def_sites = {seed_pair}
    use_sites: set[tuple[str, SourceLocation]] = set()
    work = [seed_pair]
    while work:
        var, dloc = work.pop()
        for use in sorted(du.get((var, dloc), ())):
            use_sites.add((var, use))
            for w in ud.get(use, ()):
                pair = (w, use)
                if pair not in seen:
                    seen.add(pair)
                    variables.add(w)
                    def_sites.add(pair)
                    work.append(pair)
    return AffectedSet(
        fn.name,
        stmt.loc,
        seed_callee,
        frozenset(variables),
        frozenset(def_sites),
        frozenset(use_sites),
        frozenset(),
        None,
    )


# --- call stacks and interprocedural propagation ---


@dataclass(frozen=True)
class StackFrame:
    function: str
    site: SourceLocation  # innermost: the target statement; outer: the call statement


@dataclass(frozen=True)
class CallStackTrace:
    frames: tuple[StackFrame, ...]  # innermost first
    diagnostic: Optional[str] = None


def _statement_at(fn: ast.FunctionDecl, site: SourceLocation) -> ast.Stmt:
    for stmt in ast.walk_stmts(fn.body):
        if stmt.loc == site:
            return stmt
    raise AnalysisError(f"no statement at {site} in function {fn.name!r}")


def _calls_in(stmt: ast.Stmt, callee: str) -> bool:
    for expr in ast.stmt_exprs(stmt):
        for node in ast.walk_expr(expr):
            if isinstance(node, ast.Call) and node.callee == callee:
                return True
    return False


def interprocedural_affected(stack: CallStackTrace, program: ast.Program) -> tuple[AffectedSet, ...]:
    """One AffectedSet per frame, innermost first.

    Outer frames re-run the closure seeded at their call statement.  A call
    whose result is discarded (guard conditions, bare call statements)
    contributes its location but no variables.
    """
    out: list[AffectedSet] = []
    for idx, frame in enumerate(stack.frames):
        fn = program.by_name.get(frame.function)
        if fn is None:
            raise AnalysisError(f"stack frame names unknown function {frame.function!r}")
        stmt = _statement_at(fn, frame.site)
        callee = stack.frames[idx - 1].function if idx > 0 else None
        if callee is not None and not _calls_in(stmt, callee):
            raise AnalysisError(
                f"statement at {frame.site} does not call {callee!r}; stale stack?"
            )
        if defined_variable(stmt) is None:
            diagnostic = None if idx > 0 else "statement defines no variable"
            out.append(
                _empty_affected(fn.name, stmt.loc, callee, frozenset({stmt.loc}), diagnostic)
            )
        else:
            out.append(affected_variables(fn, stmt, seed_callee=callee))
    return tuple(out)
