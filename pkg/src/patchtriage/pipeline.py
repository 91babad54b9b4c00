"""End-to-end composition: load a bundle, sample, trace variants, align.

Each phase is tagged with a stage name so callers can report where a run
fell over.  Trace events from patched variants are mapped back into the
unpatched program's line numbering, which is what makes rows from
different variants comparable at all.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import corpus
from .analysis import AffectedSet, CallStackTrace, interprocedural_affected
from .compare import BUGGY, ComparisonTable, align, summarize
from .corpus import CorpusError, PatchCorpus
from .minilang import (
    MiniLangError,
    Region,
    SourceLocation,
    TestOutcome,
    apply_patch,
    first_statement_in_region,
    line_delta,
)
from .minilang import ast
from .sampler import CutPolicy, GapCut, TriageSession, sample
from .tracer import TraceEvent, capture_stack, plan_hooks, trace_run

DEFAULT_ROW_BUDGET = 5

STAGES = ("load", "validate", "sample", "analyze", "trace", "align")


class PipelineError(Exception):
    """A stage failure; str(err) already names the stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.reason = message


@dataclass(frozen=True)
class VariantRun:
    """One traced variant, with events in unpatched-program coordinates."""

    variant: str
    events: tuple[TraceEvent, ...]
    outcome: TestOutcome
    truncated: bool


@dataclass(frozen=True)
class RunResult:
    bundle: PatchCorpus
    bundle_path: str
    session: TriageSession
    rejected: tuple[tuple[str, str], ...]
    stack: CallStackTrace
    affected: tuple[AffectedSet, ...]
    runs: tuple[VariantRun, ...]  # buggy first, then ranked order
    table: ComparisonTable
    summary: ComparisonTable
    row_budget: int

    def run_for(self, variant: str) -> VariantRun:
        for run in self.runs:
            if run.variant == variant:
                return run
        raise KeyError(variant)

    @property
    def traces(self) -> dict[str, tuple[TraceEvent, ...]]:
        return {run.variant: run.events for run in self.runs}


def _shift_loc(loc: SourceLocation, region: Region, delta: int) -> SourceLocation:
    if delta and loc.file == region.file and loc.line > region.end_line:
        return replace(loc, line=loc.line + delta)
    return loc


def _region_defs(
    program: ast.Program, function: str, file: str, start: int, end: int
) -> frozenset[tuple[str, SourceLocation]]:
    """Definition sites of the statements a variant puts inside the region."""
    fn = program.by_name.get(function)
    if fn is None:
        return frozenset()
    found = set()
    for stmt in ast.walk_stmts(fn.body):
        if not isinstance(stmt, (ast.Let, ast.Assign)):
            continue
        if stmt.loc.file == file and start <= stmt.loc.line <= end:
            found.add((stmt.name, stmt.loc))
    return frozenset(found)


def variant_affected(
    affected: Sequence[AffectedSet],
    program: ast.Program,
    region: Region,
    delta: int,
) -> tuple[AffectedSet, ...]:
    """Re-site the analysis results for a patched program.

    Sites past the region slide by the patch's line delta; sites inside it
    are dropped and replaced by the variant's own in-region definitions,
    since the buggy region's statement shapes no longer exist there.
    """
    span_end = region.end_line + delta
    host = affected[0].function if affected else None
    shifted: list[AffectedSet] = []
    for aset in affected:
        def_sites = frozenset(
            (var, _shift_loc(loc, region, delta))
            for var, loc in aset.def_sites
            if not region.contains_line(loc.file, loc.line)
        )
        if aset.function == host:
            def_sites |= _region_defs(program, aset.function, region.file, region.start_line, span_end)
        use_sites = frozenset(
            (var, _shift_loc(loc, region, delta))
            for var, loc in aset.use_sites
            if not region.contains_line(loc.file, loc.line)
        )
        extra = frozenset(
            _shift_loc(loc, region, delta)
            for loc in aset.extra_locations
            if not region.contains_line(loc.file, loc.line)
        )
        seed = aset.seed
        if seed is not None and not region.contains_line(seed.file, seed.line):
            seed = _shift_loc(seed, region, delta)
        shifted.append(
            replace(aset, seed=seed, def_sites=def_sites, use_sites=use_sites, extra_locations=extra)
        )
    return tuple(shifted)


def _normalize_events(
    events: Sequence[TraceEvent], region: Region, delta: int
) -> tuple[TraceEvent, ...]:
    """Map patched-coordinate event locations back to buggy line numbers.

    Shifting can fold a below-region site onto a line the replacement also
    occupies, so occurrence counters are recounted in the target coordinates;
    a trace must never hold two events with one (location, label, occurrence)
    slot.  When nothing folds together the recount is the identity.
    """
    if delta == 0:
        return tuple(events)
    span_end = region.end_line + delta
    out = []
    counters: dict[tuple[SourceLocation, str], int] = {}
    for event in events:
        loc = event.location
        if loc.file == region.file and loc.line > span_end:
            loc = replace(loc, line=loc.line - delta)
        occ = counters.get((loc, event.label), 0) + 1
        counters[(loc, event.label)] = occ
        if loc != event.location or occ != event.occurrence:
            event = replace(event, location=loc, occurrence=occ)
        out.append(event)
    return tuple(out)


def trace_variant(
    program: ast.Program,
    test: str,
    affected: Sequence[AffectedSet],
    region: Region,
    delta: int,
    variant: str,
) -> VariantRun:
    """Plan hooks against one variant, run its failing test, normalize."""
    span_end = region.end_line + delta
    suppress = Region(region.file, region.start_line, span_end) if span_end >= region.start_line else None
    sited = variant_affected(affected, program, region, delta)
    plan = plan_hooks(sited, program, region=suppress)
    result = trace_run(program, test, plan, variant)
    return VariantRun(
        variant=variant,
        events=_normalize_events(result.events, region, delta),
        outcome=result.outcome,
        truncated=result.truncated,
    )


def trace_candidate(bundle: PatchCorpus, affected: Sequence[AffectedSet], patch_id: str) -> VariantRun:
    """Trace one plausible candidate by id (used when a cluster opens up)."""
    cand = bundle.candidate(patch_id)
    program = corpus.apply_candidate(bundle, cand)
    delta = line_delta(bundle.region, cand.replacement_text)
    return trace_variant(program, bundle.failing_test, affected, bundle.region, delta, patch_id)


def build_table(
    runs: Mapping[str, VariantRun], ranked_ids: Sequence[str], row_budget: int
) -> tuple[ComparisonTable, ComparisonTable]:
    """Align buggy + the given patches (in order) and summarize."""
    traces: dict[str, Sequence[TraceEvent]] = {BUGGY: runs[BUGGY].events}
    for pid in ranked_ids:
        traces[pid] = runs[pid].events
    table = align(traces)
    return table, summarize(table, row_budget)


def analyze_bundle(bundle: PatchCorpus) -> tuple[CallStackTrace, tuple[AffectedSet, ...]]:
    """Stack capture at the buggy region plus the def-use closure per frame."""
    seed_stmt = first_statement_in_region(bundle.program, bundle.region)
    if seed_stmt is None:
        raise PipelineError("analyze", f"region {bundle.region} holds no statement")
    stack = capture_stack(bundle.program, bundle.failing_test, seed_stmt.loc)
    if not stack.frames:
        raise PipelineError(
            "analyze", stack.diagnostic or f"{seed_stmt.loc} never executed by {bundle.failing_test!r}"
        )
    affected = interprocedural_affected(stack, bundle.program)
    return stack, affected


def run_bundle(
    path: str | Path,
    *,
    policy: Optional[CutPolicy] = None,
    clustering: bool = True,
    centroid_mode: str = "min",
    row_budget: int = DEFAULT_ROW_BUDGET,
) -> RunResult:
    """The whole triage pipeline for one bundle, failing test only."""
    if row_budget < 1:
        raise PipelineError("align", f"row budget must be >= 1, got {row_budget}")
    policy = GapCut() if policy is None else policy

    try:
        bundle = corpus.load(path)
    except CorpusError as e:
        raise PipelineError("load", str(e)) from e

    try:
        plausible, rejected = corpus.validate(bundle)
    except (CorpusError, MiniLangError) as e:
        raise PipelineError("validate", str(e)) from e

    try:
        session = sample(
            plausible,
            policy,
            clustering=clustering,
            centroid_mode=centroid_mode,
            buggy_tokens=bundle.buggy_tokens(),
        )
    except ValueError as e:
        raise PipelineError("sample", str(e)) from e

    try:
        stack, affected = analyze_bundle(bundle)
    except MiniLangError as e:
        raise PipelineError("analyze", str(e)) from e

    try:
        runs = [
            trace_variant(bundle.program, bundle.failing_test, affected, bundle.region, 0, BUGGY)
        ]
        for entry in session.ranked.entries:
            runs.append(trace_candidate(bundle, affected, entry.patch_id))
    except MiniLangError as e:
        raise PipelineError("trace", str(e)) from e

    try:
        by_variant = {run.variant: run for run in runs}
        ranked_ids = [entry.patch_id for entry in session.ranked.entries]
        table, summary = build_table(by_variant, ranked_ids, row_budget)
    except Exception as e:
        raise PipelineError("align", str(e)) from e

    return RunResult(
        bundle=bundle,
        bundle_path=str(path),
        session=session,
        rejected=tuple(rejected),
        stack=stack,
        affected=affected,
        runs=tuple(runs),
        table=table,
        summary=summary,
        row_budget=row_budget,
    )


# --- batch evaluation ---

EVAL_MODES = ("clustered", "no-cluster", "original")


@dataclass(frozen=True)
class EvalRow:
    bundle: str
    truth: str
    ranks: dict[str, int]  # mode -> 1-based rank of the correct patch


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    warnings: tuple[str, ...]

    def ranks(self, mode: str) -> list[int]:
        return [row.ranks[mode] for row in self.rows]

    def mean(self, mode: str) -> float:
        return statistics.mean(self.ranks(mode))

    def median(self, mode: str) -> float:
        return float(statistics.median(self.ranks(mode)))


def similarity_order(cluster_members: Sequence[str], session: TriageSession) -> list[str]:
    """Cluster members closest-to-buggy first, the order expansion exposes."""
    patches = {p.id: p for p in session.patches}
    return sorted(
        cluster_members,
        key=lambda pid: (patches[pid].distance_to_buggy, patches[pid].original_rank, pid),
    )


def clustered_rank(session: TriageSession, target: str) -> Optional[int]:
    """Rank the target counts at when reached through its cluster.

    The centroid sits at its ranked position; a buried member costs its
    position in the within-cluster similarity order beyond the centroid.
    """
    for entry in session.ranked.entries:
        if entry.cluster_id is None:
            continue
        members = session.cluster_by_id(entry.cluster_id).members
        if target not in members:
            continue
        centroid_rank = session.ranked.position(entry.patch_id)
        within = similarity_order(members, session).index(target) + 1
        assert centroid_rank is not None
        return centroid_rank + within - 1
    return session.ranked.position(target)


def eval_bundles(
    paths: Sequence[str | Path],
    *,
    policy: Optional[CutPolicy] = None,
    centroid_mode: str = "min",
) -> EvalReport:
    """Rank the known-correct patch under each mode for every bundle."""
    policy = GapCut() if policy is None else policy
    rows: list[EvalRow] = []
    warnings: list[str] = []
    for path in paths:
        try:
            truth = corpus.load_truth(path)
            if truth is None:
                warnings.append(f"{path}: no truth file, skipped")
                continue
            bundle = corpus.load(path)
            plausible, _ = corpus.validate(bundle)
        except CorpusError as e:
            warnings.append(f"{path}: {e}, skipped")
            continue
        if not any(p.id == truth for p in plausible):
            warnings.append(f"{path}: correct patch {truth!r} is not plausible, skipped")
            continue
        buggy_tokens = bundle.buggy_tokens()

        clustered = sample(plausible, policy, clustering=True, centroid_mode=centroid_mode,
                           buggy_tokens=buggy_tokens)
        flat = sample(plausible, policy, clustering=False, buggy_tokens=buggy_tokens)
        original = sorted(plausible, key=lambda p: p.original_rank)

        ranks = {
            "clustered": clustered_rank(clustered, truth),
            "no-cluster": flat.ranked.position(truth),
            "original": next(i for i, p in enumerate(original, start=1) if p.id == truth),
        }
        assert all(r is not None for r in ranks.values())
        rows.append(EvalRow(bundle.name, truth, {m: int(r) for m, r in ranks.items()}))
    if not rows:
        raise PipelineError("load", "no evaluable bundles (every input was skipped)")
    return EvalReport(tuple(rows), tuple(warnings))
