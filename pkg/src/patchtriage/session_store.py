"""Session files: everything a run produced, reloadable bit-for-bit.

One JSON document carries the bundle snapshot (sources included, so a
file stands alone), the triage session, analysis results, per-variant
traces, and both comparison tables.  Serialization is canonical: sorted
keys, fixed separators, fractions as "p/q" strings.  Writing what was
just read yields byte-identical output, which is what makes "the session
you saved is the session you reopened" checkable at all.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from . import __version__
from .analysis import AffectedSet, CallStackTrace, StackFrame
from .compare import ComparisonTable, table_from_json, table_to_json
from .corpus import Candidate, PatchCorpus
from .minilang import Region, SourceLocation, TestOutcome, parse
from .pipeline import RunResult, VariantRun
from .sampler import (
    Cluster,
    CutPolicy,
    Dendrogram,
    DendroNode,
    FeedbackEvent,
    FixedKCut,
    GapCut,
    Patch,
    RankedEntry,
    RankedSample,
    ThresholdCut,
    TriageSession,
)
from .distance import DistanceMatrix
from .tracer import EVENT_KINDS, TraceEvent

FORMAT = 1


class SessionStoreError(Exception):
    pass


def _frac(value: Fraction) -> str:
    return str(value)


def _parse_frac(text: Any) -> Fraction:
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise SessionStoreError(f"bad fraction {text!r}") from None


def _loc(data: Any) -> SourceLocation:
    try:
        return SourceLocation.from_json(data)
    except (IndexError, TypeError, ValueError):
        raise SessionStoreError(f"bad source location {data!r}") from None


# --- sampler types ---


def policy_to_json(policy: CutPolicy) -> dict:
    if isinstance(policy, GapCut):
        return {"kind": "gap", "k_max": policy.k_max}
    if isinstance(policy, ThresholdCut):
        return {"kind": "threshold", "threshold": _frac(policy.threshold)}
    if isinstance(policy, FixedKCut):
        return {"kind": "k", "k": policy.k}
    raise SessionStoreError(f"unknown cut policy {policy!r}")


def policy_from_json(data: dict) -> CutPolicy:
    kind = data.get("kind")
    if kind == "gap":
        return GapCut(k_max=int(data["k_max"]))
    if kind == "threshold":
        return ThresholdCut(_parse_frac(data["threshold"]))
    if kind == "k":
        return FixedKCut(int(data["k"]))
    raise SessionStoreError(f"unknown cut policy kind {kind!r}")


def _patch_to_json(patch: Patch) -> dict:
    return {
        "id": patch.id,
        "original_rank": patch.original_rank,
        "replacement_text": patch.replacement_text,
        "tokens": list(patch.tokens),
        "distance_to_buggy": patch.distance_to_buggy,
    }


def _patch_from_json(data: dict) -> Patch:
    return Patch(
        id=str(data["id"]),
        original_rank=int(data["original_rank"]),
        replacement_text=str(data["replacement_text"]),
        tokens=tuple(str(t) for t in data["tokens"]),
        distance_to_buggy=int(data["distance_to_buggy"]),
    )


def session_to_json(session: TriageSession) -> dict:
    matrix = session.matrix
    dendro = session.dendrogram
    return {
        "patches": [_patch_to_json(p) for p in session.patches],
        "buggy_tokens": list(session.buggy_tokens),
        "policy": policy_to_json(session.policy),
        "centroid_mode": session.centroid_mode,
        "clustering": session.clustering,
        "matrix": None if matrix is None else {"n": matrix.n, "entries": [list(r) for r in matrix.entries]},
        "dendrogram": None
        if dendro is None
        else {
            "n_leaves": dendro.n_leaves,
            "nodes": [
                {
                    "node_id": n.node_id,
                    "members": list(n.members),
                    "height": _frac(n.height),
                    "left": n.left,
                    "right": n.right,
                }
                for n in dendro.nodes
            ],
        },
        "clusters": [
            {
                "id": c.id,
                "node_id": c.node_id,
                "members": list(c.members),
                "centroid": c.centroid,
                "scores": [[pid, _frac(score)] for pid, score in c.scores],
            }
            for c in session.clusters
        ],
        "ranked": [
            {"patch_id": e.patch_id, "cluster_id": e.cluster_id, "distance": e.distance}
            for e in session.ranked.entries
        ],
        "rejected_patches": sorted(session.rejected_patches),
        "rejected_clusters": sorted(session.rejected_clusters),
        "accepted": session.accepted,
        "expanded_nodes": list(session.expanded_nodes),
        "next_cluster_seq": session.next_cluster_seq,
        "events": [
            {"action": e.action, "target": e.target, "timestamp": e.timestamp}
            for e in session.events
        ],
    }


def session_from_json(data: dict) -> TriageSession:
    try:
        matrix_data = data["matrix"]
        matrix = (
            None
            if matrix_data is None
            else DistanceMatrix(
                int(matrix_data["n"]),
                tuple(tuple(int(v) for v in row) for row in matrix_data["entries"]),
            )
        )
        dendro_data = data["dendrogram"]
        dendrogram = (
            None
            if dendro_data is None
            else Dendrogram(
                nodes=tuple(
                    DendroNode(
                        node_id=int(n["node_id"]),
                        members=tuple(str(m) for m in n["members"]),
                        height=_parse_frac(n["height"]),
                        left=None if n["left"] is None else int(n["left"]),
                        right=None if n["right"] is None else int(n["right"]),
                    )
                    for n in dendro_data["nodes"]
                ),
                n_leaves=int(dendro_data["n_leaves"]),
            )
        )
        return TriageSession(
            patches=tuple(_patch_from_json(p) for p in data["patches"]),
            buggy_tokens=tuple(str(t) for t in data["buggy_tokens"]),
            policy=policy_from_json(data["policy"]),
            centroid_mode=str(data["centroid_mode"]),
            clustering=bool(data["clustering"]),
            matrix=matrix,
            dendrogram=dendrogram,
            clusters=tuple(
                Cluster(
                    id=str(c["id"]),
                    node_id=int(c["node_id"]),
                    members=tuple(str(m) for m in c["members"]),
                    centroid=str(c["centroid"]),
                    scores=tuple((str(pid), _parse_frac(s)) for pid, s in c["scores"]),
                )
                for c in data["clusters"]
            ),
            ranked=RankedSample(
                tuple(
                    RankedEntry(
                        patch_id=str(e["patch_id"]),
                        cluster_id=None if e["cluster_id"] is None else str(e["cluster_id"]),
                        distance=int(e["distance"]),
                    )
                    for e in data["ranked"]
                )
            ),
            rejected_patches=frozenset(str(p) for p in data["rejected_patches"]),
            rejected_clusters=frozenset(str(c) for c in data["rejected_clusters"]),
            accepted=None if data["accepted"] is None else str(data["accepted"]),
            expanded_nodes=tuple(int(n) for n in data["expanded_nodes"]),
            next_cluster_seq=int(data["next_cluster_seq"]),
            events=tuple(
                FeedbackEvent(str(e["action"]), str(e["target"]), float(e["timestamp"]))
                for e in data["events"]
            ),
        )
    except (KeyError, TypeError) as e:
        raise SessionStoreError(f"malformed session data: {e!r}") from None


# --- analysis types ---


def _stack_to_json(stack: CallStackTrace) -> dict:
    return {
        "frames": [{"function": f.function, "site": f.site.to_json()} for f in stack.frames],
        "diagnostic": stack.diagnostic,
    }


def _stack_from_json(data: dict) -> CallStackTrace:
    return CallStackTrace(
        frames=tuple(
            StackFrame(str(f["function"]), _loc(f["site"])) for f in data["frames"]
        ),
        diagnostic=None if data["diagnostic"] is None else str(data["diagnostic"]),
    )


def _affected_to_json(aset: AffectedSet) -> dict:
    return {
        "function": aset.function,
        "seed": None if aset.seed is None else aset.seed.to_json(),
        "seed_callee": aset.seed_callee,
        "variables": sorted(aset.variables),
        "def_sites": sorted([var, loc.to_json()] for var, loc in aset.def_sites),
        "use_sites": sorted([var, loc.to_json()] for var, loc in aset.use_sites),
        "extra_locations": sorted(loc.to_json() for loc in aset.extra_locations),
        "diagnostic": aset.diagnostic,
    }


def _affected_from_json(data: dict) -> AffectedSet:
    return AffectedSet(
        function=str(data["function"]),
        seed=None if data["seed"] is None else _loc(data["seed"]),
        seed_callee=None if data["seed_callee"] is None else str(data["seed_callee"]),
        variables=frozenset(str(v) for v in data["variables"]),
        def_sites=frozenset((str(var), _loc(loc)) for var, loc in data["def_sites"]),
        use_sites=frozenset((str(var), _loc(loc)) for var, loc in data["use_sites"]),
        extra_locations=frozenset(_loc(loc) for loc in data["extra_locations"]),
        diagnostic=None if data["diagnostic"] is None else str(data["diagnostic"]),
    )


# --- traces and outcomes ---


def _event_to_json(event: TraceEvent) -> list:
    return [
        event.variant,
        event.location.to_json(),
        event.kind,
        event.label,
        event.occurrence,
        event.value_type,
        event.value,
    ]


def _event_from_json(data: list) -> TraceEvent:
    try:
        variant, loc, kind, label, occ, vtype, value = data
    except (TypeError, ValueError):
        raise SessionStoreError(f"bad trace event {data!r}") from None
    if kind not in EVENT_KINDS:
        raise SessionStoreError(f"bad event kind {kind!r}")
    return TraceEvent(str(variant), _loc(loc), str(kind), str(label), int(occ), str(vtype), str(value))


def _outcome_to_json(outcome: TestOutcome) -> dict:
    return {
        "test": outcome.test,
        "status": outcome.status,
        "message": outcome.message,
        "loc": None if outcome.loc is None else outcome.loc.to_json(),
        "prints": list(outcome.prints),
    }


def _outcome_from_json(data: dict) -> TestOutcome:
    return TestOutcome(
        test=str(data["test"]),
        status=str(data["status"]),
        message=None if data["message"] is None else str(data["message"]),
        loc=None if data["loc"] is None else _loc(data["loc"]),
        prints=tuple(str(p) for p in data["prints"]),
    )


def _run_to_json(run: VariantRun) -> dict:
    return {
        "variant": run.variant,
        "events": [_event_to_json(e) for e in run.events],
        "outcome": _outcome_to_json(run.outcome),
        "truncated": run.truncated,
    }


def _run_from_json(data: dict) -> VariantRun:
    return VariantRun(
        variant=str(data["variant"]),
        events=tuple(_event_from_json(e) for e in data["events"]),
        outcome=_outcome_from_json(data["outcome"]),
        truncated=bool(data["truncated"]),
    )


# --- the bundle snapshot ---


def _bundle_to_json(bundle: PatchCorpus) -> dict:
    return {
        "name": bundle.name,
        "root": str(bundle.root),
        "sources": {file: text for file, text in bundle.program.sources.items()},
        "region": str(bundle.region),
        "failing_test": bundle.failing_test,
        "passing_tests": list(bundle.passing_tests),
        "candidates": [
            {"id": c.id, "original_rank": c.original_rank, "replacement_text": c.replacement_text}
            for c in bundle.candidates
        ],
    }


def _bundle_from_json(data: dict) -> PatchCorpus:
    sources = {str(f): str(t) for f, t in data["sources"].items()}
    return PatchCorpus(
        name=str(data["name"]),
        root=Path(str(data["root"])),
        program=parse(sources),
        region=Region.parse(str(data["region"])),
        failing_test=str(data["failing_test"]),
        passing_tests=tuple(str(t) for t in data["passing_tests"]),
        candidates=tuple(
            Candidate(str(c["id"]), int(c["original_rank"]), str(c["replacement_text"]))
            for c in data["candidates"]
        ),
    )


# --- whole run results ---


def run_to_json(result: RunResult) -> dict:
    return {
        "tool": "patchtriage",
        "version": __version__,
        "format": FORMAT,
        "bundle_path": result.bundle_path,
        "bundle": _bundle_to_json(result.bundle),
        "session": session_to_json(result.session),
        "rejected": [[pid, reason] for pid, reason in result.rejected],
        "stack": _stack_to_json(result.stack),
        "affected": [_affected_to_json(a) for a in result.affected],
        "runs": [_run_to_json(r) for r in result.runs],
        "table": table_to_json(result.table),
        "summary": table_to_json(result.summary),
        "row_budget": result.row_budget,
    }


def run_from_json(data: dict) -> RunResult:
    if not isinstance(data, dict) or data.get("tool") != "patchtriage":
        raise SessionStoreError("not a patchtriage session file")
    if data.get("format") != FORMAT:
        raise SessionStoreError(f"unsupported session format {data.get('format')!r}")
    try:
        return RunResult(
            bundle=_bundle_from_json(data["bundle"]),
            bundle_path=str(data["bundle_path"]),
            session=session_from_json(data["session"]),
            rejected=tuple((str(pid), str(reason)) for pid, reason in data["rejected"]),
            stack=_stack_from_json(data["stack"]),
            affected=tuple(_affected_from_json(a) for a in data["affected"]),
            runs=tuple(_run_from_json(r) for r in data["runs"]),
            table=table_from_json(data["table"]),
            summary=table_from_json(data["summary"]),
            row_budget=int(data["row_budget"]),
        )
    except (KeyError, TypeError) as e:
        raise SessionStoreError(f"malformed session file: {e!r}") from None


def dumps(result: RunResult) -> str:
    """Canonical text form; equal results always produce equal text."""
    return json.dumps(run_to_json(result), sort_keys=True, separators=(",", ":")) + "\n"


def loads(text: str) -> RunResult:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SessionStoreError(f"not valid JSON: {e}") from None
    return run_from_json(data)


def save(result: RunResult, path: str | Path) -> None:
    """Write atomically so a crash never leaves a half-written session."""
    target = Path(path)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_text(dumps(result), encoding="utf-8")
    tmp.replace(target)


def load(path: str | Path) -> RunResult:
    target = Path(path)
    if not target.is_file():
        raise SessionStoreError(f"no session file at {target}")
    return loads(target.read_text(encoding="utf-8"))


def with_session(result: RunResult, session: TriageSession) -> RunResult:
    """The same artifacts under an advanced session (post-feedback)."""
    from dataclasses import replace

    return replace(result, session=session)
