"""HTTP face of a triage session.

One service instance owns one session.  Reads are cheap snapshots; all
mutation goes through POST /feedback, serialized by an in-process lock
and guarded by an optimistic revision check, so two reviewers can watch
the same session without trampling each other.  Tracing for patches that
feedback newly exposes runs on a worker thread; until a patch's trace
lands, its table endpoint reports that it is still computing.
"""

from __future__ import annotations

import threading
from concurrent.futures import Future, ThreadPoolExecutor, wait as wait_futures
from contextlib import asynccontextmanager
from dataclasses import replace
from pathlib import Path
from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__, session_store
from .compare import RowKey, table_to_json
from .distance import token_diff
from .pipeline import RunResult, VariantRun, build_table, trace_candidate
from .sampler import (
    FeedbackError,
    SessionFrozenError,
    TriageSession,
    feedback,
    policy_text,
)

FEEDBACK_ACTIONS = ("reject_patch", "reject_cluster", "expand_cluster", "accept_patch")


# --- wire models ---


class BundleInfo(BaseModel):
    name: str
    path: str
    region: str
    failing_test: str


class RankedRow(BaseModel):
    rank: int
    patch_id: str
    cluster_id: Optional[str]
    distance: int
    traced: bool


class ClusterInfo(BaseModel):
    id: str
    centroid: str
    members: list[str]
    scores: dict[str, str]  # member -> mean intra-cluster distance, exact


class SessionSnapshot(BaseModel):
    tool_version: str
    revision: int
    bundle: BundleInfo
    policy: str
    centroid_mode: str
    clustering: bool
    row_budget: int
    frozen: bool
    accepted: Optional[str]
    ranked: list[RankedRow]
    clusters: list[ClusterInfo]
    rejected_patches: list[str]
    rejected_clusters: list[str]


class DendroNodeView(BaseModel):
    id: int
    members: list[str]
    height: str
    left: Optional[int]
    right: Optional[int]


class ClusterTree(BaseModel):
    clustering: bool
    revision: int
    expanded: list[int]
    nodes: list[DendroNodeView]


class RowKeyView(BaseModel):
    file: str
    line: int
    col: int
    label: str
    kind: str
    occurrence: int


class TableResponse(BaseModel):
    patch_id: str
    status: str  # "ready" | "computing"
    revision: int
    table: Optional[dict] = None
    full_row_count: Optional[int] = None
    first_divergence: Optional[RowKeyView] = None
    truncated: Optional[bool] = None


class DiffOpView(BaseModel):
    op: str
    a: Optional[str]
    b: Optional[str]


class DiffResponse(BaseModel):
    patch_id: str
    buggy_text: str
    replacement_text: str
    original_rank: int
    distance: int
    ops: list[DiffOpView]


class FeedbackRequest(BaseModel):
    action: str
    target: str
    revision: int


class FeedbackResponse(BaseModel):
    revision: int
    frozen: bool
    accepted: Optional[str]
    ranked: list[RankedRow]


def _row_key_view(key: RowKey) -> RowKeyView:
    return RowKeyView(
        file=key.location.file,
        line=key.location.line,
        col=key.location.col,
        label=key.label,
        kind=key.kind,
        occurrence=key.occurrence,
    )


class ServeState:
    """The mutable heart of the service: one session, one lock, one worker."""

    def __init__(self, result: RunResult, session_path: Optional[str | Path] = None):
        self.lock = threading.Lock()
        self.result = result
        self.session_path = None if session_path is None else Path(session_path)
        self.runs: dict[str, VariantRun] = {run.variant: run for run in result.runs}
        self._executor = ThreadPoolExecutor(max_workers=1)
        self._pending: dict[str, Future] = {}

    # -- tracing --

    def _schedule(self, pid: str) -> None:
        # Call with the lock held.  The job integrates its own result, so it
        # must take the lock itself; never run it on a thread that holds it.
        if pid in self.runs or pid in self._pending:
            return
        self._pending[pid] = self._executor.submit(self._trace_job, pid)

    def _schedule_missing(self) -> None:
        # Call with the lock held.
        for entry in self.result.session.ranked.entries:
            self._schedule(entry.patch_id)

    def _trace_job(self, pid: str) -> None:
        try:
            run = trace_candidate(self.result.bundle, self.result.affected, pid)
        except Exception:
            with self.lock:
                self._pending.pop(pid, None)
            raise
        with self.lock:
            self._pending.pop(pid, None)
            self.runs[pid] = run
            self._refresh_result()
            self._persist()

    def _refresh_result(self) -> None:
        # Call with the lock held.  The stored artifacts follow the current
        # ranked sample: columns for every ranked-and-traced patch, runs
        # keeping everything traced so far (buggy first).
        session = self.result.session
        ranked_ids = [e.patch_id for e in session.ranked.entries if e.patch_id in self.runs]
        table, summary = build_table(self.runs, ranked_ids, self.result.row_budget)
        ordered = [self.runs["buggy"]] + [r for v, r in self.runs.items() if v != "buggy"]
        self.result = replace(self.result, runs=tuple(ordered), table=table, summary=summary)

    def _persist(self) -> None:
        if self.session_path is not None:
            session_store.save(self.result, self.session_path)

    def wait_idle(self, timeout: float = 30.0) -> None:
        """Block until no trace job is in flight (test and shutdown aid)."""
        while True:
            with self.lock:
                futures = list(self._pending.values())
            if not futures:
                return
            done, not_done = wait_futures(futures, timeout=timeout)
            if not_done:
                raise TimeoutError("trace worker did not settle")

    def close(self) -> None:
        self.wait_idle()
        self._executor.shutdown(wait=True)

    # -- views --

    def snapshot(self) -> SessionSnapshot:
        with self.lock:
            result = self.result
            session = result.session
            return SessionSnapshot(
                tool_version=__version__,
                revision=session.revision,
                bundle=BundleInfo(
                    name=result.bundle.name,
                    path=result.bundle_path,
                    region=str(result.bundle.region),
                    failing_test=result.bundle.failing_test,
                ),
                policy=policy_text(session.policy),
                centroid_mode=session.centroid_mode,
                clustering=session.clustering,
                row_budget=result.row_budget,
                frozen=session.frozen,
                accepted=session.accepted,
                ranked=self._ranked_rows(session),
                clusters=[
                    ClusterInfo(
                        id=c.id,
                        centroid=c.centroid,
                        members=list(c.members),
                        scores={pid: str(score) for pid, score in c.scores},
                    )
                    for c in session.clusters
                ],
                rejected_patches=sorted(session.rejected_patches),
                rejected_clusters=sorted(session.rejected_clusters),
            )

    def _ranked_rows(self, session: TriageSession) -> list[RankedRow]:
        return [
            RankedRow(
                rank=i,
                patch_id=e.patch_id,
                cluster_id=e.cluster_id,
                distance=e.distance,
                traced=e.patch_id in self.runs,
            )
            for i, e in enumerate(session.ranked.entries, start=1)
        ]

    def cluster_tree(self) -> ClusterTree:
        with self.lock:
            session = self.result.session
            dendro = session.dendrogram
            return ClusterTree(
                clustering=session.clustering,
                revision=session.revision,
                expanded=list(session.expanded_nodes),
                nodes=[]
                if dendro is None
                else [
                    DendroNodeView(
                        id=n.node_id,
                        members=list(n.members),
                        height=str(n.height),
                        left=n.left,
                        right=n.right,
                    )
                    for n in dendro.nodes
                ],
            )

    def table_for(self, pid: str) -> Optional[TableResponse]:
        with self.lock:
            session = self.result.session
            if not any(p.id == pid for p in session.patches):
                return None
            revision = session.revision
            run = self.runs.get(pid)
            if run is None:
                self._schedule(pid)
                return TableResponse(patch_id=pid, status="computing", revision=revision)
            table, summary = build_table(self.runs, [pid], self.result.row_budget)
            first = table.first_divergences.get(pid)
            return TableResponse(
                patch_id=pid,
                status="ready",
                revision=revision,
                table=table_to_json(summary),
                full_row_count=len(table.rows),
                first_divergence=None if first is None else _row_key_view(first),
                truncated=run.truncated,
            )

    def diff_for(self, pid: str) -> Optional[DiffResponse]:
        with self.lock:
            session = self.result.session
            try:
                patch = session.patch(pid)
            except KeyError:
                return None
            buggy_tokens = session.buggy_tokens
            ops = token_diff(buggy_tokens, patch.tokens)
            return DiffResponse(
                patch_id=pid,
                buggy_text=self.result.bundle.buggy_text(),
                replacement_text=patch.replacement_text,
                original_rank=patch.original_rank,
                distance=patch.distance_to_buggy,
                ops=[DiffOpView(op=o.op, a=o.a, b=o.b) for o in ops],
            )

    # -- mutation --

    def apply_feedback(self, request: FeedbackRequest) -> tuple[int, dict | FeedbackResponse]:
        if request.action not in FEEDBACK_ACTIONS:
            return 400, {"error": f"unknown action {request.action!r}"}
        with self.lock:
            session = self.result.session
            if request.revision != session.revision:
                return 409, {
                    "error": "stale revision",
                    "revision": session.revision,
                }
            try:
                advanced = feedback(session, request.action, request.target)
            except SessionFrozenError as e:
                return 409, {"error": str(e), "revision": session.revision}
            except FeedbackError as e:
                return 400, {"error": str(e), "revision": session.revision}
            self.result = session_store.with_session(self.result, advanced)
            self._refresh_result()
            self._persist()
            self._schedule_missing()
            return 200, FeedbackResponse(
                revision=advanced.revision,
                frozen=advanced.frozen,
                accepted=advanced.accepted,
                ranked=self._ranked_rows(advanced),
            )


def create_app(result: RunResult, session_path: Optional[str | Path] = None) -> FastAPI:
    state = ServeState(result, session_path)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        yield
        state.close()

    app = FastAPI(title="patchtriage", version=__version__, lifespan=lifespan)
    app.state.triage = state

    @app.get("/session", response_model=SessionSnapshot)
    def get_session():
        return state.snapshot()

    @app.get("/clusters", response_model=ClusterTree)
    def get_clusters():
        return state.cluster_tree()

    @app.get("/table/{patch_id}", response_model=TableResponse)
    def get_table(patch_id: str):
        response = state.table_for(patch_id)
        if response is None:
            return JSONResponse(status_code=404, content={"error": f"unknown patch {patch_id!r}"})
        return response

    @app.get("/patch/{patch_id}/diff", response_model=DiffResponse)
    def get_diff(patch_id: str):
        response = state.diff_for(patch_id)
        if response is None:
            return JSONResponse(status_code=404, content={"error": f"unknown patch {patch_id!r}"})
        return response

    @app.post("/feedback", response_model=FeedbackResponse)
    def post_feedback(request: FeedbackRequest):
        status, body = state.apply_feedback(request)
        if status != 200:
            return JSONResponse(status_code=status, content=body)
        return body

    return app
