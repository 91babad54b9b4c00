"""Sampling plausible patches: cluster near-duplicates, surface one
representative per cluster, and rank representatives by similarity to the
buggy code.

All arithmetic is exact.  Cluster linkage is average-link (UPGMA) maintained
as integer cross-distance sums compared by cross-multiplication, and
representativeness scores are rationals, so results are bit-stable across
runs and independent of patch input order.  Dendrogram leaves are numbered in
sorted patch-id order and internal nodes in merge order, which makes node ids
reproducible too.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .distance import DistanceMatrix, distance_matrix, levenshtein, tokenize


@dataclass(frozen=True)
class Patch:
    """One plausible candidate: identity, generator rank, and token form."""

    id: str
    original_rank: int
    replacement_text: str
    tokens: tuple[str, ...]
    distance_to_buggy: int


def make_patch(pid: str, original_rank: int, replacement_text: str, buggy_tokens: Sequence[str]) -> Patch:
    tokens = tokenize(replacement_text)
    return Patch(pid, original_rank, replacement_text, tokens, levenshtein(tokens, tuple(buggy_tokens)))


# --- dendrogram ---


@dataclass(frozen=True)
class DendroNode:
    node_id: int
    members: tuple[str, ...]  # sorted patch ids under this node
    height: Fraction  # 0 for leaves
    left: Optional[int]
    right: Optional[int]

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class Dendrogram:
    """Nodes indexed by id: leaves 0..n-1 (sorted patch-id order), merges after."""

    nodes: tuple[DendroNode, ...]
    n_leaves: int

    @property
    def root(self) -> DendroNode:
        return self.nodes[-1]

    @property
    def merge_heights(self) -> tuple[Fraction, ...]:
        return tuple(node.height for node in self.nodes[self.n_leaves :])

    def node(self, node_id: int) -> DendroNode:
        return self.nodes[node_id]


def cluster(matrix: DistanceMatrix, ids: Sequence[str]) -> Dendrogram:
    """Agglomerative average-linkage clustering, exact and order-independent.

    `matrix` is indexed consistently with `ids`.  Ties in linkage break on the
    sorted member-id tuples of the two candidate pairs, so any permutation of
    the input produces the identical dendrogram.
    """
    if matrix.n != len(ids):
        raise ValueError("matrix size does not match ids")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate patch ids")
    if not ids:
        raise ValueError("cannot cluster zero patches")

    order = sorted(range(len(ids)), key=lambda i: ids[i])
    nodes: list[DendroNode] = [
        DendroNode(leaf_id, (ids[src],), Fraction(0), None, None)
        for leaf_id, src in enumerate(order)
    ]
    # Active cluster state: node id, leaf-index set (into `ids`), sort key.
    active: dict[int, tuple[frozenset[int], tuple[str, ...]]] = {
        leaf_id: (frozenset([src]), nodes[leaf_id].members) for leaf_id, src in enumerate(order)
    }
    # Integer sum of cross-pair distances for each active pair.
    sums: dict[tuple[int, int], int] = {}
    act_ids = sorted(active)
    for ai in range(len(act_ids)):
        for bi in range(ai + 1, len(act_ids)):
            a, b = act_ids[ai], act_ids[bi]
            (sa, _), (sb, _) = active[a], active[b]
            sums[(a, b)] = matrix.get(next(iter(sa)), next(iter(sb)))

    def cross_sum(a: int, b: int) -> int:
        return sums[(a, b) if a < b else (b, a)]

    def pair_key(a: int, b: int) -> tuple:
        # Tie rule: smallest (min leaf id, max leaf id) over the united pair,
        # with the full sorted member tuple as a last resort.
        union = tuple(sorted(active[a][1] + active[b][1]))
        return (union[0], union[-1], union)

    while len(active) > 1:
        best: Optional[tuple[int, int]] = None
        best_sum = 0
        best_count = 1
        best_key: Optional[tuple] = None
        for a in active:
            for b in active:
                if a >= b:
                    continue
                s = cross_sum(a, b)
                count = len(active[a][0]) * len(active[b][0])
                if best is None:
                    better = True
                else:
                    # s/count < best_sum/best_count, exactly.
                    lhs = s * best_count
                    rhs = best_sum * count
                    if lhs != rhs:
                        better = lhs < rhs
                    else:
                        better = pair_key(a, b) < best_key
                if better:
                    best = (a, b)
                    best_sum = s
                    best_count = count
                    best_key = pair_key(a, b)
        a, b = best  # type: ignore[misc]
        (sa, ka), (sb, kb) = active[a], active[b]
        left, right = (a, b) if ka < kb else (b, a)
        members = tuple(sorted(ka + kb))
        new_id = len(nodes)
        nodes.append(DendroNode(new_id, members, Fraction(best_sum, best_count), left, right))
        merged_set = sa | sb
        del active[a]
        del active[b]
        for other in active:
            s = cross_sum(a, other) + cross_sum(b, other)
            sums[(min(new_id, other), max(new_id, other))] = s
        active[new_id] = (merged_set, members)

    return Dendrogram(tuple(nodes), len(ids))


# --- cut policies ---


@dataclass(frozen=True)
class GapCut:
    """Stop before the merge whose height jumps most over its predecessor."""

    k_max: int = 8


@dataclass(frozen=True)
class ThresholdCut:
    """Apply every merge at height <= threshold."""

    threshold: Fraction


@dataclass(frozen=True)
class FixedKCut:
    """Exactly k clusters (clamped to [1, n])."""

    k: int


CutPolicy = GapCut | ThresholdCut | FixedKCut


def policy_text(policy: CutPolicy) -> str:
    """The flag spelling that parse_cut_policy maps back to this policy."""
    if isinstance(policy, GapCut):
        return "gap"
    if isinstance(policy, ThresholdCut):
        return f"threshold={policy.threshold}"
    return f"k={policy.k}"


def parse_cut_policy(text: str, k_max: int = 8) -> CutPolicy:
    if text == "gap":
        return GapCut(k_max=k_max)
    if text.startswith("threshold="):
        try:
            return ThresholdCut(Fraction(text.split("=", 1)[1]))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"bad threshold in {text!r}") from None
    if text.startswith("k="):
        try:
            return FixedKCut(int(text.split("=", 1)[1]))
        except ValueError:
            raise ValueError(f"bad cluster count in {text!r}") from None
    raise ValueError(f"unknown cut policy {text!r}, expected gap, threshold=<v>, or k=<n>")


def cut(dendrogram: Dendrogram, policy: CutPolicy) -> tuple[int, ...]:
    """Node ids forming the partition, ordered by smallest member id."""
    n = dendrogram.n_leaves
    heights = dendrogram.merge_heights
    total = len(heights)

    if isinstance(policy, FixedKCut):
        k = min(max(policy.k, 1), n)
        applied = n - k
    elif isinstance(policy, ThresholdCut):
        applied = sum(1 for h in heights if h <= policy.threshold)
    else:
        if total < 2:
            applied = total
        else:
            best_i = None
            best_gap: Optional[Fraction] = None
            for i in range(1, total):
                gap = heights[i] - heights[i - 1]
                if best_gap is None or gap > best_gap:
                    best_gap = gap
                    best_i = i
            applied = best_i  # stop just before the biggest jump
        k = n - applied
        if k > policy.k_max:
            applied = n - policy.k_max

    members: dict[int, tuple[str, ...]] = {}
    live = set(range(n))
    for idx in range(applied):
        node = dendrogram.nodes[n + idx]
        live.discard(node.left)  # type: ignore[arg-type]
        live.discard(node.right)  # type: ignore[arg-type]
        live.add(node.node_id)
    for node_id in live:
        members[node_id] = dendrogram.nodes[node_id].members
    return tuple(sorted(live, key=lambda nid: members[nid][0]))


# --- centroid selection and ranking ---

DistanceFn = Callable[[str, str], int]


def representativeness(member_ids: Sequence[str], dist: DistanceFn) -> dict[str, Fraction]:
    """Mean distance from each member to the rest of its cluster (0 for singletons)."""
    out: dict[str, Fraction] = {}
    n = len(member_ids)
    for pid in member_ids:
        if n == 1:
            out[pid] = Fraction(0)
        else:
            out[pid] = Fraction(sum(dist(pid, q) for q in member_ids if q != pid), n - 1)
    return out


def select_centroid(
    member_ids: Sequence[str],
    dist: DistanceFn,
    ranks: dict[str, int],
    mode: str = "min",
) -> str:
    """The member with minimal (mode="min") or maximal (mode="max") mean
    distance to its cluster; ties break by lowest original rank, then id."""
    if mode not in ("min", "max"):
        raise ValueError(f"bad centroid mode {mode!r}")
    scores = representativeness(member_ids, dist)
    sign = 1 if mode == "min" else -1
    return min(member_ids, key=lambda pid: (sign * scores[pid], ranks[pid], pid))


@dataclass(frozen=True)
class RankedEntry:
    patch_id: str
    cluster_id: Optional[str]
    distance: int


@dataclass(frozen=True)
class RankedSample:
    entries: tuple[RankedEntry, ...]

    def position(self, patch_id: str) -> Optional[int]:
        """1-based rank of a patch, or None if absent."""
        for idx, entry in enumerate(self.entries, start=1):
            if entry.patch_id == patch_id:
                return idx
        return None


def rank_by_similarity(
    candidates: Sequence[tuple[str, Optional[str]]],
    patches: dict[str, Patch],
) -> RankedSample:
    """Order (patch, cluster) pairs by distance to the buggy code, closest
    first; ties break by original rank, then id."""
    decorated = sorted(
        candidates,
        key=lambda pc: (patches[pc[0]].distance_to_buggy, patches[pc[0]].original_rank, pc[0]),
    )
    return RankedSample(
        tuple(RankedEntry(pid, cid, patches[pid].distance_to_buggy) for pid, cid in decorated)
    )


# --- clusters and sessions ---


@dataclass(frozen=True)
class Cluster:
    id: str
    node_id: int
    members: tuple[str, ...]  # sorted
    centroid: str
    scores: tuple[tuple[str, Fraction], ...]  # representativeness per member


@dataclass(frozen=True)
class FeedbackEvent:
    action: str  # "reject_patch" | "reject_cluster" | "expand_cluster" | "accept_patch"
    target: str
    timestamp: float


@dataclass(frozen=True)
class TriageSession:
    patches: tuple[Patch, ...]  # plausible candidates, original_rank order
    buggy_tokens: tuple[str, ...]
    policy: CutPolicy
    centroid_mode: str
    clustering: bool
    matrix: Optional[DistanceMatrix]  # indexed by sorted patch id
    dendrogram: Optional[Dendrogram]
    clusters: tuple[Cluster, ...]
    ranked: RankedSample
    rejected_patches: frozenset[str]
    rejected_clusters: frozenset[str]
    accepted: Optional[str]
    expanded_nodes: tuple[int, ...]  # dendrogram nodes opened so far, in order
    next_cluster_seq: int
    events: tuple[FeedbackEvent, ...]

    @property
    def frozen(self) -> bool:
        return self.accepted is not None

    @property
    def revision(self) -> int:
        return len(self.events)

    def patch(self, pid: str) -> Patch:
        for p in self.patches:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def cluster_by_id(self, cid: str) -> Cluster:
        for c in self.clusters:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def distance_fn(self) -> DistanceFn:
        ids = sorted(p.id for p in self.patches)
        index = {pid: i for i, pid in enumerate(ids)}
        matrix = self.matrix

        def dist(a: str, b: str) -> int:
            if matrix is not None:
                return matrix.get(index[a], index[b])
            pa = self.patch(a)
            pb = self.patch(b)
            return levenshtein(pa.tokens, pb.tokens)

        return dist


class FeedbackError(Exception):
    pass


class SessionFrozenError(FeedbackError):
    pass


def _build_cluster(
    cid: str,
    node_id: int,
    member_ids: Sequence[str],
    dist: DistanceFn,
    ranks: dict[str, int],
    mode: str,
) -> Cluster:
    members = tuple(sorted(member_ids))
    scores = representativeness(members, dist)
    centroid = select_centroid(members, dist, ranks, mode)
    return Cluster(cid, node_id, members, centroid, tuple((m, scores[m]) for m in members))


def _ranked_from_clusters(clusters: Sequence[Cluster], patches: dict[str, Patch]) -> RankedSample:
    return rank_by_similarity([(c.centroid, c.id) for c in clusters], patches)


def sample(
    patches: Sequence[Patch],
    policy: CutPolicy,
    clustering: bool = True,
    centroid_mode: str = "min",
    buggy_tokens: Sequence[str] = (),
) -> TriageSession:
    """Build the initial session: cluster, cut, pick centroids, rank.

    With clustering disabled every plausible patch is ranked directly and no
    dendrogram is built (the ablation baseline).
    """
    if centroid_mode not in ("min", "max"):
        raise ValueError(f"bad centroid mode {centroid_mode!r}")
    by_id = {p.id: p for p in patches}
    if len(by_id) != len(patches):
        raise ValueError("duplicate patch ids")
    ordered = tuple(sorted(patches, key=lambda p: p.original_rank))
    ranks = {p.id: p.original_rank for p in patches}
    buggy_tokens = tuple(buggy_tokens)

    if not clustering or not patches:
        ranked = rank_by_similarity([(p.id, None) for p in patches], by_id)
        return TriageSession(
            patches=ordered,
            buggy_tokens=buggy_tokens,
            policy=policy,
            centroid_mode=centroid_mode,
            clustering=False,
            matrix=None,
            dendrogram=None,
            clusters=(),
            ranked=ranked,
            rejected_patches=frozenset(),
            rejected_clusters=frozenset(),
            accepted=None,
            expanded_nodes=(),
            next_cluster_seq=1,
            events=(),
        )

    ids = sorted(by_id)
    matrix = distance_matrix([by_id[pid].tokens for pid in ids])
    dendro = cluster(matrix, ids)
    part = cut(dendro, policy)
    index = {pid: i for i, pid in enumerate(ids)}

    def dist(a: str, b: str) -> int:
        return matrix.get(index[a], index[b])

    clusters = tuple(
        _build_cluster(f"c{seq}", node_id, dendro.node(node_id).members, dist, ranks, centroid_mode)
        for seq, node_id in enumerate(part, start=1)
    )
    ranked = _ranked_from_clusters(clusters, by_id)
    return TriageSession(
        patches=ordered,
        buggy_tokens=buggy_tokens,
        policy=policy,
        centroid_mode=centroid_mode,
        clustering=True,
        matrix=matrix,
        dendrogram=dendro,
        clusters=clusters,
        ranked=ranked,
        rejected_patches=frozenset(),
        rejected_clusters=frozenset(),
        accepted=None,
        expanded_nodes=(),
        next_cluster_seq=len(clusters) + 1,
        events=(),
    )


def feedback(session: TriageSession, action: str, target: str, timestamp: Optional[float] = None) -> TriageSession:
    """Apply one reviewer action, returning the successor session.

    Sessions are immutable; the input is left untouched.  An accepted session
    refuses all further feedback.
    """
    if session.frozen:
        raise SessionFrozenError(f"session already accepted {session.accepted!r}")
    ts = time.time() if timestamp is None else timestamp
    event = FeedbackEvent(action, target, ts)
    by_id = {p.id: p for p in session.patches}
    ranks = {p.id: p.original_rank for p in session.patches}

    if action == "accept_patch":
        if not _is_active_patch(session, target):
            raise FeedbackError(f"cannot accept inactive patch {target!r}")
        return replace(session, accepted=target, events=session.events + (event,))

    if action == "reject_patch":
        if not _is_active_patch(session, target):
            raise FeedbackError(f"cannot reject inactive patch {target!r}")
        rejected = session.rejected_patches | {target}
        if not session.clustering:
            ranked = rank_by_similarity(
                [(p.id, None) for p in session.patches if p.id not in rejected], by_id
            )
            return replace(
                session, rejected_patches=rejected, ranked=ranked, events=session.events + (event,)
            )
        dist = session.distance_fn()
        clusters: list[Cluster] = []
        seq = session.next_cluster_seq
        for c in session.clusters:
            if target not in c.members:
                clusters.append(c)
                continue
            remaining = tuple(m for m in c.members if m != target)
            if not remaining:
                continue
            clusters.append(
                _build_cluster(c.id, c.node_id, remaining, dist, ranks, session.centroid_mode)
            )
        ranked = _ranked_from_clusters(clusters, by_id)
        return replace(
            session,
            rejected_patches=rejected,
            clusters=tuple(clusters),
            ranked=ranked,
            next_cluster_seq=seq,
            events=session.events + (event,),
        )

    if action == "reject_cluster":
        cluster_obj = _active_cluster(session, target)
        clusters = tuple(c for c in session.clusters if c.id != target)
        ranked = _ranked_from_clusters(clusters, by_id)
        return replace(
            session,
            clusters=clusters,
            rejected_patches=session.rejected_patches | set(cluster_obj.members),
            rejected_clusters=session.rejected_clusters | {target},
            ranked=ranked,
            events=session.events + (event,),
        )

    if action == "expand_cluster":
        cluster_obj = _active_cluster(session, target)
        if session.dendrogram is None:
            raise FeedbackError("no dendrogram to expand (clustering disabled)")
        node = session.dendrogram.node(cluster_obj.node_id)
        dist = session.distance_fn()
        active_members = set(cluster_obj.members)
        children = []
        if not node.is_leaf:
            for child_id in (node.left, node.right):
                child = session.dendrogram.node(child_id)  # type: ignore[arg-type]
                kept = [m for m in child.members if m in active_members]
                if kept:
                    children.append((child_id, kept))
        if len(children) < 2:
            # A single patch (or a hollowed-out side) expands to itself: the
            # action is recorded but the cluster set does not change.
            return replace(session, events=session.events + (event,))
        seq = session.next_cluster_seq
        new_clusters = [c for c in session.clusters if c.id != target]
        for child_id, kept in sorted(children, key=lambda ck: ck[1][0]):
            new_clusters.append(
                _build_cluster(f"c{seq}", child_id, kept, dist, ranks, session.centroid_mode)  # type: ignore[arg-type]
            )
            seq += 1
        ranked = _ranked_from_clusters(new_clusters, by_id)
        return replace(
            session,
            clusters=tuple(new_clusters),
            ranked=ranked,
            expanded_nodes=session.expanded_nodes + (node.node_id,),
            next_cluster_seq=seq,
            events=session.events + (event,),
        )

    raise FeedbackError(f"unknown feedback action {action!r}")


def _is_active_patch(session: TriageSession, pid: str) -> bool:
    if pid in session.rejected_patches:
        return False
    if not session.clustering:
        return any(p.id == pid for p in session.patches)
    return any(pid in c.members for c in session.clusters)


def _active_cluster(session: TriageSession, cid: str) -> Cluster:
    for c in session.clusters:
        if c.id == cid:
            return c
    raise FeedbackError(f"unknown or inactive cluster {cid!r}")


def replay_events(base: TriageSession, events: Sequence[FeedbackEvent]) -> TriageSession:
    """Reapply a feedback log to a freshly sampled session."""
    current = base
    for event in events:
        current = feedback(current, event.action, event.target, timestamp=event.timestamp)
    return current
