"""Acceptance gate: one test per promised behavior, at its stated tolerance.

Each test here pins an externally visible guarantee of the engine: oracle
equivalence for the distance/centroid/data-flow kernels, determinism of the
clustering front end, non-interference of tracing, the golden loopidx
comparison table, the direction of the bundled evaluation, feedback replay,
and the pipeline latency bound.  Timed criteria assert their wall-clock
budget explicitly.
"""
from __future__ import annotations

import json
import random
import subprocess
import sys
import time
from pathlib import Path

import pytest

from genprog import affected_oracle, straightline
from oracles import centroid_reference, function_closure_oracle, levenshtein_reference
from patchtriage import corpus, session_store
from patchtriage.analysis import affected_variables
from patchtriage.cli import main
from patchtriage.compare import BUGGY
from patchtriage.corpus import CorpusError
from patchtriage.distance import levenshtein
from patchtriage.minilang import ast
from patchtriage.minilang.errors import MiniLangError
from patchtriage.minilang.interp import run_test
from patchtriage.minilang.parser import parse_one
from patchtriage.pipeline import analyze_bundle, build_table, run_bundle, trace_candidate, trace_variant
from patchtriage.sampler import (
    FeedbackError,
    FixedKCut,
    GapCut,
    feedback,
    make_patch,
    replay_events,
    sample,
    select_centroid,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"
EVAL_BUNDLES = sorted(p for p in (FIXTURES / "eval").iterdir() if p.is_dir())

TOKENS = ["pos", "count", "i", "x", "y", "+", "-", "*", "/", "0", "1", "2"]


def _random_tokens(rng: random.Random, max_len: int) -> tuple[str, ...]:
    return tuple(rng.choice(TOKENS) for _ in range(rng.randint(0, max_len)))


def test_levenshtein_matches_dp_oracle_and_metric_axioms():
    rng = random.Random(412)
    start = time.perf_counter()
    for _ in range(10_000):
        a = _random_tokens(rng, 30)
        b = _random_tokens(rng, 30)
        assert levenshtein(a, b) == levenshtein_reference(a, b)
    for _ in range(1_000):
        a = _random_tokens(rng, 30)
        b = _random_tokens(rng, 30)
        c = _random_tokens(rng, 30)
        ab = levenshtein(a, b)
        assert ab == levenshtein(b, a)
        assert levenshtein(a, a) == 0
        assert (ab == 0) == (a == b)
        assert levenshtein(a, c) <= ab + levenshtein(b, c)
    assert time.perf_counter() - start < 10.0


def test_centroid_matches_bruteforce_argmin():
    rng = random.Random(413)
    start = time.perf_counter()
    for trial in range(1_000):
        size = rng.randint(1, 50)
        ids = [f"m{i:02d}" for i in range(size)]
        dist_map = {}
        for i in range(size):
            for j in range(i + 1, size):
                dist_map[(ids[i], ids[j])] = rng.randint(0, 12)

        def dist(a: str, b: str) -> int:
            if a == b:
                return 0
            return dist_map[(a, b)] if (a, b) in dist_map else dist_map[(b, a)]

        rank_values = list(range(1, size + 1))
        rng.shuffle(rank_values)
        ranks = dict(zip(ids, rank_values))
        mode = "min" if trial % 2 == 0 else "max"
        got = select_centroid(ids, dist, ranks, mode)
        want = centroid_reference(ids, dist_map, ranks, mode)
        assert got == want
    assert time.perf_counter() - start < 10.0


def _partition(session) -> frozenset[frozenset[str]]:
    return frozenset(frozenset(c.members) for c in session.clusters)


def _centroid_map(session) -> dict[frozenset[str], str]:
    return {frozenset(c.members): c.centroid for c in session.clusters}


def test_clustering_deterministic_and_permutation_invariant():
    rng = random.Random(414)
    for corpus_idx in range(100):
        n = rng.randint(2, 12) if corpus_idx % 7 else rng.randint(13, 40)
        patches = [
            make_patch(f"p{i:02d}", i + 1, " ".join(_random_tokens(rng, 8)) or "0", ("pos",))
            for i in range(n)
        ]
        if corpus_idx % 3 == 2:
            policy = FixedKCut(rng.randint(1, 6))
        else:
            policy = GapCut()

        base = sample(patches, policy, buggy_tokens=("pos", "+", "1"))
        for _ in range(4):
            again = sample(patches, policy, buggy_tokens=("pos", "+", "1"))
            assert again.ranked == base.ranked
            assert _partition(again) == _partition(base)
            assert _centroid_map(again) == _centroid_map(base)
        for _ in range(5):
            shuffled = patches[:]
            rng.shuffle(shuffled)
            permuted = sample(shuffled, policy, buggy_tokens=("pos", "+", "1"))
            assert permuted.ranked == base.ranked
            assert _partition(permuted) == _partition(base)
            assert _centroid_map(permuted) == _centroid_map(base)


def _defining_stmts(body):
    for stmt in body:
        if isinstance(stmt, (ast.Let, ast.Assign)):
            yield stmt
        elif isinstance(stmt, ast.If):
            yield from _defining_stmts(stmt.then_body)
            if stmt.else_body is not None:
                yield from _defining_stmts(stmt.else_body)
        elif isinstance(stmt, ast.While):
            yield from _defining_stmts(stmt.body)


def _assert_closure_matches(fn, stmt, want):
    want_vars, want_defs, want_uses = want
    got = affected_variables(fn, stmt)
    assert got.variables == frozenset(want_vars)
    assert {(v, loc.line) for v, loc in got.def_sites} == want_defs
    assert {(v, loc.line) for v, loc in got.use_sites} == want_uses


def test_affected_closure_matches_reachability_oracles():
    checked = 0
    for source in sorted(FIXTURES.rglob("*.ml0")):
        if "patches" in source.parts:
            continue
        program = parse_one(source.read_text(encoding="utf-8"), source.name)
        for fn in program.functions:
            for stmt in _defining_stmts(fn.body):
                _assert_closure_matches(fn, stmt, function_closure_oracle(fn, stmt.loc.line))
                checked += 1
    assert checked >= 90

    rng = random.Random(415)
    for _ in range(500):
        source, meta = straightline(rng, rng.randint(1, 20))
        fn = parse_one(source, "gen.ml0").functions[0]
        for idx, m in enumerate(meta):
            stmt = fn.body[idx]
            assert stmt.loc.line == m.line
            want = affected_oracle(meta, m.line)
            _assert_closure_matches(fn, stmt, want)
            # The flow-graph oracle must collapse to the linear-scan one here.
            assert function_closure_oracle(fn, m.line) == want

    # The two-call fixture pins the exact frames: the seed's own function,
    # the caller whose call site binds the returned value, and the test.
    stack, affected = analyze_bundle(corpus.load(FIXTURES / "ranksum"))
    assert [a.function for a in affected] == ["calcP", "uTest", "test_big"]
    assert affected[0].variables == frozenset({"n1n2prod", "VarU", "z"})
    assert {(v, loc.line) for v, loc in affected[0].def_sites} == {
        ("n1n2prod", 2), ("VarU", 3), ("z", 4),
    }
    assert {(v, loc.line) for v, loc in affected[0].use_sites} == {
        ("n1n2prod", 3), ("n1n2prod", 4), ("VarU", 4), ("z", 5),
    }
    assert affected[1].variables == frozenset({"p", "r"})
    assert {(v, loc.line) for v, loc in affected[1].def_sites} == {("p", 9), ("r", 10)}
    assert {(v, loc.line) for v, loc in affected[1].use_sites} == {("p", 10), ("r", 11)}
    assert affected[2].variables == frozenset({"pv"})
    assert {(v, loc.line) for v, loc in affected[2].def_sites} == {("pv", 2)}
    assert {(v, loc.line) for v, loc in affected[2].use_sites} == {("pv", 3)}


def test_tracing_never_changes_test_outcomes():
    bundles = [FIXTURES / "ranksum", FIXTURES / "loopidx", FIXTURES / "series"] + EVAL_BUNDLES
    executed = 0
    unparsable = 0
    for path in bundles:
        bundle = corpus.load(path)
        stack, affected = analyze_bundle(bundle)

        traced = trace_variant(
            bundle.program, bundle.failing_test, affected, bundle.region, 0, BUGGY
        )
        plain = run_test(bundle.program, bundle.failing_test)
        assert traced.outcome == plain
        executed += 1

        for cand in bundle.candidates:
            try:
                program = corpus.apply_candidate(bundle, cand)
            except (CorpusError, MiniLangError):
                unparsable += 1
                continue
            traced = trace_candidate(bundle, affected, cand.id)
            plain = run_test(program, bundle.failing_test)
            assert traced.outcome == plain, f"{path.name}/{cand.id}"
            executed += 1
    assert executed >= 70
    assert unparsable == 2  # the two series candidates that do not parse


# The loopidx comparison grid, worked out by hand from the fixture sources:
# cs = [1, 2, 2, 1, 1]; the unpatched loop indexes width() by count, the
# family-A patches by pos, b1 skips width() entirely, and o1 splits the
# statement in two.  Rows appear buggy-first in execution order, then each
# patch appends the rows the unpatched run never produced.
GOLDEN_ROWS = [
    ("string.ml0", 11, 5, "pos", "use", 1),
    ("string.ml0", 12, 9, "pos", "def", 1),
    ("string.ml0", 11, 5, "pos", "use", 2),
    ("string.ml0", 12, 9, "pos", "def", 2),
    ("string.ml0", 11, 5, "pos", "use", 3),
    ("string.ml0", 12, 9, "pos", "def", 3),
    ("string.ml0", 11, 5, "pos", "use", 4),
    ("tests.ml0", 3, 5, "c", "def", 1),
    ("tests.ml0", 4, 5, "c", "use", 1),
    ("string.ml0", 12, 9, "pos", "def", 4),
    ("string.ml0", 11, 5, "pos", "use", 5),
    ("string.ml0", 12, 9, "pos", "def", 5),
    ("string.ml0", 11, 5, "pos", "use", 6),
    ("string.ml0", 12, 9, "w", "def", 1),
    ("string.ml0", 13, 9, "pos", "def", 1),
    ("string.ml0", 12, 9, "w", "def", 2),
    ("string.ml0", 13, 9, "pos", "def", 2),
    ("string.ml0", 12, 9, "w", "def", 3),
    ("string.ml0", 13, 9, "pos", "def", 3),
    ("string.ml0", 12, 9, "w", "def", 4),
    ("string.ml0", 13, 9, "pos", "def", 4),
]

GOLDEN_CELLS = {
    "buggy": ["0", "1", "1", "3", "3", "5", "5", "3", "3",
              None, None, None, None, None, None, None, None, None, None, None, None],
    "a2": ["0", "1", "1", "3", "3", "4", "4", "4", "4",
           "5", "5", None, None, None, None, None, None, None, None, None, None],
    "b1": ["0", "1", "1", "2", "2", "3", "3", "5", "5",
           "4", "4", "5", "5", None, None, None, None, None, None, None, None],
    "o1": ["0", None, "1", None, "3", None, "4", "4", "4",
           None, "5", None, None, "1", "1", "2", "3", "1", "4", "1", "5"],
}


def test_loopidx_golden_table_and_first_divergence():
    result = run_bundle(FIXTURES / "loopidx")
    table = result.table
    assert table.columns == ("buggy", "a2", "b1", "o1")

    rows = [
        (r.location.file, r.location.line, r.location.col, r.label, r.kind, r.occurrence)
        for r in table.rows
    ]
    assert rows == GOLDEN_ROWS

    for column, expected in GOLDEN_CELLS.items():
        got = []
        for row in table.rows:
            cell = table.cells[column].get(row)
            if cell is None:
                got.append(None)
            else:
                assert cell.value_type == "int"
                got.append(cell.value)
        assert got == expected, column

    assert table.first_divergences["a2"] == table.rows[5]
    assert table.first_divergences["o1"] == table.rows[1]
    # The patch that replaces the computed stride with a constant first
    # drifts on the loop statement's second write, not its first.
    b1_div = table.first_divergences["b1"]
    assert b1_div == table.rows[3]
    assert (b1_div.location.line, b1_div.label, b1_div.kind, b1_div.occurrence) == (12, "pos", "def", 2)

    runs = {run.variant: run for run in result.runs}
    ranked_ids = [entry.patch_id for entry in result.session.ranked.entries]
    full, summary = build_table(runs, ranked_ids, 3)
    for pid in ("a2", "b1", "o1"):
        assert full.first_divergences[pid] in summary.rows


def test_eval_clustering_beats_flat_and_original_order(capsys):
    start = time.perf_counter()
    rc = main(["eval", *[str(p) for p in EVAL_BUNDLES], "--format", "structured"])
    elapsed = time.perf_counter() - start
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert elapsed < 60.0
    assert doc["warnings"] == []
    assert len(doc["rows"]) == 6
    for row in doc["rows"]:
        assert row["ranks"]["clustered"] <= 3, row["bundle"]
    assert doc["mean"]["clustered"] < doc["mean"]["no-cluster"]
    assert doc["mean"]["no-cluster"] <= doc["mean"]["original"]


def _random_walk(rng: random.Random, base, max_steps: int):
    patch_ids = [p.id for p in base.patches]
    current = base
    steps = 0
    attempts = 0
    while steps < max_steps and attempts < 4 * max_steps and not current.frozen:
        attempts += 1
        action = rng.choice(
            ["reject_patch", "reject_patch", "expand_cluster", "expand_cluster",
             "reject_cluster", "accept_patch"]
        )
        if action in ("reject_patch", "accept_patch"):
            target = rng.choice(patch_ids)
        else:
            cluster_ids = [c.id for c in current.clusters] or ["c1"]
            target = rng.choice(cluster_ids + ["c99"])
        try:
            current = feedback(current, action, target, timestamp=float(steps))
        except FeedbackError:
            continue
        steps += 1
    return current


def test_feedback_replay_and_store_round_trip(tmp_path):
    rng = random.Random(416)
    bases = []
    for name in ("loopidx", "series", str(Path("eval") / "seconds")):
        bundle = corpus.load(FIXTURES / name)
        plausible, _ = corpus.validate(bundle)
        bases.append(sample(plausible, GapCut(), buggy_tokens=bundle.buggy_tokens()))

    finals = []
    for i in range(100):
        base = bases[i % 3]
        final = _random_walk(rng, base, rng.randint(1, 10))
        assert replay_events(base, final.events) == final
        finals.append(final)
    assert sum(1 for f in finals if f.events) >= 90

    result = run_bundle(FIXTURES / "loopidx")
    loop_finals = [f for f in finals if f.patches == bases[0].patches][:3]
    for idx, final in enumerate([result.session] + loop_finals):
        stored = session_store.with_session(result, final)
        first = tmp_path / f"s{idx}a.json"
        second = tmp_path / f"s{idx}b.json"
        session_store.save(stored, first)
        session_store.save(session_store.load(first), second)
        assert first.read_bytes() == second.read_bytes()


def test_run_latency_on_largest_bundle():
    bundle_dir = FIXTURES / "series"
    bundle = corpus.load(bundle_dir)
    assert len(bundle.candidates) == 30
    total_lines = sum(
        len((bundle_dir / name).read_text(encoding="utf-8").splitlines())
        for name in ("series.ml0", "tests.ml0")
    )
    assert total_lines >= 200

    start = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-c",
         "import sys; from patchtriage.cli import main; sys.exit(main(sys.argv[1:]))",
         "run", str(bundle_dir)],
        capture_output=True,
        text=True,
    )
    elapsed = time.perf_counter() - start
    assert proc.returncode == 0, proc.stderr
    assert "bundle series" in proc.stdout
    assert elapsed < 5.0
