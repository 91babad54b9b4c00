"""Alignment, divergence, summarization, and table serialization."""

from __future__ import annotations

import random

import pytest

from patchtriage.compare import (
    CompareError,
    ComparisonTable,
    RowKey,
    align,
    first_divergence,
    render_text,
    summarize,
    table_from_json,
    table_to_json,
)
from patchtriage.minilang import SourceLocation, parse_one
from patchtriage.minilang.ast import walk_stmts
from patchtriage.analysis import AffectedSet
from patchtriage.tracer import TraceEvent, plan_hooks, trace_run

FILE = "main.ml0"


def ev(variant: str, line: int, label: str, occ: int, value: str, kind: str = "def"):
    return TraceEvent(
        variant, SourceLocation(FILE, line, 5), kind, label, occ, "int", value
    )


def series(variant: str, line: int, label: str, values: list[str], kind: str = "def"):
    return [ev(variant, line, label, i + 1, v, kind) for i, v in enumerate(values)]


def test_align_identical_traces_no_divergence():
    buggy = series("buggy", 4, "i", ["1", "2", "3"])
    patch = series("p1", 4, "i", ["1", "2", "3"])
    table = align({"buggy": buggy, "p1": patch})
    assert table.columns == ("buggy", "p1")
    assert len(table.rows) == 3
    assert table.first_divergences == {"p1": None}
    assert first_divergence(table, "p1") is None
    assert not any(table.is_divergent("p1", r) for r in table.rows)


def test_align_shorter_patch_column_has_absent_cells():
    buggy = series("buggy", 95, "pos", ["1", "2", "3", "4", "5"])
    patch = series("p1", 95, "pos", ["1", "2", "3"])
    table = align({"buggy": buggy, "p1": patch})
    assert len(table.rows) == 5
    for row in table.rows[3:]:
        assert table.cell("buggy", row) is not None
        assert table.cell("p1", row) is None
    assert first_divergence(table, "p1") == table.rows[3]


def test_align_rows_follow_buggy_then_patch_order():
    buggy = series("buggy", 4, "i", ["1", "2"])
    patch = series("p1", 4, "i", ["1", "2", "3"]) + series("p1", 6, "q", ["9"])
    table = align({"buggy": buggy, "p1": patch})
    assert [(r.location.line, r.label, r.occurrence) for r in table.rows] == [
        (4, "i", 1),
        (4, "i", 2),
        (4, "i", 3),
        (6, "q", 1),
    ]


def test_align_lossless_cell_count():
    buggy = series("buggy", 4, "i", ["1", "2", "3"]) + series("buggy", 5, "j", ["0"])
    patch = series("p1", 4, "i", ["1", "9"])
    table = align({"buggy": buggy, "p1": patch})
    assert table.cell_count() == len(buggy) + len(patch)


def test_align_requires_buggy_column():
    with pytest.raises(CompareError, match="buggy"):
        align({"p1": series("p1", 4, "i", ["1"])})


def test_align_rejects_duplicate_slot():
    twice = [ev("buggy", 4, "i", 1, "1"), ev("buggy", 4, "i", 1, "2")]
    with pytest.raises(CompareError, match="twice"):
        align({"buggy": twice})


def test_first_divergence_value_mismatch():
    buggy = series("buggy", 4, "pos", ["1", "3", "5"])
    patch = series("p1", 4, "pos", ["1", "2", "3"])
    table = align({"buggy": buggy, "p1": patch})
    hit = first_divergence(table, "p1")
    assert hit.occurrence == 2
    assert table.cell("buggy", hit).value == "3"
    assert table.cell("p1", hit).value == "2"


def test_first_divergence_type_tag_matters():
    buggy = [ev("buggy", 4, "x", 1, "1")]
    patch = [
        TraceEvent("p1", SourceLocation(FILE, 4, 5), "def", "x", 1, "float", "1")
    ]
    table = align({"buggy": buggy, "p1": patch})
    # The rows coincide; the cells differ only in the serialized type.
    assert first_divergence(table, "p1") == table.rows[0]


def test_first_divergence_crash_before_any_row():
    buggy = series("buggy", 4, "i", ["1", "2"])
    table = align({"buggy": buggy, "p2": []})
    assert first_divergence(table, "p2") == table.rows[0]


def test_first_divergence_unknown_patch():
    table = align({"buggy": series("buggy", 4, "i", ["1"])})
    with pytest.raises(CompareError, match="unknown patch"):
        first_divergence(table, "p9")
    with pytest.raises(CompareError, match="unknown patch"):
        first_divergence(table, "buggy")


def _loop_variant(advance: str):
    source = f"""fn test_t() {{
    let ws = [1, 2, 2];
    let pos = 0;
    while (pos < 3) {{
        pos = pos + {advance};
    }}
    assert(pos == 3);
}}
"""
    program = parse_one(source, FILE)
    fn = program.function("test_t")
    (loc,) = [s.loc for s in walk_stmts(fn.body) if s.loc.line == 5]
    aset = AffectedSet(
        function="test_t",
        seed=loc,
        seed_callee=None,
        variables=frozenset({"pos"}),
        def_sites=frozenset({("pos", loc)}),
        use_sites=frozenset(),
        extra_locations=frozenset(),
        diagnostic=None,
    )
    return program, plan_hooks([aset], program)


def test_divergence_from_real_loop_traces():
    # The unpatched loop advances by a position-dependent width (1,3 then
    # stop); the constant-index variant advances by ws[0] every time.
    buggy_program, buggy_plan = _loop_variant("ws[pos]")
    patch_program, patch_plan = _loop_variant("ws[0]")
    buggy = trace_run(buggy_program, "test_t", buggy_plan, "buggy")
    patch = trace_run(patch_program, "test_t", patch_plan, "p1")
    assert buggy.outcome.passed and patch.outcome.passed
    assert [e.value for e in buggy.events] == ["1", "3"]
    assert [e.value for e in patch.events] == ["1", "2", "3"]
    table = align({"buggy": buggy.events, "p1": patch.events})
    hit = first_divergence(table, "p1")
    assert (hit.location.line, hit.label, hit.kind, hit.occurrence) == (5, "pos", "def", 2)


def test_summarize_small_group_unchanged():
    buggy = series("buggy", 4, "i", ["1", "2", "3"])
    patch = series("p1", 4, "i", ["1", "2", "3"])
    table = align({"buggy": buggy, "p1": patch})
    assert summarize(table, 3) == table


def test_summarize_long_loop_keeps_informative_rows():
    n = 100
    buggy_values = [str(i) for i in range(1, n + 1)]
    patch_values = buggy_values[:56] + [str(i + 1000) for i in range(57, n + 1)]
    table = align(
        {
            "buggy": series("buggy", 7, "acc", buggy_values),
            "p1": series("p1", 7, "acc", patch_values),
        }
    )
    small = summarize(table, 5)
    assert [r.occurrence for r in small.rows] == [1, 57, 100]
    assert {r.occurrence: c for r, c in small.elided_before.items()} == {57: 55, 100: 42}
    assert small.first_divergences["p1"].occurrence == 57


def test_summarize_two_patches_keep_both_divergences():
    n = 12
    base = [str(i) for i in range(1, n + 1)]
    early = base[:2] + [v + "x" for v in base[2:]]
    late = base[:8] + [v + "y" for v in base[8:]]
    table = align(
        {
            "buggy": series("buggy", 7, "acc", base),
            "p1": series("p1", 7, "acc", early),
            "p2": series("p2", 7, "acc", late),
        }
    )
    small = summarize(table, 3)
    assert [r.occurrence for r in small.rows] == [1, 3, 9, 12]
    assert small.first_divergences["p1"].occurrence == 3
    assert small.first_divergences["p2"].occurrence == 9


def test_summarize_rejects_zero_budget():
    table = align({"buggy": series("buggy", 4, "i", ["1"])})
    with pytest.raises(CompareError, match="budget"):
        summarize(table, 0)


def _random_traces(rng: random.Random, variants: list[str]):
    traces = {}
    for variant in variants:
        events = []
        for line in (4, 7):
            for label in ("i", "acc"):
                for occ in range(1, rng.randint(1, 7)):
                    events.append(ev(variant, line, label, occ, str(rng.randint(0, 3))))
        rng.shuffle(events)
        # Restore per-site occurrence order after the shuffle so the trace
        # stays well-formed; cross-site interleaving stays random.
        events.sort(key=lambda e: (e.location.line, e.label, e.occurrence))
        traces[variant] = events
    return traces


def test_random_tables_divergence_iff_columns_differ():
    rng = random.Random(2024)
    for _ in range(80):
        traces = _random_traces(rng, ["buggy", "p1", "p2"])
        table = align(traces)
        assert table.cell_count() == sum(len(t) for t in traces.values())
        for pid in ("p1", "p2"):
            hit = first_divergence(table, pid)
            same = all(not table.is_divergent(pid, r) for r in table.rows)
            assert (hit is None) == same
            small = summarize(table, 2)
            if hit is not None:
                assert hit in small.rows


def test_adding_column_never_changes_existing_cells():
    rng = random.Random(99)
    traces = _random_traces(rng, ["buggy", "p1", "p2"])
    narrow = align({"buggy": traces["buggy"], "p1": traces["p1"]})
    wide = align(traces)
    assert narrow.cells["buggy"] == wide.cells["buggy"]
    assert narrow.cells["p1"] == wide.cells["p1"]
    assert narrow.first_divergences["p1"] == wide.first_divergences["p1"]
    assert list(narrow.rows) == [r for r in wide.rows if r in set(narrow.rows)]


def test_render_text_marks_divergence_and_elision():
    n = 10
    base = [str(i) for i in range(1, n + 1)]
    other = base[:4] + [str(i * 11) for i in range(5, n + 1)]
    table = align(
        {
            "buggy": series("buggy", 7, "acc", base),
            "p1": series("p1", 7, "acc", other) ,
        }
    )
    text = render_text(summarize(table, 3))
    assert "!55" in text
    assert "(3 rows elided)" in text
    assert "first divergence at main.ml0:7 acc occurrence 5" in text
    short = align({"buggy": series("buggy", 4, "i", ["1", "2"]), "p1": [ev("p1", 4, "i", 1, "1")]})
    short_text = render_text(short)
    assert "-" in short_text  # absent cell
    assert "no divergence" not in short_text


def test_table_json_round_trip():
    n = 9
    base = [str(i) for i in range(1, n + 1)]
    other = base[:3] + [str(i * 7) for i in range(4, n + 1)]
    table = align(
        {
            "buggy": series("buggy", 7, "acc", base) + series("buggy", 9, "z", ["5"]),
            "p1": series("p1", 7, "acc", other),
        }
    )
    for t in (table, summarize(table, 3)):
        data = table_to_json(t)
        assert table_from_json(data) == t
    with pytest.raises(CompareError, match="malformed"):
        table_from_json({"columns": ["buggy"]})
    bad = table_to_json(table)
    bad["rows"][0]["kind"] = "poke"
    with pytest.raises(CompareError, match="kind"):
        table_from_json(bad)
