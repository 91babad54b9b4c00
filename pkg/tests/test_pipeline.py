"""End-to-end runs over bundles: staging, normalization, evaluation."""

from __future__ import annotations

from pathlib import Path

import pytest

from patchtriage import corpus, pipeline
from patchtriage.compare import BUGGY
from patchtriage.pipeline import PipelineError, clustered_rank, eval_bundles, run_bundle
from patchtriage.sampler import FixedKCut

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def _events(run, line, kind, label):
    return [e.value for e in run.events if e.location.line == line and e.kind == kind and e.label == label]


@pytest.fixture(scope="module")
def loopidx():
    return run_bundle(FIXTURES / "loopidx")


class TestRunBundle:
    def test_sampled_representatives(self, loopidx):
        assert [(c.id, c.members, c.centroid) for c in loopidx.session.clusters] == [
            ("c1", ("a1", "a2", "a3"), "a2"),
            ("c2", ("b1", "b2", "b3"), "b1"),
            ("c3", ("o1",), "o1"),
        ]
        assert [e.patch_id for e in loopidx.session.ranked.entries] == ["a2", "b1", "o1"]

    def test_variants_traced_in_rank_order(self, loopidx):
        assert [r.variant for r in loopidx.runs] == [BUGGY, "a2", "b1", "o1"]

    def test_buggy_loop_values(self, loopidx):
        buggy = loopidx.run_for(BUGGY)
        assert _events(buggy, 12, "def", "pos") == ["1", "3", "5"]
        assert _events(buggy, 11, "use", "pos") == ["0", "1", "3", "5"]
        assert buggy.outcome.status == "assertion-failure"

    def test_constant_advance_diverges_at_second_iteration(self, loopidx):
        key = loopidx.table.first_divergences["b1"]
        assert (key.location.line, key.label, key.kind, key.occurrence) == (12, "pos", "def", 2)

    def test_matching_advance_diverges_later(self, loopidx):
        key = loopidx.table.first_divergences["a2"]
        assert (key.location.line, key.label, key.kind, key.occurrence) == (12, "pos", "def", 3)

    def test_multiline_patch_diverges_by_absence(self, loopidx):
        key = loopidx.table.first_divergences["o1"]
        assert (key.location.line, key.label, key.kind, key.occurrence) == (12, "pos", "def", 1)
        assert loopidx.table.cell("o1", key) is None

    def test_multiline_patch_keeps_own_region_rows(self, loopidx):
        o1 = loopidx.run_for("o1")
        assert _events(o1, 12, "def", "w") == ["1", "2", "1", "1"]
        assert _events(o1, 13, "def", "pos") == ["1", "3", "4", "5"]

    def test_rejected_list_empty_for_all_plausible(self, loopidx):
        assert loopidx.rejected == ()

    def test_no_cluster_traces_every_patch(self):
        result = run_bundle(FIXTURES / "loopidx", clustering=False)
        assert [r.variant for r in result.runs[:1]] == [BUGGY]
        assert sorted(r.variant for r in result.runs[1:]) == ["a1", "a2", "a3", "b1", "b2", "b3", "o1"]
        assert result.session.clusters == ()

    def test_fixed_k_policy_respected(self):
        result = run_bundle(FIXTURES / "loopidx", policy=FixedKCut(2))
        assert len(result.session.clusters) == 2


class TestLineNormalization:
    """A patch that grows the region must not break alignment below it."""

    PROGRAM = """fn f(a) {
    let x = a + 1;
    let y = x * 3;
    return y;
}
"""
    TESTS = """fn test_f() {
    let r = f(1);
    assert(r == 9);
}
"""
    MANIFEST = """files = ["f.ml0", "tests.ml0"]
region = "f.ml0:2-2"
failing_test = "test_f"
passing_tests = []
candidates = ["tall"]
"""

    @pytest.fixture()
    def bundle_dir(self, tmp_path):
        root = tmp_path / "grow"
        root.mkdir()
        (root / "f.ml0").write_text(self.PROGRAM)
        (root / "tests.ml0").write_text(self.TESTS)
        (root / "bug.toml").write_text(self.MANIFEST)
        (root / "patches").mkdir()
        (root / "patches" / "tall.patch").write_text("    let t = 2;\n    let x = a + t;\n")
        return root

    def test_shifted_sites_align_below_region(self, bundle_dir):
        result = run_bundle(bundle_dir)
        tall = result.run_for("tall")
        # The product and the def of y live at line 4 in the patched file;
        # their events come back on line 3 to line up with the buggy run.
        assert _events(tall, 3, "def", "y") == ["9"]
        assert _events(tall, 3, "subexpr", "x * 3") == ["9"]
        assert _events(tall, 4, "def", "y") == []
        for label, kind, buggy_val, tall_val in [("y", "def", "6", "9"), ("x * 3", "subexpr", "6", "9")]:
            row = next(k for k in result.table.rows if k.kind == kind and k.label == label)
            assert result.table.cell(BUGGY, row).value == buggy_val
            assert result.table.cell("tall", row).value == tall_val

    def test_replacement_definitions_observed_in_place(self, bundle_dir):
        result = run_bundle(bundle_dir)
        tall = result.run_for("tall")
        assert _events(tall, 2, "def", "t") == ["2"]
        assert _events(tall, 3, "def", "x") == ["3"]

    def test_folded_line_recounts_shared_occurrences(self, bundle_dir):
        # The replacement defines x on its own line 3, the same line the
        # shifted use of x folds back onto; the def takes occurrence 1 of
        # the (line 3, x) slot and the use moves to occurrence 2.
        result = run_bundle(bundle_dir)
        tall = result.run_for("tall")
        slot = [(e.kind, e.occurrence, e.value) for e in tall.events
                if e.location.line == 3 and e.label == "x"]
        assert slot == [("def", 1, "3"), ("use", 2, "3")]
        buggy_use = next(k for k in result.table.rows if k.kind == "use" and k.label == "x")
        assert buggy_use.occurrence == 1
        assert result.table.cell("tall", buggy_use) is None


class TestStages:
    def test_missing_bundle_fails_at_load(self, tmp_path):
        with pytest.raises(PipelineError, match=r"\[load\]") as err:
            run_bundle(tmp_path / "nowhere")
        assert err.value.stage == "load"

    def test_dead_region_fails_at_analyze(self, tmp_path):
        root = tmp_path / "dead"
        root.mkdir()
        (root / "f.ml0").write_text("fn f(a) {\n    let x = a + 1;\n    return x;\n}\n")
        (root / "tests.ml0").write_text("fn test_f() {\n    assert(1 == 2);\n}\n")
        (root / "bug.toml").write_text(
            'files = ["f.ml0", "tests.ml0"]\nregion = "f.ml0:2-2"\n'
            'failing_test = "test_f"\npassing_tests = []\ncandidates = []\n'
        )
        (root / "patches").mkdir()
        with pytest.raises(PipelineError, match=r"\[analyze\]") as err:
            run_bundle(root)
        assert err.value.stage == "analyze"

    def test_bad_row_budget_rejected(self):
        with pytest.raises(PipelineError, match="row budget"):
            run_bundle(FIXTURES / "loopidx", row_budget=0)


class TestEval:
    def test_ranks_per_mode(self):
        report = eval_bundles([FIXTURES / "ranksum", FIXTURES / "loopidx"])
        by_name = {row.bundle: row for row in report.rows}
        assert by_name["ranksum"].ranks == {"clustered": 1, "no-cluster": 1, "original": 2}
        assert by_name["loopidx"].ranks == {"clustered": 1, "no-cluster": 1, "original": 4}
        assert report.mean("original") == 3.0
        assert report.warnings == ()

    def test_buried_member_costs_its_expansion_depth(self):
        bundle = corpus.load(FIXTURES / "loopidx")
        plausible, _ = corpus.validate(bundle)
        from patchtriage.sampler import GapCut, sample

        session = sample(plausible, GapCut(), buggy_tokens=bundle.buggy_tokens())
        # b2 hides behind centroid b1 (ranked 2nd); within its cluster the
        # similarity order is b1, b2, b3, so b2 surfaces two steps in.
        assert clustered_rank(session, "b1") == 2
        assert clustered_rank(session, "b2") == 3
        assert clustered_rank(session, "b3") == 4
        assert clustered_rank(session, "o1") == 3

    def test_truthless_bundle_skipped_with_warning(self, tmp_path):
        report = eval_bundles([FIXTURES / "ranksum", tmp_path / "missing"])
        assert len(report.rows) == 1
        assert any("skipped" in w for w in report.warnings)

    def test_nothing_evaluable_is_an_error(self, tmp_path):
        with pytest.raises(PipelineError, match="no evaluable bundles"):
            eval_bundles([tmp_path / "missing"])
