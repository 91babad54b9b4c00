"""Bug bundles: program, tests, buggy region, and candidate patches.

A bundle is a directory:

    bug.toml            manifest (see load)
    patches/<id>.patch  raw replacement text for each candidate
    truth.toml          optional, evaluation only: the known-correct id

Loading checks the bundle's promises eagerly: the program parses, the
region addresses whole statements, the failing test really fails, and the
passing tests really pass.  Plausibility filtering (validate) then runs
each candidate against the suite, which is the generate-and-validate step
that produces the patch list the sampler works from.

The ground-truth id is deliberately not part of PatchCorpus: scoring code
loads it through load_truth, so ranking and comparison logic cannot see
it even by accident.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .distance import tokenize
from .minilang.ast import Program
from .minilang.errors import MiniLangSyntaxError, PatchError
from .minilang.interp import run_test
from .minilang.parser import parse
from .minilang.patch import Region, apply_patch, first_statement_in_region, region_text
from .sampler import Patch, make_patch

__all__ = [
    "CorpusError",
    "Candidate",
    "PatchCorpus",
    "load",
    "load_truth",
    "validate",
    "apply_candidate",
]


class CorpusError(Exception):
    """The bundle is malformed or breaks its own invariants."""


_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*$")


@dataclass(frozen=True)
class Candidate:
    """One generated patch before plausibility filtering."""

    id: str
    original_rank: int
    replacement_text: str


@dataclass(frozen=True)
class PatchCorpus:
    name: str
    root: Path
    program: Program
    region: Region
    failing_test: str
    passing_tests: tuple[str, ...]
    candidates: tuple[Candidate, ...]

    def buggy_text(self) -> str:
        return region_text(self.program, self.region)

    def buggy_tokens(self) -> tuple[str, ...]:
        return tokenize(self.buggy_text())

    def candidate(self, candidate_id: str) -> Candidate:
        for cand in self.candidates:
            if cand.id == candidate_id:
                return cand
        raise CorpusError(f"unknown candidate {candidate_id!r}")


def _want(manifest: dict, key: str, kind: type, where: str):
    if key not in manifest:
        raise CorpusError(f"{where}: missing key {key!r}")
    value = manifest[key]
    if not isinstance(value, kind):
        raise CorpusError(f"{where}: {key!r} must be {kind.__name__}")
    return value


def _want_str_list(manifest: dict, key: str, where: str) -> list[str]:
    value = _want(manifest, key, list, where)
    if not all(isinstance(item, str) for item in value):
        raise CorpusError(f"{where}: {key!r} must be a list of strings")
    return value


def load(path: str | Path) -> PatchCorpus:
    """Load and eagerly check a bundle directory.

    Manifest keys (bug.toml): region ("file:start-end"), failing_test,
    passing_tests (list), files (program source names), candidates (patch
    ids, listed in the generator's ranking order; rank = position).
    """
    root = Path(path)
    manifest_path = root / "bug.toml"
    if not manifest_path.is_file():
        raise CorpusError(f"{root}: no bug.toml")
    try:
        manifest = tomllib.loads(manifest_path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise CorpusError(f"{manifest_path}: {e}") from None

    where = str(manifest_path)
    name = manifest.get("name", root.name)
    if not isinstance(name, str) or not _NAME_RE.match(name):
        raise CorpusError(f"{where}: bad bundle name {name!r}")
    files = _want_str_list(manifest, "files", where)
    if not files:
        raise CorpusError(f"{where}: 'files' is empty")
    region_spec = _want(manifest, "region", str, where)
    failing_test = _want(manifest, "failing_test", str, where)
    passing_tests = _want_str_list(manifest, "passing_tests", where)
    candidate_ids = _want_str_list(manifest, "candidates", where)

    sources: dict[str, str] = {}
    for file in files:
        if "/" in file or "\\" in file or file.startswith("."):
            raise CorpusError(f"{where}: bad source file name {file!r}")
        source_path = root / file
        if not source_path.is_file():
            raise CorpusError(f"{where}: missing source file {file!r}")
        sources[file] = source_path.read_text(encoding="utf-8")
    try:
        program = parse(sources)
    except MiniLangSyntaxError as e:
        raise CorpusError(f"{root}: program parse error: {e}") from None

    try:
        region = Region.parse(region_spec)
    except ValueError as e:
        raise CorpusError(f"{where}: {e}") from None
    try:
        first_statement_in_region(program, region)
    except PatchError as e:
        raise CorpusError(f"{root}: bad region: {e}") from None

    tests = set(program.test_names())
    for test in [failing_test, *passing_tests]:
        if test not in tests:
            raise CorpusError(f"{root}: no test function {test!r}")
    outcome = run_test(program, failing_test)
    if outcome.passed:
        raise CorpusError(
            f"{root}: corrupt bundle: failing test {failing_test!r} passes on the unpatched program"
        )
    for test in passing_tests:
        outcome = run_test(program, test)
        if not outcome.passed:
            raise CorpusError(
                f"{root}: corrupt bundle: passing test {test!r} fails on the "
                f"unpatched program ({outcome.status})"
            )

    if len(set(candidate_ids)) != len(candidate_ids):
        dupes = sorted({c for c in candidate_ids if candidate_ids.count(c) > 1})
        raise CorpusError(f"{where}: duplicate candidate ids {dupes}")
    candidates = []
    for rank, candidate_id in enumerate(candidate_ids, start=1):
        if not _ID_RE.match(candidate_id):
            raise CorpusError(f"{where}: bad candidate id {candidate_id!r}")
        patch_path = root / "patches" / f"{candidate_id}.patch"
        if not patch_path.is_file():
            raise CorpusError(f"{root}: missing patch file patches/{candidate_id}.patch")
        candidates.append(Candidate(candidate_id, rank, patch_path.read_text(encoding="utf-8")))

    return PatchCorpus(
        name=name,
        root=root,
        program=program,
        region=region,
        failing_test=failing_test,
        passing_tests=tuple(passing_tests),
        candidates=tuple(candidates),
    )


def load_truth(path: str | Path) -> Optional[str]:
    """The known-correct candidate id, or None when the bundle has none.

    Kept out of PatchCorpus so only evaluation code ever sees it.
    """
    truth_path = Path(path) / "truth.toml"
    if not truth_path.is_file():
        return None
    try:
        data = tomllib.loads(truth_path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise CorpusError(f"{truth_path}: {e}") from None
    correct = data.get("correct")
    if not isinstance(correct, str):
        raise CorpusError(f"{truth_path}: 'correct' must be a candidate id string")
    return correct


def apply_candidate(corpus: PatchCorpus, candidate: Candidate) -> Program:
    """The program with this candidate's replacement spliced into the region."""
    return apply_patch(corpus.program, corpus.region, candidate.replacement_text)


def validate(corpus: PatchCorpus) -> tuple[list[Patch], list[tuple[str, str]]]:
    """Split candidates into plausible patches and rejects with reasons.

    A candidate is plausible when its patched program parses, makes the
    failing test pass, and keeps every passing test passing.  Candidates
    are independent; the plausible list keeps original_rank order.
    """
    plausible: list[Patch] = []
    implausible: list[tuple[str, str]] = []
    buggy_tokens = corpus.buggy_tokens()
    for cand in corpus.candidates:
        try:
            patched = apply_candidate(corpus, cand)
        except PatchError as e:
            implausible.append((cand.id, f"does not parse: {e}"))
            continue
        outcome = run_test(patched, corpus.failing_test)
        if outcome.status == "assertion-failure":
            implausible.append((cand.id, "failing test still fails"))
            continue
        if outcome.status == "runtime-error":
            implausible.append((cand.id, f"failing test errors: {outcome.message}"))
            continue
        broken = None
        for test in corpus.passing_tests:
            check = run_test(patched, test)
            if not check.passed:
                detail = check.message or "assertion failed"
                broken = f"breaks {test}: {detail}"
                break
        if broken is not None:
            implausible.append((cand.id, broken))
            continue
        plausible.append(make_patch(cand.id, cand.original_rank, cand.replacement_text, buggy_tokens))
    return plausible, implausible
