"""Command-line front end.

Batch subcommands drive the pipeline in-process and print either a plain
text report or the structured JSON the session format defines; `serve`
wraps the same state in the HTTP service for the UI.  Every stage error
reaches stderr with its stage tag so scripts can tell a broken bundle
from a broken trace.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import corpus, session_store
from .compare import BUGGY, CompareError, align, render_text, summarize, table_to_json
from .pipeline import (
    DEFAULT_ROW_BUDGET,
    EVAL_MODES,
    PipelineError,
    RunResult,
    analyze_bundle,
    eval_bundles,
    run_bundle,
    trace_candidate,
    trace_variant,
)
from .sampler import parse_cut_policy, policy_text, sample
from .tracer import deserialize_trace, serialize_trace


def _add_sampling_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cut", default="gap", metavar="gap|threshold=<v>|k=<n>",
                        help="dendrogram cut policy (default: gap)")
    parser.add_argument("--max-clusters", type=int, default=8, metavar="N",
                        help="cap for the gap cut (default: 8)")
    parser.add_argument("--no-cluster", action="store_true",
                        help="rank every plausible patch, no clustering")
    parser.add_argument("--centroid", choices=("min", "max"), default="min",
                        help="pick the most (min) or least (max) representative member")


def _add_format_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("text", "structured"), default="text",
                        help="report style (default: text)")


def _policy(args: argparse.Namespace):
    try:
        return parse_cut_policy(args.cut, k_max=args.max_clusters)
    except ValueError as e:
        raise PipelineError("sample", str(e)) from e


def _print_session(result: RunResult) -> None:
    session = result.session
    bundle = result.bundle
    print(f"bundle {bundle.name} ({result.bundle_path})")
    print(f"region {bundle.region}  failing test {bundle.failing_test}")
    print(f"plausible {len(session.patches)}, rejected {len(result.rejected)}")
    for pid, reason in result.rejected:
        print(f"  rejected {pid}: {reason}")
    print()
    print("call stack (innermost first):")
    for frame in result.stack.frames:
        print(f"  {frame.function} at {frame.site}")
    print()
    if session.clustering:
        print(f"clusters (cut={policy_text(session.policy)}):")
        for c in session.clusters:
            print(f"  {c.id}: {c.centroid} <- {' '.join(c.members)}")
    else:
        print("clustering disabled")
    print()
    print("ranked:")
    for i, entry in enumerate(session.ranked.entries, start=1):
        tag = f"  cluster {entry.cluster_id}" if entry.cluster_id else ""
        print(f"  {i}. {entry.patch_id}{tag}  distance {entry.distance}")
    print()
    print(render_text(result.summary))


def cmd_run(args: argparse.Namespace) -> int:
    result = run_bundle(
        args.bundle,
        policy=_policy(args),
        clustering=not args.no_cluster,
        centroid_mode=args.centroid,
        row_budget=args.row_budget,
    )
    if args.out:
        session_store.save(result, args.out)
    if args.format == "structured":
        sys.stdout.write(session_store.dumps(result))
    else:
        _print_session(result)
        if args.out:
            print(f"session written to {args.out}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        bundle = corpus.load(args.bundle)
    except corpus.CorpusError as e:
        raise PipelineError("load", str(e)) from e
    try:
        plausible, rejected = corpus.validate(bundle)
    except corpus.CorpusError as e:
        raise PipelineError("validate", str(e)) from e
    if args.format == "structured":
        print(json.dumps({
            "bundle": bundle.name,
            "plausible": [
                {"id": p.id, "original_rank": p.original_rank, "distance": p.distance_to_buggy}
                for p in plausible
            ],
            "rejected": [{"id": pid, "reason": reason} for pid, reason in rejected],
        }, indent=2))
        return 0
    print(f"bundle {bundle.name}: {len(plausible)} plausible, {len(rejected)} rejected")
    for p in plausible:
        print(f"  plausible {p.id}  rank {p.original_rank}  distance {p.distance_to_buggy}")
    for pid, reason in rejected:
        print(f"  rejected {pid}: {reason}")
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    try:
        bundle = corpus.load(args.bundle)
    except corpus.CorpusError as e:
        raise PipelineError("load", str(e)) from e
    try:
        plausible, _ = corpus.validate(bundle)
    except corpus.CorpusError as e:
        raise PipelineError("validate", str(e)) from e
    try:
        session = sample(
            plausible,
            _policy(args),
            clustering=not args.no_cluster,
            centroid_mode=args.centroid,
            buggy_tokens=bundle.buggy_tokens(),
        )
    except ValueError as e:
        raise PipelineError("sample", str(e)) from e
    if args.format == "structured":
        print(json.dumps(session_store.session_to_json(session), indent=2))
        return 0
    if session.clustering:
        print(f"clusters (cut={policy_text(session.policy)}):")
        for c in session.clusters:
            print(f"  {c.id}: {c.centroid} <- {' '.join(c.members)}")
    else:
        print("clustering disabled")
    print("ranked:")
    for i, entry in enumerate(session.ranked.entries, start=1):
        tag = f"  cluster {entry.cluster_id}" if entry.cluster_id else ""
        print(f"  {i}. {entry.patch_id}{tag}  distance {entry.distance}")
    return 0


def cmd_trace(args: argparse.Namespace) -> int:
    try:
        bundle = corpus.load(args.bundle)
    except corpus.CorpusError as e:
        raise PipelineError("load", str(e)) from e
    try:
        _, affected = analyze_bundle(bundle)
        if args.variant == BUGGY:
            run = trace_variant(bundle.program, bundle.failing_test, affected, bundle.region, 0, BUGGY)
        else:
            run = trace_candidate(bundle, affected, args.variant)
    except corpus.CorpusError as e:
        raise PipelineError("trace", str(e)) from e
    except PipelineError:
        raise
    except Exception as e:
        raise PipelineError("trace", str(e)) from e
    data = serialize_trace(run.events)
    if args.out:
        Path(args.out).write_bytes(data)
        print(f"{len(run.events)} events written to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    traces: dict[str, list] = {}
    try:
        for path in args.traces:
            for event in deserialize_trace(Path(path).read_bytes()):
                traces.setdefault(event.variant, []).append(event)
    except OSError as e:
        raise PipelineError("load", str(e)) from e
    except Exception as e:
        raise PipelineError("align", str(e)) from e
    if BUGGY not in traces:
        raise PipelineError("align", f"no {BUGGY!r} variant among the given traces")
    try:
        table = summarize(align(traces), args.row_budget)
    except CompareError as e:
        raise PipelineError("align", str(e)) from e
    if args.format == "structured":
        print(json.dumps(table_to_json(table), indent=2))
    else:
        print(render_text(table))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    report = eval_bundles(args.bundles, policy=_policy(args), centroid_mode=args.centroid)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    if args.format == "structured":
        print(json.dumps({
            "rows": [{"bundle": r.bundle, "truth": r.truth, "ranks": r.ranks} for r in report.rows],
            "mean": {mode: report.mean(mode) for mode in EVAL_MODES},
            "median": {mode: report.median(mode) for mode in EVAL_MODES},
            "warnings": list(report.warnings),
        }, indent=2))
        return 0
    width = max(len(r.bundle) for r in report.rows)
    width = max(width, len("bundle"))
    header = "bundle".ljust(width) + "".join(f"  {mode:>10}" for mode in EVAL_MODES)
    print(header)
    for row in report.rows:
        cells = "".join(f"  {row.ranks[mode]:>10}" for mode in EVAL_MODES)
        print(row.bundle.ljust(width) + cells)
    for stat, fn in (("mean", report.mean), ("median", report.median)):
        cells = "".join(f"  {fn(mode):>10.2f}" for mode in EVAL_MODES)
        print(stat.ljust(width) + cells)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    try:
        result = session_store.load(args.session)
    except session_store.SessionStoreError as e:
        raise PipelineError("load", str(e)) from e
    app = create_app(result, session_path=args.session)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="triage", description="Patch triage for plausible-patch review")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline: validate, sample, trace, align")
    p.add_argument("bundle", help="bundle directory")
    _add_sampling_flags(p)
    p.add_argument("--row-budget", type=int, default=DEFAULT_ROW_BUDGET, metavar="N",
                   help=f"max table rows per (location, label) group (default: {DEFAULT_ROW_BUDGET})")
    p.add_argument("--out", metavar="FILE", help="write the session file here")
    _add_format_flag(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("validate", help="run the test suite against every candidate")
    p.add_argument("bundle")
    _add_format_flag(p)
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("sample", help="cluster and rank without tracing")
    p.add_argument("bundle")
    _add_sampling_flags(p)
    _add_format_flag(p)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("trace", help="trace one variant's failing-test run")
    p.add_argument("bundle")
    p.add_argument("variant", help=f"candidate id, or {BUGGY!r} for the unpatched program")
    p.add_argument("--out", metavar="FILE", help="write the trace here instead of stdout")
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("compare", help="align trace files into a comparison table")
    p.add_argument("traces", nargs="+", metavar="TRACE")
    p.add_argument("--row-budget", type=int, default=DEFAULT_ROW_BUDGET, metavar="N")
    _add_format_flag(p)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("eval", help="rank the known-correct patch across modes")
    p.add_argument("bundles", nargs="+", metavar="BUNDLE")
    _add_sampling_flags(p)
    _add_format_flag(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("serve", help="serve a session file over HTTP")
    p.add_argument("session", help="session file from `triage run --out`")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except PipelineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
