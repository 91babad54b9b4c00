"""Lexer, parser, printer, interpreter, and patching behavior."""
from __future__ import annotations

import pytest

from patchtriage.minilang import (
    MiniLangSyntaxError,
    PatchError,
    Region,
    apply_patch,
    first_statement_in_region,
    lex,
    line_delta,
    parse,
    parse_one,
    print_expr,
    print_program,
    region_text,
    run_suite,
    run_test,
)
from patchtriage.minilang.ast import Assign, Binary, Call, If, Let, Var, While, structural_equal


def test_lex_basic_tokens():
    toks = lex('let x = 12 + 3.5; // comment\nprint("a\\n");', file="f.ml0")
    kinds = [(t.kind, t.lexeme) for t in toks[:-1]]
    assert kinds == [
        ("keyword", "let"),
        ("ident", "x"),
        ("op", "="),
        ("int", "12"),
        ("op", "+"),
        ("float", "3.5"),
        ("op", ";"),
        ("ident", "print"),
        ("op", "("),
        ("string", '"a\\n"'),
        ("op", ")"),
        ("op", ";"),
    ]
    assert toks[9].text == "a\n"


def test_lex_locations_and_crlf():
    toks = lex("let x = 1;\r\nx = 2;", file="f.ml0")
    assign = [t for t in toks if t.lexeme == "x"]
    assert (assign[0].loc.line, assign[0].loc.col) == (1, 5)
    assert (assign[1].loc.line, assign[1].loc.col) == (2, 1)


def test_lex_strict_rejects_unknown_char():
    with pytest.raises(MiniLangSyntaxError) as exc:
        lex("let x = 1 @ 2;", file="f.ml0")
    assert exc.value.loc.col == 11


def test_lex_lenient_keeps_going():
    toks = lex('a @ "unterminated', file="f.ml0", strict=False)
    lexemes = [t.lexeme for t in toks[:-1]]
    assert lexemes == ["a", "@", '"', "unterminated"]


def test_parse_precedence():
    p = parse_one("fn f() { return 1 + 2 * 3 < 4 && true; }")
    expr = p.functions[0].body[0].value
    assert isinstance(expr, Binary) and expr.op == "&&"
    cmp = expr.left
    assert isinstance(cmp, Binary) and cmp.op == "<"
    add = cmp.left
    assert isinstance(add, Binary) and add.op == "+"
    assert isinstance(add.right, Binary) and add.right.op == "*"


def test_parse_statement_locations():
    src = "fn f(n) {\n    let a = 1;\n    if (a < n) {\n        a = 2;\n    }\n}\n"
    p = parse_one(src, "m.ml0")
    body = p.functions[0].body
    assert (body[0].loc.line, body[0].loc.col) == (2, 5)
    assert body[0].end_loc.line == 2
    iff = body[1]
    assert isinstance(iff, If)
    assert iff.loc.line == 3 and iff.end_loc.line == 5
    inner = iff.then_body[0]
    assert isinstance(inner, Assign) and inner.loc.line == 4


def test_parse_else_if_chain():
    p = parse_one("fn f(x) { if (x < 0) { return 1; } else if (x < 9) { return 2; } else { return 3; } }")
    iff = p.functions[0].body[0]
    assert isinstance(iff, If)
    nested = iff.else_body[0]
    assert isinstance(nested, If) and nested.else_body is not None


def test_parse_error_reports_first_offending_location():
    with pytest.raises(MiniLangSyntaxError) as exc:
        parse_one("fn f() {\n    let = 4;\n}", "m.ml0")
    assert exc.value.loc.line == 2 and exc.value.loc.col == 9


def test_parse_duplicate_function_rejected():
    with pytest.raises(MiniLangSyntaxError) as exc:
        parse({"a.ml0": "fn f() { return 1; }", "b.ml0": "fn f() { return 2; }"})
    assert "duplicate function" in str(exc.value)


def test_parse_files_in_sorted_name_order():
    p = parse({"b.ml0": "fn bf() { return 1; }", "a.ml0": "fn af() { return 2; }"})
    assert [f.name for f in p.functions] == ["af", "bf"]


def test_print_round_trip_is_structurally_identical():
    src = """
fn poll(xs, n) {
    let total = 0;
    let i = 0;
    while (i < n) {
        total = total + xs[i] * (2 - 1);
        i = i + 1;
    }
    if (total >= 10 || !(n == 0)) {
        return -total;
    } else if (total < -5) {
        return 0;
    }
    return total % 7;
}

fn test_poll() {
    assert(poll([1, 2.5, 3], 2) == -3);
    print("v", [true, "s\\t!"]);
}
"""
    p1 = parse_one(src, "m.ml0")
    printed = print_program(p1)
    p2 = parse_one(printed, "m.ml0")
    assert structural_equal(p1, p2)
    assert print_program(p2) == printed


def test_print_expr_minimal_parens():
    p = parse_one("fn f(a, b, c) { return (a + b) * c - a / (b - c); }")
    assert print_expr(p.functions[0].body[0].value) == "(a + b) * c - a / (b - c)"


def _run(src: str, test: str = "test_main"):
    return run_test(parse_one(src, "m.ml0"), test)


def test_interp_int_semantics():
    out = _run(
        """
fn test_main() {
    assert(9223372036854775807 + 1 == -9223372036854775808);
    assert(7 / 2 == 3);
    assert(-7 / 2 == -3);
    assert(7 % -2 == 1);
    assert(-7 % 2 == -1);
    assert(2 * 3.0 == 6.0);
    assert(1 / 2 == 0);
    assert(1.0 / 2 == 0.5);
}
"""
    )
    assert out.passed, out


def test_interp_equality_is_tagged():
    out = _run(
        """
fn test_main() {
    assert(!(1 == 1.0));
    assert([1, [2, "x"]] == [1, [2, "x"]]);
    assert([1] != [1, 1]);
    assert(1 < 1.5);
}
"""
    )
    assert out.passed, out


def test_interp_short_circuit():
    out = _run(
        """
fn boom() {
    let x = 1 / 0;
    return true;
}

fn test_main() {
    assert(!(false && boom()));
    assert(true || boom());
}
"""
    )
    assert out.passed, out


def test_interp_division_by_zero_is_runtime_error():
    out = _run("fn test_main() { let x = 1 / 0; }")
    assert out.status == "runtime-error"
    assert "division by zero" in out.message


def test_interp_undefined_variable():
    out = _run("fn test_main() { let x = y + 1; }")
    assert out.status == "runtime-error"
    assert "undefined variable" in out.message


def test_interp_index_bounds():
    out = _run("fn test_main() { let xs = [1, 2]; let v = xs[2]; }")
    assert out.status == "runtime-error"
    assert "out of range" in out.message


def test_interp_assertion_failure_location():
    out = _run("fn test_main() {\n    assert(1 == 2);\n}")
    assert out.status == "assertion-failure"
    assert out.loc.line == 2 and out.loc.col == 5


def test_interp_step_budget_terminates_loops():
    src = "fn test_main() { let i = 0; while (i < 1) { i = i - 1; } }"
    out = run_test(parse_one(src, "m.ml0"), "test_main", step_budget=5000)
    assert out.status == "runtime-error"
    assert "step budget" in out.message


def test_interp_call_depth_capped():
    out = _run("fn f(n) { return f(n + 1); }\nfn test_main() { let x = f(0); }")
    assert out.status == "runtime-error"
    assert "call depth" in out.message


def test_interp_builtins():
    out = _run(
        """
fn test_main() {
    assert(sqrt(9) == 3.0);
    assert(abs(-4) == 4);
    assert(abs(-4.5) == 4.5);
    assert(len([1, 2, 3]) == 3);
    assert(len("abc") == 3);
    assert(floor(2.9) == 2);
    assert(floor(-2.1) == -3);
}
"""
    )
    assert out.passed, out


def test_interp_prints_are_captured_in_order():
    out = _run('fn test_main() { print("a", 1); print(2.5); print([1, "x"]); }')
    assert out.prints == ("a 1", "2.5", '[1, "x"]')


def test_run_suite_declaration_order_and_independence():
    src = """
fn test_one() { let x = 1; assert(x == 1); }

fn test_two() { assert(1 == 2); }

fn test_three() { let y = 1 / 0; }
"""
    outs = run_suite(parse_one(src, "m.ml0"))
    assert [o.test for o in outs] == ["test_one", "test_two", "test_three"]
    assert [o.status for o in outs] == ["pass", "assertion-failure", "runtime-error"]


SRC_PATCH = """fn scale(x) {
    let y = x * 3;
    return y;
}

fn test_scale() {
    assert(scale(2) == 4);
}
"""


def test_apply_patch_replaces_statements():
    p = parse_one(SRC_PATCH, "m.ml0")
    region = Region("m.ml0", 2, 2)
    assert region_text(p, region) == "    let y = x * 3;"
    patched = apply_patch(p, region, "    let y = x * 2;")
    assert run_test(patched, "test_scale").passed
    assert not run_test(p, "test_scale").passed
    assert "x * 3" in p.sources["m.ml0"]


def test_apply_patch_identity_is_structural_noop():
    p = parse_one(SRC_PATCH, "m.ml0")
    region = Region("m.ml0", 2, 2)
    patched = apply_patch(p, region, region_text(p, region))
    assert structural_equal(p, patched)


def test_apply_patch_multiline_replacement_shifts_lines():
    p = parse_one(SRC_PATCH, "m.ml0")
    region = Region("m.ml0", 2, 2)
    repl = "    let t = x + x;\n    let y = t;"
    patched = apply_patch(p, region, repl)
    assert line_delta(region, repl) == 1
    assert run_test(patched, "test_scale").passed
    # The return statement moved down one line.
    ret = patched.functions[0].body[-1]
    assert ret.loc.line == 4


def test_apply_patch_rejects_straddling_region():
    src = "fn f(n) {\n    if (n > 0) {\n        n = 1;\n    }\n    return n;\n}\n"
    p = parse_one(src, "m.ml0")
    with pytest.raises(PatchError) as exc:
        apply_patch(p, Region("m.ml0", 3, 5), "    return 0;")
    assert "splits" in str(exc.value)


def test_apply_patch_rejects_function_header():
    p = parse_one(SRC_PATCH, "m.ml0")
    with pytest.raises(PatchError):
        apply_patch(p, Region("m.ml0", 1, 2), "fn scale(x) {\n    return 0;")


def test_apply_patch_rejects_nonparsing_replacement():
    p = parse_one(SRC_PATCH, "m.ml0")
    with pytest.raises(PatchError) as exc:
        apply_patch(p, Region("m.ml0", 2, 2), "    let y = ;")
    assert "does not parse" in str(exc.value)


def test_first_statement_in_region():
    p = parse_one(SRC_PATCH, "m.ml0")
    stmt = first_statement_in_region(p, Region("m.ml0", 2, 3))
    assert isinstance(stmt, Let) and stmt.loc.line == 2
