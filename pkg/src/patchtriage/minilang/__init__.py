"""MiniLang: the small deterministic language the triage engine operates on."""
from __future__ import annotations

from . import ast
from .errors import (
    AssertionFailure,
    MiniLangError,
    MiniLangRuntimeError,
    MiniLangSyntaxError,
    PatchError,
)
from .interp import (
    DEFAULT_MAX_CALL_DEPTH,
    DEFAULT_STEP_BUDGET,
    ExecutionHooks,
    Frame,
    Interpreter,
    TestOutcome,
    UnknownTestError,
    run_suite,
    run_test,
)
from .lexer import Token, lex
from .parser import parse, parse_one
from .patch import (
    Region,
    apply_patch,
    first_statement_in_region,
    function_containing,
    line_delta,
    patched_region,
    region_text,
)
from .printer import print_expr, print_function, print_program
from .source import SourceLocation, normalize_newlines
from .values import UNIT, Value, display, render, type_name, value_equal, wrap64

__all__ = [
    "AssertionFailure",
    "DEFAULT_MAX_CALL_DEPTH",
    "DEFAULT_STEP_BUDGET",
    "ExecutionHooks",
    "Frame",
    "Interpreter",
    "MiniLangError",
    "MiniLangRuntimeError",
    "MiniLangSyntaxError",
    "PatchError",
    "Region",
    "SourceLocation",
    "TestOutcome",
    "Token",
    "UNIT",
    "UnknownTestError",
    "Value",
    "apply_patch",
    "ast",
    "display",
    "first_statement_in_region",
    "function_containing",
    "lex",
    "line_delta",
    "normalize_newlines",
    "parse",
    "parse_one",
    "patched_region",
    "print_expr",
    "print_function",
    "print_program",
    "region_text",
    "render",
    "run_suite",
    "run_test",
    "type_name",
    "value_equal",
    "wrap64",
]
