"""Recursive-descent parser producing the MiniLang AST.

Grammar sketch:

    program  := fndecl*
    fndecl   := "fn" IDENT "(" params? ")" block
    block    := "{" stmt* "}"
    stmt     := "let" IDENT "=" expr ";"
              | IDENT "=" expr ";"
              | "if" "(" expr ")" block ("else" (block | ifstmt))?
              | "while" "(" expr ")" block
              | "return" expr? ";"
              | expr ";"

Expressions use the usual precedence ladder: || < && < equality < comparison
< additive < multiplicative < unary < postfix (calls, indexing).  Calls only
target bare identifiers; functions are not values.
"""
from __future__ import annotations

from . import ast
from .errors import MiniLangSyntaxError
from .lexer import Token, lex
from .source import SourceLocation


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # --- token helpers ---

    def peek(self, offset: int = 0) -> Token:
        idx = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[idx]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def prev_loc(self) -> SourceLocation:
        return self.tokens[max(self.pos - 1, 0)].loc

    def expect(self, kind: str, lexeme: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (lexeme is not None and tok.lexeme != lexeme):
            want = lexeme if lexeme is not None else kind
            raise MiniLangSyntaxError(f"expected {want!r}, found {tok.lexeme or 'end of file'!r}", tok.loc)
        return self.next()

    def at_op(self, lexeme: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.lexeme == lexeme

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "keyword" and tok.lexeme == word

    # --- declarations ---

    def parse_functions(self) -> list[ast.FunctionDecl]:
        functions = []
        while self.peek().kind != "eof":
            functions.append(self.parse_function())
        return functions

    def parse_function(self) -> ast.FunctionDecl:
        start = self.expect("keyword", "fn")
        name = self.expect("ident")
        self.expect("op", "(")
        params: list[str] = []
        param_locs: list[SourceLocation] = []
        if not self.at_op(")"):
            while True:
                p = self.expect("ident")
                if p.lexeme in params:
                    raise MiniLangSyntaxError(f"duplicate parameter {p.lexeme!r}", p.loc)
                params.append(p.lexeme)
                param_locs.append(p.loc)
                if self.at_op(","):
                    self.next()
                    continue
                break
        self.expect("op", ")")
        body = self.parse_block()
        fn = ast.FunctionDecl(start.loc, name.lexeme, params, param_locs, body)
        fn.end_loc = self.prev_loc()
        return fn

    def parse_block(self) -> list[ast.Stmt]:
        self.expect("op", "{")
        stmts = []
        while not self.at_op("}"):
            if self.peek().kind == "eof":
                raise MiniLangSyntaxError("unterminated block", self.peek().loc)
            stmts.append(self.parse_stmt())
        self.expect("op", "}")
        return stmts

    # --- statements ---

    def parse_stmt(self) -> ast.Stmt:
        tok = self.peek()
        if tok.kind == "keyword":
            if tok.lexeme == "let":
                return self._finish(self._parse_let())
            if tok.lexeme == "if":
                return self._finish(self._parse_if())
            if tok.lexeme == "while":
                return self._finish(self._parse_while())
            if tok.lexeme == "return":
                return self._finish(self._parse_return())
        if tok.kind == "ident" and self.peek(1).kind == "op" and self.peek(1).lexeme == "=":
            name = self.next()
            self.next()  # "="
            value = self.parse_expr()
            self.expect("op", ";")
            return self._finish(ast.Assign(name.loc, name.lexeme, value))
        loc = tok.loc
        expr = self.parse_expr()
        self.expect("op", ";")
        return self._finish(ast.ExprStmt(loc, expr))

    def _finish(self, stmt: ast.Stmt) -> ast.Stmt:
        stmt.end_loc = self.prev_loc()
        return stmt

    def _parse_let(self) -> ast.Let:
        start = self.next()
        name = self.expect("ident")
        self.expect("op", "=")
        value = self.parse_expr()
        self.expect("op", ";")
        return ast.Let(start.loc, name.lexeme, value)

    def _parse_if(self) -> ast.If:
        start = self.next()
        self.expect("op", "(")
        cond = self.parse_expr()
        self.expect("op", ")")
        then_body = self.parse_block()
        else_body = None
        if self.at_keyword("else"):
            self.next()
            if self.at_keyword("if"):
                else_body = [self._finish(self._parse_if())]
            else:
                else_body = self.parse_block()
        return ast.If(start.loc, cond, then_body, else_body)

    def _parse_while(self) -> ast.While:
        start = self.next()
        self.expect("op", "(")
        cond = self.parse_expr()
        self.expect("op", ")")
        body = self.parse_block()
        return ast.While(start.loc, cond, body)

    def _parse_return(self) -> ast.Return:
        start = self.next()
        value = None
        if not self.at_op(";"):
            value = self.parse_expr()
        self.expect("op", ";")
        return ast.Return(start.loc, value)

    # --- expressions ---

    def parse_expr(self) -> ast.Expr:
        return self._parse_or()

    def _parse_or(self) -> ast.Expr:
        left = self._parse_and()
        while self.at_op("||"):
            loc = left.loc
            self.next()
            left = ast.Binary(loc, "||", left, self._parse_and())
        return left

    def _parse_and(self) -> ast.Expr:
        left = self._parse_equality()
        while self.at_op("&&"):
            loc = left.loc
            self.next()
            left = ast.Binary(loc, "&&", left, self._parse_equality())
        return left

    def _parse_equality(self) -> ast.Expr:
        left = self._parse_comparison()
        while self.at_op("==") or self.at_op("!="):
            op = self.next().lexeme
            left = ast.Binary(left.loc, op, left, self._parse_comparison())
        return left

    def _parse_comparison(self) -> ast.Expr:
        left = self._parse_additive()
        while self.at_op("<") or self.at_op("<=") or self.at_op(">") or self.at_op(">="):
            op = self.next().lexeme
            left = ast.Binary(left.loc, op, left, self._parse_additive())
        return left

    def _parse_additive(self) -> ast.Expr:
        left = self._parse_multiplicative()
        while self.at_op("+") or self.at_op("-"):
            op = self.next().lexeme
            left = ast.Binary(left.loc, op, left, self._parse_multiplicative())
        return left

    def _parse_multiplicative(self) -> ast.Expr:
        left = self._parse_unary()
        while self.at_op("*") or self.at_op("/") or self.at_op("%"):
            op = self.next().lexeme
            left = ast.Binary(left.loc, op, left, self._parse_unary())
        return left

    def _parse_unary(self) -> ast.Expr:
        if self.at_op("-") or self.at_op("!"):
            tok = self.next()
            return ast.Unary(tok.loc, tok.lexeme, self._parse_unary())
        return self._parse_postfix()

    def _parse_postfix(self) -> ast.Expr:
        expr = self._parse_primary()
        while True:
            if self.at_op("["):
                self.next()
                index = self.parse_expr()
                self.expect("op", "]")
                expr = ast.Index(expr.loc, expr, index)
                continue
            break
        return expr

    def _parse_primary(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return ast.IntLit(tok.loc, int(tok.lexeme))
        if tok.kind == "float":
            self.next()
            return ast.FloatLit(tok.loc, float(tok.lexeme))
        if tok.kind == "string":
            self.next()
            return ast.StrLit(tok.loc, tok.text)
        if tok.kind == "keyword" and tok.lexeme in ("true", "false"):
            self.next()
            return ast.BoolLit(tok.loc, tok.lexeme == "true")
        if tok.kind == "ident":
            self.next()
            if self.at_op("("):
                self.next()
                args: list[ast.Expr] = []
                if not self.at_op(")"):
                    while True:
                        args.append(self.parse_expr())
                        if self.at_op(","):
                            self.next()
                            continue
                        break
                self.expect("op", ")")
                return ast.Call(tok.loc, tok.lexeme, args)
            return ast.Var(tok.loc, tok.lexeme)
        if self.at_op("("):
            self.next()
            inner = self.parse_expr()
            self.expect("op", ")")
            return inner
        if self.at_op("["):
            self.next()
            items: list[ast.Expr] = []
            if not self.at_op("]"):
                while True:
                    items.append(self.parse_expr())
                    if self.at_op(","):
                        self.next()
                        continue
                    break
            self.expect("op", "]")
            return ast.ListLit(tok.loc, items)
        raise MiniLangSyntaxError(f"unexpected token {tok.lexeme or 'end of file'!r}", tok.loc)


def parse(sources: dict[str, str]) -> ast.Program:
    """Parse a set of source files (name -> text) into one Program.

    Files are processed in sorted name order so declaration order is stable
    regardless of how the mapping was built.  A function name appearing twice
    anywhere in the program is a syntax error.
    """
    functions: list[ast.FunctionDecl] = []
    seen: dict[str, SourceLocation] = {}
    normalized: dict[str, str] = {}
    for file in sorted(sources):
        text = sources[file]
        normalized[file] = text
        tokens = lex(text, file=file, strict=True)
        for fn in _Parser(tokens).parse_functions():
            if fn.name in seen:
                raise MiniLangSyntaxError(f"duplicate function {fn.name!r}", fn.loc)
            seen[fn.name] = fn.loc
            functions.append(fn)
    return ast.Program(normalized, functions)


def parse_one(text: str, file: str = "<input>") -> ast.Program:
    return parse({file: text})
