"""Recursive-descent parser for the debuggee language.

Grammar (see docs/debuggee-lang.md):

    program := fndef*
    fndef   := "fn" NAME "(" [NAME ("," NAME)*] ")" block
    block   := "{" stmt* "}"
    stmt    := simple ";" | ifstmt | whilestmt
    simple  := "print" expr | "return" [expr]
             | NAME "=" (call | expr) | call
    call    := NAME "(" [expr ("," expr)*] ")"
    ifstmt  := "if" "(" expr ")" block ["else" block]
    whilestmt := "while" "(" expr ")" block

Expressions: or/and/not, comparisons, + - * / %, unary minus,
integer literals, true/false, names, parentheses.  Calls are
statements only, never subexpressions.
"""

from __future__ import annotations

import re

from .ast import Assign, Call, Expr, FuncDef, Instr, Jump, Print, Program, Ret, Branch


class LangSyntaxError(Exception):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class UndefinedFunctionError(Exception):
    def __init__(self, name: str, line: int):
        super().__init__(f"line {line}: call to undefined function '{name}'")
        self.name = name


KEYWORDS = {"fn", "if", "else", "while", "return", "print", "true", "false", "and", "or", "not"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<num>\d+)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op>==|!=|<=|>=|[-+*/%<>=(){},;])
    """,
    re.VERBOSE,
)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"Token({self.kind!r}, {self.text!r}, {self.line}:{self.col})"


def tokenize(source: str) -> list[Token]:
    tokens = []
    line = 1
    line_start = 0
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise LangSyntaxError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        col = pos - line_start + 1
        if kind in ("ws", "comment"):
            nl = text.count("\n")
            if nl:
                line += nl
                line_start = pos + text.rindex("\n") + 1
        elif kind == "num":
            tokens.append(Token("num", text, line, col))
        elif kind == "name":
            tokens.append(Token(text if text in KEYWORDS else "name", text, line, col))
        else:
            tokens.append(Token(text, text, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise LangSyntaxError(f"expected {kind!r}, found {tok.text!r}", tok.line, tok.col)
        return self.next()

    # ---- declarations ----

    def program(self, file_label: str) -> Program:
        functions: dict[str, FuncDef] = {}
        while self.peek().kind != "eof":
            fn = self.fndef()
            if fn.name in functions:
                tok = self.peek()
                raise LangSyntaxError(f"duplicate function '{fn.name}'", fn.line, 1)
            functions[fn.name] = fn
        if "main" not in functions:
            raise LangSyntaxError("no 'main' function defined", 1, 1)
        if functions["main"].params:
            raise LangSyntaxError("'main' must take no parameters", functions["main"].line, 1)
        self._check_calls(functions)
        return Program(functions=functions, entry="main", file_label=file_label)

    def _check_calls(self, functions: dict[str, FuncDef]) -> None:
        for fn in functions.values():
            for instr in fn.code:
                if isinstance(instr, Call):
                    if instr.func not in functions:
                        raise UndefinedFunctionError(instr.func, instr.line)
                    if len(instr.args) != len(functions[instr.func].params):
                        raise LangSyntaxError(
                            f"'{instr.func}' takes {len(functions[instr.func].params)} argument(s), "
                            f"got {len(instr.args)}",
                            instr.line,
                            1,
                        )

    def fndef(self) -> FuncDef:
        tok = self.expect("fn")
        name = self.expect("name").text
        self.expect("(")
        params = []
        if self.peek().kind == "name":
            params.append(self.next().text)
            while self.peek().kind == ",":
                self.next()
                params.append(self.expect("name").text)
        self.expect(")")
        code: list[Instr] = []
        self.block(code)
        self._check_lines(code)
        return FuncDef(name=name, params=tuple(params), code=tuple(code), line=tok.line)

    def _check_lines(self, code: list[Instr]) -> None:
        last = 0
        for instr in code:
            if isinstance(instr, Jump):
                continue
            if instr.line <= last:
                raise LangSyntaxError(
                    "statements must appear on strictly increasing lines (one per line)",
                    instr.line,
                    1,
                )
            last = instr.line

    # ---- statements ----

    def block(self, code: list[Instr]) -> None:
        self.expect("{")
        while self.peek().kind != "}":
            self.stmt(code)
        self.expect("}")

    def stmt(self, code: list[Instr]) -> None:
        tok = self.peek()
        if tok.kind == "if":
            self.ifstmt(code)
        elif tok.kind == "while":
            self.whilestmt(code)
        elif tok.kind == "print":
            self.next()
            expr = self.expr()
            self.expect(";")
            code.append(Print(line=tok.line, expr=expr))
        elif tok.kind == "return":
            self.next()
            expr = None
            if self.peek().kind != ";":
                expr = self.expr()
            self.expect(";")
            code.append(Ret(line=tok.line, expr=expr))
        elif tok.kind == "name":
            if self.peek(1).kind == "(":
                code.append(self.call(None))
            elif self.peek(1).kind == "=":
                target = self.next().text
                self.next()  # '='
                if self.peek().kind == "name" and self.peek(1).kind == "(":
                    code.append(self.call(target, line=tok.line))
                    return
                expr = self.expr()
                self.expect(";")
                code.append(Assign(line=tok.line, target=target, expr=expr))
            else:
                raise LangSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)
        else:
            raise LangSyntaxError(f"unexpected token {tok.text!r}", tok.line, tok.col)

    def call(self, target: str | None, line: int | None = None) -> Call:
        tok = self.expect("name")
        self.expect("(")
        args = []
        if self.peek().kind != ")":
            args.append(self.expr())
            while self.peek().kind == ",":
                self.next()
                args.append(self.expr())
        self.expect(")")
        self.expect(";")
        return Call(line=line if line is not None else tok.line, func=tok.text, args=tuple(args), target=target)

    def ifstmt(self, code: list[Instr]) -> None:
        tok = self.expect("if")
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        test_idx = len(code)
        code.append(None)  # patched below
        self.block(code)
        if self.peek().kind == "else":
            self.next()
            jump_idx = len(code)
            code.append(None)
            code[test_idx] = Branch(line=tok.line, cond=cond, false_target=len(code))
            self.block(code)
            code[jump_idx] = Jump(line=tok.line, target=len(code))
        else:
            code[test_idx] = Branch(line=tok.line, cond=cond, false_target=len(code))

    def whilestmt(self, code: list[Instr]) -> None:
        tok = self.expect("while")
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        test_idx = len(code)
        code.append(None)
        self.block(code)
        code.append(Jump(line=tok.line, target=test_idx))
        code[test_idx] = Branch(line=tok.line, cond=cond, false_target=len(code))

    # ---- expressions ----

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        left = self.and_expr()
        while self.peek().kind == "or":
            self.next()
            left = ("bin", "or", left, self.and_expr())
        return left

    def and_expr(self) -> Expr:
        left = self.not_expr()
        while self.peek().kind == "and":
            self.next()
            left = ("bin", "and", left, self.not_expr())
        return left

    def not_expr(self) -> Expr:
        if self.peek().kind == "not":
            self.next()
            return ("un", "not", self.not_expr())
        return self.cmp_expr()

    def cmp_expr(self) -> Expr:
        left = self.add_expr()
        if self.peek().kind in ("==", "!=", "<", "<=", ">", ">="):
            op = self.next().kind
            return ("bin", op, left, self.add_expr())
        return left

    def add_expr(self) -> Expr:
        left = self.mul_expr()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            left = ("bin", op, left, self.mul_expr())
        return left

    def mul_expr(self) -> Expr:
        left = self.unary_expr()
        while self.peek().kind in ("*", "/", "%"):
            op = self.next().kind
            left = ("bin", op, left, self.unary_expr())
        return left

    def unary_expr(self) -> Expr:
        if self.peek().kind == "-":
            self.next()
            return ("un", "-", self.unary_expr())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return ("num", int(tok.text))
        if tok.kind == "true":
            self.next()
            return ("bool", True)
        if tok.kind == "false":
            self.next()
            return ("bool", False)
        if tok.kind == "name":
            self.next()
            return ("var", tok.text)
        if tok.kind == "(":
            self.next()
            inner = self.expr()
            self.expect(")")
            return inner
        raise LangSyntaxError(f"expected expression, found {tok.text!r}", tok.line, tok.col)


def parse_program(source: str, file_label: str = "<input>") -> Program:
    return _Parser(tokenize(source)).program(file_label)


def parse_expression(source: str) -> Expr:
    p = _Parser(tokenize(source))
    expr = p.expr()
    tok = p.peek()
    if tok.kind != "eof":
        raise LangSyntaxError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return expr
