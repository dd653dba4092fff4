"""Program representation for the built-in debuggee language.

Source is compiled to a flat instruction list per function.  Conditional
jumps carry the line of their if/while header so each loop iteration
produces a stop at that line, like a real debugger.  Unconditional jumps
are free: the interpreter slides over them and they never appear as a
statement event.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# Expressions are nested tuples:
#   ("num", int) | ("bool", bool) | ("var", name)
#   ("bin", op, lhs, rhs) | ("un", op, operand)
Expr = tuple


@dataclass(frozen=True)
class Instr:
    line: int


@dataclass(frozen=True)
class Assign(Instr):
    target: str
    expr: Expr


@dataclass(frozen=True)
class Call(Instr):
    func: str
    args: tuple
    target: str | None


@dataclass(frozen=True)
class Ret(Instr):
    expr: Expr | None


@dataclass(frozen=True)
class Print(Instr):
    expr: Expr


@dataclass(frozen=True)
class Branch(Instr):
    """if/while condition; jump to false_target when condition is false."""

    cond: Expr
    false_target: int


@dataclass(frozen=True)
class Jump(Instr):
    target: int


@dataclass(frozen=True)
class FuncDef:
    name: str
    params: tuple[str, ...]
    code: tuple[Instr, ...]
    line: int


@dataclass(frozen=True)
class Program:
    functions: dict[str, FuncDef]
    entry: str
    file_label: str
    max_call_depth: int = 10_000

    def func(self, name: str) -> FuncDef:
        return self.functions[name]

    def statement_count(self, name: str) -> int:
        return sum(1 for i in self.functions[name].code if not isinstance(i, Jump))
