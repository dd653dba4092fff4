"""Random terminating debuggee programs and random debugger sessions,
plus single-step oracles.  Shared by the unit suites and the acceptance
gate.

Programs terminate by construction: while loops run on dedicated bounded
counters and the call graph is acyclic (a function only calls
higher-numbered functions).  Faults (overflow, call-depth) are still
possible and are legitimate session endings.
"""

from __future__ import annotations

import random

from chronoscope.lang.interp import (
    EvalError,
    eval_in_scope,
    initial_state,
    single_step,
)
from chronoscope.lang.parser import parse_expression, parse_program
from chronoscope.personality.base import render_value

# ----------------------------------------------------------------------
# program generation


class _ProgramGen:
    def __init__(self, rng: random.Random, max_statements: int = 50):
        self.rng = rng
        self.budget = rng.randint(5, max_statements)
        self.counter = 0
        self.var_pool = ["a", "b", "x", "y", "z"]

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def expr(self, scope: list[str], depth: int = 0) -> str:
        rng = self.rng
        if depth >= 2 or rng.random() < 0.4 or not scope:
            if scope and rng.random() < 0.6:
                return rng.choice(scope)
            return str(rng.randint(0, 9))
        op = rng.choice(["+", "-", "*", "+", "-"])
        return f"({self.expr(scope, depth + 1)} {op} {self.expr(scope, depth + 1)})"

    def cond(self, scope: list[str]) -> str:
        op = self.rng.choice(["<", "<=", ">", ">=", "==", "!="])
        return f"({self.expr(scope)} {op} {self.expr(scope)})"

    def block(self, scope: list[str], callees: list[tuple[str, int]], indent: str, loop_depth: int) -> list[str]:
        rng = self.rng
        lines: list[str] = []
        n = rng.randint(1, 4)
        for _ in range(n):
            if self.budget <= 0:
                break
            kinds = ["assign", "assign", "print"]
            if callees:
                kinds.append("call")
            if loop_depth < 2 and self.budget > 4:
                kinds += ["while", "if"]
            kind = rng.choice(kinds)
            if kind == "assign":
                var = rng.choice(self.var_pool)
                lines.append(f"{indent}{var} = {self.expr(scope)};")
                if var not in scope:
                    scope.append(var)
                self.budget -= 1
            elif kind == "print":
                lines.append(f"{indent}print {self.expr(scope)};")
                self.budget -= 1
            elif kind == "call":
                name, arity = rng.choice(callees)
                args = ", ".join(self.expr(scope) for _ in range(arity))
                if rng.random() < 0.5:
                    var = rng.choice(self.var_pool)
                    lines.append(f"{indent}{var} = {name}({args});")
                    if var not in scope:
                        scope.append(var)
                else:
                    lines.append(f"{indent}{name}({args});")
                self.budget -= 1
            elif kind == "while":
                counter = self.fresh("w")
                bound = rng.randint(1, 4)
                self.budget -= 3
                lines.append(f"{indent}{counter} = 0;")
                lines.append(f"{indent}while ({counter} < {bound}) {{")
                lines.extend(self.block(scope, callees, indent + "  ", loop_depth + 1))
                lines.append(f"{indent}  {counter} = {counter} + 1;")
                lines.append(indent + "}")
            else:  # if
                self.budget -= 2
                lines.append(f"{indent}if {self.cond(scope)} {{")
                lines.extend(self.block(scope, callees, indent + "  ", loop_depth))
                if rng.random() < 0.4 and self.budget > 1:
                    lines.append(indent + "} else {")
                    lines.extend(self.block(scope, callees, indent + "  ", loop_depth))
                lines.append(indent + "}")
        if not lines:
            lines.append(f"{indent}x = 0;")
        return lines

    def function(self, name: str, arity: int, callees: list[tuple[str, int]], is_main: bool) -> list[str]:
        params = [f"p{i}" for i in range(arity)]
        header = f"fn {name}({', '.join(params)}) {{"
        scope = list(params)
        body = self.block(scope, callees, "  ", 0)
        if not is_main and self.rng.random() < 0.7:
            body.append(f"  return {self.expr(scope)};")
        return [header] + body + ["}"]


def random_program_source(rng: random.Random, max_statements: int = 50) -> str:
    gen = _ProgramGen(rng, max_statements)
    n_helpers = rng.randint(0, 3)
    specs = [(f"f{i}", rng.randint(0, 2)) for i in range(n_helpers)]
    chunks: list[str] = []
    for i, (name, arity) in enumerate(specs):
        callees = specs[i + 1:]
        chunks.extend(gen.function(name, arity, callees, is_main=False))
        chunks.append("")
    chunks.extend(gen.function("main", 0, specs, is_main=True))
    return "\n".join(chunks) + "\n"


def random_program(rng: random.Random, max_statements: int = 50, label: str = "gen.tvm"):
    return parse_program(random_program_source(rng, max_statements), label)


# ----------------------------------------------------------------------
# oracles


def oracle_states(program, limit: int = 200_000):
    """Every VM state from start to termination, by single-stepping."""
    state = initial_state(program)
    states = [state]
    while state.live:
        state = single_step(state, program)
        states.append(state)
        if len(states) > limit:
            raise RuntimeError("oracle trace limit exceeded")
    return states


def oracle_values(program, expr_text: str, limit: int = 200_000) -> list[str]:
    """Canonical value of expr at every statement event (⊥ on error)."""
    expr = parse_expression(expr_text)
    out = []
    for state in oracle_states(program, limit):
        try:
            out.append(render_value(eval_in_scope(expr, state)))
        except EvalError:
            out.append("⊥")
    return out


def oracle_bp_events(program, bp_lines, limit: int = 200_000):
    """(step_index, state) for each breakpoint crossing, assuming the
    given lines carry enabled breakpoints for the whole run."""
    from chronoscope.lang.interp import current_line

    hits = []
    states = oracle_states(program, limit)
    for i, state in enumerate(states[1:], start=1):
        if state.live and current_line(state, program) in bp_lines:
            hits.append((i, state))
    return hits


# ----------------------------------------------------------------------
# random sessions


def random_bp_lines(rng: random.Random, program, k: int) -> list[int]:
    lines = sorted({instr.line for fn in program.functions.values() for instr in fn.code})
    if not lines:
        return []
    return rng.sample(lines, min(k, len(lines)))


def drive_random_session(session, rng: random.Random, max_commands: int = 100,
                         allow_mutations: bool = False) -> list[str]:
    """Issue random forward commands until the debuggee dies or the
    budget runs out; returns the token list issued."""
    issued: list[str] = []
    personality = session.personality
    for _ in range(max_commands):
        if not personality.state.live:
            break
        has_bps = bool(personality.breakpoint_table())
        choices = ["s", "s", "n", "n", "n"]
        if has_bps:
            choices += ["c", "c"]
        if personality.state.depth >= 2:
            choices.append("f")
        tok = rng.choice(choices)
        session.user_command(tok)
        issued.append(tok)
        if allow_mutations and rng.random() < 0.08:
            lines = random_bp_lines(rng, personality.program, 1)
            if lines:
                session.set_breakpoint(lines[0])
    return issued
