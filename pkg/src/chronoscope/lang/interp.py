"""Deterministic interpreter for the debuggee language.

States are treated as immutable: every transition returns a fresh
VmState, so any state can be held, snapshotted, or compared later.
Runtime faults (division by zero, unknown variable, overflow, call-depth
overrun) produce a terminal faulted state instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .ast import Assign, Call, Expr, Jump, Print, Program, Ret, Branch

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


class EvalError(Exception):
    """Raised by expression evaluation; stepping converts it to a fault."""


@dataclass(frozen=True)
class Frame:
    func: str
    pc: int
    locals: tuple[tuple[str, int | bool], ...]

    def get(self, name: str):
        for key, value in self.locals:
            if key == name:
                return value
        return None

    def has(self, name: str) -> bool:
        return any(key == name for key, _ in self.locals)

    def set(self, name: str, value) -> "Frame":
        items = [(k, v) for k, v in self.locals if k != name]
        items.append((name, value))
        items.sort()
        return replace(self, locals=tuple(items))


@dataclass(frozen=True)
class VmState:
    globals: tuple[tuple[str, int | bool], ...]
    call_stack: tuple[Frame, ...]
    output_log: tuple[int, ...]
    step_counter: int
    bp_hits: int
    fault: str | None = None

    @property
    def live(self) -> bool:
        return self.fault is None and len(self.call_stack) > 0

    @property
    def terminated(self) -> bool:
        return self.fault is None and len(self.call_stack) == 0

    @property
    def depth(self) -> int:
        return len(self.call_stack)

    def global_get(self, name: str):
        for key, value in self.globals:
            if key == name:
                return value
        return None

    def global_has(self, name: str) -> bool:
        return any(key == name for key, _ in self.globals)

    def global_set(self, name: str, value) -> "VmState":
        items = [(k, v) for k, v in self.globals if k != name]
        items.append((name, value))
        items.sort()
        return replace(self, globals=tuple(items))


def initial_state(program: Program) -> VmState:
    entry = program.func(program.entry)
    return VmState(
        globals=(),
        call_stack=(Frame(func=entry.name, pc=0, locals=()),),
        output_log=(),
        step_counter=0,
        bp_hits=0,
    )


def current_line(state: VmState, program: Program) -> int:
    frame = state.call_stack[-1]
    return program.func(frame.func).code[frame.pc].line


def current_instr(state: VmState, program: Program):
    frame = state.call_stack[-1]
    return program.func(frame.func).code[frame.pc]


def _lookup(state: VmState, name: str):
    if state.call_stack:
        frame = state.call_stack[-1]
        if len(state.call_stack) > 1 and frame.has(name):
            return frame.get(name)
    if state.global_has(name):
        return state.global_get(name)
    raise EvalError(f"unknown variable '{name}'")


def _check_int(value) -> int:
    if not (INT_MIN <= value <= INT_MAX):
        raise EvalError("integer overflow")
    return value


def _arith(op: str, a, b):
    if isinstance(a, bool) or isinstance(b, bool):
        raise EvalError(f"operator '{op}' requires integers")
    if op == "+":
        return _check_int(a + b)
    if op == "-":
        return _check_int(a - b)
    if op == "*":
        return _check_int(a * b)
    if op in ("/", "%"):
        if b == 0:
            raise EvalError("division by zero")
        # C-style truncation toward zero
        q = abs(a) // abs(b)
        if (a < 0) != (b < 0):
            q = -q
        if op == "/":
            return _check_int(q)
        return _check_int(a - q * b)
    raise EvalError(f"unknown operator '{op}'")


def eval_expr(expr: Expr, state: VmState):
    kind = expr[0]
    if kind == "num":
        return expr[1]
    if kind == "bool":
        return expr[1]
    if kind == "var":
        return _lookup(state, expr[1])
    if kind == "un":
        op, operand = expr[1], expr[2]
        value = eval_expr(operand, state)
        if op == "-":
            if isinstance(value, bool):
                raise EvalError("unary '-' requires an integer")
            return _check_int(-value)
        if op == "not":
            if not isinstance(value, bool):
                raise EvalError("'not' requires a boolean")
            return not value
        raise EvalError(f"unknown operator '{op}'")
    if kind == "bin":
        op, lhs, rhs = expr[1], expr[2], expr[3]
        if op in ("and", "or"):
            left = eval_expr(lhs, state)
            if not isinstance(left, bool):
                raise EvalError(f"'{op}' requires booleans")
            if op == "and" and not left:
                return False
            if op == "or" and left:
                return True
            right = eval_expr(rhs, state)
            if not isinstance(right, bool):
                raise EvalError(f"'{op}' requires booleans")
            return right
        left = eval_expr(lhs, state)
        right = eval_expr(rhs, state)
        if op in ("==", "!="):
            if isinstance(left, bool) != isinstance(right, bool):
                raise EvalError("'==' operands must have the same type")
            return (left == right) if op == "==" else (left != right)
        if op in ("<", "<=", ">", ">="):
            if isinstance(left, bool) or isinstance(right, bool):
                raise EvalError(f"'{op}' requires integers")
            return {"<": left < right, "<=": left <= right, ">": left > right, ">=": left >= right}[op]
        return _arith(op, left, right)
    raise EvalError(f"bad expression node {kind!r}")


def _store(state: VmState, name: str, value) -> VmState:
    # Entry-frame assignments go to globals; inner frames write locals.
    if len(state.call_stack) == 1:
        return state.global_set(name, value)
    frame = state.call_stack[-1].set(name, value)
    return replace(state, call_stack=state.call_stack[:-1] + (frame,))


def _advance(state: VmState, program: Program) -> VmState:
    """Move the top frame past its current instruction, sliding over Jumps
    and falling off function ends (implicit return 0)."""
    while state.call_stack:
        frame = state.call_stack[-1]
        code = program.func(frame.func).code
        pc = frame.pc + 1
        while pc < len(code) and isinstance(code[pc], Jump):
            pc = code[pc].target
        if pc < len(code):
            top = replace(frame, pc=pc)
            return replace(state, call_stack=state.call_stack[:-1] + (top,))
        state = _do_return(state, program, 0)
        if not state.call_stack or state.fault is not None:
            return state
        # _do_return already advanced the caller
        return state
    return state


def _do_return(state: VmState, program: Program, value) -> VmState:
    callee = state.call_stack[-1]
    state = replace(state, call_stack=state.call_stack[:-1])
    if not state.call_stack:
        return state
    caller = state.call_stack[-1]
    call_instr = program.func(caller.func).code[caller.pc]
    if isinstance(call_instr, Call) and call_instr.target is not None:
        state = _store(state, call_instr.target, value)
    return _advance(state, program)


def _fault(state: VmState, message: str) -> VmState:
    return replace(state, fault=message, step_counter=state.step_counter + 1)


def single_step(state: VmState, program: Program) -> VmState:
    """Execute exactly one statement.  Requires a live state."""
    if not state.live:
        raise ValueError("single_step on a non-live state")
    instr = current_instr(state, program)
    bump = lambda s: replace(s, step_counter=s.step_counter + 1)
    try:
        if isinstance(instr, Assign):
            value = eval_expr(instr.expr, state)
            return bump(_advance(_store(state, instr.target, value), program))
        if isinstance(instr, Print):
            value = eval_expr(instr.expr, state)
            if isinstance(value, bool):
                raise EvalError("print requires an integer")
            state = replace(state, output_log=state.output_log + (value,))
            return bump(_advance(state, program))
        if isinstance(instr, Branch):
            value = eval_expr(instr.cond, state)
            if not isinstance(value, bool):
                raise EvalError("condition must be a boolean")
            frame = state.call_stack[-1]
            code = program.func(frame.func).code
            if value:
                pc = frame.pc + 1
                while pc < len(code) and isinstance(code[pc], Jump):
                    pc = code[pc].target
            else:
                pc = instr.false_target
                while pc < len(code) and isinstance(code[pc], Jump):
                    pc = code[pc].target
            if pc >= len(code):
                state = bump(state)
                done = _do_return(replace(state, call_stack=state.call_stack), program, 0)
                return done
            top = replace(frame, pc=pc)
            return bump(replace(state, call_stack=state.call_stack[:-1] + (top,)))
        if isinstance(instr, Ret):
            value = 0 if instr.expr is None else eval_expr(instr.expr, state)
            return bump(_do_return(state, program, value))
        if isinstance(instr, Call):
            if len(state.call_stack) >= program.max_call_depth:
                return _fault(state, f"call depth exceeded ({program.max_call_depth})")
            fn = program.func(instr.func)
            args = [eval_expr(a, state) for a in instr.args]
            frame = Frame(
                func=fn.name,
                pc=0,
                locals=tuple(sorted(zip(fn.params, args))),
            )
            if not fn.code:
                # empty function body: behaves as immediate return 0
                state = bump(state)
                return _do_return(replace(state, call_stack=state.call_stack + (frame,)), program, 0)
            return bump(replace(state, call_stack=state.call_stack + (frame,)))
        raise EvalError(f"unexpected instruction {type(instr).__name__}")
    except EvalError as exc:
        return _fault(state, str(exc))


def step_over(state: VmState, program: Program) -> VmState:
    """Run until control returns to the current frame depth (or shallower).

    Bare closure without breakpoint or budget handling; the personality
    layer wraps this when those matter.
    """
    if not state.live:
        raise ValueError("step_over on a non-live state")
    entry_depth = state.depth
    state = single_step(state, program)
    while state.live and state.depth > entry_depth:
        state = single_step(state, program)
    return state


def run_to_end(state: VmState, program: Program, max_steps: int = 10_000_000) -> VmState:
    for _ in range(max_steps):
        if not state.live:
            return state
        state = single_step(state, program)
    raise RuntimeError("run_to_end exceeded max_steps")


def eval_in_scope(expr: Expr, state: VmState):
    """Side-effect-free evaluation against the current scope.

    Works on terminated states too (globals remain visible).
    Raises EvalError on any evaluation problem.
    """
    return eval_expr(expr, state)
