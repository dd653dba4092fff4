"""Reference personality: drives the built-in VM.

Breakpoint events are counted as *crossings*: whenever execution arrives
at a statement whose line carries an enabled user breakpoint, the
counter in VmState is incremented, regardless of which command drove the
arrival and regardless of whether the stop is suppressed.  This makes
the counter a pure function of the execution trace and the breakpoint
timeline, so it is reproduced identically by restore + re-execution and
by any rewritten command sequence covering the same span.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..lang.ast import Call, Program
from ..lang.interp import EvalError, VmState, current_line, eval_in_scope, initial_state, single_step
from ..lang.parser import LangSyntaxError, parse_expression
from ..lang.snapshot import restore as decode_snapshot
from ..lang.snapshot import snapshot as encode_snapshot
from .base import (
    BOTTOM,
    Capabilities,
    CapabilityError,
    CommandToken,
    Location,
    PersonalityError,
    ProcessState,
    StopKind,
    StopReport,
)

DEFAULT_STEP_BUDGET = 1_000_000


@dataclass
class _Breakpoint:
    bp_id: int
    line: int
    enabled: bool = True


class VmPersonality:
    capabilities = Capabilities(
        has_finish=True,
        has_native_breakpoint_counter=False,
        supports_expression_eval=True,
    )

    def __init__(self, program: Program, state: VmState | None = None):
        self.program = program
        self.state = state if state is not None else initial_state(program)
        self._breakpoints: dict[int, _Breakpoint] = {}
        self._next_bp_id = 1
        self._last_line = current_line(self.state, program) if self.state.live else 0
        self._pending: tuple[CommandToken, int | None] | None = None
        self.suppress_bp_stops = False
        # instrumentation
        self.micro_steps = 0
        self.bp_stop_events = 0

    # ---- breakpoints ----

    def set_breakpoint(self, line: int, bp_id: int | None = None) -> int:
        if bp_id is None:
            bp_id = self._next_bp_id
        self._next_bp_id = max(self._next_bp_id, bp_id + 1)
        self._breakpoints[bp_id] = _Breakpoint(bp_id=bp_id, line=line)
        return bp_id

    def delete_breakpoint(self, bp_id: int) -> None:
        if bp_id not in self._breakpoints:
            raise PersonalityError(f"no breakpoint {bp_id}")
        del self._breakpoints[bp_id]

    def breakpoint_table(self) -> list[tuple[int, int, bool]]:
        return sorted((b.bp_id, b.line, b.enabled) for b in self._breakpoints.values())

    def restore_breakpoint_table(self, table: list[tuple[int, int, bool]]) -> None:
        self._breakpoints = {bp_id: _Breakpoint(bp_id=bp_id, line=line, enabled=enabled) for bp_id, line, enabled in table}
        if self._breakpoints:
            self._next_bp_id = max(self._breakpoints) + 1

    def _bp_lines(self) -> set[int]:
        return {b.line for b in self._breakpoints.values() if b.enabled}

    # ---- queries ----

    def location(self) -> Location:
        if self.state.live:
            self._last_line = current_line(self.state, self.program)
        return Location(file_label=self.program.file_label, line=self._last_line)

    def stack_depth(self) -> int:
        return max(self.state.depth, 1) if not self.state.terminated else 0

    def bp_count(self) -> int:
        return self.state.bp_hits

    def process_state(self) -> ProcessState:
        return ProcessState(location=self.location(), bp_count=self.state.bp_hits, depth=self.state.depth)

    def work(self) -> int:
        return self.state.step_counter

    def report(self, stop_kind: StopKind) -> StopReport:
        return StopReport(
            location=self.location(),
            stack_depth=self.state.depth,
            bp_count=self.state.bp_hits,
            stop_kind=stop_kind,
            work=self.state.step_counter,
        )

    # ---- expression evaluation ----

    def eval_expression(self, text: str):
        try:
            expr = parse_expression(text)
            return eval_in_scope(expr, self.state)
        except (LangSyntaxError, EvalError):
            return BOTTOM

    # ---- snapshots ----

    def snapshot_bytes(self) -> bytes:
        return encode_snapshot(self.state)

    def restore_bytes(self, data: bytes) -> None:
        self.state = decode_snapshot(data)
        self._pending = None
        if self.state.live:
            self._last_line = current_line(self.state, self.program)

    # ---- execution ----

    def _micro_step(self) -> bool:
        """One VM statement; returns True when a breakpoint crossing
        occurred at the arrival position."""
        self.state = single_step(self.state, self.program)
        self.micro_steps += 1
        if not self.state.live:
            return False
        line = current_line(self.state, self.program)
        self._last_line = line
        if line in self._bp_lines():
            self.state = replace(self.state, bp_hits=self.state.bp_hits + 1)
            return True
        return False

    def _terminal_report(self) -> StopReport:
        if self.state.fault is not None:
            return self.report(StopKind.FAULT)
        return self.report(StopKind.TERMINATED)

    def execute(self, token: CommandToken, budget: int | None = None) -> StopReport:
        if self._pending is not None:
            raise PersonalityError("command issued while a timed-out command is pending")
        if not self.state.live:
            raise PersonalityError("command on a non-live debuggee")
        if token == CommandToken.FINISH and not self.capabilities.has_finish:
            raise CapabilityError("personality does not support finish")
        budget = DEFAULT_STEP_BUDGET if budget is None else budget

        if token == CommandToken.STEP:
            crossed = self._micro_step()
            if not self.state.live:
                return self._terminal_report()
            return self.report(StopKind.BREAKPOINT_HIT if crossed else StopKind.STEP_COMPLETE)

        if token == CommandToken.NEXT:
            target_depth = self.state.depth
        elif token == CommandToken.FINISH:
            if self.state.depth < 2:
                raise PersonalityError("finish at outermost frame")
            target_depth = self.state.depth - 1
        else:  # CONTINUE
            target_depth = None
        return self._run(token, target_depth, budget)

    def abort_pending(self) -> None:
        """Forget a timed-out command instead of resuming it; the
        debuggee stays wherever the interrupt left it."""
        self._pending = None

    def resume(self, budget: int | None = None) -> StopReport:
        """Resume a command previously stopped by timeout-interrupt."""
        if self._pending is None:
            raise PersonalityError("no interrupted command to resume")
        token, target_depth = self._pending
        self._pending = None
        budget = DEFAULT_STEP_BUDGET if budget is None else budget
        return self._run(token, target_depth, budget)

    def _run(self, token: CommandToken, target_depth: int | None, budget: int) -> StopReport:
        used = 0
        while True:
            if used >= budget:
                self._pending = (token, target_depth)
                return self.report(StopKind.TIMEOUT_INTERRUPT)
            crossed = self._micro_step()
            used += 1
            if not self.state.live:
                return self._terminal_report()
            if target_depth is not None and self.state.depth <= target_depth:
                if crossed and not self.suppress_bp_stops:
                    self.bp_stop_events += 1
                    return self.report(StopKind.BREAKPOINT_HIT)
                return self.report(StopKind.STEP_COMPLETE)
            # suppression applies to repeated next/step replays only; a
            # continue's stop IS the crossing
            if crossed and (token == CommandToken.CONTINUE or not self.suppress_bp_stops):
                self.bp_stop_events += 1
                return self.report(StopKind.BREAKPOINT_HIT)

    # ---- lookahead ----

    def peek(self, token: CommandToken, budget: int | None = None) -> StopReport | None:
        """Stop report one command ahead, via snapshot/execute/restore.

        Returns None when the command would not complete (timeout or
        dead debuggee)."""
        if not self.state.live:
            return None
        saved_state = self.state
        saved_line = self._last_line
        saved_micro = self.micro_steps
        saved_stops = self.bp_stop_events
        try:
            rep = self.execute(token, budget=budget)
        except PersonalityError:
            rep = None
        if rep is not None and rep.stop_kind is StopKind.TIMEOUT_INTERRUPT:
            rep = None
        self.state = saved_state
        self._last_line = saved_line
        self._pending = None
        self.micro_steps = saved_micro
        self.bp_stop_events = saved_stops
        return rep
