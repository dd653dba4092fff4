"""The reversal engine: a debugging session over one personality, with
state classification (DEEPER/SHALLOWER/SAME), the rewrite-rule
algorithms for reverse-next/step/continue/finish, undo-command, and the
continue-timeout contract.

Forward commands are sliced against a deterministic step budget; a slice
that times out triggers a spontaneous mid-command checkpoint and a
resume, so one logical history entry can embed several checkpoints.

ORIG detection is triple-based (file, line, breakpoint-event count).
When the personality exposes a work counter (the VM's step counter) it
is used to disambiguate triple collisions during lookahead; a collision
is logged as a diagnostic, never raised.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from pathlib import Path

from .checkpoints import Checkpoint, CheckpointPolicy, CheckpointStore
from .history import CommandHistory, HistoryEntry, _slice_units
from .personality.base import CommandToken, ProcessState, StopKind, StopReport, render_value


class RelativeDepth(enum.Enum):
    DEEPER = "DEEPER"
    SHALLOWER = "SHALLOWER"
    SAME_ORIG = "SAME/ORIG_STATE"
    SAME_NOT_ORIG = "SAME/NOT_ORIG_STATE"


class AlgorithmError(Exception):
    pass


class FenceViolation(AlgorithmError):
    """A reverse algorithm travelled past ORIG_STATE."""


@dataclass(frozen=True)
class Orig:
    state: ProcessState
    unit_len: int
    work: int | None


@dataclass(frozen=True)
class ReverseResult:
    report: StopReport
    notice: str | None = None
    # the backward path crossed a user breakpoint; the operation stopped
    # at the most recent breakpoint event instead of completing
    stopped_at_breakpoint: bool = False


@dataclass
class SessionConfig:
    session_dir: str | Path | None = None
    policy: CheckpointPolicy = field(default_factory=CheckpointPolicy)
    cmd_timeout: float = 5.0
    step_budget: int = 1_000_000
    max_slices: int = 100_000


class Session:
    def __init__(self, personality, config: SessionConfig | None = None):
        self.personality = personality
        self.config = config or SessionConfig()
        ckpt_dir = None
        if self.config.session_dir is not None:
            ckpt_dir = Path(self.config.session_dir) / "checkpoints"
        self.store = CheckpointStore(ckpt_dir)
        self.history = CommandHistory()
        self.rule_trace: list[str] = []
        self.diagnostics: list[str] = []
        self.events: list[tuple[str, object]] = []  # (kind, payload) for protocol observers
        self._commands_since_ckpt = 0
        self._last_ckpt_time = time.monotonic()
        self.take_checkpoint(auto=True)  # session start is always restorable

    @classmethod
    def resume(
        cls,
        personality,
        config: SessionConfig,
        store: CheckpointStore,
        history: CommandHistory,
    ) -> "Session":
        """Rebuild a session from a persisted checkpoint store and
        history log, re-materializing the latest recorded position."""
        self = cls.__new__(cls)
        self.personality = personality
        self.config = config
        self.store = store
        self.history = history
        self.rule_trace = []
        self.diagnostics = []
        self.events = []
        self._commands_since_ckpt = 0
        self._last_ckpt_time = time.monotonic()
        self._materialize(history, history.unit_length)
        return self

    # ------------------------------------------------------------------
    # basic queries

    def process_state(self) -> ProcessState:
        return self.personality.process_state()

    def work(self) -> int | None:
        return self.personality.work() if hasattr(self.personality, "work") else None

    def report(self) -> StopReport:
        kind = StopKind.STEP_COMPLETE
        state = getattr(self.personality, "state", None)
        if state is not None:
            if state.fault is not None:
                kind = StopKind.FAULT
            elif state.terminated:
                kind = StopKind.TERMINATED
        return self.personality.report(kind)

    def report_as(self, kind: StopKind) -> StopReport:
        return self.personality.report(kind)

    def _emit(self, kind: str, payload) -> None:
        self.events.append((kind, payload))

    # ------------------------------------------------------------------
    # checkpoints

    def take_checkpoint(self, auto: bool = False, substep: int = 0) -> Checkpoint:
        ckpt = self.store.take(
            snapshot=self.personality.snapshot_bytes(),
            prefix_len=self.history.unit_length,
            state=self.personality.process_state(),
            work=self.work() or 0,
            bp_table=self.personality.breakpoint_table(),
            substep=substep,
            auto=auto,
        )
        self._commands_since_ckpt = 0
        self._last_ckpt_time = time.monotonic()
        self._emit("checkpoint", ckpt)
        return ckpt

    def restore_checkpoint(self, ckpt_id: int) -> StopReport:
        ckpt = self.store.get(ckpt_id)
        self.personality.restore_bytes(self.store.snapshot_bytes(ckpt_id))
        self.history.truncate_units(ckpt.prefix_len)
        self.personality.restore_breakpoint_table(self.history.breakpoint_table_at(ckpt.prefix_len))
        self.store.prune(ckpt.prefix_len, keep=ckpt_id)
        self._commands_since_ckpt = 0
        self._emit("history-truncated", ckpt.prefix_len)
        return self.report()

    def _maybe_spontaneous_checkpoint(self) -> None:
        policy = self.config.policy
        if (
            self._commands_since_ckpt >= policy.max_commands_between
            or time.monotonic() - self._last_ckpt_time > policy.max_interval_seconds
        ):
            self.take_checkpoint(auto=True)

    # ------------------------------------------------------------------
    # forward execution

    def _exec_logical(self, token: str) -> tuple[StopReport, tuple[int, ...]]:
        """Run one debugger command to a genuine stop, slicing timeouts
        into spontaneous checkpoints."""
        cmd = CommandToken(token)
        work_at_entry = self.work() or 0
        rep = self.personality.execute(cmd, budget=self.config.step_budget)
        embedded: list[int] = []
        slices = 0
        while rep.stop_kind == StopKind.TIMEOUT_INTERRUPT:
            slices += 1
            if slices > self.config.max_slices:
                raise AlgorithmError("command never stopped within the session budget")
            ck = self.take_checkpoint(auto=True, substep=(self.work() or 0) - work_at_entry)
            embedded.append(ck.ckpt_id)
            rep = self.personality.resume(budget=self.config.step_budget)
        return rep, tuple(embedded)

    def _record(self, token: str, rep: StopReport, embedded: tuple[int, ...] = ()) -> None:
        self.history.append(
            HistoryEntry(
                token=token,
                depth_after=rep.stack_depth,
                state_after=rep.process_state(),
                work_after=rep.work,
                embedded_checkpoints=embedded,
                suppressed=bool(getattr(self.personality, "suppress_bp_stops", False)),
            )
        )
        self._commands_since_ckpt += 1

    def user_command(self, token: str) -> StopReport:
        """A forward s/n/c/f issued by the user (or a rewrite rule)."""
        self._maybe_spontaneous_checkpoint()
        rep, embedded = self._exec_logical(token)
        self._record(token, rep, embedded)
        self._emit("stop", rep)
        return rep

    def set_breakpoint(self, line: int) -> int:
        bp_id = self.personality.set_breakpoint(line)
        self.history.record_mutation("set", bp_id, line)
        return bp_id

    def delete_breakpoint(self, bp_id: int) -> None:
        self.personality.delete_breakpoint(bp_id)
        self.history.record_mutation("delete", bp_id)

    def eval_expression(self, text: str) -> str:
        return render_value(self.personality.eval_expression(text))

    # ------------------------------------------------------------------
    # restore + replay machinery

    def _materialize(self, hist: CommandHistory, unit: int, verify: bool = True) -> None:
        """Put the debuggee at unit position `unit` of `hist` by
        restoring the nearest boundary checkpoint and re-executing."""
        ckpt = self.store.latest_before(unit)
        self.personality.restore_bytes(self.store.snapshot_bytes(ckpt.ckpt_id))
        self.personality.restore_breakpoint_table(hist.breakpoint_table_at(ckpt.prefix_len))
        pos = ckpt.prefix_len
        muts = [m for m in hist.mutations if ckpt.prefix_len < m.position <= unit]
        since_ckpt = 0
        for entry in _slice_units(hist, ckpt.prefix_len, unit):
            for m in muts:
                if m.position == pos:
                    self._apply_mutation(m)
            rep = self._replay_entry(entry)
            pos += entry.repeat
            since_ckpt += entry.repeat
            if verify and entry.state_after is not None and entry.repeat == 1:
                if rep.process_state() != entry.state_after:
                    raise AlgorithmError(
                        f"replay diverged at unit {pos}: {rep.process_state()} != {entry.state_after}"
                    )
            if since_ckpt >= self.config.policy.max_commands_between and pos < unit:
                self.store.take(
                    snapshot=self.personality.snapshot_bytes(),
                    prefix_len=pos,
                    state=self.personality.process_state(),
                    work=self.work() or 0,
                    bp_table=self.personality.breakpoint_table(),
                    auto=True,
                )
                since_ckpt = 0
        for m in muts:
            if m.position == unit:
                self._apply_mutation(m)

    def _apply_mutation(self, m) -> None:
        if m.action == "set":
            self.personality.set_breakpoint(m.line, bp_id=m.bp_id)
        else:
            self.personality.delete_breakpoint(m.bp_id)

    def _replay_entry(self, entry: HistoryEntry) -> StopReport:
        # replay suppression mirrors the original execution exactly:
        # coalesced runs and entries recorded under suppression replay
        # suppressed, everything else replays with stops enabled,
        # regardless of the ambient flag
        saved = self.personality.suppress_bp_stops
        self.personality.suppress_bp_stops = entry.suppressed or entry.repeat > 1
        try:
            for _ in range(entry.repeat):
                rep, _ = self._exec_logical(entry.token)
        finally:
            self.personality.suppress_bp_stops = saved
        return rep

    def truncate_to(self, new_len: int) -> StopReport:
        """Restore + re-execute so the session sits after the first
        new_len command units; history is truncated to match."""
        saved = self.history.copy()
        self._materialize(saved, new_len)
        saved.truncate_units(new_len)
        self.history = saved
        # checkpoints past the cut belong to the abandoned timeline
        self.store.prune(new_len)
        self._commands_since_ckpt = 0
        self._emit("history-truncated", new_len)
        return self.report()

    # ------------------------------------------------------------------
    # classification and lookahead

    def _capture_orig(self) -> Orig:
        return Orig(state=self.personality.process_state(), unit_len=self.history.unit_length, work=self.work())

    def _classify(self, orig: Orig) -> RelativeDepth:
        cur = self.personality.process_state()
        if cur.depth > orig.state.depth:
            return RelativeDepth.DEEPER
        if cur.depth < orig.state.depth:
            return RelativeDepth.SHALLOWER
        if cur.same_triple(orig.state):
            return RelativeDepth.SAME_ORIG
        return RelativeDepth.SAME_NOT_ORIG

    def _check_fence(self, orig: Orig) -> None:
        work = self.work()
        if work is not None and orig.work is not None and work > orig.work:
            raise FenceViolation(f"travelled past ORIG_STATE (work {work} > {orig.work})")

    def _lookahead_is_orig(self, token: str, orig: Orig) -> bool:
        """Would one forward command land exactly on ORIG_STATE?"""
        rep = self.personality.peek(CommandToken(token), budget=self.config.step_budget)
        if rep is None:
            return False
        if not rep.process_state().same_triple(orig.state):
            return False
        if rep.work is not None and orig.work is not None and rep.work != orig.work:
            self.diagnostics.append(
                f"triple collision: lookahead {token} matches ORIG triple "
                f"{orig.state.triple()} at work {rep.work} != {orig.work}"
            )
            return False
        return True

    def _trace(self, rule: str) -> None:
        self.rule_trace.append(rule)

    # ------------------------------------------------------------------
    # rewrite-rule primitives

    def _truncate_last_unit(self, rule: str) -> None:
        self._trace(rule)
        self.truncate_to(self.history.unit_length - 1)

    def _forward(self, token: str, rule: str) -> StopReport:
        self._trace(rule)
        rep, embedded = self._exec_logical(token)
        self._record(token, rep, embedded)
        return rep

    # ------------------------------------------------------------------
    # the reverse algorithms

    def _require_live(self) -> str | None:
        state = getattr(self.personality, "state", None)
        if state is not None and not state.live:
            return "debuggee is not live; use undo or restore"
        return None

    def _at_beginning(self) -> bool:
        work = self.work()
        return self.history.unit_length == 0 and (work is None or work == 0)

    def reverse_next(self) -> ReverseResult:
        return self._reverse_sn(step_mode=False)

    def reverse_step(self) -> ReverseResult:
        return self._reverse_sn(step_mode=True)

    def _reverse_sn(self, step_mode: bool) -> ReverseResult:
        notice = self._require_live()
        if notice:
            return ReverseResult(self.report(), notice)
        if self._at_beginning():
            return ReverseResult(self.report(), "at beginning of history")
        orig = self._capture_orig()
        # breakpoint events strictly before ORIG's own arrival
        bp_lines = {line for _id, line, enabled in self.personality.breakpoint_table() if enabled}
        bp_before_orig = orig.state.bp_count - (1 if orig.state.location.line in bp_lines else 0)
        # forward commands issued by the algorithm itself must not stop
        # at user breakpoints: a breakpoint-hit stop deeper than ORIG
        # would be classified DEEPER, truncated, and re-executed forever
        saved_suppress = self.personality.suppress_bp_stops
        self.personality.suppress_bp_stops = True
        try:
            result = self._reverse_sn_loop(step_mode, orig)
        finally:
            self.personality.suppress_bp_stops = saved_suppress
        if result.notice is not None:
            return result
        if self.personality.process_state().bp_count >= bp_before_orig:
            return result
        # the skipped span contains breakpoint events; stop at the most
        # recent one instead, as a forward run from here would
        self._trace("stop at intervening breakpoint")
        while self.personality.process_state().bp_count < bp_before_orig:
            rep = self._forward("c", "* -> *.c")
            if rep.stop_kind in (StopKind.TERMINATED, StopKind.FAULT):
                raise AlgorithmError("missed an intervening breakpoint event")
        return ReverseResult(self.report_as(StopKind.BREAKPOINT_HIT), stopped_at_breakpoint=True)

    def _reverse_sn_loop(self, step_mode: bool, orig: Orig) -> ReverseResult:
        while True:
            self._check_fence(orig)
            cls = self._classify(orig)
            if cls is RelativeDepth.SAME_ORIG:
                done = self._rule_same_orig(step_mode, orig)
                if done is not None:
                    return done
            elif cls is RelativeDepth.SAME_NOT_ORIG:
                if step_mode:
                    if self._lookahead_is_orig("s", orig):
                        return ReverseResult(self.report())
                    if self._lookahead_is_orig("n", orig):
                        # a step-over would reach ORIG: descend into the call
                        self._forward("s", "* -> *.s")
                        continue
                    self._forward("n", "* -> *.n")
                else:
                    if self._lookahead_is_orig("n", orig):
                        return ReverseResult(self.report())
                    self._forward("n", "* -> *.n")
            elif cls is RelativeDepth.DEEPER:
                if step_mode:
                    if self._lookahead_is_orig("s", orig) or self._lookahead_is_orig("n", orig):
                        return ReverseResult(self.report())
                    # reverse-step's destination may live inside this
                    # call (its last statement before returning to
                    # ORIG): crawl forward; the work fence catches any
                    # divergence past ORIG
                    self._forward("s", "* -> *.s")
                else:
                    # for reverse-next the answer lies backward: pop
                    # history until we are back at ORIG's level
                    self.back_up_to_same(orig)
            else:  # SHALLOWER
                if self._lookahead_is_orig("s", orig):
                    return ReverseResult(self.report())
                self._forward("s", "* -> *.s")

    def _rule_same_orig(self, step_mode: bool, orig: Orig) -> ReverseResult | None:
        token = self.history.last_token()
        if token is None:
            return ReverseResult(self.report(), "at beginning of history")
        if step_mode:
            if token == "s":
                self._truncate_last_unit("*.s -> *")
                return ReverseResult(self.report())
            self._truncate_last_unit(f"*.{token} -> *")
            return None
        # reverse-next
        if token == "n":
            level_with = orig.state.depth  # LEVEL(*.n)
            self._truncate_last_unit("*.n -> *")
            if self.personality.process_state().depth == level_with:
                return ReverseResult(self.report())
            return None
        if token == "s":
            level_with = orig.state.depth  # LEVEL(*.s)
            self._truncate_last_unit("*.s -> *")
            if level_with >= self.personality.process_state().depth:
                return ReverseResult(self.report())
            return None
        self._truncate_last_unit("*.? -> *")
        return None

    def back_up_to_same(self, orig: Orig) -> None:
        """Bring the current depth back to ORIG's depth."""
        while True:
            cls = self._classify(orig)
            if cls in (RelativeDepth.SAME_ORIG, RelativeDepth.SAME_NOT_ORIG):
                self._trace("BACK_UP_TO_SAME: Return")
                return
            if cls is RelativeDepth.DEEPER:
                if self.history.unit_length == 0:
                    raise AlgorithmError("DEEPER with empty history")
                self._truncate_last_unit("*.? -> *")
                continue
            # SHALLOWER: run forward with continue, rolling back on overshoot
            snap = self.personality.snapshot_bytes()
            self._trace("* -> *.c")
            rep, embedded = self._exec_logical("c")
            overshot = rep.stop_kind in (StopKind.TERMINATED, StopKind.FAULT)
            if not overshot and rep.bp_count > orig.state.bp_count:
                overshot = True
            if not overshot and rep.work is not None and orig.work is not None and rep.work > orig.work:
                overshot = True
            if not overshot and rep.stack_depth > orig.state.depth:
                # landed deeper than ORIG: truncating would just re-run
                # this continue, so fall back to the step crawl instead
                overshot = True
            if not overshot:
                self._record("c", rep, embedded)
                continue
            self.personality.restore_bytes(snap)
            # retry with fine-grained forward steps
            guard = 0
            while self._classify(orig) is RelativeDepth.SHALLOWER:
                if self._lookahead_is_orig("s", orig):
                    return
                self._forward("s", "* -> *.s")
                guard += 1
                if guard > self.config.max_slices:
                    raise AlgorithmError("BACK_UP_TO_SAME could not reach ORIG depth")

    def reverse_continue(self) -> ReverseResult:
        notice = self._require_live()
        if notice:
            return ReverseResult(self.report(), notice)
        orig = self._capture_orig()
        # when sitting on a breakpoint its own event is ORIG's arrival;
        # the previous event is one lower
        bp_lines = {line for _id, line, enabled in self.personality.breakpoint_table() if enabled}
        target = orig.state.bp_count - (1 if orig.state.location.line in bp_lines else 0)
        if target < 1:
            return ReverseResult(self.report(), "no prior breakpoint")
        # back up to the last unit boundary provably before event
        # #target, then run forward with continue: it stops at each
        # event, so it lands exactly on #target.  Entries without
        # annotations (split coalesced runs) are treated as unknown,
        # which only moves the boundary earlier.
        start = 0
        for entry in self.history.entries:
            if entry.state_after is None or entry.state_after.bp_count >= target:
                break
            start += entry.repeat
        self.truncate_to(start)
        rep = self.report()
        while self.personality.process_state().bp_count < target:
            rep = self._forward("c", "REVERSE_CONTINUE: * -> *.c")
            if rep.stop_kind in (StopKind.TERMINATED, StopKind.FAULT):
                raise AlgorithmError("missed a recorded breakpoint event during replay")
        return ReverseResult(rep)

    def reverse_finish(self) -> ReverseResult:
        notice = self._require_live()
        if notice:
            return ReverseResult(self.report(), notice)
        orig_depth = self.personality.process_state().depth
        if orig_depth < 2:
            return ReverseResult(self.report(), "already at outermost frame")
        while self.personality.process_state().depth >= orig_depth:
            res = self.reverse_next()
            if res.notice is not None or res.stopped_at_breakpoint:
                return res
        return ReverseResult(self.report())

    def undo_command(self, k: int = 1) -> ReverseResult:
        if k <= 0:
            return ReverseResult(self.report())
        n = self.history.unit_length
        notice = None
        if k > n:
            k = n
            notice = "undo clamped to session start"
        rep = self.truncate_to(n - k)
        return ReverseResult(rep, notice)
