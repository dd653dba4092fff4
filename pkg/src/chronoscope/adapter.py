"""External personality: drives a line-oriented debugger child process
through a pseudo-terminal, configured by a declarative descriptor
(command spellings + anchored output patterns).

Checkpointing for external personalities would need a live-fork backend;
this build treats that as unsupported on every platform, so external
sessions are restricted to forward commands plus undo-via-full-rerun
(restart the debugger, replay the surviving history) — semantically a
restore + replay whose only checkpoint is session start.  The REPL
prints a performance warning when such a session starts.
"""

from __future__ import annotations

import os
import pty
import re
import select
import signal
import time
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field

from .history import CommandHistory, HistoryEntry
from .personality.base import (
    BOTTOM,
    Capabilities,
    CapabilityError,
    CommandToken,
    Location,
    PersonalityError,
    ProcessState,
    SessionFatalError,
    StopKind,
    StopReport,
)

_COMMAND_KEYS = ("step", "next", "continue", "finish", "break", "delete", "eval")
_PATTERN_KEYS = ("location", "breakpoint_hit", "terminated", "eval_value", "bp_counter")


@dataclass(frozen=True)
class PersonalityDescriptor:
    name: str
    prompt: str
    commands: dict[str, str] = field(default_factory=dict)
    patterns: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for key in ("step", "next", "continue"):
            if key not in self.commands:
                raise ValueError(f"descriptor missing required command {key!r}")
        if "location" not in self.patterns:
            raise ValueError("descriptor missing required pattern 'location'")
        for key, pat in self.patterns.items():
            re.compile(pat)  # fail fast on bad regexes

    def capabilities(self) -> Capabilities:
        return Capabilities(
            has_finish="finish" in self.commands,
            has_native_breakpoint_counter="bp_counter" in self.patterns,
            supports_expression_eval="eval" in self.commands,
        )


def load_descriptor(text: str) -> PersonalityDescriptor:
    data = tomllib.loads(text)
    head = data.get("personality", {})
    return PersonalityDescriptor(
        name=head.get("name", "external"),
        prompt=head["prompt"],
        commands=dict(data.get("commands", {})),
        patterns=dict(data.get("patterns", {})),
    )


def serialize_descriptor(d: PersonalityDescriptor) -> str:
    def q(s: str) -> str:
        return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["[personality]", f"name = {q(d.name)}", f"prompt = {q(d.prompt)}", "", "[commands]"]
    for key in _COMMAND_KEYS:
        if key in d.commands:
            lines.append(f"{key} = {q(d.commands[key])}")
    lines.append("")
    lines.append("[patterns]")
    for key in _PATTERN_KEYS:
        if key in d.patterns:
            lines.append(f"{key} = {q(d.patterns[key])}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------
# pty plumbing


class _PtyChild:
    def __init__(self, argv: list[str]):
        self.argv = list(argv)
        pid, fd = pty.fork()
        if pid == 0:  # child
            try:
                os.execvp(argv[0], argv)
            finally:
                os._exit(127)
        self.pid = pid
        self.fd = fd
        self._disable_echo()
        self.buf = ""

    def _disable_echo(self) -> None:
        import termios

        try:
            attrs = termios.tcgetattr(self.fd)
            attrs[3] &= ~termios.ECHO
            termios.tcsetattr(self.fd, termios.TCSANOW, attrs)
        except termios.error:
            pass

    def send_line(self, text: str) -> None:
        os.write(self.fd, text.encode("utf-8") + b"\n")

    def send_interrupt(self) -> None:
        os.write(self.fd, b"\x03")

    def read_until(self, prompt_re: re.Pattern, timeout: float) -> str | None:
        """Accumulate output until the prompt is quiescent at the end of
        the buffer; None on timeout (buffer keeps what arrived)."""
        deadline = time.monotonic() + timeout
        while True:
            m = prompt_re.search(self.buf)
            if m and m.end() == len(self.buf):
                out = self.buf[: m.start()]
                self.buf = ""
                return out
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            ready, _, _ = select.select([self.fd], [], [], remaining)
            if not ready:
                return None
            try:
                chunk = os.read(self.fd, 65536)
            except OSError:
                chunk = b""
            if not chunk:
                return None
            self.buf += chunk.decode("utf-8", errors="replace").replace("\r\n", "\n").replace("\r", "")

    def close(self) -> None:
        try:
            os.close(self.fd)
        except OSError:
            pass
        try:
            os.kill(self.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        try:
            os.waitpid(self.pid, 0)
        except ChildProcessError:
            pass


# ----------------------------------------------------------------------
# the personality


class ExternalPersonality:
    def __init__(self, descriptor: PersonalityDescriptor, argv: list[str], timeout: float = 5.0):
        self.descriptor = descriptor
        self.argv = list(argv)
        self.timeout = timeout
        self.capabilities = descriptor.capabilities()
        self._prompt_re = re.compile(descriptor.prompt, re.MULTILINE)
        self._loc_re = re.compile(descriptor.patterns["location"], re.MULTILINE)
        self._hit_re = re.compile(descriptor.patterns["breakpoint_hit"], re.MULTILINE) if "breakpoint_hit" in descriptor.patterns else None
        self._term_re = re.compile(descriptor.patterns["terminated"], re.MULTILINE) if "terminated" in descriptor.patterns else None
        self._eval_re = re.compile(descriptor.patterns["eval_value"], re.MULTILINE) if "eval_value" in descriptor.patterns else None
        self.child = _PtyChild(argv)
        banner = self.child.read_until(self._prompt_re, timeout)
        if banner is None:
            raw = self.child.buf
            self.child.close()
            raise PersonalityError(f"debugger prompt never appeared; captured output: {raw!r}")
        self._bp_hits = 0
        self._breakpoints: dict[int, tuple[int, int, bool]] = {}
        self._pending: str | None = None
        self.terminated = False
        self.last_report = self._parse_stop(banner, StopKind.STEP_COMPLETE, count_hit=False)
        self.suppress_bp_stops = False  # external stops can't be suppressed

    # ---- transaction helper ----

    def _transact(self, line: str, timeout: float | None = None) -> str:
        self.child.send_line(line)
        out = self.child.read_until(self._prompt_re, timeout if timeout is not None else self.timeout)
        if out is None:
            raise _Timeout()
        return out

    def _resync(self) -> str:
        """After an interrupt, always regain a quiescent prompt or die."""
        self.child.send_interrupt()
        out = self.child.read_until(self._prompt_re, self.timeout + 5.0)
        if out is None:
            self.child.close()
            raise SessionFatalError("debugger did not resynchronize after interrupt")
        return out

    # ---- parsing ----

    def _parse_stop(self, text: str, kind: StopKind, count_hit: bool = True) -> StopReport:
        if self._hit_re is not None and self._hit_re.search(text):
            kind = StopKind.BREAKPOINT_HIT
            if count_hit:
                self._bp_hits += 1
        if self._term_re is not None and self._term_re.search(text):
            kind = StopKind.TERMINATED
            self.terminated = True
        matches = list(self._loc_re.finditer(text))
        if matches:
            m = matches[-1]
            groups = m.groupdict()
            loc = Location(file_label=groups.get("file", ""), line=int(groups.get("line", 0)))
            depth = int(groups["depth"]) if groups.get("depth") else 1
            self._last_loc, self._last_depth = loc, depth
        elif hasattr(self, "_last_loc"):
            loc, depth = self._last_loc, self._last_depth
        else:
            loc, depth = Location(file_label="", line=0), 1
        if self.terminated:
            depth = 0
        return StopReport(location=loc, stack_depth=depth, bp_count=self._bp_hits, stop_kind=kind, work=None)

    # ---- personality surface ----

    def process_state(self) -> ProcessState:
        return self.last_report.process_state()

    def report(self, stop_kind=None) -> StopReport:
        return self.last_report

    def execute(self, token: CommandToken, budget: int | None = None) -> StopReport:
        if self._pending is not None:
            raise PersonalityError("command issued while a timed-out command is pending")
        if self.terminated:
            raise PersonalityError("command on a non-live debuggee")
        key = {
            CommandToken.STEP: "step",
            CommandToken.NEXT: "next",
            CommandToken.CONTINUE: "continue",
            CommandToken.FINISH: "finish",
        }[token]
        if key not in self.descriptor.commands:
            raise CapabilityError(f"personality has no {key} command")
        spelled = self.descriptor.commands[key]
        try:
            out = self._transact(spelled)
        except _Timeout:
            resync_out = self._resync()
            self._pending = spelled
            self.last_report = self._parse_stop(resync_out, StopKind.TIMEOUT_INTERRUPT, count_hit=False)
            return self.last_report
        self.last_report = self._parse_stop(out, StopKind.STEP_COMPLETE)
        return self.last_report

    def resume(self, budget: int | None = None) -> StopReport:
        if self._pending is None:
            raise PersonalityError("no interrupted command to resume")
        spelled, self._pending = self._pending, None
        try:
            out = self._transact(spelled)
        except _Timeout:
            resync_out = self._resync()
            self._pending = spelled
            self.last_report = self._parse_stop(resync_out, StopKind.TIMEOUT_INTERRUPT, count_hit=False)
            return self.last_report
        self.last_report = self._parse_stop(out, StopKind.STEP_COMPLETE)
        return self.last_report

    def abort_pending(self) -> None:
        self._pending = None

    def interrupt(self) -> None:
        self.child.send_interrupt()

    def set_breakpoint(self, line: int, bp_id: int | None = None) -> int:
        out = self._transact(self.descriptor.commands["break"].format(line=line))
        m = re.search(r"(\d+)", out)
        real_id = int(m.group(1)) if m else (bp_id if bp_id is not None else len(self._breakpoints) + 1)
        self._breakpoints[real_id] = (real_id, line, True)
        return real_id

    def delete_breakpoint(self, bp_id: int) -> None:
        if bp_id not in self._breakpoints:
            raise PersonalityError(f"no breakpoint {bp_id}")
        self._transact(self.descriptor.commands["delete"].format(id=bp_id))
        del self._breakpoints[bp_id]

    def breakpoint_table(self):
        return sorted(self._breakpoints.values())

    def bp_count(self) -> int:
        return self._bp_hits

    def eval_expression(self, text: str):
        if not self.capabilities.supports_expression_eval:
            raise CapabilityError("personality has no eval command")
        out = self._transact(self.descriptor.commands["eval"].format(expr=text))
        if self._eval_re is not None:
            m = self._eval_re.search(out)
            if m and m.group("value") != "?error":
                return m.group("value")
        return BOTTOM

    def handle_command_text(self, raw: str) -> str:
        try:
            return self._transact(raw).rstrip("\n")
        except _Timeout:
            self._resync()
            return "[interrupted: command timed out]"

    def close(self) -> None:
        self.child.close()


class _Timeout(Exception):
    pass


def spawn(descriptor: PersonalityDescriptor, argv: list[str], timeout: float = 5.0) -> ExternalPersonality:
    if not argv:
        raise PersonalityError("external personality needs a debugger argv")
    return ExternalPersonality(descriptor, argv, timeout=timeout)


# ----------------------------------------------------------------------
# forward-only session (undo via full rerun)


class AdapterSession:
    """Session surface for snapshot-less personalities: forward
    commands, breakpoints, eval, and undo-command realized by restarting
    the debugger and replaying the surviving command log."""

    def __init__(self, personality: ExternalPersonality):
        self.personality = personality
        self.log: list[tuple[str, object]] = []  # ("cmd",tok) ("break",line) ("delete",id)
        self.history = CommandHistory()
        self.events: list[tuple[str, object]] = []
        self.rule_trace: list[str] = []
        self.store = _EmptyStore()

    def report(self) -> StopReport:
        return self.personality.report()

    def user_command(self, token: str) -> StopReport:
        rep = self.personality.execute(CommandToken(token))
        while rep.stop_kind is StopKind.TIMEOUT_INTERRUPT:
            rep = self.personality.resume()
        self.log.append(("cmd", token))
        self.history.append(
            HistoryEntry(token=token, depth_after=rep.stack_depth, state_after=rep.process_state())
        )
        self.events.append(("stop", rep))
        return rep

    def set_breakpoint(self, line: int) -> int:
        bp_id = self.personality.set_breakpoint(line)
        self.log.append(("break", line))
        self.history.record_mutation("set", bp_id, line)
        return bp_id

    def delete_breakpoint(self, bp_id: int) -> None:
        self.personality.delete_breakpoint(bp_id)
        self.log.append(("delete", bp_id))
        self.history.record_mutation("delete", bp_id)

    def eval_expression(self, text: str) -> str:
        from .personality.base import render_value

        return render_value(self.personality.eval_expression(text))

    def undo_command(self, k: int = 1):
        from .engine import ReverseResult

        if k <= 0:
            return ReverseResult(self.report())
        units = sum(1 for kind, _ in self.log if kind == "cmd")
        notice = None
        if k > units:
            k = units
            notice = "undo clamped to session start"
        keep = units - k
        # full rerun: restart the debugger, replay the surviving log
        old = self.personality
        fresh = ExternalPersonality(old.descriptor, old.argv, timeout=old.timeout)
        old.close()
        self.personality = fresh
        survivors: list[tuple[str, object]] = []
        done = 0
        for kind, arg in self.log:
            if kind == "cmd":
                if done >= keep:
                    continue
                done += 1
            survivors.append((kind, arg))
        self.log = []
        self.history = CommandHistory()
        rep = self.report()
        for kind, arg in survivors:
            if kind == "cmd":
                rep = self.user_command(arg)
            elif kind == "break":
                self.set_breakpoint(arg)
            else:
                self.delete_breakpoint(arg)
        self.events.append(("history-truncated", keep))
        return ReverseResult(rep, notice)

    # checkpoint-family operations need snapshots
    def _unsupported(self, *a, **k):
        raise PersonalityError(
            "external personality has no snapshot support; only forward commands and undo"
        )

    take_checkpoint = _unsupported
    restore_checkpoint = _unsupported
    reverse_next = _unsupported
    reverse_step = _unsupported
    reverse_continue = _unsupported
    reverse_finish = _unsupported

    def close(self) -> None:
        self.personality.close()


class _EmptyStore:
    def all(self):
        return []
