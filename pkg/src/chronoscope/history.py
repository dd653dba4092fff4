"""Command history: annotated s/n/c/f tokens, rewrite rules, LEVEL
lookup, coalescing, and a line-oriented on-disk log.

Rules use the notation "*.n -> *" (truncate the trailing next, realized
by restore + re-execution) and "* -> *.c" (execute a continue).  "?"
matches any of the four tokens.  History positions are counted in
command units, so a coalesced entry n(x5) contributes five units.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .personality.base import Location, ProcessState

TOKENS = ("s", "n", "c", "f")


class RewriteNoMatch(Exception):
    pass


@dataclass(frozen=True)
class HistoryEntry:
    token: str
    repeat: int = 1
    depth_after: int | None = None
    state_after: ProcessState | None = None
    work_after: int | None = None
    embedded_checkpoints: tuple[int, ...] = ()
    # executed with breakpoint stops suppressed (reverse algorithms and
    # temporal search do this); replay must suppress the same way
    suppressed: bool = False

    def __post_init__(self):
        if self.token not in TOKENS:
            raise ValueError(f"bad token {self.token!r}")
        if self.repeat > 1 and self.token not in ("s", "n"):
            raise ValueError("repeat counts apply only to s and n")


@dataclass(frozen=True)
class BreakpointMutation:
    position: int  # unit index before which the mutation applies
    action: str  # "set" | "delete"
    bp_id: int
    line: int = 0


@dataclass
class CommandHistory:
    entries: list[HistoryEntry] = field(default_factory=list)
    mutations: list[BreakpointMutation] = field(default_factory=list)

    # ---- unit arithmetic ----

    @property
    def unit_length(self) -> int:
        return sum(e.repeat for e in self.entries)

    def tokens(self) -> str:
        return "".join(e.token * e.repeat for e in self.entries)

    def entry_at_unit(self, unit: int) -> tuple[int, HistoryEntry]:
        """Entry containing unit index `unit` (0-based), with its entry index."""
        acc = 0
        for i, e in enumerate(self.entries):
            if unit < acc + e.repeat:
                return i, e
            acc += e.repeat
        raise IndexError(f"unit {unit} out of range")

    def last_token(self) -> str | None:
        return self.entries[-1].token if self.entries else None

    # ---- mutation / truncation ----

    def append(self, entry: HistoryEntry) -> None:
        self.entries.append(entry)

    def record_mutation(self, action: str, bp_id: int, line: int = 0) -> None:
        self.mutations.append(
            BreakpointMutation(position=self.unit_length, action=action, bp_id=bp_id, line=line)
        )

    def truncate_units(self, new_len: int) -> None:
        """Drop everything after unit position new_len, including any
        breakpoint mutations recorded past it."""
        if new_len > self.unit_length:
            raise ValueError("cannot truncate forwards")
        while self.unit_length > new_len:
            last = self.entries[-1]
            excess = self.unit_length - new_len
            if last.repeat > excess:
                # annotations no longer describe the shortened entry
                self.entries[-1] = HistoryEntry(
                    token=last.token, repeat=last.repeat - excess, suppressed=last.suppressed
                )
                break
            self.entries.pop()
        self.mutations = [m for m in self.mutations if m.position <= new_len]

    def breakpoint_table_at(self, unit: int) -> list[tuple[int, int, bool]]:
        table: dict[int, tuple[int, int, bool]] = {}
        for m in self.mutations:
            if m.position > unit:
                continue
            if m.action == "set":
                table[m.bp_id] = (m.bp_id, m.line, True)
            else:
                table.pop(m.bp_id, None)
        return sorted(table.values())

    def mutations_between(self, start: int, end: int) -> list[BreakpointMutation]:
        return [m for m in self.mutations if start < m.position <= end]

    def copy(self) -> "CommandHistory":
        return CommandHistory(entries=list(self.entries), mutations=list(self.mutations))


def level(history: CommandHistory, prefix_len: int) -> int:
    """Stack depth after the first prefix_len command units (1 at start)."""
    if prefix_len < 0 or prefix_len > history.unit_length:
        raise ValueError(f"prefix {prefix_len} out of range")
    if prefix_len == 0:
        return 1
    _, entry = history.entry_at_unit(prefix_len - 1)
    if entry.depth_after is None:
        raise ValueError("entry lacks a depth annotation")
    return entry.depth_after


# ---- rewrite rules ----

_RULE_RE = re.compile(r"^\*(?:\.(?P<lhs>[snfc?]))?\s*->\s*\*(?:\.(?P<rhs>[snfc]))?$")


@dataclass(frozen=True)
class ReplayPlan:
    """How to realize a rewrite: either execute `token` forward, or
    restore `restore_checkpoint` and re-execute `replay` to reach unit
    position `new_len`."""

    kind: str  # "truncate" | "extend"
    new_len: int
    token: str | None = None
    restore_checkpoint: int | None = None
    replay: tuple[HistoryEntry, ...] = ()


def parse_rule(rule: str) -> tuple[str | None, str | None]:
    m = _RULE_RE.match(rule.strip())
    if not m:
        raise ValueError(f"bad rewrite rule {rule!r}")
    return m.group("lhs"), m.group("rhs")


def apply_rewrite(history: CommandHistory, rule: str, latest_before=None) -> tuple[CommandHistory, ReplayPlan]:
    """Apply one rewrite rule, returning the new history and the plan
    that realizes it.

    `latest_before(unit_len) -> (checkpoint_id, checkpoint_unit_len)` is
    optional; when given, truncation plans carry the checkpoint to
    restore and the entries to re-execute after it.
    """
    lhs, rhs = parse_rule(rule)
    if lhs is not None and rhs is not None:
        raise ValueError("rules either truncate or extend, not both")
    if rhs is not None:
        new = history.copy()
        new.append(HistoryEntry(token=rhs))
        return new, ReplayPlan(kind="extend", new_len=history.unit_length + 1, token=rhs)
    # truncation
    if not history.entries:
        raise RewriteNoMatch("empty history")
    last = history.entries[-1]
    if lhs is None:
        raise ValueError("left side must name a token or '?'")
    if lhs != "?" and last.token != lhs:
        raise RewriteNoMatch(f"history ends with {last.token!r}, rule wants {lhs!r}")
    new_len = history.unit_length - 1
    new = history.copy()
    new.truncate_units(new_len)
    ckpt_id = None
    replay: tuple[HistoryEntry, ...] = ()
    if latest_before is not None:
        ckpt_id, ckpt_len = latest_before(new_len)
        replay = tuple(_slice_units(new, ckpt_len, new_len))
    return new, ReplayPlan(
        kind="truncate",
        new_len=new_len,
        token=last.token,
        restore_checkpoint=ckpt_id,
        replay=replay,
    )


def _slice_units(history: CommandHistory, start: int, end: int) -> list[HistoryEntry]:
    """Entries covering unit range [start, end), splitting coalesced
    entries at the boundaries."""
    out: list[HistoryEntry] = []
    acc = 0
    for e in history.entries:
        lo = max(start, acc)
        hi = min(end, acc + e.repeat)
        if hi > lo:
            if hi - lo == e.repeat:
                out.append(e)
            else:
                out.append(HistoryEntry(token=e.token, repeat=hi - lo))
        acc += e.repeat
        if acc >= end:
            break
    return out


# ---- coalescing ----

def coalesce(entries: list[HistoryEntry], barriers: set[int] | None = None) -> list[HistoryEntry]:
    """Merge adjacent identical s/n entries into counted entries.

    c and f entries are merge barriers, as are breakpoint-mutation
    positions (given in `barriers` as unit indexes) and any change in
    stack depth or breakpoint-event count across the boundary, so a
    merged run is guaranteed free of breakpoint crossings and uniform in
    depth.
    """
    barriers = barriers or set()
    out: list[HistoryEntry] = []
    # bp-event count entering the current last entry of `out` (None when
    # unknown): a merged run must be crossing-free in *every* unit, and
    # an entry that itself stopped at a breakpoint must stay a barrier
    entering: int | None = 0
    last_end: int | None = 0
    unit = 0
    for e in entries:
        prev = out[-1] if out else None
        can_merge = (
            prev is not None
            and e.token == prev.token
            and e.token in ("s", "n")
            and unit not in barriers
            and prev.depth_after is not None
            and e.depth_after == prev.depth_after
            and prev.state_after is not None
            and e.state_after is not None
            and e.state_after.bp_count == prev.state_after.bp_count
            and entering is not None
            and prev.state_after.bp_count == entering
            and not e.embedded_checkpoints
            and not prev.embedded_checkpoints
            and e.suppressed == prev.suppressed
        )
        if can_merge:
            out[-1] = replace(
                prev,
                repeat=prev.repeat + e.repeat,
                state_after=e.state_after,
                work_after=e.work_after,
            )
        else:
            out.append(e)
            entering = last_end
        last_end = e.state_after.bp_count if e.state_after is not None else None
        unit += e.repeat
    return out


# ---- serialization ----

def serialize(history: CommandHistory) -> str:
    lines = []
    by_pos: dict[int, list[BreakpointMutation]] = {}
    for m in history.mutations:
        by_pos.setdefault(m.position, []).append(m)
    unit = 0

    def flush(pos: int):
        for m in by_pos.get(pos, []):
            if m.action == "set":
                lines.append(f"bp {m.position} set {m.bp_id} {m.line}")
            else:
                lines.append(f"bp {m.position} delete {m.bp_id}")

    flush(0)
    for e in history.entries:
        state = e.state_after
        ann = ""
        if state is not None:
            ann = (
                f" depth={e.depth_after} at={state.location.file_label}:{state.location.line}"
                f" bp={state.bp_count}"
            )
            if e.work_after is not None:
                ann += f" work={e.work_after}"
        if e.embedded_checkpoints:
            ann += " emb=" + ",".join(str(i) for i in e.embedded_checkpoints)
        if e.suppressed:
            ann += " quiet"
        lines.append(f"{e.token} x{e.repeat}{ann}")
        unit += e.repeat
        flush(unit)
    return "\n".join(lines) + ("\n" if lines else "")


_ENTRY_RE = re.compile(
    r"^(?P<tok>[snfc]) x(?P<rep>\d+)"
    r"(?: depth=(?P<depth>\d+) at=(?P<file>[^:]+):(?P<line>\d+) bp=(?P<bp>\d+)(?: work=(?P<work>\d+))?)?"
    r"(?: emb=(?P<emb>[\d,]+))?(?: (?P<quiet>quiet))?$"
)


def deserialize(text: str) -> CommandHistory:
    history = CommandHistory()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("bp "):
            parts = line.split()
            pos, action, bp_id = int(parts[1]), parts[2], int(parts[3])
            bp_line = int(parts[4]) if action == "set" else 0
            history.mutations.append(
                BreakpointMutation(position=pos, action=action, bp_id=bp_id, line=bp_line)
            )
            continue
        m = _ENTRY_RE.match(line)
        if not m:
            raise ValueError(f"bad history line {line!r}")
        state = None
        depth = None
        work = None
        if m.group("depth") is not None:
            depth = int(m.group("depth"))
            state = ProcessState(
                location=Location(file_label=m.group("file"), line=int(m.group("line"))),
                bp_count=int(m.group("bp")),
                depth=depth,
            )
            work = int(m.group("work")) if m.group("work") else None
        emb = tuple(int(x) for x in m.group("emb").split(",")) if m.group("emb") else ()
        history.append(
            HistoryEntry(
                token=m.group("tok"),
                repeat=int(m.group("rep")),
                depth_after=depth,
                state_after=state,
                work_after=work,
                embedded_checkpoints=emb,
                suppressed=m.group("quiet") is not None,
            )
        )
    return history
