"""Uniform target-debugger abstraction: the four standard commands plus
location, stack-depth, breakpoint-event, and expression queries."""

from __future__ import annotations

import enum
from dataclasses import dataclass


@dataclass(frozen=True)
class Capabilities:
    has_finish: bool
    has_native_breakpoint_counter: bool
    supports_expression_eval: bool


class CommandToken(str, enum.Enum):
    STEP = "s"
    NEXT = "n"
    CONTINUE = "c"
    FINISH = "f"


class StopKind(str, enum.Enum):
    STEP_COMPLETE = "step-complete"
    BREAKPOINT_HIT = "breakpoint-hit"
    TERMINATED = "terminated"
    FAULT = "fault"
    TIMEOUT_INTERRUPT = "timeout-interrupt"


@dataclass(frozen=True)
class Location:
    file_label: str
    line: int

    def __str__(self):
        return f"{self.file_label}:{self.line}"


@dataclass(frozen=True)
class ProcessState:
    """The unit of "when": source location, breakpoint-event count, depth.

    Two states are ORIG-equal iff their (file, line, breakpoint count)
    triples are equal; depth participates only in DEEPER/SHALLOWER/SAME
    classification.
    """

    location: Location
    bp_count: int
    depth: int

    def triple(self) -> tuple:
        return (self.location.file_label, self.location.line, self.bp_count)

    def same_triple(self, other: "ProcessState") -> bool:
        return self.triple() == other.triple()


@dataclass(frozen=True)
class StopReport:
    location: Location
    stack_depth: int
    bp_count: int
    stop_kind: StopKind
    work: int | None = None  # debuggee step counter, when the personality has one

    def process_state(self) -> ProcessState:
        return ProcessState(location=self.location, bp_count=self.bp_count, depth=self.stack_depth)


class Bottom:
    """Evaluation-error value. Unequal to every ordinary value, equal to itself."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "⊥"


BOTTOM = Bottom()


def render_value(value) -> str:
    """Canonical textual form used for watchpoint comparisons."""
    if value is BOTTOM:
        return "⊥"
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


class PersonalityError(Exception):
    pass


class SessionFatalError(PersonalityError):
    pass


class CapabilityError(PersonalityError):
    """Command requires a capability the personality does not report."""
