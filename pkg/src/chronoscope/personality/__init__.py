from .base import (
    BOTTOM,
    Bottom,
    Capabilities,
    CapabilityError,
    CommandToken,
    Location,
    PersonalityError,
    ProcessState,
    SessionFatalError,
    StopKind,
    StopReport,
    render_value,
)
from .vm import DEFAULT_STEP_BUDGET, VmPersonality

__all__ = [
    "BOTTOM",
    "Bottom",
    "Capabilities",
    "CapabilityError",
    "CommandToken",
    "Location",
    "PersonalityError",
    "ProcessState",
    "SessionFatalError",
    "StopKind",
    "StopReport",
    "render_value",
    "DEFAULT_STEP_BUDGET",
    "VmPersonality",
]
