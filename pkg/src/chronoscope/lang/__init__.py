from .ast import Program
from .interp import EvalError, Frame, VmState, eval_in_scope, initial_state, run_to_end, single_step, step_over
from .parser import LangSyntaxError, UndefinedFunctionError, parse_expression, parse_program
from .snapshot import SnapshotDecodeError, restore, snapshot

__all__ = [
    "Program",
    "EvalError",
    "Frame",
    "VmState",
    "eval_in_scope",
    "initial_state",
    "run_to_end",
    "single_step",
    "step_over",
    "LangSyntaxError",
    "UndefinedFunctionError",
    "parse_expression",
    "parse_program",
    "SnapshotDecodeError",
    "restore",
    "snapshot",
]
