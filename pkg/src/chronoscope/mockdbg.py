"""A deterministic line-oriented "external debugger" over the built-in
VM, used as the reference target for the external adapter.

Protocol (all output line-oriented, prompt is `(mdb) `):

    step                one statement
    next                step over
    cont                run to breakpoint or exit
    break <line>        -> `breakpoint <id> at line <line>`
    del <id>
    eval <expr>         -> `= <value>` or `= ?error`
    where               -> current stop line
    quit

Stops print `stopped at <file>:<line> depth <d>`; a stop caused by a
breakpoint prints `hit breakpoint <id>` first; termination prints
`exited`; a SIGINT during cont prints `interrupted at <file>:<line>
depth <d>`.  `--slow` sleeps 1 ms per statement so interrupt handling
can be exercised deterministically.  There is deliberately no finish
command.
"""

from __future__ import annotations

import argparse
import signal
import sys
import time
from pathlib import Path

from .lang.interp import EvalError, current_line, eval_in_scope, initial_state, single_step
from .lang.parser import LangSyntaxError, parse_expression, parse_program
from .personality.base import render_value

PROMPT = "(mdb) "


class MockDebugger:
    def __init__(self, program, slow: bool = False):
        self.program = program
        self.state = initial_state(program)
        self.breakpoints: dict[int, int] = {}
        self.next_bp_id = 1
        self.slow = slow
        self.interrupted = False

    # ---- helpers ----

    def _line(self) -> int:
        return current_line(self.state, self.program) if self.state.live else 0

    def _say_stop(self, prefix: str = "stopped") -> None:
        print(f"{prefix} at {self.program.file_label}:{self._line()} depth {self.state.depth}")

    def _bp_at(self, line: int) -> int | None:
        for bp_id, bp_line in self.breakpoints.items():
            if bp_line == line:
                return bp_id
        return None

    def _step_once(self) -> None:
        self.state = single_step(self.state, self.program)
        if self.slow:
            time.sleep(0.001)

    def _check_dead(self) -> bool:
        if not self.state.live:
            print("exited")
            return True
        return False

    # ---- commands ----

    def do_step(self) -> None:
        if self._check_not_running():
            return
        self._step_once()
        if self._check_dead():
            return
        hit = self._bp_at(self._line())
        if hit is not None:
            print(f"hit breakpoint {hit}")
        self._say_stop()

    def do_next(self) -> None:
        if self._check_not_running():
            return
        depth0 = self.state.depth
        while True:
            self._step_once()
            if self._check_dead():
                return
            hit = self._bp_at(self._line())
            if hit is not None:
                print(f"hit breakpoint {hit}")
                self._say_stop()
                return
            if self.state.depth <= depth0:
                self._say_stop()
                return

    def do_cont(self) -> None:
        if self._check_not_running():
            return
        self.interrupted = False
        while True:
            if self.interrupted:
                self.interrupted = False
                self._say_stop("interrupted")
                return
            self._step_once()
            if self._check_dead():
                return
            hit = self._bp_at(self._line())
            if hit is not None:
                print(f"hit breakpoint {hit}")
                self._say_stop()
                return

    def _check_not_running(self) -> bool:
        if not self.state.live:
            print("process not running")
            return True
        return False

    def dispatch(self, line: str) -> bool:
        parts = line.strip().split(None, 1)
        if not parts:
            return True
        cmd, rest = parts[0], parts[1] if len(parts) > 1 else ""
        if cmd == "quit":
            return False
        if cmd == "step":
            self.do_step()
        elif cmd == "next":
            self.do_next()
        elif cmd == "cont":
            self.do_cont()
        elif cmd == "break":
            try:
                bp_line = int(rest)
            except ValueError:
                print("usage: break <line>")
                return True
            bp_id = self.next_bp_id
            self.next_bp_id += 1
            self.breakpoints[bp_id] = bp_line
            print(f"breakpoint {bp_id} at line {bp_line}")
        elif cmd == "del":
            try:
                del self.breakpoints[int(rest)]
                print(f"deleted breakpoint {int(rest)}")
            except (ValueError, KeyError):
                print("no such breakpoint")
        elif cmd == "eval":
            try:
                value = eval_in_scope(parse_expression(rest), self.state)
                print(f"= {render_value(value)}")
            except (LangSyntaxError, EvalError):
                print("= ?error")
        elif cmd == "where":
            if self.state.live:
                self._say_stop()
            else:
                print("process not running")
        else:
            print(f"unknown command: {cmd}")
        return True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mockdbg")
    parser.add_argument("program")
    parser.add_argument("--slow", action="store_true", help="1 ms per statement")
    args = parser.parse_args(argv)
    source = Path(args.program).read_text()
    program = parse_program(source, Path(args.program).name)
    dbg = MockDebugger(program, slow=args.slow)

    def on_sigint(signum, frame):
        dbg.interrupted = True

    signal.signal(signal.SIGINT, on_sigint)
    print(f"mockdbg loaded {program.file_label}")
    dbg._say_stop()
    while True:
        print(PROMPT, end="", flush=True)
        try:
            line = input()
        except EOFError:
            return 0
        if not dbg.dispatch(line):
            return 0


if __name__ == "__main__":
    sys.exit(main())
