"""The line-oriented monitor: forwards ordinary debugger commands to the
personality, intercepts the reverse/temporal command set, prints stop
reports, and manages session persistence.

Stop reports are one greppable line:
    [stop] file:line depth=D bp#=K reason=R
Checkpoints announce themselves as `[ckpt N]` (manual) or
`[ckpt N auto]` (spontaneous and mid-command).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import history as history_mod
from .checkpoints import CheckpointPolicy, CheckpointStore, MissingCheckpointError
from .engine import Session, SessionConfig
from .lang.parser import LangSyntaxError, parse_program
from .personality.base import PersonalityError, StopKind
from .personality.vm import VmPersonality
from .search import reverse_watch

REASONS = {
    StopKind.STEP_COMPLETE: "step-complete",
    StopKind.BREAKPOINT_HIT: "breakpoint-hit",
    StopKind.TERMINATED: "terminated",
    StopKind.FAULT: "fault",
    StopKind.TIMEOUT_INTERRUPT: "timeout-interrupt",
}

FORWARD_TOKENS = {
    "s": "s",
    "n": "n",
    "c": "c",
    "f": "f",
    "step": "s",
    "next": "n",
    "continue": "c",
    "finish": "f",
}


def format_stop(rep) -> str:
    loc = rep.location
    return (
        f"[stop] {loc.file_label}:{loc.line} depth={rep.stack_depth}"
        f" bp#={rep.bp_count} reason={REASONS[rep.stop_kind]}"
    )


class Monitor:
    """Command dispatcher shared by the interactive REPL, script mode,
    and the protocol server."""

    def __init__(self, session: Session, out=None, watch_report: bool = False,
                 session_dir: Path | None = None, source_text: str = ""):
        self.session = session
        self.out = out if out is not None else sys.stdout
        self.watch_report = watch_report
        self.session_dir = session_dir
        self.source_text = source_text
        self._printed_output = self._output_len()

    # ---- plumbing ----

    def _output_len(self) -> int:
        state = getattr(self.session.personality, "state", None)
        return len(state.output_log) if state is not None else 0

    def emit(self, line: str) -> None:
        print(line, file=self.out)

    def drain_events(self) -> list[tuple[str, object]]:
        events = self.session.events
        self.session.events = []
        for kind, payload in events:
            if kind == "checkpoint":
                tag = " auto" if payload.auto else ""
                self.emit(f"[ckpt {payload.ckpt_id}{tag}]")
            elif kind == "history-truncated":
                self.emit(f"[history truncated to {payload}]")
        return events

    def _show_new_output(self) -> None:
        state = getattr(self.session.personality, "state", None)
        if state is None:
            return
        for line in state.output_log[self._printed_output:]:
            self.emit(f"[out] {line}")
        self._printed_output = len(state.output_log)

    def _after_command(self) -> None:
        self.drain_events()
        self._show_new_output()
        self.persist()

    def persist(self) -> None:
        if self.session_dir is not None:
            (self.session_dir / "history.log").write_text(
                history_mod.serialize(self.session.history)
            )

    # ---- dispatch ----

    def handle(self, line: str) -> bool:
        """Execute one command line; returns False on quit."""
        line = line.strip()
        if not line or line.startswith("#"):
            return True
        parts = line.split(None, 1)
        cmd, rest = parts[0], parts[1] if len(parts) > 1 else ""
        try:
            return self._dispatch(cmd, rest, line)
        except PersonalityError as exc:
            self.emit(f"[error] {exc}")
        except MissingCheckpointError as exc:
            self.emit(f"[error] {exc}")
        except ValueError as exc:
            self.emit(f"[error] {exc}")
        return True

    def _dispatch(self, cmd: str, rest: str, raw: str) -> bool:
        session = self.session
        if cmd in ("quit", "exit", "q"):
            self.persist()
            return False
        if cmd in FORWARD_TOKENS:
            rep = session.user_command(FORWARD_TOKENS[cmd])
            self._after_command()
            self.emit(format_stop(rep))
        elif cmd in ("break", "b"):
            bp_id = session.set_breakpoint(int(rest))
            self.emit(f"[bp {bp_id}] at line {int(rest)}")
            self.persist()
        elif cmd == "delete":
            session.delete_breakpoint(int(rest))
            self.emit(f"[bp {int(rest)} deleted]")
            self.persist()
        elif cmd in ("print", "p", "eval"):
            self.emit(f"[val] {session.eval_expression(rest)}")
        elif cmd == "checkpoint":
            session.take_checkpoint(auto=False)
            self.drain_events()
        elif cmd == "restore":
            rep = session.restore_checkpoint(int(rest))
            self._after_command()
            self.emit(format_stop(rep))
        elif cmd == "undo":
            k = int(rest) if rest else 1
            res = session.undo_command(k)
            self._after_command()
            if res.notice:
                self.emit(f"[notice] {res.notice}")
            self.emit(format_stop(res.report))
        elif cmd in ("reverse-next", "reverse-step", "reverse-continue", "reverse-finish"):
            method = getattr(session, cmd.replace("-", "_"))
            res = method()
            self._after_command()
            if res.notice:
                self.emit(f"[notice] {res.notice}")
            self.emit(format_stop(res.report))
        elif cmd == "reverse-watch":
            result = reverse_watch(session, rest)
            self._after_command()
            if result.notice:
                self.emit(f"[notice] {result.notice}")
            else:
                self.emit(f"[watch] value {result.counts.witness_value} -> {result.counts.orig_value}")
            if self.watch_report:
                c = result.counts.counts()
                self.emit(
                    "[watch-report] "
                    + " ".join(f"{k}={v}" for k, v in sorted(c.items()))
                )
            self.emit(format_stop(result.report))
        elif cmd == "history":
            text = history_mod.serialize(session.history)
            for hline in text.splitlines():
                self.emit(f"[hist] {hline}")
            if not text:
                self.emit("[hist] (empty)")
        elif cmd == "checkpoints":
            for ckpt in session.store.all():
                loc = ckpt.state.location
                tag = " auto" if ckpt.auto else ""
                self.emit(
                    f"[ckpt {ckpt.ckpt_id}{tag}] prefix={ckpt.prefix_len}"
                    f" substep={ckpt.substep} at={loc.file_label}:{loc.line}"
                )
        else:
            # pass-through: anything outside the monitor set goes to the
            # personality byte-identically
            handler = getattr(session.personality, "handle_command_text", None)
            if handler is None:
                self.emit(f"[error] unknown command: {raw}")
            else:
                for out_line in handler(raw).splitlines():
                    self.emit(out_line)
        return True


# ----------------------------------------------------------------------
# session construction


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronoscope",
        description="Reversible meta-debugger: reverse execution and temporal "
        "search layered over a forward-only debugger via checkpoint/re-execute.",
    )
    target = parser.add_mutually_exclusive_group(required=True)
    target.add_argument("--vm", metavar="PROGRAM", help="debug a .tvm program on the built-in VM")
    target.add_argument("--personality", metavar="DESCRIPTOR", help="external personality descriptor file")
    parser.add_argument("argv", nargs="*", help="external debugger argv (after --)")
    parser.add_argument("--script", metavar="FILE", help="run commands from FILE and exit")
    parser.add_argument("--serve", type=int, metavar="PORT", help="serve the control protocol on PORT")
    parser.add_argument("--session-dir", metavar="DIR", help="persist checkpoints and history under DIR")
    parser.add_argument("--resume", action="store_true", help="resume a persisted session from --session-dir")
    parser.add_argument("--ckpt-dir", metavar="DIR", help=argparse.SUPPRESS)  # legacy alias of --session-dir
    parser.add_argument("--ckpt-interval", type=float, default=5.0, metavar="SECONDS",
                        help="spontaneous checkpoint interval (default 5)")
    parser.add_argument("--ckpt-every-n-cmds", type=int, default=1000, metavar="N",
                        help="spontaneous checkpoint command spacing (default 1000)")
    parser.add_argument("--cmd-timeout", type=float, default=5.0, metavar="SECONDS",
                        help="wall-clock continue timeout (default 5)")
    parser.add_argument("--step-budget", type=int, default=1_000_000, metavar="STEPS",
                        help="deterministic VM step budget per command slice")
    parser.add_argument("--watch-report", action="store_true",
                        help="print eval_count_report after reverse-watch")
    return parser


def build_session(args) -> tuple[Session, str]:
    """Returns (session, source_text)."""
    session_dir = args.session_dir or args.ckpt_dir
    config = SessionConfig(
        session_dir=session_dir,
        policy=CheckpointPolicy(
            max_interval_seconds=args.ckpt_interval,
            max_commands_between=args.ckpt_every_n_cmds,
        ),
        cmd_timeout=args.cmd_timeout,
        step_budget=args.step_budget,
    )
    if args.vm:
        source = Path(args.vm).read_text()
        program = parse_program(source, Path(args.vm).name)
        personality = VmPersonality(program)
    else:
        from .adapter import AdapterSession, load_descriptor, spawn

        descriptor = load_descriptor(Path(args.personality).read_text())
        personality = spawn(descriptor, args.argv, timeout=args.cmd_timeout)
        print(
            "chronoscope: external personality has no snapshot backend; "
            "forward commands and undo (full rerun) only — undo may be slow",
            file=sys.stderr,
        )
        return AdapterSession(personality), ""
    if args.resume:
        if not session_dir:
            raise SystemExit("--resume requires --session-dir")
        store = CheckpointStore.load(Path(session_dir) / "checkpoints")
        log_path = Path(session_dir) / "history.log"
        hist = history_mod.deserialize(log_path.read_text()) if log_path.exists() else history_mod.CommandHistory()
        session = Session.resume(personality, config, store, hist)
    else:
        session = Session(personality, config)
    return session, source


def run_script(monitor: Monitor, script_path: str) -> None:
    monitor.emit("chronoscope transcript v1")
    monitor.drain_events()
    for line in Path(script_path).read_text().splitlines():
        if line.strip() and not line.strip().startswith("#"):
            monitor.emit(f"> {line.strip()}")
        if not monitor.handle(line):
            return
    monitor.persist()


def run_repl(monitor: Monitor) -> None:
    monitor.drain_events()
    while True:
        try:
            line = input("(chronoscope) ")
        except EOFError:
            monitor.persist()
            return
        except KeyboardInterrupt:
            interrupt = getattr(monitor.session.personality, "interrupt", None)
            if interrupt is not None:
                interrupt()
            monitor.emit("")
            continue
        if not monitor.handle(line):
            return


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        session, source = build_session(args)
    except (OSError, LangSyntaxError, PersonalityError) as exc:
        print(f"chronoscope: startup failed: {exc}", file=sys.stderr)
        return 1
    session_dir = Path(args.session_dir or args.ckpt_dir) if (args.session_dir or args.ckpt_dir) else None
    monitor = Monitor(
        session,
        watch_report=args.watch_report,
        session_dir=session_dir,
        source_text=source,
    )
    if args.serve is not None:
        from .protocol import serve

        serve(monitor, args.serve)
        return 0
    if args.script:
        run_script(monitor, args.script)
        return 0
    run_repl(monitor)
    return 0


if __name__ == "__main__":
    sys.exit(main())
