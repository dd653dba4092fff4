"""Reverse expression watchpoints: binary search over command-history
time for the last statement-event before the expression changed to its
current (ORIG) value.

Level 1 brackets a history prefix (restore checkpoint + replay) such
that the expression differs at the prefix but matches ORIG one command
unit later.  The bracketing command is then refined: a continue (or
finish) expands into repeated next, a next into step + repeated next, a
step ends the search.  Expansion runs are budgeted in statements with
MAX_SEQ doubling when the whole span shows no value change; user
breakpoints never stop an expansion replay.

The witness invariant: at the landing point P, eval(expr) != orig value,
and exactly one Step from P makes it equal.
"""

from __future__ import annotations

from dataclasses import dataclass

from .personality.base import CommandToken, ProcessState, StopKind, StopReport, render_value

MAX_SEQ_FLOOR = 16
_MAX_REFINE_DEPTH = 10_000


class SearchError(Exception):
    pass


@dataclass
class SearchBudget:
    max_seq: int
    doublings: int = 0

    def double(self) -> None:
        self.max_seq *= 2
        self.doublings += 1


@dataclass
class WatchReport:
    expr: str
    orig_value: str
    expr_evals: int = 0
    commands_executed: int = 0
    restores: int = 0
    expansion_statements: int = 0
    doublings: int = 0
    max_seq_initial: int = 0
    max_seq_final: int = 0
    witness_value: str | None = None
    notice: str | None = None

    def counts(self) -> dict:
        return {
            "expr_evals": self.expr_evals,
            "commands_executed": self.commands_executed,
            "restores": self.restores,
            "expansion_statements": self.expansion_statements,
            "doublings": self.doublings,
        }


@dataclass
class WatchResult:
    report: StopReport
    state: ProcessState
    counts: WatchReport
    notice: str | None = None


def reverse_watch(session, expr: str) -> WatchResult:
    return _Search(session, expr).run()


class _Search:
    def __init__(self, session, expr: str):
        self.session = session
        self.p = session.personality
        self.expr = expr
        hist_len = session.history.unit_length
        self.budget = SearchBudget(max_seq=max(MAX_SEQ_FLOOR, hist_len))
        self.counts = WatchReport(expr=expr, orig_value="", max_seq_initial=self.budget.max_seq)

    # ---- instrumented primitives ----

    def _eval(self) -> str:
        self.counts.expr_evals += 1
        return render_value(self.p.eval_expression(self.expr))

    def _restore(self, snap: bytes) -> None:
        self.p.restore_bytes(snap)
        self.counts.restores += 1

    def _exec(self, token: str, budget: int | None = None) -> StopReport:
        rep = self.p.execute(CommandToken(token), budget=budget)
        self.counts.commands_executed += 1
        return rep

    def _goto_unit(self, unit: int) -> None:
        # replay must be faithful: never suppressed by the expansion flag
        saved = self.p.suppress_bp_stops
        self.p.suppress_bp_stops = False
        try:
            self.session._materialize(self.session.history, unit)
        finally:
            self.p.suppress_bp_stops = saved
        self.counts.restores += 1
        self.counts.commands_executed += unit  # upper bound on replayed units

    # ---- top level ----

    def run(self) -> WatchResult:
        session = self.session
        self.orig_value = self._eval()
        self.counts.orig_value = self.orig_value
        orig_len = session.history.unit_length
        session.take_checkpoint(auto=True)  # makes ORIG cheap to re-reach

        if orig_len == 0:
            return self._no_change()
        self._goto_unit(0)
        if self._eval() == self.orig_value:
            self._goto_unit(orig_len)
            return self._no_change()

        # bracket a prefix: value differs at lo, equals ORIG's at hi
        lo, hi = 0, orig_len
        while hi - lo > 1:
            mid = (lo + hi) // 2
            self._goto_unit(mid)
            if self._eval() == self.orig_value:
                hi = mid
            else:
                lo = mid
        _, entry = session.history.entry_at_unit(lo)

        suppress_saved = self.p.suppress_bp_stops
        self.p.suppress_bp_stops = True
        try:
            chain = self._refine(
                prepare=lambda: self._goto_unit(lo),
                token=entry.token,
                fence_work=self._work_at_unit(lo + 1),
                depth=0,
            )
        finally:
            self.p.suppress_bp_stops = suppress_saved

        # land the session at the witness, history reflecting the path
        session.truncate_to(lo)
        self.p.suppress_bp_stops = True
        try:
            for tok in chain:
                rep, embedded = session._exec_logical(tok)
                session._record(tok, rep, embedded)
        finally:
            self.p.suppress_bp_stops = suppress_saved
        witness_value = self._eval()
        self.counts.witness_value = witness_value
        self.counts.doublings = self.budget.doublings
        self.counts.max_seq_final = self.budget.max_seq
        rep = session.report()
        session._emit("watch-result", rep)
        return WatchResult(report=rep, state=rep.process_state(), counts=self.counts)

    def _no_change(self) -> WatchResult:
        self.counts.notice = "no change found in recorded history"
        self.counts.doublings = self.budget.doublings
        self.counts.max_seq_final = self.budget.max_seq
        rep = self.session.report()
        return WatchResult(
            report=rep,
            state=rep.process_state(),
            counts=self.counts,
            notice=self.counts.notice,
        )

    def _work_at_unit(self, unit: int) -> int:
        self._goto_unit(unit)
        work = self.p.work()
        if work is None:
            raise SearchError("temporal search requires a work counter")
        return work

    # ---- refinement ----

    def _refine(self, prepare, token: str, fence_work: int, depth: int) -> list[str]:
        """Narrow a bracket [B, fence] whose value flips somewhere inside
        down to a single-Step witness; returns the command chain from B
        to the witness."""
        if depth > _MAX_REFINE_DEPTH:
            raise SearchError("refinement recursion exceeded its bound")
        if token == "s":
            return []

        prepare()
        snap_b = self.p.snapshot_bytes()
        lead = ["s"] if token == "n" else []  # n expands to step + nexts
        fill = "s" if token == "partial" else "n"

        while True:
            segs, works, at_fence = self._expand(snap_b, lead, fill, fence_work, self.budget.max_seq)
            if at_fence or self._eval() == self.orig_value:
                break
            self.budget.double()

        # binary search over positions 0..len(segs); value differs at 0
        lo, hi = 0, len(segs)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            self._run_prefix(snap_b, segs, mid)
            if self._eval() == self.orig_value:
                hi = mid
            else:
                lo = mid
        flip = segs[lo]
        if flip == "s":
            chain = list(segs[:lo])
            self._run_prefix(snap_b, segs, lo)
            return chain
        sub = self._refine(
            prepare=lambda: self._run_prefix(snap_b, segs, lo),
            token=flip,
            fence_work=works[lo + 1],
            depth=depth + 1,
        )
        return list(segs[:lo]) + sub

    def _expand(self, snap_b: bytes, lead: list[str], fill: str, fence_work: int, stmt_budget: int):
        """One expansion run from B: the lead commands, then `fill`
        commands until the fence or the statement budget; each command's
        own budget is capped so the run never passes the fence."""
        self._restore(snap_b)
        start_work = self.p.work()
        segs: list[str] = []
        works: list[int] = [start_work]
        at_fence = False
        queue = list(lead)
        while True:
            work = self.p.work()
            if work >= fence_work:
                at_fence = True
                break
            if work - start_work >= stmt_budget and not queue:
                break
            tok = queue.pop(0) if queue else fill
            cap = max(1, min(fence_work - work, stmt_budget - (work - start_work)))
            rep = self._exec(tok, budget=cap)
            if rep.stop_kind is StopKind.TIMEOUT_INTERRUPT:
                self.p.abort_pending()
                segs.append("partial")
                works.append(self.p.work())
                if self.p.work() >= fence_work:
                    at_fence = True
                break
            segs.append(tok)
            works.append(rep.work)
            if rep.stop_kind in (StopKind.TERMINATED, StopKind.FAULT):
                at_fence = True
                break
        self.counts.expansion_statements += self.p.work() - start_work
        return segs, works, at_fence

    def _run_prefix(self, snap_b: bytes, segs: list[str], count: int) -> None:
        self._restore(snap_b)
        for tok in segs[:count]:
            self._exec(tok)
