import pytest

from chronoscope.personality.base import (
    BOTTOM,
    CommandToken,
    PersonalityError,
    StopKind,
    render_value,
)
from chronoscope.personality.vm import VmPersonality


def test_render_value_canonical():
    assert render_value(True) == "true"
    assert render_value(False) == "false"
    assert render_value(-42) == "-42"
    assert render_value(BOTTOM) == "⊥"


def test_step_next_continue_finish(fact_rec):
    p = VmPersonality(fact_rec)
    p.execute(CommandToken.STEP)  # into fact, depth 2
    assert p.state.depth == 2
    rep = p.execute(CommandToken.FINISH)
    assert rep.stack_depth == 1
    rep = p.execute(CommandToken.NEXT)  # the final print; program ends
    assert rep.stop_kind is StopKind.TERMINATED
    assert p.state.output_log == (120,)


def test_crossing_count_is_route_independent(fact_iter):
    # same temporal point reached by continue vs. by single-stepping
    # must carry the same breakpoint-event count
    p1 = VmPersonality(fact_iter)
    p1.set_breakpoint(6)
    p1.execute(CommandToken.CONTINUE)
    p1.execute(CommandToken.CONTINUE)
    p2 = VmPersonality(fact_iter)
    p2.set_breakpoint(6)
    while p2.state.step_counter < p1.state.step_counter:
        p2.execute(CommandToken.STEP)
    assert p1.state == p2.state
    assert p1.bp_count() == p2.bp_count() == 2


def test_suppression_keeps_counting(fact_iter):
    p = VmPersonality(fact_iter)
    p.set_breakpoint(6)
    p.suppress_bp_stops = True
    rep = p.execute(CommandToken.NEXT)
    while rep.stop_kind is StopKind.STEP_COMPLETE and p.state.live:
        rep = p.execute(CommandToken.NEXT)
    # never stopped *at* a suppressed breakpoint, but the crossings
    # were all counted
    assert p.bp_count() == 5
    assert p.bp_stop_events == 0


def test_continue_ignores_suppression(fact_iter):
    p = VmPersonality(fact_iter)
    p.set_breakpoint(6)
    p.suppress_bp_stops = True
    rep = p.execute(CommandToken.CONTINUE)
    assert rep.stop_kind is StopKind.BREAKPOINT_HIT


def test_peek_is_side_effect_free(fact_iter):
    p = VmPersonality(fact_iter)
    before = p.state
    micro = p.micro_steps
    rep = p.peek(CommandToken.NEXT)
    assert rep is not None and rep.work == before.step_counter + 1
    assert p.state == before
    assert p.micro_steps == micro


def test_timeout_interrupt_and_resume(long_loop):
    p = VmPersonality(long_loop)
    rep = p.execute(CommandToken.CONTINUE, budget=100)
    slices = 0
    while rep.stop_kind is StopKind.TIMEOUT_INTERRUPT:
        slices += 1
        rep = p.resume(budget=100)
    assert rep.stop_kind is StopKind.TERMINATED
    assert slices > 100  # ~15k statements at 100 per slice
    # untimed run ends in the same deep state
    q = VmPersonality(long_loop)
    q.execute(CommandToken.CONTINUE)
    assert p.state == q.state


def test_command_while_pending_rejected(long_loop):
    p = VmPersonality(long_loop)
    p.execute(CommandToken.CONTINUE, budget=10)
    with pytest.raises(PersonalityError):
        p.execute(CommandToken.STEP)
    p.abort_pending()
    p.execute(CommandToken.STEP)  # fine after aborting


def test_finish_at_outermost_rejected(fact_iter):
    p = VmPersonality(fact_iter)
    with pytest.raises(PersonalityError):
        p.execute(CommandToken.FINISH)


def test_command_on_dead_debuggee_rejected(fact_iter):
    p = VmPersonality(fact_iter)
    p.execute(CommandToken.CONTINUE)
    assert not p.state.live
    with pytest.raises(PersonalityError):
        p.execute(CommandToken.NEXT)


def test_eval_expression_bottom_on_error(fact_iter):
    p = VmPersonality(fact_iter)
    assert p.eval_expression("nonexistent") is BOTTOM
    assert p.eval_expression("1 +") is BOTTOM
    assert p.eval_expression("2 * 3") == 6


def test_breakpoint_table_round_trip(fact_iter):
    p = VmPersonality(fact_iter)
    p.set_breakpoint(5)
    p.set_breakpoint(9)
    p.delete_breakpoint(1)
    table = p.breakpoint_table()
    q = VmPersonality(fact_iter)
    q.restore_breakpoint_table(table)
    assert q.breakpoint_table() == table
    assert q.set_breakpoint(3) not in dict((b[0], b) for b in table)


def test_snapshot_bytes_round_trip(fact_rec):
    p = VmPersonality(fact_rec)
    for _ in range(5):
        p.execute(CommandToken.STEP)
    blob = p.snapshot_bytes()
    p.execute(CommandToken.CONTINUE)
    p.restore_bytes(blob)
    assert p.state.step_counter == 5
    assert p.state.live
