"""Monitor/CLI tests: golden transcripts, determinism, persistence.

Goldens live in tests/goldens/: each .script has a frozen .out produced
by the script runner and reviewed line by line.  Regenerate with
    python3 -m chronoscope.repl --vm fixtures/<f>.tvm --script <s> > <out>
only after re-reviewing the semantics.
"""

import io
from pathlib import Path

import pytest

from chronoscope.repl import Monitor, build_parser, main, run_script
from chronoscope.engine import Session, SessionConfig
from chronoscope.personality.vm import VmPersonality

from conftest import FIXTURES, load_fixture

GOLDENS = Path(__file__).parent / "goldens"

SCRIPT_FIXTURE = {
    "basic_fact_iter": "fact_iter",
    "reverse_ops": "fact_rec",
    "watch": "fact_iter",
    "errors": "fact_iter",
}


def run_cli(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


@pytest.mark.parametrize("name", sorted(SCRIPT_FIXTURE))
def test_golden_transcript(name, capsys):
    fixture = FIXTURES / f"{SCRIPT_FIXTURE[name]}.tvm"
    code, out = run_cli(
        ["--vm", str(fixture), "--script", str(GOLDENS / f"{name}.script")], capsys
    )
    assert code == 0
    assert out == (GOLDENS / f"{name}.out").read_text()


def test_transcripts_are_deterministic(capsys):
    fixture = FIXTURES / "fact_rec.tvm"
    script = GOLDENS / "reverse_ops.script"
    runs = {run_cli(["--vm", str(fixture), "--script", str(script)], capsys)[1] for _ in range(3)}
    assert len(runs) == 1


def test_monitor_handles_unknown_and_blank_lines(fact_iter):
    out = io.StringIO()
    m = Monitor(Session(VmPersonality(fact_iter), SessionConfig()), out=out)
    assert m.handle("") is True
    assert m.handle("# comment") is True
    assert m.handle("frobnicate") is True
    assert "[error] unknown command: frobnicate" in out.getvalue()
    assert m.handle("quit") is False


def test_watch_report_flag(tmp_path, capsys):
    script = tmp_path / "s"
    script.write_text("c\nreverse-watch product >= 120\n")
    _, out = run_cli(
        ["--vm", str(FIXTURES / "fact_iter.tvm"), "--script", str(script), "--watch-report"],
        capsys,
    )
    (report_line,) = [l for l in out.splitlines() if l.startswith("[watch-report]")]
    for key in ("expr_evals=", "commands_executed=", "restores=", "expansion_statements=", "doublings="):
        assert key in report_line


def test_session_persistence_and_resume(tmp_path, capsys):
    fixture = str(FIXTURES / "fact_iter.tvm")
    sdir = tmp_path / "sess"
    first = tmp_path / "first"
    first.write_text("break 6\nc\nn\nquit\n")
    _, out1 = run_cli(["--vm", fixture, "--session-dir", str(sdir), "--script", str(first)], capsys)
    assert (sdir / "history.log").exists()
    assert (sdir / "checkpoints").is_dir()

    second = tmp_path / "second"
    second.write_text("print product\nhistory\nn\nquit\n")
    _, out2 = run_cli(
        ["--vm", fixture, "--session-dir", str(sdir), "--resume", "--script", str(second)], capsys
    )
    # the resumed session sits exactly where the first one stopped:
    # after break 6 / c / n the product is 1 and history has two units
    assert "[val] 1" in out2
    assert "[hist] c x1" in out2
    assert "[hist] n x1" in out2


def test_resume_without_session_dir_fails(capsys):
    with pytest.raises(SystemExit):
        main(["--vm", str(FIXTURES / "fact_iter.tvm"), "--resume", "--script", "/dev/null"])


def test_startup_failure_is_graceful(tmp_path, capsys):
    bad = tmp_path / "bad.tvm"
    bad.write_text("fn main( {")
    code = main(["--vm", str(bad), "--script", "/dev/null"])
    assert code == 1
    assert "startup failed" in capsys.readouterr().err


def test_missing_program_file(capsys):
    code = main(["--vm", "/nonexistent/prog.tvm", "--script", "/dev/null"])
    assert code == 1


def test_script_stops_at_quit(fact_iter, tmp_path):
    out = io.StringIO()
    m = Monitor(Session(VmPersonality(fact_iter), SessionConfig()), out=out)
    script = tmp_path / "s"
    script.write_text("n\nquit\nn\nn\n")
    run_script(m, str(script))
    # commands after quit never ran
    assert m.session.history.unit_length == 1


def test_checkpoints_listing(fact_iter):
    out = io.StringIO()
    m = Monitor(Session(VmPersonality(fact_iter), SessionConfig()), out=out)
    m.handle("n")
    m.handle("checkpoint")
    m.handle("checkpoints")
    text = out.getvalue()
    assert "[ckpt 0 auto] prefix=0" in text
    assert "[ckpt 1] prefix=1" in text
