import io
import os

from conftest import corpus
from proofscore.cli import LOAD_ERROR, OK, OPEN, build_parser, cmd_repl, main


def test_run_walkthrough_exits_zero(capsys):
    assert main(["run", corpus("qlock-walkthrough.cafe")]) == OK
    out = capsys.readouterr().out
    assert "Result: true : Bool" in out and "rewrites)" in out


def test_check_summarizes_modules(capsys):
    assert main(["check", corpus("qlock.cafe")]) == OK
    assert "module(s) and view(s)" in capsys.readouterr().out


def test_load_error_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.cafe"
    bad.write_text("mod! X { [S] op a : -> T }\n")
    assert main(["check", str(bad)]) == LOAD_ERROR
    assert main(["run", str(tmp_path / "missing.cafe")]) == LOAD_ERROR
    assert "error:" in capsys.readouterr().err


def test_open_goal_exits_one(tmp_path, capsys):
    f = tmp_path / "open.cafe"
    f.write_text(f"in {corpus('pnat.cafe')}\nopen PNAT .\n :goal {{eq [g] : s 0 <= 0 = true .}}\n :apply(rd)\nclose\n")
    assert main(["run", str(f)]) == OPEN
    assert "goal 1 open" in capsys.readouterr().out


def test_gen_script_then_prove_script(tmp_path, capsys):
    out = tmp_path / "qlock-script.cafe"
    assert main(["gen-script", "--id", "qlock", "--emit-script", str(out), corpus("qlock-proof.cafe")]) == OK
    text = out.read_text()
    assert text.startswith("in ") and ":ind on (S:Sys)" in text
    capsys.readouterr()
    assert main(["prove", "--script", str(out)]) == OK
    assert "all goals discharged" in capsys.readouterr().out


def test_gen_script_unknown_tag_exits_one(capsys):
    assert main(["gen-script", "--id", "nope", corpus("qlock-proof.cafe")]) == OPEN


def test_prove_auto(tmp_path, capsys):
    out = tmp_path / "auto.cafe"
    assert main(["prove", "--auto", "--bound", "2", "--emit-script", str(out), corpus("pnat-auto.cafe")]) == OK
    assert main(["prove", "--script", str(out)]) == OK


def test_prove_auto_bound_zero_prints_failure_trace(capsys):
    assert main(["prove", "--auto", "--bound", "0", corpus("qlock-auto.cafe")]) == OPEN
    assert "FailureTrace: depth-exhausted" in capsys.readouterr().out


def test_prove_auto_with_lemma_file(tmp_path, capsys):
    goal = tmp_path / "goal.cafe"
    goal.write_text(f"in {corpus('qlock.cafe')}\nopen QLOCK .\n"
                    " :goal {eq [inv1] : inv1(S:Sys,I:Pid,J:Pid) = true .}\n :ind on (S:Sys)\nclose\n")
    lemmas = tmp_path / "lemmas.cafe"
    lemmas.write_text("open QLOCK .\n :lemma {eq [inv2] : inv2(S:Sys,I:Pid) = true .}\nclose\n")
    assert main(["prove", "--auto", "--lemmas", str(lemmas), str(goal)]) == OK


def test_limits_are_validated():
    parser = build_parser()
    for argv in (["run", "--max-steps", "0", "x"], ["prove", "--auto", "--bound", "-1"]):
        try:
            parser.parse_args(argv)
        except SystemExit as exc:
            assert exc.code == 2
        else:
            raise AssertionError(argv)


def test_repl_buffers_multiline_input():
    args = build_parser().parse_args(["repl", corpus("pnat.cafe")])
    stdin = io.StringIO("red in PNAT :\n  0 <= s 0 .\nopen PNAT .\n op n : -> Nat .\n red n <= n .\nclose\nquit\n")
    stdout = io.StringIO()
    assert cmd_repl(args, stdin, stdout) == OK
    text = stdout.getvalue()
    assert text.count("Result: true : Bool") == 2


def test_repl_reports_errors_and_continues():
    args = build_parser().parse_args(["repl", corpus("pnat.cafe")])
    stdin = io.StringIO("red in PNAT : 0 <= zz .\nred in PNAT : s 0 <= s 0 .\n")
    stdout = io.StringIO()
    cmd_repl(args, stdin, stdout)
    text = stdout.getvalue()
    assert "error:" in text and "Result: true : Bool" in text
