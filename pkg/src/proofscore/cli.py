"""Command-line driver.

Exit status: 0 when every result was produced and every goal discharged,
1 for open goals or a mismatch report, 2 when loading fails.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from .errors import ParseError, SpecError
from .rewriting import DEFAULT_COND_DEPTH, DEFAULT_MAX_STEPS
from .session import Session, Transcript

log = logging.getLogger("proofscore")

OK, OPEN, LOAD_ERROR = 0, 1, 2


def _positive(text: str) -> int:
    n = int(text)
    if n <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return n


def _non_negative(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--max-steps", type=_positive, default=DEFAULT_MAX_STEPS, help="rewrite steps per reduction")
    common.add_argument("--cond-depth", type=_positive, default=DEFAULT_COND_DEPTH,
                        help="nesting limit for condition evaluation")
    common.add_argument("--trace", action="store_true", help="print every rewrite step")
    common.add_argument("--emit-script", metavar="FILE", help="write the produced proof script to FILE")
    p = argparse.ArgumentParser(prog="proofscore", description="Evaluate specifications, proof scores and proof scripts.")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", parents=[common], help="parse and flatten only")
    c.add_argument("files", nargs="+")
    r = sub.add_parser("run", parents=[common], help="evaluate reductions, proof scores and scripts")
    r.add_argument("files", nargs="+")
    pr = sub.add_parser("prove", parents=[common], help="replay a proof script or search for one")
    mode = pr.add_mutually_exclusive_group(required=True)
    mode.add_argument("--script", metavar="FILE", help="replay the script blocks of FILE")
    mode.add_argument("--auto", action="store_true", help="bounded automatic case splitting")
    pr.add_argument("--bound", type=_non_negative, default=4, help="case-split depth bound (default 4)")
    pr.add_argument("--lemmas", metavar="FILE", help="blocks whose :goal/:lemma equations form the lemma pool")
    pr.add_argument("files", nargs="*", help="files loaded first (the goal blocks for --auto)")
    g = sub.add_parser("gen-script", parents=[common], help="reconstruct a proof script from tagged proof scores")
    g.add_argument("--id", required=True, dest="tag")
    g.add_argument("files", nargs="+")
    rp = sub.add_parser("repl", parents=[common], help="read statements interactively")
    rp.add_argument("files", nargs="*")
    return p


def _session(args) -> Session:
    return Session(args.max_steps, args.cond_depth, args.trace)


def _load(session: Session, paths: Sequence[str]) -> None:
    for path in paths:
        session.load(path)


def _emit(args, session: Session, scripts) -> None:
    """Write the scripts, preceded by ``in`` lines for the module files, relative to the output file."""
    if not args.emit_script or not scripts:
        return
    where = os.path.dirname(os.path.abspath(args.emit_script))
    requires = tuple(os.path.relpath(f, where) for f in session.module_files)
    chunks = []
    for k, sc in enumerate(scripts):
        sc.requires = requires if k == 0 else ()
        chunks.append(sc.to_text())
    with open(args.emit_script, "w", encoding="utf-8") as fh:
        fh.write("\n".join(chunks))


def cmd_check(args) -> int:
    s = _session(args)
    _load(s, args.files)
    for d in s.check():
        print(d, file=sys.stderr)
    for oc in s.open_envs():
        for d in oc.module.diagnostics:
            print(d, file=sys.stderr)
    print(f"checked {len(s.order)} module(s) and view(s), {len(s.blocks)} block(s)")
    return OK


def cmd_run(args) -> int:
    s = _session(args)
    _load(s, args.files)
    transcript, closed = s.run()
    sys.stdout.write(transcript.render())
    return OK if closed else OPEN


def cmd_prove(args) -> int:
    s = _session(args)
    _load(s, args.files)
    if args.script:
        s.load(args.script)
        transcript, closed = s.run(Transcript(), scripts=True)
        sys.stdout.write(transcript.render())
        return OK if closed else OPEN
    return _auto(s, args)


def _auto(s: Session, args) -> int:
    from .auto import FailureTrace, auto_prove
    from .parser import format_modexpr
    from .proof import apply_command, start_goal
    pool = []
    if args.lemmas:
        ls = Session(args.max_steps, args.cond_depth)
        ls.env = s.env
        ls.load(args.lemmas)
        for oc in ls.open_envs():
            pool.extend(oc.goals + oc.lemmas)
    blocks = [oc for oc in s.open_envs() if oc.goals]
    if not blocks:
        print("no block declares :goal targets", file=sys.stderr)
        return LOAD_ERROR
    status = OK
    found = []
    for oc in blocks:
        state = start_goal(oc.module, oc.goals, oc.lemmas, args.max_steps, args.cond_depth)
        for cmd in oc.commands:
            state = apply_command(state, cmd, oc.variables)
        result = auto_prove(oc.module, oc.goals, pool, args.bound, state=state,
                            module_name=format_modexpr(oc.base), tag=oc.tag)
        if isinstance(result, FailureTrace):
            sys.stdout.write(result.to_text())
            status = OPEN
            continue
        result.declarations = tuple(f"op {n} : -> {srt} ." for n, srt in oc.constants)
        found.append(result)
        sys.stdout.write(result.to_text())
    _emit(args, s, found)
    return status


def cmd_gen_script(args) -> int:
    from .cimpg import MismatchReport, reconstruct_script
    from .proof import replay_text
    s = _session(args)
    _load(s, args.files)
    result = reconstruct_script(s.open_envs(), args.tag, max_steps=args.max_steps, cond_depth=args.cond_depth)
    if isinstance(result, MismatchReport):
        sys.stdout.write(result.to_text())
        return OPEN
    text = result.to_text()
    sys.stdout.write(text)
    _emit(args, s, [result])
    states = replay_text(s.env, text, args.max_steps, args.cond_depth)
    return OK if all(st.closed for st in states) else OPEN


def cmd_repl(args, stdin=None, stdout=None) -> int:
    """Statements are buffered until they parse as complete items; ``quit`` leaves."""
    from .parser import parse_program
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    s = _session(args)
    _load(s, args.files)
    done = len(s.blocks)
    buf = []
    interactive = stdin.isatty()
    while True:
        if interactive:
            stdout.write("> " if not buf else "| ")
            stdout.flush()
        line = stdin.readline()
        if not line:
            break
        if not buf and line.strip() in ("quit", "q", "exit"):
            break
        buf.append(line)
        text = "".join(buf)
        if not text.strip():
            buf = []
            continue
        try:
            parse_program(text)
        except ParseError:
            if _incomplete(text):
                continue
        try:
            s.load_text(text)
            transcript, _ = s.run(Transcript(), start=done)
            stdout.write(transcript.render())
        except SpecError as exc:
            stdout.write(f"error: {exc}\n")
        done = len(s.blocks)
        buf = []
    return OK


def _incomplete(text: str) -> bool:
    """Heuristic: an unclosed brace, an open block without close, or a statement without its period."""
    if text.count("{") > text.count("}"):
        return True
    words = text.split()
    if words.count("open") > words.count("close"):
        return True
    tail = text.rstrip()
    return bool(tail) and not (tail.endswith(".") or tail.endswith("}") or tail.endswith("close"))


COMMANDS = {"check": cmd_check, "run": cmd_run, "prove": cmd_prove, "gen-script": cmd_gen_script, "repl": cmd_repl}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return LOAD_ERROR


if __name__ == "__main__":
    sys.exit(main())
