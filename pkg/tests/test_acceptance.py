"""Acceptance criteria; each test prints one PASS/FAIL line, also when output is captured."""

import itertools
import random
import re
import time
from collections import Counter

import pytest

from conftest import corpus, load
from proofscore.cimpg import MismatchReport, reconstruct_script
from proofscore.cli import OK, OPEN, main
from proofscore.kernel import Var, apply_substitution
from proofscore.mixfix import format_term
from proofscore.proof import equation_text
from proofscore.rewriting import match_modulo, normalize, rewrite_step
from proofscore.session import eval_open_close
from randomterms import TermGen

@pytest.fixture
def report(capsys):
    def emit(n, title, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}" + (f" ({detail})" if detail else "")
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def tokens(text):
    return Counter(re.findall(r"[A-Za-z0-9#\-]+|[()=,]", text))


# -- 1 ---------------------------------------------------------------------

EXPECTED_RESIDUALS = [
    "true xor cs = pc(want(s,k),i) and cs = pc(want(s,k),j) xor i = j and cs = pc(want(s,k),i) and "
    "cs = pc(want(s,k),j) : Bool",
    "true xor cs = if i = k then ws else pc(s,i) fi and cs = if j = k then ws else pc(s,j) fi xor i = j and "
    "cs = if i = k then ws else pc(s,i) fi and cs = if j = k then ws else pc(s,j) fi : Bool",
    "true : Bool",
]


def test_walkthrough_transcript(report):
    t0 = time.perf_counter()
    s = load("qlock-walkthrough.cafe")
    results = [r.text for oc in s.open_envs() for r in eval_open_close(oc)]
    elapsed = time.perf_counter() - t0
    got = [tokens(r.removeprefix("Result: ")) for r in results]
    missing = [e for e in EXPECTED_RESIDUALS if tokens(e) not in got]
    report(1, "walkthrough residuals reproduced", not missing and elapsed < 1.0,
           f"{len(EXPECTED_RESIDUALS) - len(missing)}/3 residuals, {elapsed:.3f}s")


# -- 2 ---------------------------------------------------------------------

def test_full_qlock_proof(report, tmp_path, capsys):
    t0 = time.perf_counter()
    s = load("qlock-proof.cafe")
    results = [r.text for oc in s.open_envs() for r in eval_open_close(oc)]
    all_true = bool(results) and all(r == "Result: true : Bool" for r in results)
    script = tmp_path / "qlock-script.cafe"
    gen = main(["gen-script", "--id", "qlock", "--emit-script", str(script), corpus("qlock-proof.cafe")])
    capsys.readouterr()
    proved = main(["prove", "--script", str(script)])
    out = capsys.readouterr().out
    elapsed = time.perf_counter() - t0
    text = script.read_text()
    ok = (all_true and gen == OK and proved == OK and "all goals discharged" in out
          and " open" not in out and ":ind on (S:Sys)" in text)
    report(2, "Qlock proof scores discharge and the generated script re-verifies", ok and elapsed < 30,
           f"{len(results)} reductions, {elapsed:.2f}s")


# -- 3 ---------------------------------------------------------------------

BINARY = {"_and_": lambda a, b: a and b, "_or_": lambda a, b: a or b,
          "_xor_": lambda a, b: a != b, "_implies_": lambda a, b: (not a) or b}
COMMUTATIVE = {"_and_", "_or_", "_xor_"}


def test_bool_oracle(report, bool_module):
    """Innermost normalization is compositional, so enumerating each depth over the normal forms
    of the previous depth covers every formula of that depth."""
    sig = bool_module.signature
    ctx = bool_module.context()
    rows = list(itertools.product((False, True), repeat=3))
    classes = {sig.make("true"): (True,) * 8, sig.make("false"): (False,) * 8}
    for k, name in enumerate("PQR"):
        classes[Var(name, "Bool")] = tuple(r[k] for r in rows)
    by_table = {tt: t for t, tt in classes.items()}
    checked, bad = 0, []

    def visit(term, tt, new):
        nonlocal checked
        checked += 1
        nf, _ = normalize(ctx, term)
        if by_table.setdefault(tt, nf) is not nf or classes.get(nf, tt) != tt or new.get(nf, tt) != tt:
            bad.append(format_term(sig, term))
        new[nf] = tt

    for depth in range(3):
        cur = list(classes.items())
        new = {}
        for a, ta in cur:
            visit(sig.make("not_", [a]), tuple(not x for x in ta), new)
        for i, (a, ta) in enumerate(cur):
            for j, (b, tb) in enumerate(cur):
                for op, fn in BINARY.items():
                    if op in COMMUTATIVE and j < i:
                        continue
                    visit(sig.make(op, [a, b]), tuple(fn(x, y) for x, y in zip(ta, tb)), new)
        classes.update(new)
    report(3, "BOOL normal forms coincide with truth tables", not bad,
           f"{checked} root combinations, {len(by_table)} functions, {len(bad)} discrepancies")


# -- 4 ---------------------------------------------------------------------

MODULES = [("bool.cafe", "BOOL"), ("label.cafe", "LABEL"), ("pnat.cafe", "PNAT"), ("pnat.cafe", "OMEGA"),
           ("queue.cafe", "TRIVerr"), ("pid.cafe", "PID"), ("queue.cafe", "QUEUE"), ("qlock.cafe", "QLOCK")]
CASES = 1000


def _brute_ac(sig, op, pvars, fixed, args):
    """Every substitution for ``op(pvars..., fixed)`` against ``op(args)``: drop one copy of the fixed
    argument, then spread the rest over the variables in non-empty blocks."""
    out = set()
    choices = [i for i, a in enumerate(args) if a is fixed] if fixed is not None else [None]
    for drop in choices:
        rest = [a for i, a in enumerate(args) if i != drop]
        if not pvars:
            if not rest:
                out.add(())
            continue
        for assign in itertools.product(range(len(pvars)), repeat=len(rest)):
            blocks = [[a for a, k in zip(rest, assign) if k == j] for j in range(len(pvars))]
            if any(not b for b in blocks):
                continue
            th = ((v, b[0] if len(b) == 1 else sig.make(op, b)) for v, b in zip(pvars, blocks))
            out.add(tuple(sorted(th, key=lambda kv: kv[0].name)))
    return out


def _step_is_instance(sig, ev):
    if ev.rule is None:
        return True
    lhs = apply_substitution(sig, ev.rule.lhs, ev.subst)
    rhs = apply_substitution(sig, ev.rule.rhs, ev.subst)
    if ev.leftover:
        lhs = sig.make(ev.redex.op, (lhs, *ev.leftover))
        rhs = sig.make(ev.redex.op, (rhs, *ev.leftover))
    return lhs is ev.redex and rhs is ev.contractum


def _properties(flat, seed):
    sig = flat.signature
    ctx = flat.context()
    gen = TermGen(flat, seed)
    sorts = sorted(flat.sorts)
    fails = Counter()
    for _ in range(CASES):
        t = gen.term(gen.rng.choice(sorts), 4)
        events = []
        nf, _ = normalize(ctx, t, events.append)
        again = []
        nf2, _ = normalize(ctx, nf, again.append)
        # a normal form is a fixed point; steps spent on failing conditions never reach the term
        if nf2 is not nf or any("c" not in ev.path for ev in again):
            fails["idempotence"] += 1
        if not all(_step_is_instance(sig, ev) for ev in events):
            fails["step instance"] += 1
        step = rewrite_step(ctx, t)
        if step is not None and normalize(ctx, step[0])[0] is not nf:
            fails["step preserves normal form"] += 1
        if (step is None) != (not any("c" not in ev.path for ev in events)):
            fails["step exists iff normalization rewrites"] += 1
    for _ in range(CASES):
        op = gen.rng.choice(("_and_", "_xor_"))
        args = [gen.term("Bool", 2) for _ in range(gen.rng.randint(2, 5))]
        subject = sig.make(op, args)
        if subject.op != op:
            fails["flattened nest"] += 1
            continue
        sargs = list(subject.args)
        ground = [a for a in sargs if a.ground]
        fixed = gen.rng.choice(ground) if ground and gen.rng.random() < 0.5 else None
        m = gen.rng.randint(0 if fixed is not None else 2, 3)
        pvars = [Var(f"X{j}", "Bool") for j in range(m)]
        pattern_args = pvars + ([fixed] if fixed is not None else [])
        if len(pattern_args) < 2:
            continue
        pattern = sig.make(op, pattern_args)
        got = {tuple(sorted(th.items(), key=lambda kv: kv[0].name)) for th in match_modulo(sig, pattern, subject)}
        if got != _brute_ac(sig, op, pvars, fixed, sargs):
            fails["AC matching"] += 1
    return fails


def test_rewriting_properties(report):
    summary, ok = [], True
    for k, (fname, mod) in enumerate(MODULES):
        flat = load(fname).env.flatten(mod)
        fails = _properties(flat, k)
        ok &= not fails
        summary.append(f"{mod}:{sum(fails.values()) or 'ok'}")
    report(4, f"idempotence, step soundness and AC matching on {CASES}+{CASES} cases per module", ok,
           " ".join(summary))


# -- 5 ---------------------------------------------------------------------

QUEUE_OVER_PID = [
    "op empty : -> EQueue {constr}", "op _|_ : Pid Queue -> NeQueue {constr}", "op enq : Queue Pid -> NeQueue",
    "op deq : Queue -> Queue", "op top : EQueue -> ErrPid", "op top : NeQueue -> Pid", "op top : Queue -> Pid&Err",
    "eq enq(empty,X:Pid) = X:Pid | empty .", "eq enq(Y:Pid | Q:Queue,X:Pid) = Y:Pid | enq(Q:Queue,X:Pid) .",
    "eq deq(empty) = empty .", "eq deq(X:Pid | Q:Queue) = Q:Queue .", "eq top(empty) = none .",
    "eq top(X:Pid | Q:Queue) = X:Pid .",
]


def test_module_algebra(report):
    from proofscore.modalg import rename
    env = load("qlock.cafe").env
    inst = env.instantiate("QUEUE", [("E", "TRIVerr2PID")])
    qlock = env.flatten("QLOCK")
    pid = env.flatten("PID")
    own = [d for d in inst.signature.ops if d not in pid.signature.ops]
    own_axioms = [e for e in inst.axioms if e.key not in {p.key for p in pid.axioms}]
    golden = [d.describe() for d in own] + [equation_text(inst, e) for e in own_axioms]
    used = set(qlock.signature.ops)
    ok_golden = golden == QUEUE_OVER_PID
    ok_used = set(inst.signature.ops) <= used and {e.key for e in inst.axioms} <= {e.key for e in qlock.axioms}
    ok_sorts = set(inst.sorts) <= set(qlock.sorts) and inst.sorts and "Elt.E" not in inst.sorts
    tq = load("tqueue.cafe").env
    pushed = tq.instantiate("TQUEUE", [("X", "TRIV2NAT")])
    translated = rename(tq.flatten("TQUEUE"), {"Elt.X": "Nat"}, {}, check_injective=False)
    want = {e.key for e in translated.axioms} | {e.key for e in tq.flatten("PNAT").axioms}
    ok_pushout = {e.key for e in pushed.axioms} == want
    report(5, "QUEUE over TRIVerr2PID is the QLOCK queue and the pushout axiom set holds",
           ok_golden and ok_used and bool(ok_sorts) and ok_pushout,
           f"golden={ok_golden} used={ok_used} pushout={ok_pushout}")


# -- 6 ---------------------------------------------------------------------

def test_induction_demo(report, tmp_path, capsys):
    out = tmp_path / "pnat-script.cafe"
    code = main(["prove", "--auto", "--bound", "2", "--emit-script", str(out), corpus("pnat-auto.cafe")])
    capsys.readouterr()
    lines = [ln.strip() for ln in out.read_text().splitlines()]
    cmds = [ln for ln in lines if ln.startswith(":") and not ln.startswith((":goal", ":lemma", ":id"))]
    replay = main(["prove", "--script", str(out)])
    text = capsys.readouterr().out
    ok = (code == OK and replay == OK
          and cmds == [":ind on (X:Nat)", ":apply(rd)", ":init [zero-least] by {}", ":apply(rd)"]
          and "goal 1-1 discharged by reduction" in text and "goal 1-2 discharged by reduction" in text)
    report(6, "0 <= X proven automatically with two subgoals", ok, " ".join(cmds))


# -- 7 ---------------------------------------------------------------------

def test_mutation_sensitivity(report):
    envs = load("qlock-proof.cafe").open_envs()
    misses = []
    for k, env in enumerate(envs):
        result = reconstruct_script(envs[:k] + envs[k + 1:], "qlock")
        if not (isinstance(result, MismatchReport) and result.uncovered
                and "uncovered branch" in result.to_text()):
            misses.append(env.line)
    code = main(["gen-script", "--id", "qlock", corpus("qlock-proof.cafe")])
    report(7, "deleting any env yields an uncovered-branch report", not misses and code == OK,
           f"{len(envs)} envs, {len(misses)} missed {misses or ''}".strip())


def test_mutation_exit_code(tmp_path, capsys):
    src = open(corpus("qlock-proof.cafe")).read()
    blocks = src.split("\nopen ")
    mutated = tmp_path / "mutated.cafe"
    mutated.write_text(f"in {corpus('qlock.cafe')}\n" + "\nopen ".join(blocks[:4] + blocks[5:]).split("\n", 1)[1])
    assert main(["gen-script", "--id", "qlock", str(mutated)]) == OPEN
    assert "uncovered branch" in capsys.readouterr().out


# -- 8 ---------------------------------------------------------------------

def test_performance_floor(report):
    flat = load("pnat.cafe").env.flatten("OMEGA")
    sig = flat.signature
    ctx = flat.context()
    t0 = time.perf_counter()
    n = sig.make("0")
    for _ in range(10000):
        n = sig.make("s_", [n])
    nf1, st1 = normalize(ctx, sig.make("_<=_", [n, n]))
    w = sig.make("omega")
    for _ in range(10000):
        w = sig.make("s_", [w])
    nf2, st2 = normalize(ctx, w)
    elapsed = time.perf_counter() - t0
    ok = (nf1 is sig.make("true") and st1.steps == 1 and nf2 is sig.make("omega") and st2.steps == 10000
          and elapsed < 2.0)
    report(8, "deep terms and a 10^4-step chain", ok, f"steps {st1.steps} and {st2.steps}, {elapsed:.2f}s")
