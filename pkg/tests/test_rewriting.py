import itertools
import random

import pytest

from conftest import load, red, show
from proofscore.errors import ConditionDepthExceeded
from proofscore.kernel import Var
from proofscore.rewriting import (Joinability, RewriteContext, joinable, make_equation, match_modulo,
                                  match_with_extension, normalize, rewrite_step)


@pytest.fixture(scope="module")
def pnat():
    s = load("pnat.cafe")
    return s.env.flatten("PNAT"), s.env.flatten("OMEGA")


def test_conditional_rule_and_exact_step_count(pnat):
    P, _ = pnat
    nf, st = red(P, "0 <= s s 0")
    assert show(P, nf) == "true"
    assert st.steps == 3 and st.labels == {"o1": 1, "o2": 2}


def test_irreducible_term_takes_no_steps(pnat):
    P, _ = pnat
    nf, st = red(P, "s 0 <= 0")
    assert show(P, nf) == "s 0 <= 0" and st.steps == 0


def test_omega_absorbs_successor(pnat):
    _, O = pnat
    nf, st = red(O, "s s omega")
    assert show(O, nf) == "omega" and st.steps == 2
    nf, _ = red(O, "s 0 <= omega")
    assert show(O, nf) == "true"


def test_step_limit_is_reported(pnat):
    P, _ = pnat
    nf, st = normalize(P.context(max_steps=2), P.parse("0 <= s s s 0"))
    assert st.limit_hit and st.steps == 2
    assert joinable(P.context(max_steps=2), P.parse("0 <= s s s 0"), P.parse("true")) is Joinability.INDETERMINATE
    assert not joinable(P.context(max_steps=2), P.parse("0 <= s s s 0"), P.parse("true"))


def test_condition_depth_limit(pnat):
    P, _ = pnat
    term = P.parse("0 <= " + "s " * 40 + "0")
    with pytest.raises(ConditionDepthExceeded):
        normalize(P.context(), term)
    nf, _ = normalize(P.context(max_cond_depth=64), term)
    assert show(P, nf) == "true"


def test_single_step(pnat):
    P, _ = pnat
    t, label = rewrite_step(P.context(), P.parse("0 <= s 0"))
    assert label == "o2" and show(P, t) == "true"
    assert rewrite_step(P.context(), P.parse("s 0 <= 0")) is None


def test_joinability(pnat):
    P, _ = pnat
    assert joinable(P.context(), P.parse("0 <= s 0"), P.parse("s 0 <= s 0")) is Joinability.JOINABLE
    assert joinable(P.context(), P.parse("s 0 <= 0"), P.parse("true")) is Joinability.NOT_JOINABLE


@pytest.mark.parametrize("text", ["A:Bool and B:Bool implies A:Bool", "A:Bool or not A:Bool",
                                  "(A:Bool implies B:Bool) or (B:Bool implies A:Bool)", "not (A:Bool and not A:Bool)"])
def test_tautologies_normalize_to_true(bool_module, text):
    nf, _ = red(bool_module, text)
    assert show(bool_module, nf) == "true"


def test_builtin_equality_and_conditional(bool_module):
    B = bool_module
    nf, st = red(B, "A:Bool = A:Bool")
    assert show(B, nf) == "true" and st.labels == {"builtin-eq": 1}
    nf, st = red(B, "A:Bool = B:Bool")
    assert show(B, nf) == "A:Bool = B:Bool"  # never decided false
    nf, st = red(B, "if true then A:Bool else B:Bool fi")
    assert show(B, nf) == "A:Bool" and st.labels == {"if-true": 1}


def test_trace_reports_each_step(pnat):
    P, _ = pnat
    events = []
    normalize(P.context(), P.parse("0 <= s s 0"), events.append)
    assert [e.label for e in events].count("o2") == 2
    assert all(e.redex is not None and e.contractum is not None for e in events)


def test_lone_variable_lhs_becomes_nonexec():
    diags = []
    S = load("label.cafe").env.flatten("LABEL")
    assert any(e.nonexec for e in S.axioms)
    e = make_equation(S.signature, Var("L", "Label"), S.signature.make("rs"), diagnostics=diags)
    assert e.nonexec and diags


def test_extra_rhs_variable_becomes_nonexec(bool_module):
    sig = bool_module.signature
    diags = []
    e = make_equation(sig, sig.make("true"), Var("X", "Bool"), diagnostics=diags)
    assert e.nonexec and diags


# --------------------------------------------------------------------------
# matching modulo AC against a brute-force oracle

def _all_ac_matches(sig, op, pvars, args):
    """Every way to distribute the subject arguments over the pattern variables (non-empty blocks)."""
    out = set()
    n = len(pvars)
    for assign in itertools.product(range(n), repeat=len(args)):
        blocks = [[a for a, k in zip(args, assign) if k == j] for j in range(n)]
        if any(not b for b in blocks):
            continue
        th = []
        for v, b in zip(pvars, blocks):
            th.append((v, b[0] if len(b) == 1 else sig.make(op, b)))
        out.add(tuple(sorted(th, key=lambda kv: kv[0].name)))
    return out


def test_ac_matching_agrees_with_brute_force(bool_module):
    sig = bool_module.signature
    rng = random.Random(7)
    atoms = [Var(n, "Bool") for n in "PQRST"] + [sig.make("true"), sig.make("false")]
    for _ in range(200):
        k = rng.randint(2, 5)
        args = [rng.choice(atoms[:5] + atoms[:5]) for _ in range(k)]
        subject = sig.make("_and_", args)
        if subject.op != "_and_":
            continue
        m = rng.randint(1, min(3, len(subject.args)))
        pvars = [Var(f"X{j}", "Bool") for j in range(m)]
        pattern = sig.make("_and_", pvars) if m > 1 else pvars[0]
        got = {tuple(sorted(th.items(), key=lambda kv: kv[0].name)) for th in match_modulo(sig, pattern, subject)}
        if m == 1:
            assert got == {((pvars[0], subject),)}
            continue
        want = _all_ac_matches(sig, "_and_", pvars, list(subject.args))
        assert got == want


def test_extension_matching_leaves_the_rest(bool_module):
    sig = bool_module.signature
    P, Q, R = (Var(n, "Bool") for n in "PQR")
    pattern = sig.make("_and_", [P, sig.make("true")])
    subject = sig.make("_and_", [Q, R, sig.make("true")])
    results = list(match_with_extension(sig, pattern, subject))
    assert results
    assert any(leftover for _th, leftover in results)


def test_context_without_rules_is_identity(bool_module):
    ctx = RewriteContext(bool_module.signature, ())
    t = bool_module.parse("A:Bool and B:Bool")
    nf, st = normalize(ctx, t)
    assert nf is t and st.steps == 0
