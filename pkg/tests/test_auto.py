import pytest

from conftest import CORPUS, load
from proofscore.auto import FailureTrace, auto_prove
from proofscore.proof import ProofScript, apply_command, replay_text, start_goal


def prepared(name):
    s = load(name)
    (oc,) = s.open_envs()
    state = start_goal(oc.module, oc.goals, oc.lemmas)
    for cmd in oc.commands:
        state = apply_command(state, cmd, oc.variables)
    return s, oc, state


def test_pnat_zero_least_needs_two_subgoals():
    s, oc, state = prepared("pnat-auto.cafe")
    script = auto_prove(oc.module, oc.goals, bound=2, state=state, module_name="PNAT")
    assert isinstance(script, ProofScript)
    assert script.commands == [":ind on (X:Nat)", ":apply(rd)", ":init [zero-least] by {}", ":apply(rd)"]
    (replayed,) = replay_text(s.env, script.to_text())
    assert replayed.closed and len(replayed.nodes["1"].children) == 2


def test_qlock_mutual_exclusion_with_queue_lemma():
    s, oc, state = prepared("qlock-auto.cafe")
    script = auto_prove(oc.module, oc.goals, oc.lemmas, bound=4, state=state, module_name="QLOCK")
    assert isinstance(script, ProofScript)
    assert any(c.startswith(":imp [inv2]") for c in script.commands)
    (replayed,) = replay_text(s.env, script.to_text())
    assert replayed.closed


def test_bound_zero_reports_frontier():
    s, oc, state = prepared("qlock-auto.cafe")
    trace = auto_prove(oc.module, oc.goals, oc.lemmas, bound=0, state=state)
    assert isinstance(trace, FailureTrace)
    assert trace.reason == "depth-exhausted" and trace.bound == 0
    assert trace.frontier and trace.frontier[0][2]
    assert trace.to_text().startswith("FailureTrace: depth-exhausted (bound 0")


def test_without_lemma_qlock_fails_within_bound():
    s, oc, state = prepared("qlock-auto.cafe")
    trace = auto_prove(oc.module, oc.goals, (), bound=2, state=state)
    assert isinstance(trace, FailureTrace)


def test_auto_without_induction_on_ground_goal():
    s = load("pnat.cafe")
    s.load_text("open PNAT .\n :goal {eq [g] : 0 <= s s s 0 = true .}\n close", CORPUS)
    (oc,) = s.open_envs()
    script = auto_prove(oc.module, oc.goals, bound=0)
    assert script.commands == [":apply(rd)"]


def test_auto_splits_on_boolean_atom():
    s = load("bool.cafe")
    s.load_text("open BOOL .\n op p : -> Bool .\n :goal {eq [em] : (p or not p) = true .}\n close", CORPUS)
    (oc,) = s.open_envs()
    script = auto_prove(oc.module, oc.goals, bound=1)
    assert isinstance(script, ProofScript)
    script.declarations = ("op p : -> Bool .",)
    (state,) = replay_text(s.env, script.to_text())
    assert state.closed


def test_negative_bound_is_rejected():
    s, oc, state = prepared("pnat-auto.cafe")
    with pytest.raises(ValueError):
        auto_prove(oc.module, oc.goals, bound=-1, state=state)
