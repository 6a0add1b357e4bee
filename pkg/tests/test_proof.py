import pytest

from conftest import CORPUS, load
from proofscore.errors import IllFormedTarget, LooseSort, NoFreeVariables, NonGroundSplitTerm, SortViolation
from proofscore.kernel import Var
from proofscore.proof import (apply_command, apply_imply_with_hypothesis, apply_induction,
                              apply_split_constructors, apply_split_goal, apply_split_true_false,
                              apply_theorem_of_constants, discharge_by_reduction, replay_env, start_goal)

INV = """
open QLOCK .
  :goal {eq [inv1] : inv1(S:Sys,I:Pid,J:Pid) = true .
         eq [inv2] : inv2(S:Sys,I:Pid) = true .}
close
"""


def block(files, text):
    s = load(*files)
    s.load_text(text, CORPUS)
    return s.open_envs()[-1]


def start(oc, **kw):
    return start_goal(oc.module, oc.goals, oc.lemmas, **kw)


@pytest.fixture(scope="module")
def inv():
    return block(["qlock.cafe"], INV)


def child_ids(state, gid):
    return list(state.nodes[gid].children)


def test_start_goal_has_one_open_goal(inv):
    st = start(inv)
    assert st.open == ("1",) and not st.closed


def test_empty_target_list_is_closed(inv):
    st = start_goal(inv.base_module, ())
    assert st.closed


def test_target_across_components_is_rejected():
    oc = block(["qlock.cafe"], "open QLOCK .\n op s : -> Sys .\n ops i j : -> Pid .\n close")
    mod = oc.module
    from proofscore.rewriting import Equation
    eq = Equation(mod.parse("inv1(s,i,j)"), mod.parse("rs"))
    with pytest.raises(IllFormedTarget):
        start_goal(mod, (eq,))


def test_induction_on_sys_gives_one_subgoal_per_constructor(inv):
    st = apply_induction(start(inv), None, [Var("S", "Sys")])
    assert child_ids(st, "1") == ["1-1", "1-2", "1-3", "1-4"]
    want = st.nodes["1-2"].goal
    assert {n for n, _ in want.constants} == {"s#1", "p#1"}
    # the induction hypotheses are the targets at s#1, kept non-executable
    assert {h.label for h in want.hypotheses} == {"inv1", "inv2"}
    assert all(h.nonexec for h in want.hypotheses)


def test_induction_on_nat_base_and_step():
    oc = block(["pnat.cafe"], "open PNAT .\n :goal {eq [zl] : 0 <= X:Nat = true .}\n close")
    st = apply_induction(start(oc), None, [Var("X", "Nat")])
    assert child_ids(st, "1") == ["1-1", "1-2"]
    assert len(st.nodes["1-1"].goal.hypotheses) == 0
    assert len(st.nodes["1-2"].goal.hypotheses) == 1


def test_induction_on_loose_sort_is_rejected():
    oc = block(["bool.cafe"], "open BOOL .\n :goal {eq [t] : (B:Bool or not B) = true .}\n close")
    with pytest.raises(LooseSort):
        apply_induction(start(oc), None, [Var("B", "Bool")])


def test_theorem_of_constants_introduces_fresh_constants(inv):
    st = apply_induction(start(inv), None, [Var("S", "Sys")])
    st = apply_split_goal(st)
    st = apply_theorem_of_constants(st)
    g = st.goal()
    assert g.id == "1-1-1"
    assert {n for n, _ in g.constants} == {"i#1", "j#1"}
    assert all(e.lhs.ground for e in g.targets)


def test_theorem_of_constants_needs_variables():
    oc = block(["pnat.cafe"], "open PNAT .\n :goal {eq [g] : 0 <= s 0 = true .}\n close")
    with pytest.raises(NoFreeVariables):
        apply_theorem_of_constants(start(oc))


def want_goal(inv):
    st = apply_induction(start(inv), None, [Var("S", "Sys")])
    st = apply_split_goal(st)
    st = discharge_by_reduction(apply_theorem_of_constants(st))  # init, inv1
    st = discharge_by_reduction(apply_theorem_of_constants(st))  # init, inv2
    st = apply_split_goal(st)
    return apply_theorem_of_constants(st)


def test_case_split_on_equality(inv):
    st = want_goal(inv)
    mod = st.goal().module
    st2 = apply_split_true_false(st, None, mod.parse("i#1"), mod.parse("p#1"))
    gid = st.open[0]
    pos, neg = (st2.nodes[k].goal for k in child_ids(st2, gid))
    assert pos.case[-1] == "i#1 = p#1"
    assert neg.case[-1] == "(i#1 = p#1) = false"
    assert st2.trail[-1][2] == ":ctf {eq i#1 = p#1 .}"


def test_split_on_true_leaves_vacuous_branch(inv):
    st = want_goal(inv)
    mod = st.goal().module
    st2 = apply_split_true_false(st, None, mod.parse("true"))
    gid = st.open[0]
    kids = child_ids(st2, gid)
    assert kids[1] not in st2.open
    assert any(d.goal == kids[1] and d.kind == "vacuous" for d in st2.log)


def test_case_split_requires_ground_terms(inv):
    st = want_goal(inv)
    mod = st.goal().module
    with pytest.raises(NonGroundSplitTerm):
        apply_split_true_false(st, None, mod.parse("I:Pid = i#1"))


def test_constructor_split_on_label(inv):
    st = want_goal(inv)
    mod = st.goal().module
    st2 = apply_split_constructors(st, None, mod.parse("pc(s#1,p#1)"))
    kids = [st2.nodes[k].goal for k in child_ids(st2, st.open[0])]
    assert [g.case[-1] for g in kids] == ["pc(s#1,p#1) = rs", "pc(s#1,p#1) = ws", "pc(s#1,p#1) = cs"]


def test_constructor_split_on_queue(inv):
    st = want_goal(inv)
    mod = st.goal().module
    st2 = apply_split_constructors(st, None, mod.parse("queue(s#1)"))
    kids = [st2.nodes[k].goal for k in child_ids(st2, st.open[0])]
    assert len(kids) == 2
    assert kids[0].case[-1] == "queue(s#1) = empty"
    assert {n for n, _ in kids[1].constants} - {n for n, _ in kids[0].constants} == {"p#2", "q#1"}


def test_constructor_split_on_nat():
    oc = block(["pnat.cafe"], "open PNAT .\n op n : -> Nat .\n :goal {eq [g] : 0 <= n = true .}\n close")
    st = start(oc)
    st = apply_split_constructors(st, None, st.goal().module.parse("n"))
    assert [st.nodes[k].goal.case[-1] for k in child_ids(st, "1")] == ["n = 0", "n = s n#1"]


def test_hypothesis_instance_must_respect_sorts(inv):
    st = want_goal(inv)
    mod = st.goal().module
    with pytest.raises(SortViolation):
        apply_imply_with_hypothesis(st, None, "inv1", {Var("I", "Pid"): mod.parse("rs"),
                                                      Var("J", "Pid"): mod.parse("j#1")})


def test_implication_with_hypothesis_rewrites_target(inv):
    st = want_goal(inv)
    mod = st.goal().module
    st2 = apply_imply_with_hypothesis(st, None, "inv1", {Var("I", "Pid"): mod.parse("i#1"),
                                                        Var("J", "Pid"): mod.parse("j#1")})
    g = st2.goal()
    assert g.targets[0].lhs.op == "_implies_"
    assert st2.trail[-1][2] == ":imp [inv1] by {I:Pid <- i#1 ; J:Pid <- j#1}"


def test_reduction_discharges_omega_equation():
    oc = block(["pnat.cafe"], "open OMEGA .\n :goal {eq [fix] : omega = s omega .}\n close")
    st = discharge_by_reduction(start(oc))
    assert st.closed
    assert st.log[0].kind == "reduction"


def test_reduction_reports_residual_and_step_limit(inv):
    st = want_goal(inv)
    st2 = discharge_by_reduction(st)
    node = st2.nodes[st.open[0]]
    assert node.status == "open" and node.residual
    tight = start(inv, max_steps=1)
    tight = apply_theorem_of_constants(apply_split_goal(apply_induction(tight, None, [Var("S", "Sys")])))
    tight = discharge_by_reduction(tight)
    assert tight.nodes[tight.open[0]].note == "indeterminate: step limit reached"


def test_corpus_script_closes_and_replays_deterministically():
    oc = block(["pnat-ind.cafe"], "")
    s = load("pnat-ind.cafe")
    (oc,) = s.open_envs()
    a, b = replay_env(oc), replay_env(oc)
    assert a.closed and b.closed
    assert a.script_lines() == b.script_lines()
    assert a.report_lines() == b.report_lines()
    assert a.script_lines() == [":ind on (X:Nat)", ":apply(rd)", ":init [zero-least] by {}",
                                ":apply(rd)"]


def test_commands_act_on_first_open_goal(inv):
    st = apply_induction(start(inv), None, [Var("S", "Sys")])
    from proofscore.parser import ApplyCmd
    st = apply_command(st, ApplyCmd("sg"))
    assert st.open[0] == "1-1-1"
