"""Goal-tree proof assistant: induction, theorem of constants, case splits, hypotheses, reduction.

A ProofState is immutable; every tactic returns a new state.  Goals are
addressed by their path in the tree ("1", "1-2", "1-2-1", ...) and the
script commands always act on the first open goal in depth-first order, so
a recorded trail replays verbatim.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

from .errors import (IllFormedTarget, LooseSort, NoFreeVariables, NonGroundSplitTerm, ProofError, SortViolation,
                     UnknownGoal, UnknownHypothesis)
from .kernel import BOOL, EQ_OP, App, OpDecl, Term, Var, apply_substitution, subterms
from .mixfix import format_equation_body, format_term
from .modalg import FlatModule, constructors_of, extend_module, recanon
from .rewriting import DEFAULT_COND_DEPTH, DEFAULT_MAX_STEPS, Equation, normalize


# --------------------------------------------------------------------------
# steps

@dataclass(frozen=True)
class Induct:
    vars: tuple  # of Var


@dataclass(frozen=True)
class TheoremOfConstants:
    pass


@dataclass(frozen=True)
class SplitGoal:
    pass


@dataclass(frozen=True)
class SplitTrueFalse:
    lhs: Term
    rhs: Optional[Term] = None  # None means "lhs = true"


@dataclass(frozen=True)
class SplitByConstructors:
    term: Term


@dataclass(frozen=True)
class InitHypothesis:
    label: str
    subst: tuple  # ((Var, Term), ...)


@dataclass(frozen=True)
class ImplyWithHypothesis:
    label: str
    subst: tuple


@dataclass(frozen=True)
class DischargeByReduction:
    pass


# --------------------------------------------------------------------------
# goals

@dataclass(frozen=True)
class Goal:
    id: str
    base: FlatModule = field(compare=False)
    targets: tuple
    hypotheses: tuple = ()
    added: tuple = ()
    constants: tuple = ()  # ((name, sort), ...)
    trail: tuple = ()
    case: tuple = ()  # human-readable branch tags

    @property
    def module(self) -> FlatModule:
        return extend_module(self.base, self.constants, self.added)

    def fresh(self, base_name: str, taken=()) -> str:
        used = {n for n, _ in self.constants} | set(taken)
        k = 1
        while f"{base_name}#{k}" in used or self.base.signature.has_op(f"{base_name}#{k}"):
            k += 1
        return f"{base_name}#{k}"


@dataclass(frozen=True)
class Discharge:
    goal: str
    kind: str  # reduction | vacuous
    transcript: tuple  # ((lhs text, rhs text, nf text, steps), ...)


@dataclass(frozen=True)
class Node:
    goal: Goal
    status: str = "open"  # open | split | discharged
    children: tuple = ()
    residual: tuple = ()  # printed normal forms of remaining targets
    note: str = ""


@dataclass(frozen=True)
class ProofState:
    base: FlatModule = field(compare=False)
    root: str
    nodes: Mapping  # id -> Node
    open: tuple
    log: tuple = ()
    trail: tuple = ()  # ((goal id, step, command text), ...)
    max_steps: int = DEFAULT_MAX_STEPS
    cond_depth: int = DEFAULT_COND_DEPTH

    @property
    def closed(self) -> bool:
        return not self.open

    def goal(self, gid: Optional[str] = None) -> Goal:
        if gid is None:
            if not self.open:
                raise UnknownGoal("no open goals")
            gid = self.open[0]
        node = self.nodes.get(gid)
        if node is None:
            raise UnknownGoal(f"no goal {gid}")
        if node.status != "open":
            raise UnknownGoal(f"goal {gid} is not open ({node.status})")
        return node.goal

    def script_lines(self) -> list:
        return [text for _, _, text in self.trail]

    def discharged(self) -> list:
        return [d.goal for d in self.log]

    def report_lines(self) -> list:
        lines = []
        for d in self.log:
            tag = "vacuous (true = false derivable)" if d.kind == "vacuous" else "by reduction"
            lines.append(f"goal {d.goal} discharged {tag}")
        for gid in self.open:
            node = self.nodes[gid]
            lines.append(f"goal {gid} open")
            for r in node.residual:
                lines.append(f"  residual: {r}")
            if node.note:
                lines.append(f"  note: {node.note}")
        lines.append("all goals discharged" if self.closed else f"{len(self.open)} goal(s) open")
        return lines


def _ctx(state: ProofState, mod: FlatModule):
    return mod.context(state.max_steps, state.cond_depth)


def _true(mod: FlatModule) -> Term:
    return mod.signature.make("true")


def _false(mod: FlatModule) -> Term:
    return mod.signature.make("false")


def _show(mod: FlatModule, t: Term) -> str:
    return format_term(mod.signature, t)


def start_goal(flat: FlatModule, targets: Sequence[Equation], lemmas: Sequence[Equation] = (),
               max_steps: int = DEFAULT_MAX_STEPS, cond_depth: int = DEFAULT_COND_DEPTH) -> ProofState:
    sig = flat.signature
    checked = []
    for k, t in enumerate(targets, 1):
        if t.condition:
            raise IllFormedTarget("conditional targets are not supported; state them as implications")
        if not sig.poset.same_component(t.lhs.sort, t.rhs.sort):
            raise IllFormedTarget(f"target relates sorts {t.lhs.sort} and {t.rhs.sort} in different components")
        label = t.label or f"goal{k}"
        checked.append(Equation(t.lhs, t.rhs, (), label, False))
    hyps = tuple(Equation(e.lhs, e.rhs, e.condition, e.label, True) for e in lemmas)
    g = Goal("1", flat, tuple(checked), hyps)
    if not checked:
        node = Node(g, "discharged")
        return ProofState(flat, "1", {"1": node}, (), (Discharge("1", "reduction", ()),), (),
                          max_steps, cond_depth)
    return ProofState(flat, "1", {"1": Node(g)}, ("1",), (), (), max_steps, cond_depth)


def _replace_goal(state: ProofState, goal: Goal, step, text: str, **node_kw) -> ProofState:
    nodes = dict(state.nodes)
    nodes[goal.id] = Node(goal, **node_kw) if node_kw else Node(goal)
    return replace(state, nodes=nodes, trail=state.trail + ((goal.id, step, text),))


def _branch(state: ProofState, parent: Goal, children: list, step, text: str) -> ProofState:
    nodes = dict(state.nodes)
    nodes[parent.id] = Node(parent, "split", tuple(c.id for c in children))
    log = list(state.log)
    opened = []
    for c in children:
        if _vacuous(state, c):
            nodes[c.id] = Node(c, "discharged", note="vacuous")
            log.append(Discharge(c.id, "vacuous", ()))
        else:
            nodes[c.id] = Node(c)
            opened.append(c.id)
    rest = tuple(g for g in state.open if g != parent.id)
    return replace(state, nodes=nodes, open=tuple(opened) + rest, log=tuple(log),
                   trail=state.trail + ((parent.id, step, text),))


def _vacuous(state: ProofState, goal: Goal) -> bool:
    """True when the goal module derives true = false through its case equations."""
    mod = goal.module
    sig = mod.signature
    if not sig.has_op("true", 0) or not goal.added:
        return False
    ctx = _ctx(state, mod)
    t, f = _true(mod), _false(mod)
    nt, _ = normalize(ctx, t)
    nf, _ = normalize(ctx, f)
    if nt is nf:
        return True
    for e in goal.added:
        e = recanon(sig, e)
        a, _ = normalize(ctx, e.lhs)
        b, _ = normalize(ctx, e.rhs)
        if {a, b} == {nt, nf}:
            return True
        if sig.poset.same_component(e.lhs.sort, e.rhs.sort):
            q, _ = normalize(ctx, sig.make(EQ_OP, (a, b)))
            if q is nf:
                return True
    return False


# --------------------------------------------------------------------------
# tactics

def _target_vars(goal: Goal) -> list:
    seen = []
    for e in goal.targets:
        for t in (e.lhs, e.rhs):
            for s in subterms(t):
                if isinstance(s, Var) and s not in seen:
                    seen.append(s)
    return seen


def _resolve_var(goal: Goal, v) -> Var:
    if isinstance(v, Var):
        return v
    name, _, sort = str(v).partition(":")
    for x in _target_vars(goal):
        if x.name == name and (not sort or x.sort == sort):
            return x
    raise ProofError(f"goal {goal.id} has no variable {v}")


def _ind_fresh_base(var: Var, sort: str, leq) -> str:
    return var.name.lower() if leq(sort, var.sort) and leq(var.sort, sort) else sort[0].lower()


def apply_induction(state: ProofState, gid: Optional[str] = None, vars: Sequence = ()) -> ProofState:
    goal = state.goal(gid)
    vs = [_resolve_var(goal, v) for v in vars]
    if not vs:
        raise ProofError("induction needs at least one variable")
    text = ":ind on (" + " ".join(f"{v.name}:{v.sort}" for v in vs) + ")"
    step = Induct(tuple(vs))
    leaves = [goal]
    children_of = {}
    for v in vs:
        new_leaves = []
        for g in leaves:
            kids = _induct_one(g, v)
            children_of[g.id] = kids
            new_leaves.extend(kids)
        leaves = new_leaves
    # intermediate nodes (multi-variable induction) are recorded as split nodes
    nodes = dict(state.nodes)
    for pid, kids in children_of.items():
        if pid != goal.id:
            nodes[pid] = Node(next(k for k in _all(children_of) if k.id == pid), "split", tuple(k.id for k in kids))
    state = replace(state, nodes=nodes)
    return _branch_leaves(state, goal, children_of, leaves, step, text)


def _all(children_of):
    for kids in children_of.values():
        yield from kids


def _branch_leaves(state, parent, children_of, leaves, step, text):
    nodes = dict(state.nodes)
    nodes[parent.id] = Node(parent, "split", tuple(k.id for k in children_of[parent.id]))
    opened = []
    log = list(state.log)
    for c in leaves:
        if _vacuous(state, c):
            nodes[c.id] = Node(c, "discharged", note="vacuous")
            log.append(Discharge(c.id, "vacuous", ()))
        else:
            nodes[c.id] = Node(c)
            opened.append(c.id)
    rest = tuple(g for g in state.open if g != parent.id)
    return replace(state, nodes=nodes, open=tuple(opened) + rest, log=tuple(log),
                   trail=state.trail + ((parent.id, step, text),))


def _induct_one(goal: Goal, v: Var) -> list:
    flat = goal.base
    cons = constructors_of(flat, v.sort)
    if not cons:
        raise LooseSort(f"sort {v.sort} has no constructors; induction on {v.name} refused")
    leq = flat.signature.poset.leq
    kids = []
    for k, d in enumerate(cons, 1):
        consts, names = [], []
        for s in d.arity:
            name = goal.fresh(_ind_fresh_base(v, s, leq), names)
            names.append(name)
            consts.append((name, s))
        mod = extend_module(flat, goal.constants + tuple(consts), goal.added)
        sig = mod.signature
        args = [sig.make(n) for n, _ in consts]
        image = sig.make(d.name, args)
        theta = {v: image}
        targets = tuple(_subst_eq(mod, e, theta) for e in goal.targets)
        ihs = []
        for a in args:
            if leq(a.sort, v.sort):
                for e in goal.targets:
                    ih = _subst_eq(mod, e, {v: a})
                    ihs.append(Equation(ih.lhs, ih.rhs, (), e.label, True))
        kids.append(Goal(f"{goal.id}-{k}", flat, targets, goal.hypotheses + tuple(ihs), goal.added,
                         goal.constants + tuple(consts), goal.trail + (f"ind {v.name}={d.name}",),
                         goal.case + (d.name,)))
    return kids


def _subst_eq(mod: FlatModule, e: Equation, theta) -> Equation:
    sig = mod.signature
    e = recanon(sig, e)
    return Equation(apply_substitution(sig, e.lhs, theta), apply_substitution(sig, e.rhs, theta),
                    tuple((apply_substitution(sig, a, theta), apply_substitution(sig, b, theta))
                          for a, b in e.condition), e.label, e.nonexec)


def apply_theorem_of_constants(state: ProofState, gid: Optional[str] = None) -> ProofState:
    goal = state.goal(gid)
    vs = _target_vars(goal)
    if not vs:
        raise NoFreeVariables(f"goal {goal.id} has no free variables")
    consts, names = [], []
    for v in vs:
        name = goal.fresh(v.name.lower(), names)
        names.append(name)
        consts.append((name, v.sort))
    mod = extend_module(goal.base, goal.constants + tuple(consts), goal.added)
    theta = {v: mod.signature.make(n) for v, (n, _) in zip(vs, consts)}
    targets = tuple(_subst_eq(mod, e, theta) for e in goal.targets)
    new = replace(goal, targets=targets, constants=goal.constants + tuple(consts),
                  trail=goal.trail + ("tc",))
    return _replace_goal(state, new, TheoremOfConstants(), ":apply(tc)")


def apply_split_goal(state: ProofState, gid: Optional[str] = None) -> ProofState:
    goal = state.goal(gid)
    if len(goal.targets) < 2:
        raise ProofError(f"goal {goal.id} has a single target")
    kids = [replace(goal, id=f"{goal.id}-{k}", targets=(t,), trail=goal.trail + (f"sg {t.label}",),
                    case=goal.case + (t.label,))
            for k, t in enumerate(goal.targets, 1)]
    return _branch(state, goal, kids, SplitGoal(), ":apply(sg)")


def case_equations(mod: FlatModule, lhs: Term, rhs: Optional[Term]):
    """The two case equations of a true/false split on ``lhs = rhs`` (rhs None or true: Bool split)."""
    sig = mod.signature
    t, f = _true(mod), _false(mod)
    if rhs is None or rhs is t:
        if not sig.poset.same_component(lhs.sort, BOOL):
            raise ProofError("a true/false split needs a Bool term")
        return Equation(lhs, t), Equation(lhs, f)
    if not sig.poset.same_component(lhs.sort, rhs.sort):
        raise ProofError("sides of the case equation are in different components")
    return Equation(lhs, rhs), Equation(sig.make(EQ_OP, (lhs, rhs)), f)


def _ctf_text(mod, lhs, rhs):
    body = format_equation_body(mod.signature, lhs, rhs if rhs is not None else _true(mod))
    return f":ctf {{eq {body} .}}"


def apply_split_true_false(state: ProofState, gid: Optional[str] = None, t: Term = None,
                           rhs: Optional[Term] = None) -> ProofState:
    goal = state.goal(gid)
    mod = goal.module
    sig = mod.signature
    t = recanon(sig, Equation(t, t)).lhs
    if rhs is not None:
        rhs = recanon(sig, Equation(rhs, rhs)).lhs
    if not t.ground or (rhs is not None and not rhs.ground):
        raise NonGroundSplitTerm("case-split terms must be ground over the goal module")
    pos, neg = case_equations(mod, t, rhs)
    text = _ctf_text(mod, t, rhs)
    kids = [replace(goal, id=f"{goal.id}-1", added=goal.added + (pos,), trail=goal.trail + (text,),
                    case=goal.case + (format_equation_body(sig, pos.lhs, pos.rhs),)),
            replace(goal, id=f"{goal.id}-2", added=goal.added + (neg,), trail=goal.trail + (text,),
                    case=goal.case + (format_equation_body(sig, neg.lhs, neg.rhs),))]
    return _branch(state, goal, kids, SplitTrueFalse(t, rhs), text)


def apply_split_constructors(state: ProofState, gid: Optional[str] = None, t: Term = None) -> ProofState:
    goal = state.goal(gid)
    mod = goal.module
    sig = mod.signature
    t = recanon(sig, Equation(t, t)).lhs
    if not t.ground:
        raise NonGroundSplitTerm("constructor-split terms must be ground over the goal module")
    cons = constructors_of(goal.base, t.sort)
    if not cons:
        raise LooseSort(f"sort {t.sort} has no constructors")
    kids, shown = [], []
    for k, d in enumerate(cons, 1):
        consts, names = [], []
        for s in d.arity:
            name = goal.fresh(s[0].lower(), names)
            names.append(name)
            consts.append((name, s))
        cmod = extend_module(goal.base, goal.constants + tuple(consts), goal.added)
        csig = cmod.signature
        rhs = csig.make(d.name, [csig.make(n) for n, _ in consts])
        eq = Equation(recanon(csig, Equation(t, t)).lhs, rhs)
        txt = format_equation_body(csig, eq.lhs, rhs)
        shown.append(f"{{eq {txt} .}}")
        kids.append((consts, eq, txt))
    text = ":csp " + " ".join(shown)
    goals = [replace(goal, id=f"{goal.id}-{k}", constants=goal.constants + tuple(consts),
                     added=goal.added + (eq,), trail=goal.trail + (text,), case=goal.case + (txt,))
             for k, (consts, eq, txt) in enumerate(kids, 1)]
    return _branch(state, goal, goals, SplitByConstructors(t), text)


def find_hypothesis(goal: Goal, label: str, subst: Mapping) -> Equation:
    """The hypothesis (or base axiom) with ``label`` that ``subst`` grounds."""
    cands = [h for h in goal.hypotheses if h.label == label]
    cands += [e for e in goal.base.axioms if e.label == label and e not in cands]
    if not cands:
        raise UnknownHypothesis(f"no hypothesis labelled {label} in goal {goal.id}")
    names = {(v.name, v.sort) for v in subst}
    for h in cands:
        hv = {(v.name, v.sort) for v in h.vars}
        if hv <= names:
            return h
    for h in cands:
        if {v.name for v in h.vars} <= {v.name for v in subst}:
            return h
    raise ProofError(f"substitution does not ground hypothesis {label}")


def _instance(goal: Goal, label: str, subst: Mapping):
    h = find_hypothesis(goal, label, subst)
    mod = goal.module
    sig = mod.signature
    byname = {v.name: v for v in h.vars}
    theta = {}
    for v, t in subst.items():
        hv = byname.get(v.name)
        if hv is None:
            continue
        t = recanon(sig, Equation(t, t)).lhs
        if not sig.poset.leq(t.sort, hv.sort):
            raise SortViolation(f"cannot bind {hv.name}:{hv.sort} to a term of sort {t.sort}")
        theta[hv] = t
    inst = _subst_eq(mod, h, theta)
    if not (inst.lhs.ground and inst.rhs.ground):
        raise ProofError(f"instance of {label} is not ground")
    return inst, theta


def _subst_text(mod, theta) -> str:
    return " ; ".join(f"{v.name}:{v.sort} <- {_show(mod, t)}" for v, t in sorted(theta.items(), key=lambda kv: kv[0].name))


def apply_imply_with_hypothesis(state: ProofState, gid: Optional[str] = None, label: str = "",
                                subst: Optional[Mapping] = None, mode: str = "imp") -> ProofState:
    goal = state.goal(gid)
    subst = dict(subst or {})
    inst, theta = _instance(goal, label, subst)
    mod = goal.module
    sig = mod.signature
    pairs = tuple(sorted(theta.items(), key=lambda kv: kv[0].name))
    text = f":{'init' if mode == 'init' else 'imp'} [{label}] by {{{_subst_text(mod, theta)}}}"
    if mode == "init":
        eq = Equation(inst.lhs, inst.rhs, (), label)
        new = replace(goal, added=goal.added + (eq,), trail=goal.trail + (text,))
        return _replace_goal(state, new, InitHypothesis(label, pairs), text)
    t = _true(mod)
    premise = inst.lhs if inst.rhs is t else sig.make(EQ_OP, (inst.lhs, inst.rhs))
    targets = []
    for e in goal.targets:
        e = recanon(sig, e)
        concl = e.lhs if e.rhs is t else sig.make(EQ_OP, (e.lhs, e.rhs))
        targets.append(Equation(sig.make("_implies_", (premise, concl)), t, (), e.label))
    new = replace(goal, targets=tuple(targets), trail=goal.trail + (text,))
    return _replace_goal(state, new, ImplyWithHypothesis(label, pairs), text)


def reduce_targets(state: ProofState, goal: Goal) -> list:
    """(target, lhs nf, rhs nf, steps, limit hit) for each target, in the goal module."""
    mod = goal.module
    ctx = _ctx(state, mod)
    out = []
    for e in goal.targets:
        e = recanon(mod.signature, e)
        a, s1 = normalize(ctx, e.lhs)
        b, s2 = normalize(ctx, e.rhs)
        out.append((e, a, b, s1.steps + s2.steps, s1.limit_hit or s2.limit_hit))
    return out


def discharge_by_reduction(state: ProofState, gid: Optional[str] = None) -> ProofState:
    goal = state.goal(gid)
    mod = goal.module
    results = reduce_targets(state, goal)
    remaining, evidence, residual = [], [], []
    limit = False
    for e, a, b, steps, hit in results:
        if a is b:
            evidence.append((_show(mod, e.lhs), _show(mod, e.rhs), _show(mod, a), steps))
        else:
            remaining.append(e)
            limit |= hit
            shown = _show(mod, a) if b is _true(mod) else f"{_show(mod, a)} = {_show(mod, b)}"
            residual.append(shown)
    text = ":apply(rd)"
    if not remaining:
        new = replace(goal, trail=goal.trail + ("rd",))
        nodes = dict(state.nodes)
        nodes[goal.id] = Node(new, "discharged")
        return replace(state, nodes=nodes, open=tuple(g for g in state.open if g != goal.id),
                       log=state.log + (Discharge(goal.id, "reduction", tuple(evidence)),),
                       trail=state.trail + ((goal.id, DischargeByReduction(), text),))
    new = replace(goal, targets=tuple(remaining), trail=goal.trail + ("rd",))
    note = "indeterminate: step limit reached" if limit else ""
    return _replace_goal(state, new, DischargeByReduction(), text, residual=tuple(residual), note=note)


def apply_step(state: ProofState, step, gid: Optional[str] = None) -> ProofState:
    if isinstance(step, Induct):
        return apply_induction(state, gid, step.vars)
    if isinstance(step, TheoremOfConstants):
        return apply_theorem_of_constants(state, gid)
    if isinstance(step, SplitGoal):
        return apply_split_goal(state, gid)
    if isinstance(step, SplitTrueFalse):
        return apply_split_true_false(state, gid, step.lhs, step.rhs)
    if isinstance(step, SplitByConstructors):
        return apply_split_constructors(state, gid, step.term)
    if isinstance(step, InitHypothesis):
        return apply_imply_with_hypothesis(state, gid, step.label, dict(step.subst), "init")
    if isinstance(step, ImplyWithHypothesis):
        return apply_imply_with_hypothesis(state, gid, step.label, dict(step.subst), "imp")
    if isinstance(step, DischargeByReduction):
        return discharge_by_reduction(state, gid)
    raise TypeError(step)


# --------------------------------------------------------------------------
# scripts

@dataclass
class ProofScript:
    module: str
    targets: tuple  # Equation
    commands: list  # command texts
    lemmas: tuple = ()
    tag: Optional[str] = None
    target_texts: tuple = ()
    lemma_texts: tuple = ()
    requires: tuple = ()  # files to load before the block
    declarations: tuple = ()  # op declarations of the block, as text

    def to_text(self) -> str:
        lines = [f"in {p}" for p in self.requires]
        if lines:
            lines.append("")
        lines.append(f"open {self.module} .")
        if self.tag:
            lines.append(f"  :id({self.tag})")
        lines.extend("  " + d for d in self.declarations)
        lines.append("  :goal {" + " ".join(self.target_texts) + "}")
        if self.lemma_texts:
            lines.append("  :lemma {" + " ".join(self.lemma_texts) + "}")
        lines.extend("  " + c for c in self.commands)
        lines.append("close")
        return "\n".join(lines) + "\n"


def equation_text(mod: FlatModule, e: Equation) -> str:
    sig = mod.signature
    label = f"[{e.label}] : " if e.label else ""
    body = format_equation_body(sig, e.lhs, e.rhs)
    if e.condition:
        conds = " and ".join(format_term(sig, a) if b is _true(mod) else f"{format_term(sig, a)} = {format_term(sig, b)}"
                             for a, b in e.condition)
        return f"ceq {label}{body} if {conds} ."
    return f"eq {label}{body} ."


def script_from_state(state: ProofState, module_name: str, tag: Optional[str] = None) -> ProofScript:
    root = state.nodes[state.root].goal
    mod = root.base
    return ProofScript(module_name, root.targets, state.script_lines(), root.hypotheses, tag,
                       tuple(equation_text(mod, e) for e in root.targets),
                       tuple(equation_text(mod, e) for e in root.hypotheses))


def _parse_in_goal(goal: Goal, text, variables=None) -> Term:
    mod = goal.module
    return mod.parse(text, variables)


def apply_command(state: ProofState, cmd, variables=None) -> ProofState:
    """Apply one parsed script command to the first open goal."""
    from .modalg import build_equation
    from .parser import ApplyCmd, CspCmd, CtfCmd, HypCmd, IndCmd
    goal = state.goal()
    if isinstance(cmd, IndCmd):
        return apply_induction(state, None, cmd.vars)
    if isinstance(cmd, ApplyCmd):
        if cmd.tactic == "tc":
            return apply_theorem_of_constants(state)
        if cmd.tactic == "sg":
            return apply_split_goal(state)
        return discharge_by_reduction(state)
    mod = goal.module
    vs = dict(variables or {})
    if isinstance(cmd, CtfCmd):
        e = build_equation(mod.signature, vs, cmd.equation)
        rhs = None if e.rhs is _true(mod) else e.rhs
        return apply_split_true_false(state, None, e.lhs, rhs)
    if isinstance(cmd, CspCmd):
        if not cmd.equations:
            raise ProofError(":csp needs at least one equation")
        from .mixfix import parse_term
        from .parser import equation_splits
        lhs_text = equation_splits(cmd.equations[0].body)[0][0]
        t = parse_term(mod.signature, lhs_text, vs)
        new = apply_split_constructors(state, None, t)
        if len(new.nodes[goal.id].children) != len(cmd.equations):
            raise ProofError(f":csp lists {len(cmd.equations)} cases but {_show(mod, t)} has "
                             f"{len(new.nodes[goal.id].children)} constructors")
        return new
    if isinstance(cmd, HypCmd):
        subst = {}
        for vtext, ttext in cmd.subst:
            name, _, sort = vtext.partition(":")
            term = _parse_in_goal(goal, ttext, vs)
            subst[Var(name, sort or term.sort)] = term
        return apply_imply_with_hypothesis(state, None, cmd.label, subst, "init" if cmd.keyword == ":init" else "imp")
    raise ProofError(f"unsupported command {cmd}")


def replay_env(oc, max_steps: int = DEFAULT_MAX_STEPS, cond_depth: int = DEFAULT_COND_DEPTH) -> ProofState:
    """Replay the proof commands of an open block that declares :goal targets."""
    state = start_goal(oc.module, oc.goals, oc.lemmas, max_steps, cond_depth)
    for cmd in oc.commands:
        if state.closed:
            raise ProofError("script continues after all goals are discharged")
        state = apply_command(state, cmd, oc.variables)
    return state


def replay_text(env, text: str, max_steps: int = DEFAULT_MAX_STEPS, cond_depth: int = DEFAULT_COND_DEPTH) -> list:
    from .parser import OpenAst, parse_program
    from .session import elaborate_open
    out = []
    for item in parse_program(text).items:
        if isinstance(item, OpenAst):
            out.append(replay_env(elaborate_open(env, item), max_steps, cond_depth))
    return out
