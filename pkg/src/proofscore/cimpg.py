"""Reconstructing a proof script from a set of tagged proof scores.

Every score is one leaf of an implicit case analysis: its fresh constants
stand for the goal's fresh constants and its added equations are the case
equations of the branch.  The reconstruction replays the analysis in the
proof assistant.  It inducts on the variable the scores instantiate with
constructor terms, splits multi-target goals, applies the theorem of
constants, and then walks each goal down the tree.  At every node the
node's case equations are compared with the scores' equations translated
into the goal's constants:

* a score whose translated set equals the node's set discharges it
  (through ``:imp`` first when its reduce term has a premise);
* otherwise the first equation that some consistent score adds beyond the
  node's set becomes the next split.

Nodes that no score covers and scores that reach no node are reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import ProofError, SpecError
from .kernel import BOOL, EQ_OP, App, Term, Var, constants_in, rename_constants
from .mixfix import format_equation_body, format_term
from .modalg import constructors_of, recanon
from .proof import (Goal, ProofScript, ProofState, apply_imply_with_hypothesis, apply_induction,
                    apply_split_constructors, apply_split_goal, apply_split_true_false, apply_theorem_of_constants,
                    discharge_by_reduction, equation_text, start_goal)
from .rewriting import Equation

IMPLIES = "_implies_"
MAX_DEPTH = 64


@dataclass
class MismatchReport:
    """Partial result of a reconstruction that does not cover the score set exactly."""
    tag: Optional[str]
    uncovered: list = field(default_factory=list)  # (goal id, [case equation texts])
    unmatched: list = field(default_factory=list)  # (env line, [equation texts], reason)
    failures: list = field(default_factory=list)  # (goal id, env line, [residual texts])
    problems: list = field(default_factory=list)
    commands: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"MismatchReport for {self.tag or '(untagged)'}"]
        lines.extend(f"  problem: {p}" for p in self.problems)
        for gid, eqs in self.uncovered:
            lines.append(f"  uncovered branch {gid}: {{{' ; '.join(eqs) or 'no case equations'}}}")
        for line, eqs, why in self.unmatched:
            lines.append(f"  unmatched score at line {line} {{{' ; '.join(eqs)}}}: {why}")
        for gid, line, res in self.failures:
            lines.append(f"  score at line {line} does not discharge goal {gid}")
            lines.extend(f"    residual: {r}" for r in res)
        return "\n".join(lines) + "\n"


@dataclass
class _Score:
    env: object
    index: int
    fresh: frozenset
    equations: list  # executable added equations, env signature
    premise: Optional[Term]
    concl: Term
    line: int
    used: bool = False

    def texts(self) -> list:
        sig = self.env.module.signature
        return [format_equation_body(sig, e.lhs, e.rhs) for e in self.equations]


# --------------------------------------------------------------------------
# matching helpers

def _match(pattern: Term, term: Term, theta: dict, leq, comm) -> Optional[dict]:
    """Syntactic matching of ``pattern`` against a ground ``term``; comm ops try both orders."""
    if isinstance(pattern, Var):
        old = theta.get(pattern)
        if old is not None:
            return theta if old is term else None
        if not leq(term.sort, pattern.sort):
            return None
        out = dict(theta)
        out[pattern] = term
        return out
    if not isinstance(term, App) or term.op != pattern.op or len(term.args) != len(pattern.args):
        return None
    orders = [term.args]
    if len(term.args) == 2 and comm(term.op):
        orders.append(term.args[::-1])
    for args in orders:
        th = theta
        for p, a in zip(pattern.args, args):
            th = _match(p, a, th, leq, comm)
            if th is None:
                break
        if th is not None:
            return th
    return None


def _align(g: Term, e: Term, fresh, names: dict, comm) -> Optional[dict]:
    """Extend the env-to-goal constant map ``names`` so that ``e`` renames to ``g``."""
    if isinstance(g, Var) or isinstance(e, Var):
        return names if g is e else None
    if not e.args and e.op in fresh:
        old = names.get(e.op)
        if isinstance(g, App) and not g.args and (old is None or old == g.op):
            if old is None and g.op in names.values():
                return None
            out = dict(names)
            out[e.op] = g.op
            return out
        return None
    if g.op != e.op or len(g.args) != len(e.args):
        return None
    orders = [e.args]
    if len(e.args) == 2 and comm(e.op):
        orders.append(e.args[::-1])
    for args in orders:
        m = names
        for x, y in zip(g.args, args):
            m = _align(x, y, fresh, m, comm)
            if m is None:
                break
        if m is not None:
            return m
    return None


def _pattern(sig, e: Equation) -> Term:
    if isinstance(e.rhs, App) and e.rhs.op == "true" and not e.rhs.args:
        return e.lhs
    return sig.make(EQ_OP, (e.lhs, e.rhs))


class _Reconstruction:
    def __init__(self, flat, targets, lemmas, scores, tag, max_steps, cond_depth):
        self.flat = flat
        self.sig = flat.signature
        self.targets = targets
        self.lemmas = lemmas
        self.scores = scores
        self.tag = tag
        self.max_steps, self.cond_depth = max_steps, cond_depth
        self.report = MismatchReport(tag)
        self.leq = self.sig.poset.leq

    def comm(self, op):
        fam = self.sig.families
        for (name, _n), decls in fam.items():
            if name == op:
                return decls[0].comm
        return False

    # -- plumbing

    def translate(self, goal: Goal, score: _Score, names: dict, t: Term) -> Optional[Term]:
        if not (constants_in(t) & score.fresh) <= set(names):
            return None
        sig = goal.module.signature
        return rename_constants(sig, t, {k: v for k, v in names.items()})

    def eq_key(self, goal: Goal, e: Equation):
        return recanon(goal.module.signature, Equation(e.lhs, e.rhs)).key[:2]

    def translated(self, goal, score, names):
        """(keys of translatable equations, untranslated equations) of a score in goal constants."""
        keys, rest = [], []
        for e in score.equations:
            a = self.translate(goal, score, names, e.lhs)
            b = self.translate(goal, score, names, e.rhs)
            if a is None or b is None:
                rest.append(e)
            else:
                keys.append((self.eq_key(goal, Equation(a, b)), e))
        return keys, rest

    # -- driver

    def run(self):
        state = start_goal(self.flat, self.targets, self.lemmas, self.max_steps, self.cond_depth)
        patterns = [(t, _pattern(self.sig, t)) for t in state.goal().targets]
        induct = self.induction_vars(patterns)
        gids = [state.root]
        if induct:
            state = apply_induction(state, state.root, induct)
            gids = [c for c in _leaves(state, state.root)]
        for gid in gids:
            if gid not in state.open:
                continue
            node_ids = [gid]
            if len(state.nodes[gid].goal.targets) > 1:
                state = apply_split_goal(state, gid)
                node_ids = list(state.nodes[gid].children)
            for nid in node_ids:
                if nid not in state.open:
                    continue
                goal = state.nodes[nid].goal
                if any(e.vars for e in goal.targets):
                    state = apply_theorem_of_constants(state, nid)
                state = self.attach(state, nid)
        for s in self.scores:
            if not s.used:
                self.report.unmatched.append((s.line, s.texts(), "matches no goal of the proof tree"))
        return state

    def induction_vars(self, patterns) -> list:
        """Variables instantiated by constructor-rooted terms in every score that mentions them."""
        votes: dict = {}
        for s in self.scores:
            for _t, p in patterns:
                th = _match(p, s.concl, {}, self.leq, self.comm)
                if th is None:
                    continue
                for v, img in th.items():
                    ctor = isinstance(img, App) and any(d.name == img.op for d in constructors_of(self.flat, v.sort))
                    votes.setdefault(v, []).append(ctor)
                break
        order = []
        for _t, p in patterns:
            for v in _vars_in_order(p):
                if v in votes and all(votes[v]) and v not in order:
                    order.append(v)
        return order

    def attach(self, state: ProofState, gid: str) -> ProofState:
        goal = state.nodes[gid].goal
        target = goal.targets[0]
        pat = _pattern(goal.module.signature, target)
        cands = []
        for s in self.scores:
            names = _align(pat, s.concl, s.fresh, {}, self.comm)
            if names is not None:
                cands.append((s, names))
        return self.build(state, gid, cands, 0)

    def build(self, state: ProofState, gid: str, cands: list, depth: int) -> ProofState:
        goal = state.nodes[gid].goal
        sig = goal.module.signature
        have = {self.eq_key(goal, e) for e in goal.added}
        consistent, exact = [], []
        for s, names in cands:
            keys, rest = self.translated(goal, s, names)
            ks = {k for k, _ in keys}
            if not have <= ks:
                continue
            consistent.append((s, names, keys, rest))
            if not rest and ks == have:
                exact.append((s, names))
        if not consistent:
            self.report.uncovered.append((gid, _case_texts(goal)))
            return state
        if exact:
            s, names = exact[0]
            for other, _ in exact[1:]:
                if not other.used:
                    other.used = True
                    self.report.unmatched.append((other.line, other.texts(), f"duplicates the score for goal {gid}"))
            return self.discharge(state, gid, s, names)
        if depth >= MAX_DEPTH:
            self.report.problems.append(f"case analysis below goal {gid} exceeds {MAX_DEPTH} splits")
            return state
        split = self.choose_split(goal, have, consistent)
        if split is None:
            for s, _names, _k, rest in consistent:
                s.used = True
                self.report.unmatched.append((s.line, s.texts(), f"no usable case equation at goal {gid}"))
            return state
        kind, lhs, rhs = split
        try:
            if kind == "csp":
                state = apply_split_constructors(state, gid, lhs)
            else:
                state = apply_split_true_false(state, gid, lhs, rhs)
        except (ProofError, SpecError) as exc:
            self.report.problems.append(f"split at goal {gid} failed: {exc}")
            return state
        for cid in state.nodes[gid].children:
            if cid not in state.open:
                continue
            child = state.nodes[cid].goal
            new_eq = child.added[-1]
            ncands = []
            for s, names, _k, _r in consistent:
                ncands.append((s, self.extend_names(s, names, new_eq)))
            state = self.build(state, cid, ncands, depth + 1)
        return state

    def extend_names(self, s: _Score, names: dict, new_eq: Equation) -> dict:
        for e in s.equations:
            m = _align(new_eq.lhs, e.lhs, s.fresh, names, self.comm)
            if m is not None:
                m = _align(new_eq.rhs, e.rhs, s.fresh, m, self.comm)
            if m is not None and m != names:
                return m
        return names

    def choose_split(self, goal: Goal, have: set, consistent: list):
        sig = goal.module.signature
        false = sig.make("false")
        for s, names, keys, rest in consistent:
            extra = [e for k, e in keys if k not in have] + list(rest)
            for e in sorted(extra, key=s.equations.index):
                lhs = self.translate(goal, s, names, e.lhs)
                if lhs is None or not lhs.ground:
                    continue
                if self.ctor_with_args(e.rhs) or any(self.ctor_rhs_for(goal, o, on, lhs)
                                                     for o, on, _k, _r in consistent):
                    return ("csp", lhs, None)
                rhs = self.translate(goal, s, names, e.rhs)
                if rhs is None:
                    continue
                if rhs is false and sig.poset.same_component(lhs.sort, BOOL):
                    if isinstance(lhs, App) and lhs.op == EQ_OP:
                        a, b = self.orient(goal, lhs, consistent)
                        return ("ctf", a, b)
                    return ("ctf", lhs, None)
                if isinstance(rhs, App) and rhs.op == "true" and not rhs.args:
                    return ("ctf", lhs, None)
                return ("ctf", lhs, rhs)
        return None

    def ctor_with_args(self, t: Term) -> bool:
        if not isinstance(t, App) or not t.args:
            return False
        return any(d.name == t.op for d in constructors_of(self.flat, t.sort))

    def ctor_rhs_for(self, goal, s, names, lhs) -> bool:
        for e in s.equations:
            if self.ctor_with_args(e.rhs) and self.translate(goal, s, names, e.lhs) is lhs:
                return True
        return False

    def orient(self, goal, eq_term: App, consistent):
        """Orientation of ``a = b`` taken from a score holding the positive case, else as printed."""
        a, b = eq_term.args
        for s, names, _k, _r in consistent:
            for e in s.equations:
                x = self.translate(goal, s, names, e.lhs)
                y = self.translate(goal, s, names, e.rhs)
                if (x, y) in ((a, b), (b, a)):
                    return x, y
        return a, b

    def discharge(self, state: ProofState, gid: str, s: _Score, names: dict) -> ProofState:
        s.used = True
        goal = state.nodes[gid].goal
        if s.premise is not None:
            h = self.translate(goal, s, names, s.premise)
            if h is None:
                self.report.failures.append((gid, s.line, ["premise mentions constants the goal lacks"]))
                return state
            hit = self.hypothesis_for(goal, h)
            if hit is None:
                self.report.failures.append((gid, s.line, [f"no hypothesis matches premise "
                                                           f"{format_term(goal.module.signature, h)}"]))
                return state
            label, theta = hit
            state = apply_imply_with_hypothesis(state, gid, label, theta, "imp")
        state = discharge_by_reduction(state, gid)
        if gid in state.open:
            self.report.failures.append((gid, s.line, list(state.nodes[gid].residual)))
        return state

    def hypothesis_for(self, goal: Goal, h: Term):
        sig = goal.module.signature
        for e in list(goal.hypotheses) + list(goal.base.axioms):
            if not e.label:
                continue
            e = recanon(sig, e)
            th = _match(_pattern(sig, e), h, {}, self.leq, self.comm)
            if th is not None and set(th) >= set(e.vars):
                return e.label, th
        return None


def _case_texts(goal: Goal) -> list:
    sig = goal.module.signature
    return [format_equation_body(sig, e.lhs, e.rhs) for e in goal.added]


def _vars_in_order(t: Term) -> list:
    out = []

    def walk(x):
        if isinstance(x, Var):
            if x not in out:
                out.append(x)
            return
        for a in x.args:
            walk(a)
    walk(t)
    return out


def _leaves(state: ProofState, gid: str) -> list:
    node = state.nodes[gid]
    if node.status != "split":
        return [gid]
    out = []
    for c in node.children:
        out.extend(_leaves(state, c))
    return out


def _score(env, index: int) -> list:
    fresh = frozenset(n for n, _ in env.constants)
    out = []
    for cmd, t, _mod in env.reduce_points:
        premise, concl = None, t
        out.append(_Score(env, index, fresh, list(env.added_equations), premise, concl, env.line))
        if isinstance(t, App) and t.op == IMPLIES and len(t.args) == 2:
            out.append(_Score(env, index, fresh, list(env.added_equations), t.args[0], t.args[1], env.line))
    return out


def reconstruct_script(envs: Sequence, tag: Optional[str] = None, targets: Sequence[Equation] = (),
                       lemmas: Sequence[Equation] = (), max_steps: int = 100000, cond_depth: int = 32):
    """A replayable ProofScript for the envs tagged ``tag``, or a MismatchReport.

    Targets come from the tagged block that declares ``:goal`` unless given.
    """
    tagged = [e for e in envs if tag is None or e.tag == tag]
    decls = [e for e in tagged if e.goals and not e.commands and not e.reduce_points]
    scores_envs = [e for e in tagged if e.reduce_points]
    report = MismatchReport(tag)
    if not tagged:
        report.problems.append(f"no open-close block carries the id {tag}")
        return report
    if not targets:
        if not decls:
            report.problems.append("no block declares the :goal targets")
            report.uncovered.append(("1", []))  # the root goal itself is never stated
            report.unmatched.extend((e.line, [], "no targets to relate it to") for e in scores_envs)
            return report
        targets = decls[0].goals
        lemmas = lemmas or decls[0].lemmas
    head = decls[0] if decls else scores_envs[0]
    flat = head.base_module
    module_name = head.base if isinstance(head.base, str) else None
    if module_name is None:
        from .parser import format_modexpr
        module_name = format_modexpr(head.base)
    scores = []
    for k, env in enumerate(scores_envs):
        if env.base_module is not flat and env.base_module.name != flat.name:
            report.unmatched.append((env.line, [], f"opens {env.base_module.name}, not {flat.name}"))
            continue
        scores.extend(_score(env, k))
    rec = _Reconstruction(flat, tuple(targets), tuple(lemmas), scores, tag, max_steps, cond_depth)
    rec.report.unmatched.extend(report.unmatched)
    state = rec.run()
    _merge_alternatives(rec.report, scores)
    bad = rec.report
    if not state.closed and not (bad.uncovered or bad.failures or bad.problems):
        for gid in state.open:
            bad.uncovered.append((gid, _case_texts(state.nodes[gid].goal)))
    commands = state.script_lines()
    if bad.uncovered or bad.unmatched or bad.failures or bad.problems:
        bad.commands = commands
        return bad
    root = state.nodes[state.root].goal
    return ProofScript(module_name, root.targets, commands, root.hypotheses, tag,
                       tuple(equation_text(flat, e) for e in root.targets),
                       tuple(equation_text(flat, e) for e in root.hypotheses))


def _merge_alternatives(report: MismatchReport, scores: list) -> None:
    """A reduce term has two readings (with and without premise); a score is used if either was."""
    used_envs = {id(s.env) for s in scores if s.used}
    keep = []
    seen_lines = set()
    for line, eqs, why in report.unmatched:
        env_ids = {id(s.env) for s in scores if s.line == line}
        if env_ids and env_ids <= used_envs:
            continue
        if line in seen_lines:
            continue
        seen_lines.add(line)
        keep.append((line, eqs, why))
    report.unmatched = keep
