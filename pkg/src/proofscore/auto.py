"""Bounded depth-first proof search over true/false case splits.

At every open goal the search reduces the targets.  If they are not true,
it tries the default induction-hypothesis instance, then single
lemma and hypothesis instances built from the goal's ground terms.  After
that it picks a split in priority order:

1. atoms of the effective conditions of the transition in the target;
2. conditions of ``if_then_else_fi`` subterms of the residual;
3. other irreducible Bool atoms of the residual.

It recurses on both branches, up to the split bound.  The candidate order
is total, so the reported script is the first one found by a sequential
depth-first walk.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .errors import ProofError, SpecError
from .kernel import BOOL, EQ_OP, IF_OP, App, Term, Var, apply_substitution, subterms, term_compare
from .mixfix import format_equation_body, format_term
from .modalg import recanon
from .proof import (Goal, ProofScript, ProofState, apply_imply_with_hypothesis, apply_split_goal,
                    apply_split_true_false, apply_theorem_of_constants, discharge_by_reduction, equation_text,
                    reduce_targets, start_goal)
from .rewriting import DEFAULT_COND_DEPTH, DEFAULT_MAX_STEPS, Equation, normalize

CONNECTIVES = {"_and_", "_or_", "_xor_", "not_", "_implies_", IF_OP}
FRONTIER_CAP = 25


@dataclass
class FailureTrace:
    """The exhausted frontier of a bounded search."""
    reason: str
    bound: int
    frontier: list = field(default_factory=list)  # (goal id, [case equations], [residuals])
    explored: int = 0
    commands: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"FailureTrace: {self.reason} (bound {self.bound}, {self.explored} goals explored)"]
        for gid, cases, res in self.frontier:
            lines.append(f"  goal {gid} {{{' ; '.join(cases) or 'no case equations'}}}")
            lines.extend(f"    residual: {r}" for r in res)
        lines.append("  note: lemmas are tried one instance at a time")
        return "\n".join(lines) + "\n"


def _is_true(t: Term) -> bool:
    return isinstance(t, App) and t.op == "true" and not t.args


def _is_false(t: Term) -> bool:
    return isinstance(t, App) and t.op == "false" and not t.args


class _Search:
    def __init__(self, bound: int):
        self.bound = bound
        self.frontier = []
        self.explored = 0
        self.toc = {}  # goal id -> {variable: constant}, inherited by descendants

    # -- driver

    def solve(self, state: ProofState, gid: str, depth: int) -> Optional[ProofState]:
        """A state in which the subtree at ``gid`` is closed, or None."""
        self.explored += 1
        goal = state.nodes[gid].goal
        if len(goal.targets) > 1:
            state = apply_split_goal(state, gid)
            return self.solve_children(state, gid, depth)
        if any(e.vars for e in goal.targets):
            before = goal.targets
            state = apply_theorem_of_constants(state, gid)
            self.record_toc(gid, before, state.nodes[gid].goal)
            goal = state.nodes[gid].goal
        res = reduce_targets(state, goal)
        if all(a is b for _e, a, b, _n, _h in res):
            return discharge_by_reduction(state, gid)
        for attempt in self.default_instances(goal):
            done = self.attempt(state, gid, *attempt)
            if done is not None:
                return done
        residuals = [a if _is_true(b) else None for _e, a, b, _n, _h in res]
        stuck_false = any(r is not None and _is_false(r) for r in residuals)
        if stuck_false or depth >= self.bound:
            for label, theta in self.lemma_instances(goal):
                done = self.attempt(state, gid, label, theta, "imp")
                if done is not None:
                    return done
        if depth >= self.bound:
            self.note_frontier(state, goal, res)
            return None
        for lhs, rhs in self.candidates(goal, res):
            try:
                split = apply_split_true_false(state, gid, lhs, rhs)
            except (ProofError, SpecError):
                continue
            done = self.solve_children(split, gid, depth + 1)
            if done is not None:
                return done
        self.note_frontier(state, goal, res)
        return None

    def solve_children(self, state, gid, depth) -> Optional[ProofState]:
        for cid in state.nodes[gid].children:
            if cid not in state.open:
                continue
            self.toc.setdefault(cid, self.toc.get(gid, {}))
            state = self.solve(state, cid, depth)
            if state is None:
                return None
        return state

    def attempt(self, state, gid, label, theta, mode) -> Optional[ProofState]:
        try:
            st = apply_imply_with_hypothesis(state, gid, label, theta, mode)
        except (ProofError, SpecError):
            return None
        st = discharge_by_reduction(st, gid)
        return st if gid not in st.open else None

    def note_frontier(self, state, goal, res):
        if len(self.frontier) >= FRONTIER_CAP:
            return
        sig = goal.module.signature
        cases = [format_equation_body(sig, e.lhs, e.rhs) for e in goal.added]
        shown = [format_term(sig, a) if _is_true(b) else format_equation_body(sig, a, b)
                 for e, a, b, _n, _h in res if a is not b]
        self.frontier.append((goal.id, cases, shown))

    # -- hypothesis instances

    def record_toc(self, gid, before, goal: Goal):
        theta = dict(self.toc.get(gid, {}))
        for old, new in zip(before, goal.targets):
            for x, y in ((old.lhs, new.lhs), (old.rhs, new.rhs)):
                _collect(x, y, theta)
        self.toc[gid] = theta

    def default_instances(self, goal: Goal):
        """The identity instance of each same-labelled hypothesis, added as a rule and then as a premise."""
        labels = {e.label for e in goal.targets}
        byname = {v.name: c for v, c in self.toc.get(goal.id, {}).items()}
        picks = []
        for h in goal.hypotheses:
            if h.label not in labels or h.label is None:
                continue
            theta = {}
            for v in sorted(h.vars, key=lambda v: v.name):
                c = byname.get(v.name)
                if c is None or c.sort != v.sort and not goal.module.signature.poset.leq(c.sort, v.sort):
                    theta = None
                    break
                theta[v] = c
            if theta is not None and (h.label, theta) not in picks:
                picks.append((h.label, theta))
        for label, theta in picks:
            yield label, theta, "init"
        for label, theta in picks:
            yield label, theta, "imp"

    def lemma_instances(self, goal: Goal):
        sig = goal.module.signature
        leq = sig.poset.leq
        ground = []
        for e in list(goal.targets) + list(goal.added):
            for side in (e.lhs, e.rhs):
                for t in subterms(side):
                    if isinstance(t, App) and t.ground and t not in ground and t.sort != BOOL:
                        ground.append(t)
        ground.sort(key=_order_key)
        seen = set()
        hyps = [h for h in goal.hypotheses if h.label]
        for h in hyps:
            vs = sorted(h.vars, key=lambda v: v.name)
            choices = [[t for t in ground if leq(t.sort, v.sort)] for v in vs]
            if not all(choices):
                continue
            for combo in itertools.product(*choices):
                theta = dict(zip(vs, combo))
                key = (h.label, tuple((v.name, t) for v, t in theta.items()))
                if key in seen:
                    continue
                seen.add(key)
                yield h.label, theta

    # -- split candidates

    def candidates(self, goal: Goal, res) -> list:
        mod = goal.module
        sig = mod.signature
        ctx = mod.context()
        out, seen = [], set()
        have = {recanon(sig, e).key[:2] for e in goal.added}
        order = {n: k for k, (n, _) in enumerate(goal.constants)}

        def add(atom):
            nf, _ = normalize(ctx, atom)
            for a in _atoms(nf):
                if a in seen or _is_true(a) or _is_false(a):
                    continue
                seen.add(a)
                lhs, rhs = _orient(a, order)
                if (lhs, rhs if rhs is not None else sig.make("true")) in have:
                    continue
                out.append((lhs, rhs))

        for cond in self.effective_conditions(goal):
            add(cond)
        residual_terms = [a if _is_true(b) else sig.make(EQ_OP, (a, b)) for _e, a, b, _n, _h in res if a is not b]
        for t in residual_terms:
            for s in subterms(t):
                if isinstance(s, App) and s.op == IF_OP:
                    add(s.args[0])
        for t in residual_terms:
            add(t)
        return out

    def effective_conditions(self, goal: Goal) -> list:
        """Conditions of conditional axioms applicable at constructor subterms of the targets."""
        mod = goal.module
        sig = mod.signature
        leq = sig.poset.leq
        ctors = {d.name for d in goal.base.constructors}
        sites = []
        for e in goal.targets:
            for t in subterms(e.lhs):
                if isinstance(t, App) and t.args and t.op in ctors and t.ground and t not in sites:
                    sites.append(t)
        out = []
        for ax in goal.base.axioms:
            if not ax.condition or ax.nonexec:
                continue
            for pat in subterms(ax.lhs):
                if not isinstance(pat, App) or pat.op not in ctors:
                    continue
                for site in sites:
                    theta = _match(pat, site, {}, leq)
                    if theta is None:
                        continue
                    for a, b in ax.condition:
                        if not (a.vars | b.vars) <= set(theta):
                            continue
                        c = apply_substitution(sig, a, theta)
                        if not _is_true(b):
                            c = sig.make(EQ_OP, (c, apply_substitution(sig, b, theta)))
                        if c not in out:
                            out.append(c)
        return out


_order_key = functools.cmp_to_key(term_compare)


def _collect(pat: Term, img: Term, theta: dict):
    if isinstance(pat, Var):
        theta.setdefault(pat, img)
        return
    if isinstance(img, App) and img.op == pat.op and len(img.args) == len(pat.args):
        for x, y in zip(pat.args, img.args):
            _collect(x, y, theta)


def _match(pat: Term, t: Term, theta: dict, leq) -> Optional[dict]:
    if isinstance(pat, Var):
        old = theta.get(pat)
        if old is not None:
            return theta if old is t else None
        if not leq(t.sort, pat.sort):
            return None
        out = dict(theta)
        out[pat] = t
        return out
    if not isinstance(t, App) or t.op != pat.op or len(t.args) != len(pat.args):
        return None
    for x, y in zip(pat.args, t.args):
        theta = _match(x, y, theta, leq)
        if theta is None:
            return None
    return theta


def _atoms(t: Term) -> list:
    """Maximal Bool subterms below the connectives."""
    if not isinstance(t, App):
        return []
    if t.op in CONNECTIVES:
        out = []
        args = t.args[:1] if t.op == IF_OP else t.args
        if t.op == IF_OP:
            out.extend(_atoms(t.args[0]))
            for a in t.args[1:]:
                if a.sort == BOOL:
                    out.extend(_atoms(a))
            return out
        for a in args:
            out.extend(_atoms(a))
        return out
    if t.sort != BOOL or not t.ground:
        return []
    return [t]


def _orient(atom: Term, order: dict):
    """Split data for an atom: equalities rewrite the larger side to the smaller, later constants to earlier."""
    if not (isinstance(atom, App) and atom.op == EQ_OP):
        return atom, None
    a, b = atom.args
    if _is_true(b) or _is_false(b):
        return (a, b) if not _is_true(b) else (a, None)
    if _is_true(a) or _is_false(a):
        return (b, a) if not _is_true(a) else (b, None)

    def rank(x):
        if isinstance(x, App) and not x.args and x.op in order:
            return (x.size, 1, order[x.op])
        return (x.size, 0, 0)
    if rank(a) < rank(b) or (rank(a) == rank(b) and term_compare(a, b) < 0):
        a, b = b, a
    return a, b


def auto_prove(flat, targets: Sequence[Equation], pool: Sequence[Equation] = (), bound: int = 4,
               state: Optional[ProofState] = None, module_name: Optional[str] = None, tag: Optional[str] = None,
               max_steps: int = DEFAULT_MAX_STEPS, cond_depth: int = DEFAULT_COND_DEPTH):
    """Close every open goal of ``state`` (a fresh goal on ``targets`` by default) or report the frontier.

    ``pool`` holds the lemmas that may be used as premises; ``bound`` limits
    the nesting of case splits on every path.
    """
    if bound < 0:
        raise ValueError("the split bound must be non-negative")
    pool = tuple(Equation(e.lhs, e.rhs, e.condition, e.label, True) for e in pool)
    if state is None:
        state = start_goal(flat, targets, pool, max_steps, cond_depth)
    else:
        state = _with_pool(state, pool)
    search = _Search(bound)
    for gid in list(state.open):
        if gid not in state.open:
            continue
        nxt = search.solve(state, gid, 0)
        if nxt is None:
            return FailureTrace("depth-exhausted", bound, search.frontier, search.explored, state.script_lines())
        state = nxt
    root = state.nodes[state.root].goal
    name = module_name or flat.name
    lemmas = tuple(root.hypotheses) + tuple(e for e in pool if e not in root.hypotheses)
    return ProofScript(name, root.targets, state.script_lines(), lemmas, tag,
                       tuple(equation_text(flat, e) for e in root.targets),
                       tuple(equation_text(flat, e) for e in lemmas))


def _with_pool(state: ProofState, pool) -> ProofState:
    """Make the pool lemmas available as hypotheses of every open goal."""
    if not pool:
        return state
    nodes = dict(state.nodes)
    for gid in state.open:
        node = nodes[gid]
        extra = tuple(e for e in pool if e not in node.goal.hypotheses)
        nodes[gid] = replace(node, goal=replace(node.goal, hypotheses=node.goal.hypotheses + extra))
    return replace(state, nodes=nodes)
