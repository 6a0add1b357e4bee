"""Matching modulo comm/AC attributes, conditional rewriting and normalization.

Strategy: leftmost-innermost, rules tried in declaration order.  The
polymorphic ``_=_`` reduces to ``true`` on identical normal forms and is
otherwise left for user equations; ``if_then_else_fi`` evaluates its
condition first and leaves both branches untouched while it is unresolved.
"""

from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterator, Mapping, Optional

from .errors import ConditionDepthExceeded, IllFormedEquation
from .kernel import (DEEP, EQ_OP, IF_OP, App, Signature, Term, Var,
                     apply_substitution, canonicalize, deep_call, term_key)

log = logging.getLogger(__name__)

DEFAULT_MAX_STEPS = 100_000
DEFAULT_COND_DEPTH = 32
BUILTIN_EQ_LABEL = "builtin-eq"


@dataclass(frozen=True)
class Equation:
    lhs: Term
    rhs: Term
    condition: tuple = ()
    label: Optional[str] = None
    nonexec: bool = False

    @property
    def key(self):
        return (self.lhs, self.rhs, self.condition, self.nonexec)

    @property
    def vars(self) -> frozenset:
        acc = set(self.lhs.vars) | set(self.rhs.vars)
        for a, b in self.condition:
            acc |= a.vars | b.vars
        return frozenset(acc)

    @property
    def ground(self) -> bool:
        return not self.vars


def make_equation(sig: Signature, lhs: Term, rhs: Term, condition=(), label=None, nonexec=False,
                  diagnostics: Optional[list] = None) -> Equation:
    """Canonicalize both sides and check well-formedness.

    Equations that cannot be oriented into rules (a lone-variable lhs, or
    rhs/condition variables missing from the lhs) are kept as nonexec.
    """
    lhs, rhs = canonicalize(sig, lhs), canonicalize(sig, rhs)
    cond = tuple((canonicalize(sig, a), canonicalize(sig, b)) for a, b in condition)
    poset = sig.poset
    for a, b in ((lhs, rhs), *cond):
        if not poset.same_component(a.sort, b.sort):
            raise IllFormedEquation(
                f"equation{' ' + label if label else ''}: sides have sorts {a.sort} and {b.sort} "
                "in different connected components")
    name = f"[{label}]" if label else "(unlabeled)"
    if not nonexec:
        if isinstance(lhs, Var):
            nonexec = True
            _note(diagnostics, f"equation {name} has a variable as left-hand side; stored as nonexec")
        else:
            extra = (rhs.vars | {v for a, b in cond for v in a.vars | b.vars}) - lhs.vars
            if extra:
                nonexec = True
                names = ", ".join(sorted(v.name for v in extra))
                _note(diagnostics, f"equation {name} has variables {names} not bound by its lhs; stored as nonexec")
    if not nonexec and not isinstance(lhs, Var) and not poset.leq(rhs.sort, lhs.sort):
        _note(diagnostics, f"equation {name}: rhs sort {rhs.sort} is not below lhs sort {lhs.sort}")
    return Equation(lhs, rhs, cond, label, nonexec)


def _note(diagnostics, message):
    log.info(message)
    if diagnostics is not None:
        diagnostics.append(message)


@dataclass
class RewriteStats:
    steps: int = 0
    labels: Counter = field(default_factory=Counter)
    limit_hit: bool = False


class Joinability(enum.Enum):
    JOINABLE = "joinable"
    NOT_JOINABLE = "not joinable"
    INDETERMINATE = "indeterminate"

    def __bool__(self):
        return self is Joinability.JOINABLE


class RewriteContext:
    """A signature plus the executable equations of a module, oriented left to right."""

    def __init__(self, sig: Signature, equations=(), max_steps: int = DEFAULT_MAX_STEPS,
                 max_cond_depth: int = DEFAULT_COND_DEPTH, builtin_eq: bool = True):
        self.signature = sig
        self.rules = tuple(e for e in equations if not e.nonexec and isinstance(e.lhs, App)
                           and e.lhs is not e.rhs)
        self.max_steps = max_steps
        self.max_cond_depth = max_cond_depth
        self.builtin_eq = builtin_eq and sig.has_bool
        index: dict = {}
        for rule in self.rules:
            index.setdefault(rule.lhs.op, []).append(rule)
        self._index = index
        self.true = sig.make("true") if sig.has_op("true", 0) else None
        self.false = sig.make("false") if sig.has_op("false", 0) else None

    def with_limits(self, max_steps=None, max_cond_depth=None) -> "RewriteContext":
        return RewriteContext(self.signature, self.rules,
                              self.max_steps if max_steps is None else max_steps,
                              self.max_cond_depth if max_cond_depth is None else max_cond_depth,
                              self.builtin_eq)

    def extended(self, sig: Signature, equations) -> "RewriteContext":
        base = [Equation(canonicalize(sig, r.lhs), canonicalize(sig, r.rhs),
                         tuple((canonicalize(sig, a), canonicalize(sig, b)) for a, b in r.condition),
                         r.label) for r in self.rules]
        return RewriteContext(sig, base + list(equations), self.max_steps, self.max_cond_depth, self.builtin_eq)

    def rules_for(self, op: str):
        return self._index.get(op, ())


# --------------------------------------------------------------------------
# matching

def match_modulo(ctx_or_sig, pattern: Term, subject: Term, subst: Optional[Mapping] = None) -> Iterator[dict]:
    """Yield every sort-decreasing substitution making ``pattern`` AC-equal to ``subject`` (no duplicates)."""
    sig = ctx_or_sig.signature if isinstance(ctx_or_sig, RewriteContext) else ctx_or_sig
    seen = set()
    for th in _match(sig, pattern, subject, dict(subst or {})):
        key = frozenset(th.items())
        if key not in seen:
            seen.add(key)
            yield th


def match_with_extension(sig: Signature, pattern: Term, subject: Term) -> Iterator[tuple]:
    """Like matching, but at an AC root the pattern may cover a sub-multiset; yields (subst, leftover args)."""
    if (isinstance(pattern, App) and isinstance(subject, App) and pattern.op == subject.op):
        a = sig.attrs(pattern.op, len(pattern.args))
        if a is not None and a.assoc and a.comm:
            yield from _match_ac(sig, pattern.op, pattern.args, subject.args, {}, True)
            return
    for th in _match(sig, pattern, subject, {}):
        yield th, ()


def _match(sig, p, s, th):
    if isinstance(p, Var):
        bound = th.get(p)
        if bound is not None:
            if bound is s:
                yield th
            return
        if sig.poset.leq(s.sort, p.sort):
            th = dict(th)
            th[p] = s
            yield th
        return
    if p.ground:
        if p is s:
            yield th
        return
    if not isinstance(s, App) or s.op != p.op:
        return
    a = sig.attrs(p.op, len(p.args))
    if a is not None and a.assoc and a.comm:
        for th2, _ in _match_ac(sig, p.op, p.args, s.args, th, False):
            yield th2
    elif a is not None and a.assoc:
        yield from _match_assoc(sig, p.op, p.args, s.args, th)
    elif a is not None and a.comm and len(p.args) == 2 and len(s.args) == 2:
        yield from _match_list(sig, p.args, s.args, th)
        if s.args[0] is not s.args[1]:
            yield from _match_list(sig, p.args, (s.args[1], s.args[0]), th)
    elif len(p.args) == len(s.args):
        yield from _match_list(sig, p.args, s.args, th)


def _match_list(sig, ps, ss, th):
    if not ps:
        yield th
        return
    for th2 in _match(sig, ps[0], ss[0], th):
        yield from _match_list(sig, ps[1:], ss[1:], th2)


def _nest_args(op, t):
    if isinstance(t, App) and t.op == op and len(t.args) >= 2:
        return t.args
    return (t,)


def _build(sig, op, items):
    if len(items) == 1:
        return items[0]
    return sig.make(op, sorted(items, key=term_key))


def _match_ac(sig, op, pargs, sargs, th, extension):
    rest = Counter(sargs)
    nonvar = [p for p in pargs if not isinstance(p, Var)]
    yield from _ac_nonvar(sig, op, nonvar, [p for p in pargs if isinstance(p, Var)], rest, th, extension)


def _ac_nonvar(sig, op, nonvar, varargs, rest, th, extension):
    if not nonvar:
        yield from _ac_vars(sig, op, varargs, rest, th, extension)
        return
    p, others = nonvar[0], nonvar[1:]
    for cand in list(rest):
        if rest[cand] <= 0:
            continue
        for th2 in _match(sig, p, cand, th):
            rest2 = rest.copy()
            rest2[cand] -= 1
            if rest2[cand] == 0:
                del rest2[cand]
            yield from _ac_nonvar(sig, op, others, varargs, rest2, th2, extension)


def _ac_vars(sig, op, varargs, rest, th, extension):
    rest = rest.copy()
    mult = Counter()
    order = []
    for v in varargs:
        bound = th.get(v)
        if bound is not None:
            for piece in _nest_args(op, bound):
                if rest[piece] <= 0:
                    return
                rest[piece] -= 1
                if rest[piece] == 0:
                    del rest[piece]
        else:
            if v not in mult:
                order.append(v)
            mult[v] += 1
    yield from _ac_distribute(sig, op, [(v, mult[v]) for v in order], rest, th, extension)


def _ac_distribute(sig, op, groups, rest, th, extension):
    if not groups:
        leftover = tuple(sorted(rest.elements(), key=term_key))
        if extension or not leftover:
            yield th, leftover
        return
    (v, m), others = groups[0], groups[1:]
    keys = list(rest)
    if not others and not extension:
        if any(rest[k] % m for k in keys) or not keys:
            return
        chunk = [k for k in keys for _ in range(rest[k] // m)]
        val = _build(sig, op, chunk)
        if sig.poset.leq(val.sort, v.sort):
            th2 = dict(th)
            th2[v] = val
            yield th2, ()
        return
    ranges = [range(rest[k] // m + 1) for k in keys]
    for counts in product(*ranges):
        if not any(counts):
            continue
        chunk = [k for k, c in zip(keys, counts) for _ in range(c)]
        val = _build(sig, op, chunk)
        if not sig.poset.leq(val.sort, v.sort):
            continue
        rest2 = rest.copy()
        for k, c in zip(keys, counts):
            if c:
                rest2[k] -= c * m
                if rest2[k] == 0:
                    del rest2[k]
        th2 = dict(th)
        th2[v] = val
        yield from _ac_distribute(sig, op, others, rest2, th2, extension)


def _match_assoc(sig, op, ps, ss, th):
    if not ps:
        if not ss:
            yield th
        return
    p, others = ps[0], ps[1:]
    if isinstance(p, Var) and p not in th:
        for k in range(1, len(ss) - len(others) + 1):
            val = ss[0] if k == 1 else sig.make(op, ss[:k])
            if sig.poset.leq(val.sort, p.sort):
                th2 = dict(th)
                th2[p] = val
                yield from _match_assoc(sig, op, others, ss[k:], th2)
    elif isinstance(p, Var):
        pieces = _nest_args(op, th[p])
        if tuple(ss[:len(pieces)]) == tuple(pieces):
            yield from _match_assoc(sig, op, others, ss[len(pieces):], th)
    elif ss:
        for th2 in _match(sig, p, ss[0], th):
            yield from _match_assoc(sig, op, others, ss[1:], th2)


# --------------------------------------------------------------------------
# normalization

@dataclass(frozen=True)
class StepEvent:
    label: Optional[str]
    path: tuple
    redex: Term
    contractum: Term
    rule: Optional[Equation] = None
    subst: Optional[dict] = None
    leftover: tuple = ()


def _unwind(path) -> tuple:
    """Positions are built as (parent, index) links while descending; flatten one into a tuple."""
    out = []
    while path:
        path, k = path
        out.append(k)
    return tuple(reversed(out))


class _Run:
    def __init__(self, ctx: RewriteContext, trace=None):
        self.ctx = ctx
        self.sig = ctx.signature
        self.trace = trace
        self.reduced = set()  # terms already known to be normal forms, skipped on later visits
        self.stats = RewriteStats()
        self.fired = []

    # -- bookkeeping
    def _step(self, label, path, before, after, rule=None, th=None, leftover=()):
        self.stats.steps += 1
        self.fired.append(label)
        if self.trace is not None:
            self.trace(StepEvent(label, _unwind(path), before, after, rule, th, leftover))

    def _can_step(self):
        if self.stats.steps >= self.ctx.max_steps:
            self.stats.limit_hit = True
            return False
        return True

    def _replay(self, t):
        return t if t in self.reduced else None

    def _remember(self, t, nf, steps0, start):
        if not self.stats.limit_hit:
            self.reduced.add(nf)

    # -- main recursion
    def norm(self, t, depth=0, path=()):
        if isinstance(t, Var):
            return t
        hit = self._replay(t)
        if hit is not None:
            return hit
        steps0, start = self.stats.steps, len(self.fired)
        cur = self._norm_args(t, depth, path)
        if cur is not t:
            hit = self._replay(cur)
            if hit is not None:
                self._remember(t, hit, steps0, start)
                return hit
        while True:
            nxt = self._rewrite_root(cur, depth, path)
            if nxt is None:
                break
            if isinstance(nxt, Var):
                cur = nxt
                break
            hit = self._replay(nxt)
            if hit is not None:
                cur = hit
                break
            cur = self._norm_args(nxt, depth, path)
        self._remember(t, cur, steps0, start)
        return cur

    def _norm_args(self, t, depth, path):
        if not t.args:
            return t
        sig = self.sig
        if t.op == IF_OP and len(t.args) == 3 and sig.has_bool:
            cond = self.norm(t.args[0], depth, (path, 1))
            ctx = self.ctx
            if cond is ctx.true or cond is ctx.false:
                if not self._can_step():
                    return t if cond is t.args[0] else sig.make(IF_OP, (cond, *t.args[1:]))
                before = sig.make(IF_OP, (cond, *t.args[1:]))
                branch = t.args[1] if cond is ctx.true else t.args[2]
                self._step("if-true" if cond is ctx.true else "if-false", path, before, branch)
                return self.norm(branch, depth, path)
            if cond is t.args[0]:
                return t
            return sig.make(IF_OP, (cond, *t.args[1:]))
        new = [self.norm(a, depth, (path, i + 1)) for i, a in enumerate(t.args)]
        if all(x is y for x, y in zip(new, t.args)):
            return t
        return sig.make(t.op, new)

    def _rewrite_root(self, t, depth, path):
        if not isinstance(t, App):
            return None
        sig = self.sig
        for rule in self.ctx.rules_for(t.op):
            for th, leftover in match_with_extension(sig, rule.lhs, t):
                if rule.condition and not self.eval_condition(rule.condition, th, depth, path):
                    continue
                if not self._can_step():
                    return None
                out = apply_substitution(sig, rule.rhs, th)
                if leftover:
                    out = sig.make(t.op, (out, *leftover))
                self._step(rule.label, path, t, out, rule, th, leftover)
                return out
        if (self.ctx.builtin_eq and t.op == EQ_OP and len(t.args) == 2 and t.args[0] is t.args[1]
                and self.ctx.true is not None):
            if not self._can_step():
                return None
            self._step(BUILTIN_EQ_LABEL, path, t, self.ctx.true)
            return self.ctx.true
        return None

    def eval_condition(self, pairs, th, depth=0, path=()):
        if depth + 1 > self.ctx.max_cond_depth:
            raise ConditionDepthExceeded(
                f"condition evaluation nested deeper than {self.ctx.max_cond_depth} levels")
        sig = self.sig
        for a, b in pairs:
            na = self.norm(apply_substitution(sig, a, th), depth + 1, (path, "c"))
            nb = self.norm(apply_substitution(sig, b, th), depth + 1, (path, "c"))
            if na is not nb:
                return False
        return True

    def finish(self):
        self.stats.labels = Counter(l for l in self.fired if l is not None)
        unlabeled = sum(1 for l in self.fired if l is None)
        if unlabeled:
            self.stats.labels[None] = unlabeled
        return self.stats


def normalize(ctx: RewriteContext, term: Term, trace: Optional[Callable] = None) -> tuple:
    """Rewrite ``term`` to normal form; returns (normal form, RewriteStats). Hitting max-steps is not an error."""
    term = canonicalize(ctx.signature, term)
    run = _Run(ctx, trace)
    if term.depth > DEEP:
        nf = deep_call(run.norm, term)
    else:
        nf = run.norm(term)
    return nf, run.finish()


def eval_condition(ctx: RewriteContext, pairs, subst: Mapping) -> bool:
    run = _Run(ctx)
    return run.eval_condition(tuple(pairs), dict(subst))


def rewrite_step(ctx: RewriteContext, term: Term) -> Optional[tuple]:
    """One leftmost-innermost step; returns (new term, label) or None when ``term`` is in normal form."""
    term = canonicalize(ctx.signature, term)
    run = _Run(ctx)
    if term.depth > DEEP:
        return deep_call(_step_at, run, term, ())
    return _step_at(run, term, ())


def _step_at(run, t, path):
    if isinstance(t, Var) or not isinstance(t, App):
        return None
    sig = run.sig
    ctx = run.ctx
    if t.op == IF_OP and len(t.args) == 3 and sig.has_bool:
        inner = _step_at(run, t.args[0], (path, 1))
        if inner is not None:
            return sig.make(IF_OP, (inner[0], *t.args[1:])), inner[1]
        cond = t.args[0]
        if cond is ctx.true:
            return t.args[1], "if-true"
        if cond is ctx.false:
            return t.args[2], "if-false"
    else:
        for i, a in enumerate(t.args):
            inner = _step_at(run, a, (path, i + 1))
            if inner is not None:
                args = list(t.args)
                args[i] = inner[0]
                return sig.make(t.op, args), inner[1]
    fired = []
    run.trace = lambda ev: fired.append(ev.label)
    try:
        out = run._rewrite_root(t, 0, path)
    finally:
        run.trace = None
    if out is None:
        return None
    return out, fired[-1] if fired else None


def joinable(ctx: RewriteContext, t1: Term, t2: Term) -> Joinability:
    """Decide joinability by comparing normal forms (sound for confluent, terminating systems)."""
    n1, s1 = normalize(ctx, t1)
    n2, s2 = normalize(ctx, t2)
    if n1 is n2:
        return Joinability.JOINABLE
    if s1.limit_hit or s2.limit_hit:
        return Joinability.INDETERMINATE
    return Joinability.NOT_JOINABLE


def builtin_equality(ctx: RewriteContext, t1: Term, t2: Term) -> Term:
    sig = ctx.signature
    nf, _ = normalize(ctx, sig.make(EQ_OP, (canonicalize(sig, t1), canonicalize(sig, t2))))
    return nf
