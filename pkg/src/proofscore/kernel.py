"""Order-sorted signatures, terms, substitutions and canonical forms modulo AC.

Terms are hash-consed: structurally identical terms (same operator name,
same argument objects, same least sort) are the same Python object, so
syntactic equality is ``is`` and terms can key dictionaries cheaply.
"""

from __future__ import annotations

import functools
import sys
import threading
from dataclasses import dataclass
from itertools import combinations, product
from typing import Iterable, Mapping, Optional

from .errors import (ArityMismatch, CyclicSubsorts, IllSorted, NonRegular,
                     SortViolation, SpecError, SymbolClash, UnknownSort)

BOOL = "Bool"
EQ_OP = "_=_"
IF_OP = "if_then_else_fi"
HOLE = None  # placeholder slot inside a mixfix pattern

EQ_PREC = 51


# --------------------------------------------------------------------------
# deep recursion support

DEEP = 400
_deep_state = threading.local()


def deep_call(fn, *args, **kwargs):
    """Run ``fn`` on a thread with a large stack so deeply nested terms can be traversed recursively."""
    if getattr(_deep_state, "active", False):
        return fn(*args, **kwargs)
    box = {}

    def target():
        _deep_state.active = True
        try:
            box["value"] = fn(*args, **kwargs)
        except BaseException as exc:  # re-raised on the calling thread
            box["error"] = exc

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 400_000))
    old_size = threading.stack_size()
    threading.stack_size(1024 * 1024 * 1024)
    try:
        worker = threading.Thread(target=target)
        worker.start()
        worker.join()
    finally:
        threading.stack_size(old_size)
    if "error" in box:
        raise box["error"]
    return box["value"]


# --------------------------------------------------------------------------
# sorts

class SortPoset:
    """A finite set of sorts with the reflexive-transitive closure of the declared subsort edges."""

    def __init__(self, sorts: Iterable[str] = (), pairs: Iterable[tuple[str, str]] = ()):
        self.sorts = frozenset(sorts)
        self.pairs = frozenset(pairs)
        for lo, hi in self.pairs:
            for s in (lo, hi):
                if s not in self.sorts:
                    raise UnknownSort(f"unknown sort {s} in subsort declaration {lo} < {hi}")
        direct = {s: set() for s in self.sorts}
        for lo, hi in self.pairs:
            if lo != hi:
                direct[lo].add(hi)
        self._direct = direct
        self._find_cycle()
        up = {}
        for s in sorted(self.sorts):
            seen = {s}
            stack = [s]
            while stack:
                cur = stack.pop()
                for nxt in direct[cur]:
                    if nxt not in seen:
                        seen.add(nxt)
                        stack.append(nxt)
            up[s] = frozenset(seen)
        self._up = up
        parent = {s: s for s in self.sorts}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for lo, hi in self.pairs:
            a, b = find(lo), find(hi)
            if a != b:
                parent[max(a, b)] = min(a, b)
        self._comp = {s: find(s) for s in self.sorts}

    def _find_cycle(self):
        color = {s: 0 for s in self.sorts}
        path = []

        def visit(s):
            color[s] = 1
            path.append(s)
            for nxt in sorted(self._direct[s]):
                if color[nxt] == 1:
                    raise CyclicSubsorts(path[path.index(nxt):] + [nxt])
                if color[nxt] == 0:
                    visit(nxt)
            path.pop()
            color[s] = 2

        for s in sorted(self.sorts):
            if color[s] == 0:
                visit(s)

    def check(self, s: str) -> None:
        if s not in self.sorts:
            raise UnknownSort(f"unknown sort {s}")

    def leq(self, a: str, b: str) -> bool:
        return a == b or b in self._up.get(a, ())

    def supersorts(self, s: str) -> frozenset:
        return self._up[s]

    def component(self, s: str) -> str:
        return self._comp[s]

    def same_component(self, a: str, b: str) -> bool:
        return self._comp.get(a) is not None and self._comp.get(a) == self._comp.get(b)

    def components(self) -> list[frozenset]:
        groups = {}
        for s, c in self._comp.items():
            groups.setdefault(c, set()).add(s)
        return [frozenset(g) for _, g in sorted(groups.items())]

    def upper_bounds(self, a: str, b: str) -> list[str]:
        """Minimal common supersorts of ``a`` and ``b``."""
        common = self._up[a] & self._up[b]
        return sorted(s for s in common if not any(t != s and self.leq(t, s) for t in common))

    def lower_bounds(self, a: str, b: str) -> list[str]:
        """Maximal common subsorts of ``a`` and ``b``."""
        common = [s for s in self.sorts if self.leq(s, a) and self.leq(s, b)]
        return sorted(s for s in common if not any(t != s and self.leq(s, t) for t in common))

    def maximal(self, s: str) -> list[str]:
        tops = [t for t in self._up[s] if self._up[t] == {t}]
        return sorted(tops)


def subsort_leq(sig: "Signature", s1: str, s2: str) -> bool:
    sig.poset.check(s1)
    sig.poset.check(s2)
    return sig.poset.leq(s1, s2)


# --------------------------------------------------------------------------
# operators

def pattern_parts(name: str) -> tuple:
    """Split a mixfix name into keywords and HOLE slots, e.g. ``_+_`` -> (HOLE, '+', HOLE)."""
    if "_" not in name:
        return (name,)
    pieces = name.split("_")
    parts = []
    for i, piece in enumerate(pieces):
        if piece:
            parts.append(piece)
        if i < len(pieces) - 1:
            parts.append(HOLE)
    return tuple(parts)


@dataclass(frozen=True)
class OpDecl:
    name: str
    arity: tuple
    coarity: str
    constr: bool = False
    comm: bool = False
    assoc: bool = False
    identity: Optional[str] = None
    prec: Optional[int] = None
    builtin: bool = False

    def __post_init__(self):
        if self.is_mixfix:
            holes = sum(1 for p in self.parts if p is HOLE)
            if holes != len(self.arity):
                raise ArityMismatch(
                    f"operator {self.name} has {holes} placeholders but {len(self.arity)} argument sorts")

    @property
    def parts(self) -> tuple:
        return pattern_parts(self.name)

    @property
    def is_mixfix(self) -> bool:
        return "_" in self.name

    @property
    def precedence(self) -> int:
        if self.prec is not None:
            return self.prec
        if not self.is_mixfix:
            return 0
        parts = self.parts
        if parts[0] is not HOLE and parts[-1] is HOLE and len(self.arity) == 1:
            return 15
        if parts[0] is HOLE or parts[-1] is HOLE:
            return 41
        return 0

    def same_attrs(self, other: "OpDecl") -> bool:
        return (self.comm, self.assoc, self.identity) == (other.comm, other.assoc, other.identity)

    def describe(self) -> str:
        attrs = [a for a, on in (("constr", self.constr), ("assoc", self.assoc), ("comm", self.comm)) if on]
        if self.identity:
            attrs.append(f"id: {self.identity}")
        if self.prec is not None:
            attrs.append(f"prec: {self.prec}")
        tail = " {" + " ".join(attrs) + "}" if attrs else ""
        arity = " ".join(self.arity) + " " if self.arity else ""
        return f"op {self.name} : {arity}-> {self.coarity}{tail}"


EQ_DECL = OpDecl(EQ_OP, ("*", "*"), BOOL, comm=True, prec=EQ_PREC, builtin=True)
IF_DECL = OpDecl(IF_OP, (BOOL, "*", "*"), "*", builtin=True)


# --------------------------------------------------------------------------
# terms

class Term:
    __slots__ = ()

    def __lt__(self, other):
        return term_compare(self, other) < 0


class Var(Term):
    __slots__ = ("name", "sort")
    _table: dict = {}

    def __new__(cls, name: str, sort: str):
        key = (name, sort)
        hit = cls._table.get(key)
        if hit is not None:
            return hit
        self = object.__new__(cls)
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "sort", sort)
        cls._table[key] = self
        return self

    def __setattr__(self, key, value):
        raise AttributeError("terms are immutable")

    depth = 0
    size = 1
    ground = False

    @property
    def vars(self) -> frozenset:
        return frozenset((self,))

    def __repr__(self):
        return f"{self.name}:{self.sort}"


class App(Term):
    __slots__ = ("op", "args", "sort", "depth", "size", "ground", "_vars")
    _table: dict = {}

    def __new__(cls, op: str, args: tuple, sort: str):
        key = (op, args, sort)
        hit = cls._table.get(key)
        if hit is not None:
            return hit
        self = object.__new__(cls)
        sa = object.__setattr__
        sa(self, "op", op)
        sa(self, "args", args)
        sa(self, "sort", sort)
        sa(self, "depth", 1 + max((a.depth for a in args), default=0))
        sa(self, "size", 1 + sum(a.size for a in args))
        sa(self, "ground", all(a.ground for a in args))
        sa(self, "_vars", frozenset() if self.ground else None)
        cls._table[key] = self
        return self

    def __setattr__(self, key, value):
        raise AttributeError("terms are immutable")

    @property
    def vars(self) -> frozenset:
        if self._vars is None:
            acc = set()
            stack = [self]
            while stack:
                t = stack.pop()
                if isinstance(t, Var):
                    acc.add(t)
                elif not t.ground:
                    stack.extend(t.args)
            object.__setattr__(self, "_vars", frozenset(acc))
        return self._vars

    def __repr__(self):
        if not self.args:
            return self.op
        return f"{self.op}({', '.join(map(repr, self.args))})"


def term_compare(a: Term, b: Term) -> int:
    """Total order: variables (by name, sort) first; applications by size, name, arity, then arguments."""
    if a is b:
        return 0
    if isinstance(a, Var):
        if isinstance(b, Var):
            ka, kb = (a.name, a.sort), (b.name, b.sort)
            return -1 if ka < kb else 1
        return -1
    if isinstance(b, Var):
        return 1
    if a.size != b.size:
        return -1 if a.size < b.size else 1
    if a.op != b.op:
        return -1 if a.op < b.op else 1
    if len(a.args) != len(b.args):
        return -1 if len(a.args) < len(b.args) else 1
    for x, y in zip(a.args, b.args):
        c = term_compare(x, y)
        if c:
            return c
    if a.sort != b.sort:
        return -1 if a.sort < b.sort else 1
    return 0


term_key = functools.cmp_to_key(term_compare)


def subterms(t: Term):
    """Pre-order traversal, leftmost first."""
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, App):
            stack.extend(reversed(cur.args))


# --------------------------------------------------------------------------
# signatures

class Signature:
    """Sort poset plus operator declarations grouped into overloading families by (name, argument count)."""

    def __init__(self, poset: SortPoset, ops: Iterable[OpDecl] = ()):
        self.poset = poset
        families: dict = {}
        ordered = []
        for d in ops:
            if d.builtin or (d.name == EQ_OP and d.coarity == BOOL and len(d.arity) == 2
                             and BOOL in poset.sorts):
                continue  # the polymorphic equality predicate subsumes user declarations of _=_
            for s in (*d.arity, d.coarity):
                poset.check(s)
            fam = families.setdefault((d.name, len(d.arity)), [])
            if d not in fam:
                fam.append(d)
                ordered.append(d)
        self.ops = tuple(ordered)
        self.has_bool = BOOL in poset.sorts
        if self.has_bool:
            families[(EQ_OP, 2)] = [EQ_DECL]
            families[(IF_OP, 3)] = [IF_DECL]
        self.families = families
        self._attrs = {}
        for key, fam in families.items():
            first = fam[0]
            for other in fam[1:]:
                if not first.same_attrs(other):
                    raise SymbolClash(f"overloaded declarations of {key[0]} disagree on equational attributes")
            self._attrs[key] = first
            if first.assoc:
                for d in fam:
                    if len(d.arity) != 2 or not (poset.same_component(d.arity[0], d.coarity)
                                                 and poset.same_component(d.arity[1], d.coarity)):
                        raise SpecError(f"assoc operator {d.name} must be binary within one connected component")
        self._check_regular()
        self._ls_cache: dict = {}
        self._canon: dict = {}

    # -- lookup
    @property
    def sorts(self) -> frozenset:
        return self.poset.sorts

    def family(self, name: str, n: int) -> list:
        fam = self.families.get((name, n))
        if fam is None and n > 2:
            fam = self.families.get((name, 2))
            if fam is not None and not fam[0].assoc:
                fam = None
        return fam or []

    def attrs(self, name: str, n: int) -> Optional[OpDecl]:
        a = self._attrs.get((name, n))
        if a is None and n > 2:
            a = self._attrs.get((name, 2))
            if a is not None and not a.assoc:
                a = None
        return a

    def has_op(self, name: str, n: Optional[int] = None) -> bool:
        if n is None:
            return any(k[0] == name for k in self.families)
        return bool(self.family(name, n))

    def constants(self) -> list:
        return [d for d in self.ops if not d.arity]

    def is_constructor(self, t: Term) -> bool:
        if not isinstance(t, App):
            return False
        return any(d.constr for d in self.family(t.op, len(t.args)))

    # -- regularity
    def _check_regular(self):
        leq = self.poset.leq
        for (name, n), fam in self.families.items():
            if len(fam) < 2 or fam[0].builtin:
                continue
            probes = {d.arity for d in fam}
            for d1, d2 in combinations(fam, 2):
                slots = [self.poset.lower_bounds(a, b) for a, b in zip(d1.arity, d2.arity)]
                if all(slots):
                    combos = 1
                    for s in slots:
                        combos *= len(s)
                    if combos <= 256:
                        probes.update(product(*slots))
            for w0 in sorted(probes):
                matching = [d for d in fam if all(leq(a, b) for a, b in zip(w0, d.arity))]
                if not matching:
                    continue
                least = [d for d in matching
                         if all(all(leq(a, b) for a, b in zip(d.arity, o.arity)) and leq(d.coarity, o.coarity)
                                for o in matching)]
                if not least:
                    minimal = [d for d in matching
                               if not any(o is not d and all(leq(a, b) for a, b in zip(o.arity, d.arity))
                                          for o in matching)]
                    pair = (minimal + matching)[:2]
                    raise NonRegular(name, pair[0].describe(), pair[-1].describe())

    # -- least sorts
    def least_sort_app(self, name: str, arg_sorts: tuple) -> str:
        key = (name, arg_sorts)
        hit = self._ls_cache.get(key)
        if hit is not None:
            return hit
        result = self._least_sort_app(name, arg_sorts)
        self._ls_cache[key] = result
        return result

    def _least_sort_app(self, name, arg_sorts):
        n = len(arg_sorts)
        poset = self.poset
        if self.has_bool and name == EQ_OP and n == 2:
            a, b = arg_sorts
            if not poset.same_component(a, b):
                raise IllSorted(f"_=_ applied to sorts {a} and {b} from different connected components")
            return BOOL
        if self.has_bool and name == IF_OP and n == 3:
            c, a, b = arg_sorts
            if not poset.leq(c, BOOL):
                raise IllSorted(f"if_then_else_fi condition has sort {c}, expected Bool")
            if not poset.same_component(a, b):
                raise IllSorted(f"if_then_else_fi branches have unrelated sorts {a} and {b}")
            ubs = poset.upper_bounds(a, b)
            if not ubs:
                raise IllSorted(f"if_then_else_fi branches {a} and {b} have no common supersort")
            return ubs[0]
        fam = self.family(name, n)
        if not fam:
            raise IllSorted(f"no operator {name} with {n} arguments")
        if n > 2 and len(fam[0].arity) == 2:
            acc = arg_sorts[0]
            for s in arg_sorts[1:]:
                acc = self._least_sort_app(name, (acc, s))
            return acc
        orders = [arg_sorts]
        if n == 2 and fam[0].comm:
            orders.append(arg_sorts[::-1])  # the least sort of a comm application ignores argument order
        matching = [d for d in fam if any(all(poset.leq(a, b) for a, b in zip(o, d.arity)) for o in orders)]
        if not matching:
            raise IllSorted(f"{name} cannot take arguments of sorts ({', '.join(arg_sorts)})")
        best = [d for d in matching if all(poset.leq(d.coarity, o.coarity) for o in matching)]
        if not best:
            minimal = sorted({d.coarity for d in matching
                              if not any(poset.leq(o.coarity, d.coarity) and o.coarity != d.coarity
                                         for o in matching)})
            if len(minimal) == 1:
                return minimal[0]
            raise IllSorted(f"{name} has no least sort for arguments ({', '.join(arg_sorts)})")
        return best[0].coarity

    # -- term construction
    def make(self, op: str, args: Iterable[Term] = ()) -> Term:
        """Build an application, canonicalizing its top level (arguments are assumed canonical)."""
        args = tuple(args)
        a = self.attrs(op, len(args))
        if a is not None and (a.assoc or a.comm or a.identity):
            items = list(args)
            if a.assoc:
                flat = []
                for x in items:
                    if isinstance(x, App) and x.op == op and (len(x.args) >= 2) and self.attrs(op, len(x.args)) is a:
                        flat.extend(x.args)
                    else:
                        flat.append(x)
                items = flat
            if a.identity:
                kept = [x for x in items if not (isinstance(x, App) and x.op == a.identity and not x.args)]
                if len(kept) < len(items):
                    if not kept:
                        return self.make(a.identity)
                    if len(kept) == 1:
                        return kept[0]
                    items = kept
            if a.comm:
                items.sort(key=term_key)
            args = tuple(items)
        sort = self.least_sort_app(op, tuple(x.sort for x in args))
        return App(op, args, sort)

    def var(self, name: str, sort: str) -> Var:
        self.poset.check(sort)
        return Var(name, sort)

    def const(self, name: str) -> Term:
        return self.make(name, ())

    def extend(self, sorts=(), pairs=(), ops=()) -> "Signature":
        poset = SortPoset(self.poset.sorts | set(sorts), self.poset.pairs | set(pairs))
        return Signature(poset, list(self.ops) + list(ops))

    def __repr__(self):
        return f"Signature({len(self.sorts)} sorts, {len(self.ops)} ops)"


def build_signature(sorts: Iterable[str], subsorts: Iterable[tuple[str, str]], ops: Iterable[OpDecl]) -> Signature:
    return Signature(SortPoset(sorts, subsorts), ops)


def least_sort(sig: Signature, term: Term) -> str:
    """Recompute the least sort of ``term`` from scratch (ignores the cached sort)."""
    if term.depth > DEEP:
        return deep_call(_least_sort, sig, term)
    return _least_sort(sig, term)


def _least_sort(sig, term):
    if isinstance(term, Var):
        sig.poset.check(term.sort)
        return term.sort
    return sig.least_sort_app(term.op, tuple(_least_sort(sig, a) for a in term.args))


def canonicalize(sig: Signature, term: Term) -> Term:
    """Flatten assoc nests, drop identities and sort comm arguments, bottom-up; rebuilds least sorts in ``sig``."""
    hit = sig._canon.get(term)
    if hit is not None:
        return hit
    if term.depth > DEEP:
        return deep_call(_canonicalize, sig, term)
    return _canonicalize(sig, term)


def _canonicalize(sig, term):
    cache = sig._canon
    hit = cache.get(term)
    if hit is not None:
        return hit
    if isinstance(term, Var):
        out = term
    else:
        out = sig.make(term.op, [_canonicalize(sig, a) for a in term.args])
    cache[term] = out
    cache[out] = out
    return out


ac_canonicalize = canonicalize


def apply_substitution(sig: Signature, term: Term, subst: Mapping[Var, Term]) -> Term:
    """Simultaneous replacement of variables, rebuilding canonical forms and least sorts."""
    for v, val in subst.items():
        if not sig.poset.leq(val.sort, v.sort):
            raise SortViolation(f"cannot bind {v.name}:{v.sort} to a term of sort {val.sort}")
    if not subst or term.ground:
        return term
    if term.depth > DEEP:
        return deep_call(_substitute, sig, term, subst, {})
    return _substitute(sig, term, subst, {})


def _substitute(sig, term, subst, memo):
    if term.ground:
        return term
    if isinstance(term, Var):
        return subst.get(term, term)
    hit = memo.get(term)
    if hit is not None:
        return hit
    out = sig.make(term.op, [_substitute(sig, a, subst, memo) for a in term.args])
    memo[term] = out
    return out


def rename_constants(sig: Signature, term: Term, names: Mapping[str, str]) -> Term:
    """Rename constant symbols (nullary applications) and rebuild in ``sig``."""
    if term.ground is False and isinstance(term, Var):
        return term
    if isinstance(term, Var):
        return term
    if not term.args:
        return sig.make(names.get(term.op, term.op))
    return sig.make(term.op, [rename_constants(sig, a, names) for a in term.args])


def constants_in(term: Term) -> set:
    return {t.op for t in subterms(term) if isinstance(t, App) and not t.args}
