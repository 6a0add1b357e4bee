"""Mixfix term parsing against a signature, and the matching printer.

Parsing is a memoized chart over token spans.  Every span yields the set of
well-sorted terms it can denote together with their effective precedence
(0 for atoms, parenthesized and prefix forms).  An argument occupying an
edge hole of a mixfix pattern must have precedence at most the operator's;
when two different terms survive for the whole input the parse is
ambiguous and rejected.
"""

from __future__ import annotations

from typing import Mapping, Optional

from .errors import AmbiguousParse, IllSorted, ParseError, UnresolvedToken
from .kernel import EQ_PREC, HOLE, App, Signature, Term, Var, pattern_parts
from .parser import TermText, parse_term_tokens


class _Grammar:
    def __init__(self, sig: Signature):
        self.sig = sig
        self.mixfix = []  # (name, parts, n, prec)
        self.prefix_names = set()
        self.constants = set()
        self.keywords = set()
        for (name, n), fam in sig.families.items():
            d = fam[0]
            parts = pattern_parts(name)
            holes = sum(1 for p in parts if p is HOLE)
            if n == 0:
                self.constants.add(name)
            if holes and holes == n:
                self.mixfix.append((name, parts, n, d.precedence))
                self.keywords.update(p for p in parts if p is not HOLE)
            self.prefix_names.add(name)
        self.mixfix.sort(key=lambda m: m[0])


def _grammar(sig: Signature) -> _Grammar:
    g = getattr(sig, "_grammar", None)
    if g is None:
        g = _Grammar(sig)
        sig._grammar = g
    return g


class _Chart:
    def __init__(self, sig, toks, variables, line, col):
        self.sig = sig
        self.g = _grammar(sig)
        self.toks = toks
        self.vars = variables
        self.line, self.col = line, col
        self.memo = {}
        depth = [0]
        for w in toks:
            depth.append(depth[-1] + (1 if w == "(" else -1 if w == ")" else 0))
        self.depth = depth
        self.sort_errors = []

    def balanced(self, i, j):
        d = self.depth
        base = d[i]
        if d[j] != base:
            return False
        return min(d[i:j + 1]) >= base

    def cell(self, i, j) -> dict:
        key = (i, j)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        self.memo[key] = {}
        out = {} if not self.balanced(i, j) else self._compute(i, j)
        self.memo[key] = out
        return out

    def _add(self, out, term, prec):
        old = out.get(term)
        if old is None or prec < old:
            out[term] = prec

    def _make(self, name, args):
        try:
            return self.sig.make(name, args)
        except IllSorted as e:
            self.sort_errors.append(str(e))
            return None

    def _compute(self, i, j):
        toks, sig, out = self.toks, self.sig, {}
        if j - i == 1:
            w = toks[i]
            if w in self.g.constants:
                t = self._make(w, ())
                if t is not None:
                    self._add(out, t, 0)
            v = self._var(w)
            if v is not None:
                self._add(out, v, 0)
            return out
        if toks[i] == "(" and toks[j - 1] == ")" and self.depth[i + 1] == self.depth[j - 1] and \
                min(self.depth[i + 1:j]) >= self.depth[i + 1]:
            for t in self.cell(i + 1, j - 1):
                self._add(out, t, 0)
        if toks[i] in self.g.prefix_names and j - i >= 3 and toks[i + 1] == "(" and toks[j - 1] == ")" \
                and min(self.depth[i + 2:j]) >= self.depth[i + 2] and self.depth[i + 2] == self.depth[j - 1]:
            groups = self._commas(i + 2, j - 1)
            if groups is not None:
                cands = [list(self.cell(a, b)) for a, b in groups]
                if all(cands):
                    for args in _product(cands):
                        t = self._make(toks[i], args)
                        if t is not None:
                            self._add(out, t, 0)
        for name, parts, n, prec in self.g.mixfix:
            first, last = parts[0], parts[-1]
            if first is not HOLE and toks[i] != first:
                continue
            if last is not HOLE and toks[j - 1] != last:
                continue
            for spans in self._split(parts, 0, i, j):
                cands = []
                ok = True
                for k, (a, b) in enumerate(spans):
                    edge = (k == 0 and first is HOLE) or (k == len(spans) - 1 and last is HOLE)
                    c = [t for t, p in self.cell(a, b).items() if not edge or p <= prec]
                    if not c:
                        ok = False
                        break
                    cands.append(c)
                if not ok:
                    continue
                for args in _product(cands):
                    t = self._make(name, args)
                    if t is not None:
                        self._add(out, t, prec)
        return out

    def _commas(self, a, b):
        if a >= b:
            return None
        base = self.depth[a]
        groups, start = [], a
        for k in range(a, b):
            if self.toks[k] == "," and self.depth[k] == base:
                if k == start:
                    return None
                groups.append((start, k))
                start = k + 1
        if start >= b:
            return None
        groups.append((start, b))
        return groups

    def _split(self, parts, k, pos, j):
        """Yield hole spans for matching ``parts[k:]`` against tokens[pos:j]."""
        if k == len(parts):
            if pos == j:
                yield []
            return
        p = parts[k]
        if p is not HOLE:
            if pos < j and self.toks[pos] == p:
                yield from self._split(parts, k + 1, pos + 1, j)
            return
        if k + 1 == len(parts):
            if pos < j:
                yield [(pos, j)]
            return
        nxt = parts[k + 1]
        for e in range(pos + 1, j):
            if nxt is HOLE or (self.toks[e] == nxt and self.depth[e] == self.depth[pos]):
                for rest in self._split(parts, k + 1, e, j):
                    yield [(pos, e)] + rest

    def _var(self, w):
        if w in self.vars:
            return self.vars[w]
        if ":" in w and not w.startswith(":") and not w.endswith(":"):
            name, sort = w.split(":", 1)
            if sort in self.sig.sorts:
                return Var(name, sort)
        return None


def _product(lists):
    if not lists:
        yield ()
        return
    head, rest = lists[0], lists[1:]
    for x in head:
        for tail in _product(rest):
            yield (x, *tail)


def parse_term(sig: Signature, text, variables: Optional[Mapping[str, Var]] = None) -> Term:
    """Resolve ``text`` (a string or TermText) to a canonical term over ``sig``."""
    tt = parse_term_tokens(text) if isinstance(text, str) else text
    toks = list(tt.tokens)
    chart = _Chart(sig, toks, dict(variables or {}), tt.line, tt.col)
    results = chart.cell(0, len(toks))
    if len(results) == 1:
        return next(iter(results))
    src = " ".join(toks)
    if len(results) > 1:
        cands = sorted(format_term(sig, t, explicit=True) for t in results)
        raise AmbiguousParse(src, cands, tt.line, tt.col)
    g = chart.g
    for w in toks:
        if w in "(),":
            continue
        if w not in g.keywords and w not in g.prefix_names and chart._var(w) is None:
            raise UnresolvedToken(f"unknown identifier '{w}' in '{src}'", tt.line, tt.col)
    if chart.sort_errors:
        raise IllSorted(f"no well-sorted parse for '{src}': {chart.sort_errors[-1]}")
    raise ParseError(f"no parse for '{src}'", tt.line, tt.col)


def try_parse_term(sig, text, variables=None) -> Optional[Term]:
    try:
        return parse_term(sig, text, variables)
    except (ParseError, IllSorted):
        return None


# --------------------------------------------------------------------------
# printing

def _prec(sig, t):
    if not isinstance(t, App) or not t.args:
        return 0
    a = sig.attrs(t.op, len(t.args))
    parts = pattern_parts(t.op)
    if a is None or not any(p is HOLE for p in parts):
        return 0
    return a.precedence


def format_term(sig: Signature, t: Term, explicit: bool = False, var_sorts: bool = True) -> str:
    """Render ``t`` so that :func:`parse_term` reads it back (``explicit`` forces full parenthesization)."""
    out = []
    _fmt(sig, t, out, explicit, var_sorts)
    return "".join(out)


def _fmt(sig, t, out, explicit, var_sorts):
    if isinstance(t, Var):
        out.append(f"{t.name}:{t.sort}" if var_sorts else t.name)
        return
    if not t.args:
        out.append(t.op)
        return
    parts = pattern_parts(t.op)
    holes = sum(1 for p in parts if p is HOLE)
    n = len(t.args)
    a = sig.attrs(t.op, n)
    if holes == 2 and n > 2 and a is not None and a.assoc and parts[0] is HOLE and parts[-1] is HOLE:
        infix = [p for p in parts if p is not HOLE]
        for k, arg in enumerate(t.args):
            if k:
                out.append(" " + " ".join(infix) + " ")
            _hole(sig, t, arg, out, "left" if k == 0 else "right" if k == n - 1 else "both", explicit, var_sorts)
        return
    if holes != n or holes == 0:
        out.append(t.op + "(")
        for k, arg in enumerate(t.args):
            if k:
                out.append(",")
            _fmt(sig, arg, out, explicit, var_sorts)
        out.append(")")
        return
    k = 0
    pieces = []
    for idx, p in enumerate(parts):
        if p is HOLE:
            arg = t.args[k]
            k += 1
            side = "left" if idx == 0 else "right" if idx == len(parts) - 1 else None
            buf = []
            if side is None:
                _fmt(sig, arg, buf, explicit, var_sorts)
            else:
                _hole(sig, t, arg, buf, side, explicit, var_sorts)
            pieces.append("".join(buf))
        else:
            pieces.append(p)
    out.append(" ".join(pieces))


def _hole(sig, parent, arg, out, side, explicit, var_sorts):
    cp = _prec(sig, arg)
    pp = _prec(sig, parent)
    need = False
    if explicit:
        need = cp > 0
    elif cp > pp:
        need = True
    elif cp == pp and cp > 0:
        cparts = pattern_parts(arg.op)
        if side in ("right", "both") and cparts[0] is HOLE:
            need = True
        if side in ("left", "both") and cparts[-1] is HOLE:
            need = True
    if need:
        out.append("(")
    _fmt(sig, arg, out, explicit, var_sorts)
    if need:
        out.append(")")


def format_equation_body(sig: Signature, lhs: Term, rhs: Term, var_sorts: bool = True) -> str:
    """``lhs = rhs`` with the sides parenthesized where the equality symbol would capture them."""
    sides = []
    for t in (lhs, rhs):
        text = format_term(sig, t, var_sorts=var_sorts)
        if _prec(sig, t) >= EQ_PREC:
            text = f"({text})"
        sides.append(text)
    return f"{sides[0]} = {sides[1]}"


def format_result(sig: Signature, t: Term) -> str:
    return f"Result: {format_term(sig, t)} : {t.sort}"
