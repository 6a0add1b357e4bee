"""Module algebra: flattening of module expressions into FlatModules.

Supported operators are imports (all modes merge), union, renaming along a
symbol map, and instantiation of parameterized modules by views, built as a
pushout: the body is translated along the view and merged with the target.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from .errors import (CyclicImport, IllSorted, NotAMorphism, ParameterMismatch, ParseError, SpecError,
                     UnknownModule, UnknownSort)
from .kernel import BOOL, App, OpDecl, Signature, SortPoset, Term, Var, canonicalize
from .mixfix import parse_term
from .parser import (Basic, EqAst, Import, Instantiate, ModuleAst, OpDeclAst, Rename, SortDecl, TermText, Union,
                     VarDecl, ViewAst, equation_splits, format_modexpr)
from .rewriting import DEFAULT_COND_DEPTH, DEFAULT_MAX_STEPS, Equation, RewriteContext, make_equation

log = logging.getLogger(__name__)

# every module sees the truth values, as in the OBJ family, once BOOL has been loaded
IMPLICIT_BOOL = "BOOL"


@dataclass
class FlatModule:
    name: str
    tight: bool
    signature: Signature
    axioms: tuple
    constructors: tuple
    imports: tuple = ()
    variables: dict = field(default_factory=dict)
    own_sorts: frozenset = frozenset()
    own_ops: tuple = ()
    params: tuple = ()
    diagnostics: list = field(default_factory=list)

    def __post_init__(self):
        self._contexts = {}

    @property
    def semantics(self) -> str:
        return "tight" if self.tight else "loose"

    @property
    def sorts(self) -> frozenset:
        return self.signature.sorts

    def context(self, max_steps: int = DEFAULT_MAX_STEPS, max_cond_depth: int = DEFAULT_COND_DEPTH) -> RewriteContext:
        key = (max_steps, max_cond_depth)
        ctx = self._contexts.get(key)
        if ctx is None:
            ctx = RewriteContext(self.signature, self.axioms, max_steps, max_cond_depth)
            self._contexts[key] = ctx
        return ctx

    def parse(self, text, variables: Optional[Mapping] = None) -> Term:
        vs = dict(self.variables)
        vs.update(variables or {})
        return parse_term(self.signature, text, vs)

    def executable(self):
        return tuple(e for e in self.axioms if not e.nonexec)


@dataclass(frozen=True)
class View:
    name: str
    source: FlatModule
    target: FlatModule
    sort_map: Mapping
    op_map: Mapping


def constructors_of(flat: FlatModule, sort: str) -> list:
    """Constructor declarations whose coarity lies below ``sort`` (declaration order)."""
    if sort not in flat.sorts:
        raise UnknownSort(f"unknown sort {sort}")
    leq = flat.signature.poset.leq
    return [d for d in flat.constructors if leq(d.coarity, sort)]


def _op_from_ast(name: str, d: OpDeclAst) -> OpDecl:
    kw = {"constr": False, "assoc": False, "comm": False, "identity": None, "prec": None}
    for a in d.attrs:
        if isinstance(a, tuple):
            kw["prec" if a[0] == "prec" else "identity"] = a[1]
        else:
            kw[a] = True
    return OpDecl(name, tuple(d.arity), d.coarity, **kw)


def recanon(sig: Signature, e: Equation) -> Equation:
    return Equation(canonicalize(sig, e.lhs), canonicalize(sig, e.rhs),
                    tuple((canonicalize(sig, a), canonicalize(sig, b)) for a, b in e.condition), e.label, e.nonexec)


_EXT_CACHE: dict = {}


def extend_module(base: FlatModule, constants=(), equations=(), sorts=(), pairs=(), ops=()) -> FlatModule:
    """Base module plus fresh constants, extra declarations and equations (nonexec ones are kept but inert)."""
    constants, equations = tuple(constants), tuple(equations)
    if not (constants or equations or sorts or pairs or ops):
        return base
    key = (id(base), constants, tuple(e.key + (e.label,) for e in equations), tuple(sorts), tuple(pairs), tuple(ops))
    hit = _EXT_CACHE.get(key)
    if hit is not None and hit[0] is base:
        return hit[1]
    new_ops = [OpDecl(n, (), s) for n, s in constants] + list(ops)
    sig = base.signature.extend(sorts, pairs, new_ops)
    axioms, seen = [], set()
    for e in list(base.axioms) + list(equations):
        e2 = recanon(sig, e)
        if e2.key not in seen:
            seen.add(e2.key)
            axioms.append(e2)
    cons = tuple(dict.fromkeys(list(base.constructors) + [d for d in ops if d.constr]))
    out = FlatModule(base.name, base.tight, sig, tuple(axioms), cons, base.imports, dict(base.variables),
                     base.own_sorts, base.own_ops, base.params, list(base.diagnostics))
    if len(_EXT_CACHE) > 4096:
        _EXT_CACHE.clear()
    _EXT_CACHE[key] = (base, out)
    return out


def merge_parts(parts, sorts=(), pairs=(), ops=()) -> tuple:
    """Union signatures and axioms of flattened parts; returns (signature, axioms, constructors)."""
    all_sorts, all_pairs, all_ops = set(sorts), set(pairs), []
    for p in parts:
        all_sorts |= p.signature.poset.sorts
        all_pairs |= p.signature.poset.pairs
        all_ops.extend(p.signature.ops)
    all_ops.extend(ops)
    sig = Signature(SortPoset(all_sorts, all_pairs), all_ops)
    axioms, seen = [], set()
    for p in parts:
        for e in p.axioms:
            e2 = recanon(sig, e)
            if e2.key not in seen:
                seen.add(e2.key)
                axioms.append(e2)
    cons = []
    for d in sig.ops:
        if d.constr and d not in cons:
            cons.append(d)
    return sig, axioms, tuple(cons)


def build_equation(sig: Signature, variables: Mapping, e: EqAst, diagnostics=None) -> Equation:
    """Resolve an equation AST: try every top-level '=' split and keep the well-sorted ones."""
    scope = dict(variables)
    results, last_err = [], None
    for lhs_t, rhs_t in equation_splits(e.body):
        try:
            lhs = parse_term(sig, lhs_t, scope)
            rhs = parse_term(sig, rhs_t, scope)
        except (ParseError, IllSorted) as err:
            last_err = err
            continue
        if not sig.poset.same_component(lhs.sort, rhs.sort):
            last_err = IllSorted(f"sides of '{e.body}' have unrelated sorts {lhs.sort} and {rhs.sort}")
            continue
        if (lhs, rhs) not in results:
            results.append((lhs, rhs))
    if not results:
        if last_err is not None:
            raise last_err
        raise ParseError(f"equation '{e.body}' has no top-level '='", e.body.line, e.body.col, ("=",))
    if len(results) > 1:
        from .errors import AmbiguousParse
        raise AmbiguousParse(str(e.body), [f"{l} = {r}" for l, r in results], e.body.line, e.body.col)
    lhs, rhs = results[0]
    cond = ()
    if e.condition is not None:
        c = parse_term(sig, e.condition, scope)
        if not sig.has_op("true", 0) or not sig.poset.same_component(c.sort, BOOL):
            raise IllSorted(f"condition '{e.condition}' is not a Bool term")
        cond = ((c, sig.make("true")),)
    return make_equation(sig, lhs, rhs, cond, e.label, e.nonexec, diagnostics)


class Environment:
    """Loaded module and view definitions plus a cache of their flattenings."""

    def __init__(self):
        self.modules: dict = {}
        self.view_defs: dict = {}
        self._flat: dict = {}
        self._views: dict = {}
        self._stack: list = []

    def add(self, item):
        if isinstance(item, ModuleAst):
            self.modules[item.name] = item
        elif isinstance(item, ViewAst):
            self.view_defs[item.name] = item
        else:
            raise TypeError(item)
        self._flat.clear()
        self._views.clear()

    # -- public entry points
    def flatten(self, expr) -> FlatModule:
        if isinstance(expr, str):
            expr = Basic(expr)
        key = format_modexpr(expr)
        hit = self._flat.get(key)
        if hit is not None:
            return hit
        if isinstance(expr, Basic):
            out = self._elaborate(expr.name)
        elif isinstance(expr, Union):
            out = self.union(self.flatten(expr.left), self.flatten(expr.right))
        elif isinstance(expr, Rename):
            out = rename(self.flatten(expr.expr), dict(expr.sort_map), dict(expr.op_map))
        elif isinstance(expr, Instantiate):
            out = self.instantiate(expr.name, expr.bindings)
        else:
            raise TypeError(expr)
        self._flat[key] = out
        return out

    def view(self, name: str) -> View:
        hit = self._views.get(name)
        if hit is not None:
            return hit
        d = self.view_defs.get(name)
        if d is None:
            raise UnknownModule(f"unknown view {name}")
        v = make_view(name, self.flatten(d.source), self.flatten(d.target), dict(d.sort_map), dict(d.op_map))
        self._views[name] = v
        return v

    def union(self, a: FlatModule, b: FlatModule) -> FlatModule:
        sig, axioms, cons = merge_parts([a, b])
        imports = tuple(dict.fromkeys(a.imports + b.imports + ((a.name, "including"), (b.name, "including"))))
        return FlatModule(f"{a.name} + {b.name}", a.tight and b.tight, sig, tuple(axioms), cons, imports,
                          {**a.variables, **b.variables}, a.own_sorts | b.own_sorts, a.own_ops + b.own_ops,
                          diagnostics=a.diagnostics + b.diagnostics)

    def instantiate(self, name: str, bindings) -> FlatModule:
        ast = self._module_ast(name)
        if len(bindings) != len(ast.params):
            raise ParameterMismatch(f"{name} takes {len(ast.params)} parameter(s), got {len(bindings)}")
        body = self.flatten(Basic(name))
        sort_map, op_map, targets = {}, {}, []
        for (label, texpr), (blabel, vname) in zip(ast.params, bindings):
            if blabel is not None and blabel != label:
                raise ParameterMismatch(f"{name} has no parameter named {blabel}")
            theory = self.flatten(texpr)
            v = self.view(vname)
            if v.source.name != theory.name:
                raise ParameterMismatch(
                    f"view {vname} starts at {v.source.name} but parameter {label} of {name} requires {theory.name}")
            for s in theory.own_sorts:
                sort_map[f"{s}.{label}"] = v.sort_map[s]
            for d in theory.own_ops:
                if d.name in v.op_map:
                    op_map[d.name] = v.op_map[d.name]
            targets.append(v.target)
        translated = rename(body, sort_map, op_map, check_injective=False)
        sig, axioms, cons = merge_parts([translated, *targets])
        label = format_modexpr(Instantiate(name, tuple(bindings)))
        diags = list(body.diagnostics)
        for t in targets:
            diags.extend(t.diagnostics)
        return FlatModule(label, body.tight, sig, tuple(axioms), cons,
                          tuple(dict.fromkeys(body.imports + tuple((t.name, "protecting") for t in targets))),
                          dict(translated.variables), translated.own_sorts, translated.own_ops, (), diags)

    # -- elaboration of basic modules
    def _module_ast(self, name: str) -> ModuleAst:
        ast = self.modules.get(name)
        if ast is None:
            raise UnknownModule(f"unknown module {name}")
        return ast

    def _elaborate(self, name: str) -> FlatModule:
        ast = self._module_ast(name)
        if name in self._stack:
            raise CyclicImport("cyclic import: " + " -> ".join(self._stack[self._stack.index(name):] + [name]))
        self._stack.append(name)
        try:
            return self._elaborate_ast(ast)
        finally:
            self._stack.pop()

    def _elaborate_ast(self, ast: ModuleAst) -> FlatModule:
        parts, imports, params = [], [], []
        diags = []
        for label, texpr in ast.params:
            theory = self.flatten(texpr)
            qualified = rename(theory, {s: f"{s}.{label}" for s in theory.own_sorts}, {})
            parts.append(qualified)
            params.append((label, theory.name))
            imports.append((theory.name, "parameter"))
        for d in ast.body:
            if isinstance(d, Import):
                f = self.flatten(d.expr)
                parts.append(f)
                imports.append((f.name, d.mode))
        if ast.name != IMPLICIT_BOOL and IMPLICIT_BOOL in self.modules and not any(BOOL in p.sorts for p in parts):
            parts.append(self.flatten(Basic(IMPLICIT_BOOL)))
            imports.append((IMPLICIT_BOOL, "protecting"))
        known = set()
        for p in parts:
            known |= p.sorts
        sorts, pairs = [], []
        for d in ast.body:
            if isinstance(d, SortDecl):
                for g in d.groups:
                    sorts.extend(g)
                for lo_group, hi_group in zip(d.groups, d.groups[1:]):
                    pairs.extend((lo, hi) for lo in lo_group for hi in hi_group)
        all_sorts = known | set(sorts)
        ops = []
        for d in ast.body:
            if isinstance(d, OpDeclAst):
                for s in (*d.arity, d.coarity):
                    if s not in all_sorts:
                        raise UnknownSort(f"line {d.line}: unknown sort {s} in declaration of {' '.join(d.names)}")
                ops.extend(_op_from_ast(n, d) for n in d.names)
        sig, axioms, cons = merge_parts(parts, sorts, pairs, ops)
        param_sorts = {s for p in parts[:len(params)] for s in p.own_sorts}
        theory_pairs = {pr for p in parts[:len(params)] for pr in p.signature.poset.pairs}
        for lo, hi in pairs:
            if hi in param_sorts and (lo, hi) not in theory_pairs:
                raise ParameterMismatch(f"{ast.name} adds subsort {lo} < {hi} below a parameter sort")
        variables = {}
        for d in ast.body:
            if isinstance(d, VarDecl):
                if d.sort not in sig.sorts:
                    raise UnknownSort(f"unknown sort {d.sort} for variable(s) {' '.join(d.names)}")
                for n in d.names:
                    variables[n] = Var(n, d.sort)
        seen = {e.key for e in axioms}
        for d in ast.body:
            if isinstance(d, EqAst):
                e = build_equation(sig, variables, d, diags)
                if e.key not in seen:
                    seen.add(e.key)
                    axioms.append(e)
        own_ops = tuple(o for o in sig.ops if o in ops)
        flat = FlatModule(ast.name, ast.kind == "!", sig, tuple(axioms), cons, tuple(imports), variables,
                          frozenset(sorts), own_ops, tuple(params), [f"{ast.name}: {m}" for m in diags])
        for p in parts:
            flat.diagnostics[:0] = [m for m in p.diagnostics if m not in flat.diagnostics]
        return flat


def make_view(name: str, src: FlatModule, tgt: FlatModule, sort_map: dict, op_map: dict) -> View:
    """Check that the symbol maps form a signature morphism from ``src`` into ``tgt``."""
    smap = {}
    for s in src.sorts:
        if s in sort_map:
            smap[s] = sort_map[s]
        elif s in tgt.sorts:
            smap[s] = s
        else:
            raise NotAMorphism(f"view {name}: sort {s} of {src.name} is not mapped")
    for s, t in sort_map.items():
        if s not in src.sorts:
            raise NotAMorphism(f"view {name}: {s} is not a sort of {src.name}")
        if t not in tgt.sorts:
            raise NotAMorphism(f"view {name}: {t} is not a sort of {tgt.name}")
    sp, tp = src.signature.poset, tgt.signature.poset
    for a in src.sorts:
        for b in src.sorts:
            if sp.leq(a, b) and not tp.leq(smap[a], smap[b]):
                raise NotAMorphism(f"view {name} is not monotone: {a} < {b} but not {smap[a]} < {smap[b]}")
    omap = {}
    tsig = tgt.signature
    for d in src.signature.ops:
        new = op_map.get(d.name, d.name)
        arity = tuple(smap[s] for s in d.arity)
        fam = tsig.family(new, len(arity))
        if not any(t.arity == arity and tp.leq(t.coarity, smap[d.coarity]) for t in fam):
            raise NotAMorphism(f"view {name}: no operator {new} : {' '.join(arity)} -> {smap[d.coarity]} "
                               f"in {tgt.name} for {d.name}")
        if new != d.name:
            omap[d.name] = new
    for old in op_map:
        if not src.signature.has_op(old):
            raise NotAMorphism(f"view {name}: {old} is not an operator of {src.name}")
    msg = f"view {name}: satisfaction of the axioms of {src.name} in {tgt.name} is assumed, not checked"
    log.info(msg)
    return View(name, src, tgt, smap, omap)


def rename(flat: FlatModule, sort_map: Mapping, op_map: Mapping, check_injective: bool = True) -> FlatModule:
    """Translate a module symbolwise along a sort map and an operator-name map."""
    for s in sort_map:
        if s not in flat.sorts:
            raise NotAMorphism(f"rename: {s} is not a sort of {flat.name}")
    smap = {s: sort_map.get(s, s) for s in flat.sorts}
    if check_injective:
        images = {}
        for s, t in smap.items():
            if t in images and images[t] != s:
                raise NotAMorphism(f"rename collapses sorts {images[t]} and {s} onto {t}")
            images[t] = s
    for o in op_map:
        if not flat.signature.has_op(o):
            raise NotAMorphism(f"rename: {o} is not an operator of {flat.name}")

    def op(d: OpDecl) -> OpDecl:
        name = op_map.get(d.name, d.name)
        ident = op_map.get(d.identity, d.identity) if d.identity else None
        return replace(d, name=name, arity=tuple(smap[s] for s in d.arity), coarity=smap[d.coarity], identity=ident)

    poset = flat.signature.poset
    pairs = {(smap[a], smap[b]) for a, b in poset.pairs if smap[a] != smap[b]}
    try:
        sig = Signature(SortPoset(set(smap.values()), pairs), [op(d) for d in flat.signature.ops])
    except SpecError as e:
        raise NotAMorphism(f"renaming of {flat.name} is not a signature morphism: {e}") from e

    memo = {}

    def tr(t: Term) -> Term:
        hit = memo.get(t)
        if hit is not None:
            return hit
        if isinstance(t, Var):
            out = Var(t.name, smap[t.sort])
        else:
            out = sig.make(op_map.get(t.op, t.op), [tr(a) for a in t.args])
        memo[t] = out
        return out

    axioms, seen = [], set()
    for e in flat.axioms:
        e2 = Equation(tr(e.lhs), tr(e.rhs), tuple((tr(a), tr(b)) for a, b in e.condition), e.label, e.nonexec)
        if e2.key not in seen:
            seen.add(e2.key)
            axioms.append(e2)
    cons = tuple(dict.fromkeys(op(d) for d in flat.constructors))
    variables = {n: Var(v.name, smap[v.sort]) for n, v in flat.variables.items()}
    return FlatModule(flat.name if not (sort_map or op_map) else f"{flat.name}*", flat.tight, sig, tuple(axioms),
                      cons, flat.imports, variables, frozenset(smap[s] for s in flat.own_sorts),
                      tuple(op(d) for d in flat.own_ops), flat.params, list(flat.diagnostics))
