"""Surface syntax: tokenizer, declaration-level AST and its printer.

Terms are kept as token sequences at this level; they are resolved against
a flattened signature by :mod:`proofscore.mixfix`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ParseError, UnsupportedFeature

SPECIALS = set("(),{}[]")


@dataclass(frozen=True)
class Token:
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    toks = []
    for lineno, line in enumerate(text.splitlines(), 1):
        i, n = 0, len(line)
        while i < n:
            ch = line[i]
            if ch.isspace():
                i += 1
                continue
            if ch in SPECIALS:
                toks.append(Token(ch, lineno, i + 1))
                i += 1
                continue
            j = i
            while j < n and not line[j].isspace() and line[j] not in SPECIALS:
                j += 1
            word = line[i:j]
            if word.startswith("--") or word.startswith("**"):
                break
            if len(word) > 1 and word.endswith("."):
                toks.append(Token(word[:-1], lineno, i + 1))
                toks.append(Token(".", lineno, j))
            else:
                toks.append(Token(word, lineno, i + 1))
            i = j
    return toks


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class TermText:
    """Unresolved term: the token texts plus the position of the first token."""
    tokens: tuple
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    def __str__(self):
        return join_tokens(self.tokens)


@dataclass(frozen=True)
class Basic:
    name: str


@dataclass(frozen=True)
class Union:
    left: object
    right: object


@dataclass(frozen=True)
class Rename:
    expr: object
    sort_map: tuple  # ((old, new), ...)
    op_map: tuple


@dataclass(frozen=True)
class Instantiate:
    name: str
    bindings: tuple  # ((parameter label or None, view name), ...)


@dataclass(frozen=True)
class Import:
    mode: str  # protecting | extending | using | including
    expr: object


@dataclass(frozen=True)
class SortDecl:
    groups: tuple  # ((s1, s2), (s3,)) means s1, s2 < s3


@dataclass(frozen=True)
class OpDeclAst:
    names: tuple
    arity: tuple
    coarity: str
    attrs: tuple = ()  # ("constr", "assoc", "comm", ("prec", 41), ("id", "0"))
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class VarDecl:
    names: tuple
    sort: str


@dataclass(frozen=True)
class EqAst:
    keyword: str  # eq | ceq | cq
    label: Optional[str]
    nonexec: bool
    body: TermText  # "lhs = rhs" tokens, split once the signature is known
    condition: Optional[TermText] = None


@dataclass(frozen=True)
class ModuleAst:
    kind: str  # "!" tight, "*" loose
    name: str
    params: tuple  # ((label, theory ModuleExpr), ...)
    body: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ViewAst:
    name: str
    source: object
    target: object
    sort_map: tuple
    op_map: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Red:
    term: TermText
    module: Optional[object] = None


@dataclass(frozen=True)
class IdTag:
    tag: str


@dataclass(frozen=True)
class GoalCmd:
    keyword: str  # :goal | :lemma
    equations: tuple


@dataclass(frozen=True)
class IndCmd:
    vars: tuple  # ("S:Sys", ...)


@dataclass(frozen=True)
class ApplyCmd:
    tactic: str  # tc | rd | sg


@dataclass(frozen=True)
class CtfCmd:
    equation: EqAst


@dataclass(frozen=True)
class CspCmd:
    equations: tuple


@dataclass(frozen=True)
class HypCmd:
    keyword: str  # :init | :imp
    label: str
    subst: tuple  # (("I:Pid" or "I", TermText), ...)


@dataclass(frozen=True)
class OpenAst:
    module: object
    body: tuple
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class InCmd:
    path: str


@dataclass(frozen=True)
class SourceUnit:
    items: tuple = ()


# --------------------------------------------------------------------------
# parser

IMPORT_MODES = {"pr": "protecting", "protecting": "protecting", "ex": "extending", "extending": "extending",
                "us": "using", "using": "using", "inc": "including", "including": "including"}
UNSUPPORTED = {"bop", "bops", "beq", "bceq", "bcq", "rl", "crl", "trans", "ctrans", "*[", "hidden", "bpred",
               "let", "rule", "search"}
DECL_START = {"op", "ops", "var", "vars", "eq", "ceq", "cq", "sort", "sorts", "[", "}", "red", "reduce",
              "close", "pred", "signature", "axioms", "{"} | set(IMPORT_MODES) | UNSUPPORTED
ATTR_WORDS = {"constr", "ctor", "assoc", "comm", "memo"}


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # -- cursor helpers
    def peek(self, k=0) -> Optional[Token]:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, *texts) -> bool:
        t = self.peek()
        return t is not None and t.text in texts

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            last = self.toks[-1] if self.toks else Token("", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.col)
        self.i += 1
        return t

    def expect(self, *texts) -> Token:
        t = self.peek()
        if t is None or t.text not in texts:
            where = t or (self.toks[-1] if self.toks else Token("", 1, 1))
            got = repr(t.text) if t else "end of input"
            raise ParseError(f"unexpected {got}", where.line, where.col, texts)
        self.i += 1
        return t

    def skip_dot(self):
        if self.at("."):
            self.i += 1

    def error(self, msg, tok=None, expected=()):
        tok = tok or self.peek() or (self.toks[-1] if self.toks else Token("", 1, 1))
        return ParseError(msg, tok.line, tok.col, expected)

    # -- top level
    def unit(self) -> SourceUnit:
        items = []
        while self.peek() is not None:
            items.append(self.toplevel())
        return SourceUnit(tuple(items))

    def toplevel(self):
        t = self.peek()
        w = t.text
        if w in ("mod", "mod!", "mod*", "module", "module!", "module*"):
            return self.module()
        if w == "view":
            return self.view()
        if w == "open":
            return self.open_block()
        if w in ("red", "reduce"):
            return self.red()
        if w in ("in", "input"):
            self.next()
            path = self.next().text
            self.skip_dot()
            return InCmd(path)
        if w in UNSUPPORTED:
            raise UnsupportedFeature(f"'{w}' is not supported", t.line, t.col)
        raise self.error(f"unexpected {w!r} at top level", t, ("mod!", "mod*", "view", "open", "red", "in"))

    def module(self) -> ModuleAst:
        kw = self.next()
        kind = "*" if kw.text.endswith("*") else "!"
        name = self.next().text
        params = []
        if self.at("("):
            self.next()
            while True:
                label = self.next().text
                self.expect("::")
                params.append((label, self.modexpr(stop={",", ")"})))
                if self.at(","):
                    self.next()
                    continue
                self.expect(")")
                break
        self.expect("{")
        body = self.decls(closing="}")
        self.expect("}")
        return ModuleAst(kind, name, tuple(params), tuple(body), kw.line)

    def decls(self, closing: str) -> list:
        out = []
        while self.peek() is not None and not self.at(closing):
            if self.at("signature", "axioms") and self.peek(1) and self.peek(1).text == "{":
                self.next()
                self.next()
                out.extend(self.decls("}"))
                self.expect("}")
                continue
            out.append(self.decl())
        return out

    def decl(self):
        t = self.peek()
        w = t.text
        if w == "[":
            return self.sort_block()
        if w in ("sort", "sorts"):
            self.next()
            names = []
            while self.peek() is not None and not self.at(".") and self.peek().text not in DECL_START:
                names.append(self.next().text)
            self.skip_dot()
            return SortDecl((tuple(names),))
        if w in ("op", "ops", "pred"):
            return self.op_decl()
        if w in ("var", "vars"):
            return self.var_decl()
        if w in ("eq", "ceq", "cq"):
            return self.equation()
        if w in IMPORT_MODES:
            return self.import_decl()
        if w in UNSUPPORTED:
            raise UnsupportedFeature(f"'{w}' is not supported", t.line, t.col)
        raise self.error(f"unexpected {w!r} in declaration list", t, ("[", "op", "ops", "var", "vars", "eq", "ceq", "pr"))

    def sort_block(self) -> SortDecl:
        self.expect("[")
        groups, cur = [], []
        while not self.at("]"):
            tok = self.next()
            if tok.text == "<":
                if not cur:
                    raise self.error("empty sort group before '<'", tok)
                groups.append(tuple(cur))
                cur = []
            elif tok.text != ",":
                cur.append(tok.text)
        self.expect("]")
        if not cur:
            raise self.error("empty sort group")
        groups.append(tuple(cur))
        self.skip_dot()
        return SortDecl(tuple(groups))

    def op_decl(self) -> OpDeclAst:
        kw = self.next()
        names = []
        if kw.text == "op":
            parts = []
            while not self.at(":"):
                parts.append(self.next().text)
            if not parts:
                raise self.error("operator name expected")
            names.append("".join(parts))
        else:
            while not self.at(":"):
                tok = self.next()
                if tok.text == "(":
                    parts = []
                    while not self.at(")"):
                        parts.append(self.next().text)
                    self.next()
                    names.append("".join(parts))
                else:
                    names.append(tok.text)
        self.expect(":")
        arity = []
        if kw.text == "pred":
            while self.peek() is not None and not self.at(".", "{") and self.peek().text not in DECL_START:
                arity.append(self.next().text)
            coarity = "Bool"
        else:
            while not self.at("->"):
                arity.append(self.next().text)
            self.expect("->")
            coarity = self.next().text
        attrs = []
        if self.at("{"):
            self.next()
            while not self.at("}"):
                a = self.next()
                word = a.text
                if word in ("constr", "ctor"):
                    attrs.append("constr")
                elif word in ("assoc", "comm"):
                    attrs.append(word)
                elif word in ("prec:", "prec"):
                    if self.at(":"):
                        self.next()
                    num = self.next()
                    if not num.text.isdigit():
                        raise self.error("precedence must be a number", num)
                    attrs.append(("prec", int(num.text)))
                elif word in ("id:", "id"):
                    if self.at(":"):
                        self.next()
                    attrs.append(("id", self.next().text))
                elif word in ("memo", "strat:"):
                    continue
                else:
                    raise UnsupportedFeature(f"operator attribute '{word}' is not supported", a.line, a.col)
            self.next()
        self.skip_dot()
        return OpDeclAst(tuple(names), tuple(arity), coarity, tuple(attrs), kw.line)

    def var_decl(self) -> VarDecl:
        self.next()
        names = []
        while not self.at(":"):
            names.append(self.next().text)
        self.expect(":")
        sort = self.next().text
        self.skip_dot()
        return VarDecl(tuple(names), sort)

    def import_decl(self) -> Import:
        mode = IMPORT_MODES[self.next().text]
        if self.at("("):
            self.next()
            expr = self.modexpr(stop={")"})
            self.expect(")")
        else:
            expr = self.modexpr(stop={"."})
        self.skip_dot()
        return Import(mode, expr)

    def term_until_dot(self) -> TermText:
        start = self.peek()
        if start is None:
            raise self.error("term expected")
        toks, depth = [], 0
        while True:
            t = self.peek()
            if t is None:
                raise self.error("missing '.' after term", start, (".",))
            if t.text == "." and depth == 0:
                self.next()
                break
            if t.text == "(":
                depth += 1
            elif t.text == ")":
                depth -= 1
            elif t.text in ("}",) and depth == 0:
                raise self.error("missing '.' after term", t, (".",))
            toks.append(self.next().text)
        if not toks:
            raise self.error("empty term", start)
        return TermText(tuple(toks), start.line, start.col)

    def equation(self) -> EqAst:
        kw = self.next()
        label, nonexec = None, False
        if self.at("["):
            self.next()
            words = []
            while not self.at("]"):
                words.append(self.next().text)
            self.next()
            for w in words:
                if w == ":nonexec":
                    nonexec = True
                elif label is None:
                    label = w
                else:
                    raise self.error(f"unexpected {w!r} in equation label", kw)
            self.expect(":")
        body = self.term_until_dot()
        cond = None
        if kw.text in ("ceq", "cq"):
            body, cond = split_condition(body)
            if cond is None:
                raise ParseError("conditional equation without 'if'", body.line, body.col, ("if",))
        return EqAst(kw.text, label, nonexec, body, cond)

    # -- module expressions
    def modexpr(self, stop) -> object:
        left = self.modatom(stop)
        while self.at("+"):
            self.next()
            left = Union(left, self.modatom(stop))
        return left

    def modatom(self, stop):
        if self.at("("):
            self.next()
            e = self.modexpr(stop={")"})
            self.expect(")")
        else:
            name = self.next()
            if name.text in stop or name.text in SPECIALS:
                raise self.error("module name expected", name)
            e = Basic(name.text)
            if self.at("("):
                self.next()
                binds = []
                while True:
                    first = self.next().text
                    if self.at("<="):
                        self.next()
                        binds.append((first, self.next().text))
                    else:
                        binds.append((None, first))
                    if self.at(","):
                        self.next()
                        continue
                    self.expect(")")
                    break
                e = Instantiate(name.text, tuple(binds))
        while self.at("*"):
            self.next()
            self.expect("{")
            smap, omap = self.symbol_maps()
            self.expect("}")
            e = Rename(e, smap, omap)
        return e

    def symbol_maps(self):
        smap, omap = [], []
        while not self.at("}"):
            kind = self.expect("sort", "op")
            old = []
            while not self.at("->"):
                old.append(self.next().text)
            self.next()
            new = []
            while not self.at(",", "}"):
                new.append(self.next().text)
            if not old or not new:
                raise self.error("incomplete symbol mapping", kind)
            (smap if kind.text == "sort" else omap).append(("".join(old), "".join(new)))
            if self.at(","):
                self.next()
        return tuple(smap), tuple(omap)

    def view(self) -> ViewAst:
        kw = self.next()
        name = self.next().text
        self.expect("from")
        src = self.modexpr(stop={"to"})
        self.expect("to")
        tgt = self.modexpr(stop={"{"})
        self.expect("{")
        smap, omap = self.symbol_maps()
        self.expect("}")
        return ViewAst(name, src, tgt, smap, omap, kw.line)

    # -- open-close blocks
    def open_block(self) -> OpenAst:
        kw = self.next()
        expr = self.modexpr(stop={"."})
        self.skip_dot()
        body = []
        while not self.at("close"):
            if self.peek() is None:
                raise self.error("open block without matching 'close'", kw, ("close",))
            body.append(self.open_item())
        self.next()
        return OpenAst(expr, tuple(body), kw.line)

    def red(self) -> Red:
        self.next()
        mod = None
        if self.at("in") and self._has_in_colon():
            self.next()
            mod = self.modexpr(stop={":"})
            self.expect(":")
        return Red(self.term_until_dot(), mod)

    def _has_in_colon(self):
        j = self.i + 1
        while j < len(self.toks) and self.toks[j].text not in (".", ":"):
            j += 1
        return j < len(self.toks) and self.toks[j].text == ":"

    def open_item(self):
        t = self.peek()
        w = t.text
        if w in ("red", "reduce"):
            return self.red()
        if w.startswith(":"):
            return self.command()
        return self.decl()

    def braced_equations(self) -> tuple:
        self.expect("{")
        eqs = []
        while not self.at("}"):
            if not self.at("eq", "ceq", "cq"):
                raise self.error("equation expected", expected=("eq", "ceq", "}"))
            eqs.append(self.equation())
        self.next()
        return tuple(eqs)

    def command(self):
        t = self.next()
        w = t.text
        if w in (":id", ":apply"):
            self.expect("(")
            arg = self.next().text
            self.expect(")")
            self.skip_dot()
            if w == ":id":
                return IdTag(arg)
            if arg not in ("tc", "rd", "sg"):
                raise self.error(f"unknown tactic {arg!r}", t, ("tc", "rd", "sg"))
            return ApplyCmd(arg)
        if w in (":goal", ":lemma"):
            eqs = self.braced_equations()
            self.skip_dot()
            return GoalCmd(w, eqs)
        if w == ":ind":
            self.expect("on")
            self.expect("(")
            vs = []
            while not self.at(")"):
                vs.append(self.next().text)
            self.next()
            self.skip_dot()
            return IndCmd(tuple(vs))
        if w == ":ctf":
            eqs = self.braced_equations()
            if len(eqs) != 1:
                raise self.error(":ctf takes exactly one equation", t)
            self.skip_dot()
            return CtfCmd(eqs[0])
        if w == ":csp":
            eqs = []
            while self.at("{"):
                eqs.extend(self.braced_equations())
            self.skip_dot()
            return CspCmd(tuple(eqs))
        if w in (":init", ":imp"):
            self.expect("[")
            label = self.next().text
            self.expect("]")
            self.expect("by")
            self.expect("{")
            toks = []
            while not self.at("}"):
                tok = self.next()
                toks.append(tok)
            self.next()
            self.skip_dot()
            return HypCmd(w, label, _split_subst(toks, t))
        raise UnsupportedFeature(f"unknown command {w!r}", t.line, t.col)


def _split_subst(toks, where):
    words = []
    for tok in toks:
        text = tok.text
        if text.endswith(";") and text != ";":
            words.extend([text[:-1], ";"])
        elif text.startswith(";") and text != ";":
            words.extend([";", text[1:]])
        else:
            words.append(text)
    pairs, cur = [], []
    for w in words + [";"]:
        if w == ";":
            if cur:
                if len(cur) < 3 or cur[1] != "<-":
                    raise ParseError("substitution entries must read 'V <- term'", where.line, where.col, ("<-",))
                pairs.append((cur[0], TermText(tuple(cur[2:]), where.line, where.col)))
            cur = []
        else:
            cur.append(w)
    return tuple(pairs)


def split_condition(body: TermText):
    """Split ``lhs = rhs if cond`` at the ``if`` that has no matching ``fi``."""
    toks = body.tokens
    stack, depth = [], 0
    for k, w in enumerate(toks):
        if w == "(":
            depth += 1
        elif w == ")":
            depth -= 1
        elif w == "if":
            stack.append((k, depth))
        elif w == "fi" and stack:
            stack.pop()
    unmatched = [k for k, d in stack if d == 0]
    if not unmatched:
        return body, None
    k = unmatched[0]
    return (TermText(toks[:k], body.line, body.col), TermText(toks[k + 1:], body.line, body.col))


def equation_splits(body: TermText) -> list:
    """Candidate (lhs, rhs) splits at every depth-0 ``=`` outside if-then-else."""
    toks = body.tokens
    out = []
    depth, ifdepth = 0, 0
    for k, w in enumerate(toks):
        if w == "(":
            depth += 1
        elif w == ")":
            depth -= 1
        elif w == "if":
            ifdepth += 1
        elif w == "fi":
            ifdepth -= 1
        elif w == "=" and depth == 0 and ifdepth == 0 and 0 < k < len(toks) - 1:
            out.append((TermText(toks[:k], body.line, body.col), TermText(toks[k + 1:], body.line, body.col)))
    return out


def parse_program(text: str) -> SourceUnit:
    return _Parser(text).unit()


def parse_term_tokens(text: str) -> TermText:
    toks = tokenize(text)
    if toks and toks[-1].text == ".":
        toks = toks[:-1]
    if not toks:
        raise ParseError("empty term", 1, 1)
    return TermText(tuple(t.text for t in toks), toks[0].line, toks[0].col)


# --------------------------------------------------------------------------
# printing

_NO_SPACE_BEFORE = {")", ",", "]", "}"}
_NO_SPACE_AFTER = {"(", "[", "{"}
_wordish = re.compile(r"[^\s(),{}\[\]]")


def join_tokens(tokens) -> str:
    out = []
    prev = None
    for w in tokens:
        if prev is not None and prev not in _NO_SPACE_AFTER and w not in _NO_SPACE_BEFORE and not (
                w == "(" and _wordish.match(prev)) and prev != ",":
            out.append(" ")
        out.append(w)
        prev = w
    return "".join(out)


def format_modexpr(e) -> str:
    if isinstance(e, Basic):
        return e.name
    if isinstance(e, Union):
        return f"{format_modexpr(e.left)} + {format_modexpr(e.right)}"
    if isinstance(e, Instantiate):
        binds = ", ".join(f"{l} <= {v}" if l else v for l, v in e.bindings)
        return f"{e.name}({binds})"
    if isinstance(e, Rename):
        inner = format_modexpr(e.expr)
        if isinstance(e.expr, Union):
            inner = f"({inner})"
        return f"{inner} * {{{_format_maps(e.sort_map, e.op_map)}}}"
    raise TypeError(e)


def _format_maps(smap, omap):
    return ", ".join([f"sort {a} -> {b}" for a, b in smap] + [f"op {a} -> {b}" for a, b in omap])


def _format_attrs(attrs):
    words = []
    for a in attrs:
        if isinstance(a, tuple):
            words.append(f"{a[0]}: {a[1]}")
        else:
            words.append(a)
    return " {" + " ".join(words) + "}" if words else ""


def format_equation(e: EqAst) -> str:
    head = e.keyword
    if e.label or e.nonexec:
        inside = " ".join(x for x in (e.label, ":nonexec" if e.nonexec else None) if x)
        head += f" [{inside}] :"
    text = f"{head} {e.body}"
    if e.condition is not None:
        text += f" if {e.condition}"
    return text + " ."


def format_decl(d) -> str:
    if isinstance(d, SortDecl):
        return "[" + " < ".join(" ".join(g) for g in d.groups) + "]"
    if isinstance(d, OpDeclAst):
        kw = "op" if len(d.names) == 1 else "ops"
        names = " ".join(f"({n})" if kw == "ops" and "_" in n else n for n in d.names)
        arity = (" ".join(d.arity) + " ") if d.arity else ""
        return f"{kw} {names} : {arity}-> {d.coarity}{_format_attrs(d.attrs)} ."
    if isinstance(d, VarDecl):
        return f"{'var' if len(d.names) == 1 else 'vars'} {' '.join(d.names)} : {d.sort} ."
    if isinstance(d, EqAst):
        return format_equation(d)
    if isinstance(d, Import):
        short = {"protecting": "pr", "extending": "ex", "using": "us", "including": "inc"}[d.mode]
        return f"{short}({format_modexpr(d.expr)})"
    if isinstance(d, Red):
        where = f"in {format_modexpr(d.module)} : " if d.module is not None else ""
        return f"red {where}{d.term} ."
    if isinstance(d, IdTag):
        return f":id({d.tag})"
    if isinstance(d, GoalCmd):
        return f"{d.keyword} {{" + " ".join(format_equation(e) for e in d.equations) + "}"
    if isinstance(d, IndCmd):
        return f":ind on ({' '.join(d.vars)})"
    if isinstance(d, ApplyCmd):
        return f":apply({d.tactic})"
    if isinstance(d, CtfCmd):
        return f":ctf {{{format_equation(d.equation)}}}"
    if isinstance(d, CspCmd):
        return ":csp " + " ".join(f"{{{format_equation(e)}}}" for e in d.equations)
    if isinstance(d, HypCmd):
        subst = " ; ".join(f"{v} <- {t}" for v, t in d.subst)
        return f"{d.keyword} [{d.label}] by {{{subst}}}"
    raise TypeError(d)


def format_item(item) -> str:
    if isinstance(item, ModuleAst):
        params = ""
        if item.params:
            params = "(" + ", ".join(f"{l} :: {format_modexpr(t)}" for l, t in item.params) + ")"
        body = "\n".join("  " + format_decl(d) for d in item.body)
        return f"mod{item.kind} {item.name}{params} {{\n{body}\n}}"
    if isinstance(item, ViewAst):
        maps = ",\n".join("  " + m for m in _format_maps(item.sort_map, item.op_map).split(", ")) \
            if (item.sort_map or item.op_map) else ""
        return (f"view {item.name} from {format_modexpr(item.source)} to {format_modexpr(item.target)} {{\n"
                f"{maps}\n}}")
    if isinstance(item, OpenAst):
        body = "\n".join("  " + format_decl(d) for d in item.body)
        return f"open {format_modexpr(item.module)} .\n{body}\nclose"
    if isinstance(item, InCmd):
        return f"in {item.path}"
    return format_decl(item)


def format_unit(unit: SourceUnit) -> str:
    return "\n\n".join(format_item(i) for i in unit.items) + ("\n" if unit.items else "")
