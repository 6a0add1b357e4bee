"""Loading source files and evaluating open-close environments."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import SpecError, SymbolClash
from .kernel import OpDecl, Term, Var
from .mixfix import format_result, format_term
from .modalg import Environment, FlatModule, build_equation, extend_module
from .parser import (ApplyCmd, CspCmd, CtfCmd, EqAst, GoalCmd, HypCmd, IdTag, Import, InCmd, IndCmd, ModuleAst,
                     OpDeclAst, OpenAst, Red, SortDecl, VarDecl, ViewAst, format_decl, format_modexpr,
                     parse_program)
from .rewriting import (DEFAULT_COND_DEPTH, DEFAULT_MAX_STEPS, RewriteStats, StepEvent, normalize)

PROOF_COMMANDS = (GoalCmd, IndCmd, ApplyCmd, CtfCmd, CspCmd, HypCmd)


@dataclass
class OpenCloseEnv:
    base: object
    base_module: FlatModule
    tag: Optional[str] = None
    constants: list = field(default_factory=list)
    equations: list = field(default_factory=list)
    reduce_goals: list = field(default_factory=list)
    module: Optional[FlatModule] = None
    goals: tuple = ()
    lemmas: tuple = ()
    commands: tuple = ()
    line: int = 0
    source: Optional[OpenAst] = None
    reduce_points: list = field(default_factory=list)  # (command text, term, module at that point)

    @property
    def is_script(self) -> bool:
        return bool(self.goals) and bool(self.commands)

    @property
    def is_declaration(self) -> bool:
        """A block that only states the targets of a tagged score set."""
        return bool(self.goals) and not self.commands and not self.reduce_points

    @property
    def added_equations(self):
        return [e for e in self.equations if not e.nonexec]

    @property
    def hypotheses(self):
        return [e for e in self.equations if e.nonexec]


def elaborate_open(env: Environment, ast: OpenAst) -> OpenCloseEnv:
    """Extend the base module statement by statement, as the block is read."""
    base = env.flatten(ast.module)
    oc = OpenCloseEnv(ast.module, base, line=ast.line, source=ast)
    sorts, pairs, ops = [], [], []
    variables = dict(base.variables)
    goals, lemmas, commands = [], [], []

    def current():
        return extend_module(oc.base_module, oc.constants, oc.equations, sorts, pairs, ops)

    for item in ast.body:
        if isinstance(item, OpDeclAst):
            for name in item.names:
                if oc.base_module.signature.has_op(name, len(item.arity)) and not item.arity:
                    raise SymbolClash(f"line {item.line}: constant {name} already exists in {oc.base_module.name}")
                if item.arity or item.attrs:
                    from .modalg import _op_from_ast
                    ops.append(_op_from_ast(name, item))
                else:
                    oc.constants.append((name, item.coarity))
        elif isinstance(item, VarDecl):
            for n in item.names:
                variables[n] = Var(n, item.sort)
        elif isinstance(item, SortDecl):
            for g in item.groups:
                sorts.extend(g)
            for lo_g, hi_g in zip(item.groups, item.groups[1:]):
                pairs.extend((a, b) for a in lo_g for b in hi_g)
        elif isinstance(item, Import):
            oc.base_module = env.union(oc.base_module, env.flatten(item.expr))
        elif isinstance(item, EqAst):
            mod = current()
            oc.equations.append(build_equation(mod.signature, variables, item, mod.diagnostics))
        elif isinstance(item, Red):
            mod = current() if item.module is None else env.flatten(item.module)
            t = mod.parse(item.term, variables)
            oc.reduce_goals.append(t)
            oc.reduce_points.append((format_decl(item), t, mod))
        elif isinstance(item, IdTag):
            oc.tag = item.tag
        elif isinstance(item, GoalCmd):
            mod = current()
            eqs = tuple(build_equation(mod.signature, variables, e) for e in item.equations)
            (goals if item.keyword == ":goal" else lemmas).extend(eqs)
        elif isinstance(item, PROOF_COMMANDS):
            commands.append(item)
        else:
            raise SpecError(f"unexpected statement in open block: {item}")
    oc.module = current()
    oc.goals, oc.lemmas, oc.commands = tuple(goals), tuple(lemmas), tuple(commands)
    oc.variables = variables
    return oc


@dataclass
class ReduceResult:
    command: str
    term: Term
    result: Term
    stats: RewriteStats
    module: FlatModule
    trace: list = field(default_factory=list)

    @property
    def text(self) -> str:
        return format_result(self.module.signature, self.result)


def format_step(sig, ev: StepEvent) -> str:
    path = ".".join(str(p) for p in ev.path) or "top"
    label = ev.label if ev.label is not None else "-"
    return f"[{label}] {path} : {format_term(sig, ev.redex)} --> {format_term(sig, ev.contractum)}"


def eval_open_close(oc: OpenCloseEnv, max_steps: int = DEFAULT_MAX_STEPS, cond_depth: int = DEFAULT_COND_DEPTH,
                    trace: bool = False) -> list:
    """Normalize every reduce goal of the block in the module as extended at that point."""
    out = []
    for cmd, t, mod in oc.reduce_points:
        ctx = mod.context(max_steps, cond_depth)
        lines = []
        hook = (lambda ev, _s=mod.signature: lines.append(format_step(_s, ev))) if trace else None
        nf, stats = normalize(ctx, t, hook)
        out.append(ReduceResult(cmd, t, nf, stats, mod, lines))
    return out


@dataclass
class Record:
    command: str
    text: str
    stats: Optional[RewriteStats] = None
    ok: bool = True


@dataclass
class Transcript:
    records: list = field(default_factory=list)

    def add(self, command, text, stats=None, ok=True):
        self.records.append(Record(command, text, stats, ok))

    def render(self) -> str:
        chunks = []
        for r in self.records:
            lines = [r.command] if r.command else []
            if r.text:
                lines.append(r.text)
            if r.stats is not None:
                note = f"({r.stats.steps} rewrites"
                note += ", step limit reached)" if r.stats.limit_hit else ")"
                lines.append(note)
            chunks.append("\n".join(lines))
        return "\n".join(chunks) + ("\n" if chunks else "")


class Session:
    """File loader plus the ordered list of executable blocks found in the loaded files."""

    def __init__(self, max_steps: int = DEFAULT_MAX_STEPS, cond_depth: int = DEFAULT_COND_DEPTH, trace: bool = False):
        self.max_steps = max_steps
        self.cond_depth = cond_depth
        self.trace = trace
        self.env = Environment()
        self.blocks: list = []  # (item, current module name)
        self._loaded: set = set()
        self._current: Optional[str] = None
        self.order: list = []  # module/view names in definition order
        self.module_files: list = []  # loaded files that declare modules or views

    def load(self, path: str) -> None:
        real = os.path.realpath(path)
        if real in self._loaded:
            return
        self._loaded.add(real)
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if self.load_text(text, os.path.dirname(real)):
            self.module_files.append(real)

    def load_text(self, text: str, base_dir: str = ".") -> bool:
        """Load one source text; returns whether it declares modules or views itself."""
        unit = parse_program(text)
        declares = False
        for item in unit.items:
            if isinstance(item, InCmd):
                p = item.path
                if not os.path.isabs(p):
                    p = os.path.join(base_dir, p)
                if not os.path.exists(p) and os.path.exists(p + ".cafe"):
                    p += ".cafe"
                self.load(p)
            elif isinstance(item, (ModuleAst, ViewAst)):
                declares = True
                self.env.add(item)
                self.order.append(item)
                if isinstance(item, ModuleAst):
                    self._current = item.name
            else:
                self.blocks.append((item, self._current))
        return declares

    def check(self) -> list:
        """Flatten every module and validate every view; returns collected diagnostics."""
        diags = []
        for item in self.order:
            if isinstance(item, ModuleAst):
                flat = self.env.flatten(item.name)
                diags.extend(d for d in flat.diagnostics if d not in diags)
            else:
                self.env.view(item.name)
        return diags

    def open_envs(self) -> list:
        return [elaborate_open(self.env, item) for item, _ in self.blocks if isinstance(item, OpenAst)]

    def run(self, transcript: Optional[Transcript] = None, scripts: bool = True, start: int = 0) -> tuple:
        """Evaluate the blocks from ``start`` on in file order; returns (transcript, all scripts closed)."""
        transcript = transcript or Transcript()
        all_closed = True
        for item, current in self.blocks[start:]:
            if isinstance(item, Red):
                mod = self.env.flatten(item.module if item.module is not None else current)
                t = mod.parse(item.term)
                self._emit_red(transcript, format_decl(item), t, mod)
                continue
            oc = elaborate_open(self.env, item)
            transcript.add(f"open {format_modexpr(oc.base)} .", "")
            for cmd, t, mod in oc.reduce_points:
                self._emit_red(transcript, cmd, t, mod)
            if oc.is_script and scripts:
                from .proof import replay_env
                try:
                    state = replay_env(oc, self.max_steps, self.cond_depth)
                except SpecError as exc:
                    transcript.add("", f"proof error: {exc}", ok=False)
                    all_closed = False
                else:
                    for line in state.report_lines():
                        transcript.add("", line)
                    all_closed &= state.closed
            transcript.add("close", "")
        return transcript, all_closed

    def _emit_red(self, transcript, cmd, t, mod):
        ctx = mod.context(self.max_steps, self.cond_depth)
        lines = []
        hook = (lambda ev: lines.append(format_step(mod.signature, ev))) if self.trace else None
        nf, stats = normalize(ctx, t, hook)
        text = "\n".join(lines + [format_result(mod.signature, nf)])
        transcript.add(cmd, text, stats)
