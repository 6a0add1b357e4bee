"""Random terms over a flattened module, for property checks."""

import random

from proofscore.errors import SpecError
from proofscore.kernel import Var


class TermGen:
    def __init__(self, flat, seed=0, ground_bias=0.7):
        self.sig = flat.signature
        self.rng = random.Random(seed)
        self.bias = ground_bias
        self.ops = [d for d in self.sig.ops if d.arity]
        self.consts = [d for d in self.sig.ops if not d.arity]
        self.vars = {s: [Var(f"V{k}", s) for k in range(2)] for s in self.sig.sorts}

    def leaves(self, sort):
        leq = self.sig.poset.leq
        cs = [self.sig.make(d.name) for d in self.consts if leq(d.coarity, sort)]
        vs = [v for s, group in self.vars.items() if leq(s, sort) for v in group]
        if cs and (not vs or self.rng.random() < self.bias):
            return cs
        return vs

    def term(self, sort, depth):
        leq = self.sig.poset.leq
        ops = [d for d in self.ops if leq(d.coarity, sort)]
        if depth <= 0 or not ops or self.rng.random() < 0.25:
            return self.rng.choice(self.leaves(sort))
        if sort == "Bool" and self.rng.random() < 0.15:
            s = self.rng.choice(sorted(self.sig.sorts))
            return self._make("_=_", [self.term(s, depth - 1), self.term(s, depth - 1)], sort, depth)
        d = self.rng.choice(ops)
        return self._make(d.name, [self.term(s, depth - 1) for s in d.arity], sort, depth)

    def _make(self, name, args, sort, depth):
        try:
            return self.sig.make(name, args)
        except SpecError:
            return self.rng.choice(self.leaves(sort))
