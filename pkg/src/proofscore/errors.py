"""Exception hierarchy shared by every layer of the engine."""


class SpecError(Exception):
    """Base class for all errors raised while loading or evaluating specifications."""


# kernel
class CyclicSubsorts(SpecError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cyclic subsort declarations: " + " < ".join(self.cycle))


class NonRegular(SpecError):
    def __init__(self, op, first, second):
        self.op, self.first, self.second = op, first, second
        super().__init__(f"signature is not regular for {op}: no least declaration among {first} and {second}")


class ArityMismatch(SpecError):
    pass


class UnknownSort(SpecError):
    pass


class IllSorted(SpecError):
    pass


class SortViolation(SpecError):
    pass


# rewriting
class ConditionDepthExceeded(SpecError):
    pass


class IllFormedEquation(SpecError):
    pass


# module algebra
class UnknownModule(SpecError):
    pass


class SymbolClash(SpecError):
    pass


class CyclicImport(SpecError):
    pass


class NotAMorphism(SpecError):
    pass


class ParameterMismatch(SpecError):
    pass


# parser
class ParseError(SpecError):
    """Syntax error with a source position and the set of tokens that would have been accepted."""

    def __init__(self, message, line=None, col=None, expected=()):
        self.line, self.col = line, col
        self.expected = tuple(expected)
        where = f"{line}:{col}: " if line is not None else ""
        extra = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(where + message + extra)


class AmbiguousParse(ParseError):
    def __init__(self, text, candidates, line=None, col=None):
        self.candidates = list(candidates)
        super().__init__(f"ambiguous term '{text}': " + " | ".join(self.candidates), line, col)


class UnresolvedToken(ParseError):
    pass


class UnsupportedFeature(ParseError):
    pass


# proof
class ProofError(SpecError):
    pass


class IllFormedTarget(ProofError):
    pass


class LooseSort(ProofError):
    pass


class NoFreeVariables(ProofError):
    pass


class NonGroundSplitTerm(ProofError):
    pass


class UnknownHypothesis(ProofError):
    pass


class UnknownGoal(ProofError):
    pass
