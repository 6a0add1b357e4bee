"""Order-sorted equational specifications, proof scores and a small proof assistant."""

from .errors import ParseError, ProofError, SpecError
from .modalg import Environment, FlatModule
from .session import Session

__all__ = ["Environment", "FlatModule", "ParseError", "ProofError", "Session", "SpecError"]
__version__ = "0.1.0"
