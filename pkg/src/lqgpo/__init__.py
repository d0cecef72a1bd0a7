"""Frequency-domain LQG policy optimization toolkit."""

from .lqg import ClosedLoop, DynController, LqgPlant, LqrProblem
from .solvers import SolveReport
from .ss import RationalScalar, StateSpace

__all__ = [
    "ClosedLoop",
    "DynController",
    "LqgPlant",
    "LqrProblem",
    "RationalScalar",
    "SolveReport",
    "StateSpace",
]

__version__ = "0.1.0"
