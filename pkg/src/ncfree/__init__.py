"""Distributions of polynomials and rational functions in free random variables.

The pipeline linearizes an expression into a matrix pencil, computes the
operator-valued Cauchy transform of the pencil by free convolution, and
recovers the scalar density by Stieltjes inversion.
"""
from ._backend import COMPILED
from .cauchy import Atomic, Semicircular
from .convolve import evaluator_for_pencil
from .density import invert_stieltjes
from .linearize import pencil_for
from .ncexpr import parse

__all__ = ["COMPILED", "Atomic", "Semicircular", "evaluator_for_pencil", "invert_stieltjes", "pencil_for",
           "parse"]
__version__ = "0.1.0"
