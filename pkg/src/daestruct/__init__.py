"""Structural analysis and implicit index reduction for polynomial DAEs.

The package analyzes square systems F(t, x, x', ..., x^(l)) = 0: it builds
the signature matrix and solves the offset assignment problem, prolongs the
system into block-triangular form, finds real witness points of the
algebraic constraints by homotopy continuation, detects symbolic and
numerical degeneration of the top-block Jacobian, restores regularity by
implicit index reduction, and integrates the result with a predict-project
scheme.  The `daestruct` CLI drives the whole pipeline on .dae input files.
"""

from .errors import DaestructError
from .expr import Binding, Expr, JetVar
from .system import DaeSystem
from .tape import BACKEND

__version__ = "0.1.0"

__all__ = ["Binding", "DaeSystem", "DaestructError", "Expr", "JetVar", "BACKEND"]
