"""
Symbolic Package.

Basis-function expressions: parsing, evaluation, printing and basis sets.
"""
from app.symbolic.expr import (
    Expression,
    Constant,
    Variable,
    BinaryOp,
    Negate,
    Power,
    Function,
    parse,
    evaluate,
)
from app.symbolic.basis import BasisSet, BasisRole, print_combination, format_coefficient

__all__ = [
    "Expression",
    "Constant",
    "Variable",
    "BinaryOp",
    "Negate",
    "Power",
    "Function",
    "parse",
    "evaluate",
    "BasisSet",
    "BasisRole",
    "print_combination",
    "format_coefficient",
]
