"""
Basis Sets.

An ordered, immutable list of basis functions over a fixed variable universe,
used either for split expressions (branching set) or leaf expressions (leaf
set). Index k of phi_k never changes after construction.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence, Tuple

import numpy as np

from app.core.exceptions import (
    ExpressionDomainError,
    FeaturizationError,
    ModelBuildError,
    UnboundVariableError,
)
from app.symbolic.expr import Expression, parse


class BasisRole(str, Enum):
    """Which part of the tree a basis set parameterizes."""
    BRANCHING = "branching"
    LEAF = "leaf"


@dataclass(frozen=True)
class BasisSet:
    expressions: Tuple[Expression, ...]
    variables: Tuple[str, ...]
    role: BasisRole

    def __post_init__(self):
        universe = set(self.variables)
        for expression in self.expressions:
            missing = expression.variables() - universe
            if missing:
                raise ModelBuildError(
                    f"basis function '{expression}' uses undeclared variables {sorted(missing)}"
                )

    @classmethod
    def from_texts(
        cls, texts: Sequence[str], variables: Sequence[str], role: BasisRole
    ) -> "BasisSet":
        """Parse each text against the variable universe, keeping order."""
        return cls(
            expressions=tuple(parse(text, variables) for text in texts),
            variables=tuple(variables),
            role=role,
        )

    def __len__(self) -> int:
        return len(self.expressions)

    def __iter__(self):
        return iter(self.expressions)

    def __getitem__(self, k: int) -> Expression:
        return self.expressions[k]

    @property
    def texts(self) -> Tuple[str, ...]:
        return tuple(e.to_text() for e in self.expressions)

    def index_of_variable(self, name: str) -> int:
        """Index of the member that is exactly the raw variable, or -1."""
        for k, expression in enumerate(self.expressions):
            if expression.raw_variable() == name:
                return k
        return -1

    def featurize(self, columns: Mapping[str, np.ndarray], n_rows: int) -> np.ndarray:
        """
        Build the feature matrix Phi with Phi[i, k] = phi_k(x_i).

        Args:
            columns: Variable name -> column of values (length n_rows)
            n_rows: Number of rows

        Returns:
            Array of shape (n_rows, len(self)), row and column order preserved

        Raises:
            FeaturizationError: Naming the first failing row and basis function
        """
        phi = np.empty((n_rows, len(self.expressions)), dtype=float)
        for k, expression in enumerate(self.expressions):
            try:
                values = expression.evaluate_columns(columns)
            except ExpressionDomainError as e:
                raise FeaturizationError(e.index or 0, expression.to_text(), str(e)) from e
            except UnboundVariableError as e:
                raise FeaturizationError(0, expression.to_text(), str(e)) from e
            phi[:, k] = np.broadcast_to(values, (n_rows,))
        return phi

    def evaluate_row(self, row: Mapping[str, float]) -> np.ndarray:
        return np.array([e.evaluate(row) for e in self.expressions], dtype=float)


def format_coefficient(value: float, digits: int = 4) -> str:
    text = f"{value:.{digits}g}"
    return "0" if text in ("-0", "0") else text


def print_combination(
    coeffs: Sequence[float], basis: BasisSet, tol: float = 0.0, digits: int = 4
) -> str:
    """
    Render sum_k c_k * phi_k with signs folded, e.g. "3.4*log10(M) - 11.28".

    Terms with |c_k| <= tol are omitted; an empty sum renders as "0".

    Raises:
        ValueError: Coefficient count differs from the basis size
    """
    if len(coeffs) != len(basis):
        raise ValueError(
            f"coefficient vector has length {len(coeffs)}, basis has {len(basis)} members"
        )
    if tol < 0:
        raise ValueError("tol must be non-negative")
    parts = []
    for coefficient, expression in zip(coeffs, basis.expressions):
        coefficient = float(coefficient)
        if abs(coefficient) <= tol:
            continue
        magnitude = format_coefficient(abs(coefficient), digits)
        if magnitude == "0":
            continue
        if expression.is_constant_one():
            term = magnitude
        else:
            body = expression.to_text()
            if expression.precedence <= 1:
                body = f"({body})"
            term = body if magnitude == "1" else f"{magnitude}*{body}"
        negative = coefficient < 0
        if not parts:
            parts.append(f"-{term}" if negative else term)
        else:
            parts.append(f"- {term}" if negative else f"+ {term}")
    return " ".join(parts) if parts else "0"


def print_piecewise(pieces: Sequence[Tuple[str, Sequence[str]]]) -> str:
    """
    Render (expression, conditions) pieces, left to right, as
    "f(x) if <conditions>, otherwise g(x)".

    The last piece takes "otherwise". Two pieces share one line; with more,
    each piece gets its own line.

    Raises:
        ValueError: No pieces
    """
    if not pieces:
        raise ValueError("piecewise expression needs at least one piece")
    if len(pieces) == 1:
        return pieces[0][0]
    parts = [f"{expression} if {' and '.join(conditions)}" for expression, conditions in pieces[:-1]]
    parts.append(f"otherwise {pieces[-1][0]}")
    return (", " if len(parts) == 2 else ",\n").join(parts)
