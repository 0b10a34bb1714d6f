"""
Exception Hierarchy.

Every error raised on purpose by the package derives from SymbolicTreeError.
User-facing errors also derive from ValueError so callers that only know
about ValueError keep working; the CLI maps them to exit code 1 and the API
to HTTP 400.
"""
from typing import Optional


class SymbolicTreeError(Exception):
    """Root of all package errors."""


class UserError(SymbolicTreeError, ValueError):
    """Bad input: malformed expressions, data, documents or configuration."""


# =============================================================================
# EXPRESSIONS
# =============================================================================

class ExpressionSyntaxError(UserError):
    """Expression text does not conform to the grammar."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UnknownIdentifierError(UserError):
    """Identifier is neither a declared variable nor a known function."""

    def __init__(self, token: str, offset: int):
        super().__init__(f"unknown identifier '{token}' at byte offset {offset}")
        self.token = token
        self.offset = offset


class UnboundVariableError(UserError):
    """A free variable of an expression has no value in the row."""

    def __init__(self, name: str):
        super().__init__(f"variable '{name}' is not bound")
        self.name = name


class ExpressionDomainError(UserError):
    """sqrt of a negative, log10 of a non-positive, division by zero or power overflow."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class FeaturizationError(UserError):
    """A basis function could not be evaluated on a dataset row."""

    def __init__(self, row: int, basis: str, reason: str):
        super().__init__(f"basis function '{basis}' failed on row {row}: {reason}")
        self.row = row
        self.basis = basis


# =============================================================================
# MODELS AND DOCUMENTS
# =============================================================================

class ModelBuildError(UserError):
    """Invalid variable or constraint definition, or invalid hyperparameters."""


class InvalidHandleError(ModelBuildError):
    """A VarId does not belong to the model."""


class SchemaError(UserError):
    """A tree document violates the schema or the tree invariants."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ConfigError(UserError):
    """An experiment configuration file is invalid."""


class EmptyDatasetError(UserError):
    """A dataset has no rows."""

    def __init__(self, what: str = "dataset"):
        super().__init__(f"empty {what}")


class NegativeLevelError(UserError):
    """A tank level was driven below zero."""


class InconsistencyError(SymbolicTreeError):
    """Solver output contradicts the formulation (indicates a solver bug)."""
