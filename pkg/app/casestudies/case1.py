"""
Two-regime algebraic example on [-2, 2]^2.

    y = x1^2 + x2^2   if x1^2 + x2^2 <= 2.5
    y = x1^2 + x2     otherwise
"""
from typing import Tuple

import numpy as np

from app.casestudies.truth import CaseTruth
from app.core.exceptions import UserError
from app.learning.dataset import Dataset

VARIABLES = ("x1", "x2")
DOMAIN = (-2.0, 2.0)
RADIUS_SQ = 2.5

BASIS_BRANCH = ("x1", "x2", "x1^2", "x2^2", "x1*x2")
BASIS_LEAF = ("1", "x1", "x2", "x1^2", "x2^2", "x1*x2")


def regime(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """0 inside the disk, 1 outside."""
    return np.where(np.asarray(x1) ** 2 + np.asarray(x2) ** 2 <= RADIUS_SQ, 0, 1)


def truth(x1, x2):
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    inside = x1 ** 2 + x2 ** 2 <= RADIUS_SQ
    return np.where(inside, x1 ** 2 + x2 ** 2, x1 ** 2 + x2)


def _dataset(X: np.ndarray, noise: float, rng: np.random.Generator) -> Dataset:
    y = truth(X[:, 0], X[:, 1])
    if noise > 0:
        y = y + rng.normal(0.0, noise, size=len(y))
    return Dataset(VARIABLES, X, y)


def gen_case1(
    n: int, seed: int = 0, domain: Tuple[float, float] = DOMAIN, noise: float = 0.0
) -> Dataset:
    """
    n points drawn uniformly from domain^2 with their true targets.

    Raises:
        UserError: n < 1 or negative noise
    """
    if n < 1:
        raise UserError(f"case 1 needs at least one point, got n={n}")
    if noise < 0:
        raise UserError("noise level must be non-negative")
    rng = np.random.default_rng(seed)
    X = rng.uniform(domain[0], domain[1], size=(n, 2))
    return _dataset(X, noise, rng)


def grid(points: int = 10, domain: Tuple[float, float] = DOMAIN) -> Dataset:
    """points x points uniform grid over the domain, x1 varying slowest."""
    axis = np.linspace(domain[0], domain[1], points)
    x1, x2 = np.meshgrid(axis, axis, indexing="ij")
    X = np.column_stack([x1.ravel(), x2.ravel()])
    return Dataset(VARIABLES, X, truth(X[:, 0], X[:, 1]))


TRUTH = CaseTruth(
    variables=VARIABLES,
    basis_branch=BASIS_BRANCH,
    basis_leaf=BASIS_LEAF,
    split=(0.0, 0.0, 1.0, 1.0, 0.0),
    threshold=RADIUS_SQ,
    leaves=((0.0, 0.0, 0.0, 1.0, 1.0, 0.0), (0.0, 0.0, 1.0, 1.0, 0.0, 0.0)),
    regime=lambda data: regime(data.column("x1"), data.column("x2")),
)
