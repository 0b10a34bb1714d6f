"""
Zero-shear viscosity of polymer melts against molecular weight.

    eta0 / eta_c = M / M_c           if M < M_c
                   (M / M_c)^3.4     otherwise

Targets are log10(eta0); molecular weights are sampled uniformly in log10 M.
"""
import math
from typing import Tuple

import numpy as np

from app.casestudies.truth import CaseTruth
from app.core.exceptions import UserError
from app.learning.dataset import Dataset

M_C = 31200.0
ETA_C = 1e4
ENTANGLED_EXPONENT = 3.4
LOG_M_RANGE = (3.0, 6.0)

VARIABLES = ("M",)
# M enters the bases in units of 10^6 g/mol so the LP stays well scaled
BASIS_BRANCH = ("log10(M)", "M/1e6")
BASIS_LEAF = ("1", "log10(M)", "M/1e6")


def intercepts(m_c: float = M_C, eta_c: float = ETA_C) -> Tuple[float, float]:
    """Intercepts of the two log-log branches (about -0.49 and -11.28 by default)."""
    log_mc, log_eta = math.log10(m_c), math.log10(eta_c)
    return log_eta - log_mc, log_eta - ENTANGLED_EXPONENT * log_mc


def log_viscosity(log_m, m_c: float = M_C, eta_c: float = ETA_C) -> np.ndarray:
    log_m = np.asarray(log_m, dtype=float)
    low, high = intercepts(m_c, eta_c)
    return np.where(log_m < math.log10(m_c), log_m + low, ENTANGLED_EXPONENT * log_m + high)


def gen_viscosity(
    n: int,
    m_c: float = M_C,
    eta_c: float = ETA_C,
    sigma: float = 0.0,
    seed: int = 0,
    log_range: Tuple[float, float] = LOG_M_RANGE,
) -> Dataset:
    """
    n molecular weights, log10 M uniform on log_range, targets log10(eta0)
    with N(0, sigma^2) noise added in log space.

    Raises:
        UserError: n < 2, negative sigma or non-positive constants
    """
    if n < 2:
        raise UserError(f"viscosity data needs at least two points, got n={n}")
    if sigma < 0:
        raise UserError("noise level must be non-negative")
    if m_c <= 0 or eta_c <= 0:
        raise UserError("M_c and eta_c must be positive")
    rng = np.random.default_rng(seed)
    M = 10.0 ** rng.uniform(log_range[0], log_range[1], size=n)
    y = log_viscosity(np.log10(M), m_c, eta_c)
    if sigma > 0:
        y = y + rng.normal(0.0, sigma, size=n)
    return Dataset(VARIABLES, M.reshape(-1, 1), y)


def _truth(m_c: float = M_C, eta_c: float = ETA_C) -> CaseTruth:
    low, high = intercepts(m_c, eta_c)
    return CaseTruth(
        variables=VARIABLES,
        basis_branch=BASIS_BRANCH,
        basis_leaf=BASIS_LEAF,
        split=(1.0, 0.0),
        threshold=math.log10(m_c),
        leaves=((low, 1.0, 0.0), (high, ENTANGLED_EXPONENT, 0.0)),
        regime=lambda data: np.where(np.log10(data.column("M")) < math.log10(m_c), 0, 1),
    )


TRUTH = _truth()
