"""
Interacting Two-Tank System.

    dh1/dt = F1 - Cv*sqrt(|h1-h2|)                   if h1 > h2
             F1 + Cv*sqrt(|h1-h2|)                   otherwise
    dh2/dt = F2 + Cv*sqrt(|h1-h2|) - Cv2*sqrt(h2)    if h1 > h2
             F2 - Cv*sqrt(|h1-h2|) - Cv2*sqrt(h2)    otherwise

with A1 = 1 and Cv = Cv2 = 0.5. Inflows are piecewise constant and held
over each integration step.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.casestudies.truth import CaseTruth
from app.core.exceptions import NegativeLevelError, UserError
from app.learning.dataset import CSV_FLOAT_FORMAT, Dataset

logger = logging.getLogger(__name__)

AREA = 1.0
CV = 0.5
CV2 = 0.5
NEGATIVE_LEVEL_TOL = -1e-9

STATE_NAMES = ("h1", "h2")
INPUT_NAMES = ("F1", "F2")
VARIABLES = STATE_NAMES + INPUT_NAMES

BASIS_BRANCH = ("h1 - h2", "h1", "h2", "F1")
BASIS_LEAF = ("1", "sqrt(abs(h1 - h2))", "sqrt(h2)", "F1")

TRAIN_INITIAL = (0.2, 1.5)
TRAIN_T_END = 8.0
TEST_INITIAL = (0.1, 1.2)
TEST_T_END = 20.0
DT = 0.1

# learned right-hand side for dh1/dt: (h1, h2, F1, F2) -> value
Dh1Model = Callable[[float, float, float, float], float]


@dataclass(frozen=True)
class FlowSchedule:
    """Piecewise-constant inflows; segment k holds from its start until the next one."""
    segments: Tuple[Tuple[float, float, float], ...]  # (start, F1, F2)

    def __post_init__(self):
        if not self.segments:
            raise UserError("flow schedule needs at least one segment")
        starts = [s[0] for s in self.segments]
        if starts[0] != 0.0:
            raise UserError("flow schedule must start at t = 0")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise UserError("flow schedule start times must be increasing")
        if any(f1 < 0 or f2 < 0 for _, f1, f2 in self.segments):
            raise UserError("flow levels must be non-negative")

    @classmethod
    def from_levels(cls, starts: Sequence[float], f1: Sequence[float], f2: Sequence[float]) -> "FlowSchedule":
        if not len(starts) == len(f1) == len(f2):
            raise UserError("flow schedule columns differ in length")
        return cls(tuple((float(s), float(a), float(b)) for s, a, b in zip(starts, f1, f2)))

    @classmethod
    def constant(cls, f1: float, f2: float) -> "FlowSchedule":
        return cls(((0.0, float(f1), float(f2)),))

    def at(self, t: float) -> Tuple[float, float]:
        current = self.segments[0]
        for segment in self.segments:
            if segment[0] <= t + 1e-9:
                current = segment
            else:
                break
        return current[1], current[2]


DEFAULT_SCHEDULE = FlowSchedule.from_levels(
    starts=(0.0, 2.0, 4.0, 6.0), f1=(1.0, 0.2, 1.4, 0.6), f2=(0.3, 1.2, 0.1, 0.9)
)
TEST_SCHEDULE = FlowSchedule.from_levels(
    starts=(0.0, 4.0, 8.0, 12.0, 16.0),
    f1=(0.5, 1.2, 0.3, 0.9, 0.1),
    f2=(0.8, 0.2, 1.1, 0.4, 0.7),
)


# =============================================================================
# RIGHT-HAND SIDE
# =============================================================================

def _coupling(h1: float, h2: float) -> float:
    return CV * np.sqrt(abs(h1 - h2))


def _dh1(h1: float, h2: float, f1: float) -> float:
    flow = _coupling(h1, h2)
    return (f1 - flow) / AREA if h1 > h2 else (f1 + flow) / AREA


def _dh2(h1: float, h2: float, f2: float) -> float:
    flow = _coupling(h1, h2)
    outflow = CV2 * np.sqrt(max(h2, 0.0))
    return (f2 + flow - outflow) / AREA if h1 > h2 else (f2 - flow - outflow) / AREA


def two_tank_rhs(h1: float, h2: float, f1: float, f2: float) -> Tuple[float, float]:
    """
    Level derivatives (dh1/dt, dh2/dt).

    Raises:
        NegativeLevelError: A level below -1e-9
    """
    if h1 < NEGATIVE_LEVEL_TOL or h2 < NEGATIVE_LEVEL_TOL:
        raise NegativeLevelError(f"negative tank level: h1={h1!r}, h2={h2!r}")
    return float(_dh1(h1, h2, f1)), float(_dh2(h1, h2, f2))


def _rk4_step(f: Callable[[np.ndarray], np.ndarray], state: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(state)
    k2 = f(state + 0.5 * dt * k1)
    k3 = f(state + 0.5 * dt * k2)
    k4 = f(state + dt * k3)
    return state + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0


# =============================================================================
# TRAJECTORIES
# =============================================================================

@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray  # (n,)
    states: np.ndarray  # (n, 2) h1, h2
    inputs: np.ndarray  # (n, 2) F1, F2
    derivatives: np.ndarray  # (n, 2) dh1/dt, dh2/dt at the stored states and inputs

    def __post_init__(self):
        n = len(self.t)
        if any(len(arr) != n for arr in (self.states, self.inputs, self.derivatives)):
            raise UserError("trajectory columns differ in length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise UserError("trajectory time grid must be increasing")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def h1(self) -> np.ndarray:
        return self.states[:, 0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.t,
            "h1": self.states[:, 0],
            "h2": self.states[:, 1],
            "F1": self.inputs[:, 0],
            "F2": self.inputs[:, 1],
            "dh1": self.derivatives[:, 0],
            "dh2": self.derivatives[:, 1],
        })

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)

    def dataset(self, target: str = "dh1") -> Dataset:
        """Training rows: h1, h2, F1, F2 against one derivative column."""
        column = {"dh1": 0, "dh2": 1}.get(target)
        if column is None:
            raise UserError(f"unknown derivative target '{target}'")
        X = np.column_stack([self.states, self.inputs])
        return Dataset(VARIABLES, X, self.derivatives[:, column])


def _time_grid(t_end: float, dt: float) -> np.ndarray:
    if dt <= 0:
        raise UserError(f"time step must be positive, got {dt}")
    if t_end < 0:
        raise UserError(f"end time must be non-negative, got {t_end}")
    steps = int(round(t_end / dt))
    return np.arange(steps + 1) * dt


def simulate_two_tank(
    initial: Tuple[float, float],
    schedule: FlowSchedule = DEFAULT_SCHEDULE,
    t_end: float = TRAIN_T_END,
    dt: float = DT,
) -> Trajectory:
    """
    Integrate the true system with classic RK4.

    Derivative targets are exact right-hand-side values at every grid point.

    Raises:
        NegativeLevelError: A level dropped below -1e-9, with time and state
    """
    t = _time_grid(t_end, dt)
    states = np.empty((len(t), 2))
    inputs = np.empty((len(t), 2))
    derivatives = np.empty((len(t), 2))
    state = np.array(initial, dtype=float)
    for k, tk in enumerate(t):
        if np.any(state < NEGATIVE_LEVEL_TOL):
            raise NegativeLevelError(
                f"tank level went negative at t={tk:.6g}: h1={state[0]!r}, h2={state[1]!r}"
            )
        f1, f2 = schedule.at(tk)
        states[k], inputs[k] = state, (f1, f2)
        derivatives[k] = two_tank_rhs(state[0], state[1], f1, f2)
        if k + 1 < len(t):
            state = _rk4_step(
                lambda s: np.array([_dh1(s[0], s[1], f1), _dh2(s[0], s[1], f2)]), state, dt
            )
    logger.debug(f"Simulated two-tank system: {len(t)} samples, dt={dt}")
    return Trajectory(t, states, inputs, derivatives)


def rollout(
    dh1_model: Dh1Model,
    initial: Tuple[float, float] = TEST_INITIAL,
    schedule: FlowSchedule = TEST_SCHEDULE,
    t_end: float = TEST_T_END,
    dt: float = DT,
    dh2_model: Optional[Dh1Model] = None,
) -> Trajectory:
    """
    Integrate with a learned dh1/dt coupled to the true dh2/dt.

    Levels are clipped at zero (an empty tank) instead of aborting, since a
    poor learned model may drain a tank.
    """
    def true_dh2(h1, h2, f1, f2):
        return _dh2(h1, h2, f2)

    dh2_model = dh2_model or true_dh2
    t = _time_grid(t_end, dt)
    states = np.empty((len(t), 2))
    inputs = np.empty((len(t), 2))
    derivatives = np.empty((len(t), 2))
    state = np.array(initial, dtype=float)

    def rhs(s: np.ndarray, f1: float, f2: float) -> np.ndarray:
        h1, h2 = max(s[0], 0.0), max(s[1], 0.0)
        return np.array([dh1_model(h1, h2, f1, f2), dh2_model(h1, h2, f1, f2)], dtype=float)

    for k, tk in enumerate(t):
        f1, f2 = schedule.at(tk)
        states[k], inputs[k] = state, (f1, f2)
        derivatives[k] = rhs(state, f1, f2)
        if k + 1 < len(t):
            state = np.maximum(_rk4_step(lambda s: rhs(s, f1, f2), state, dt), 0.0)
    return Trajectory(t, states, inputs, derivatives)


def true_dh1(h1: float, h2: float, f1: float, f2: float) -> float:
    return float(_dh1(h1, h2, f1))


def training_trajectory() -> Trajectory:
    return simulate_two_tank(TRAIN_INITIAL, DEFAULT_SCHEDULE, TRAIN_T_END, DT)


def validation_trajectory() -> Trajectory:
    return simulate_two_tank(TEST_INITIAL, TEST_SCHEDULE, TEST_T_END, DT)


TRUTH = CaseTruth(
    variables=VARIABLES,
    basis_branch=BASIS_BRANCH,
    basis_leaf=BASIS_LEAF,
    split=(1.0, 0.0, 0.0, 0.0),
    threshold=0.0,
    # regime 0: h1 - h2 < 0 (backflow into tank 1), regime 1: h1 - h2 >= 0
    leaves=((0.0, CV, 0.0, 1.0), (0.0, -CV, 0.0, 1.0)),
    regime=lambda data: np.where(data.column("h1") - data.column("h2") < 0, 0, 1),
)
