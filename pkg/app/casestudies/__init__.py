"""
Case Studies Package.

Ground-truth data generators: the two-regime algebraic example, the
interacting two-tank system and the polymer viscosity scaling law.
"""
from app.casestudies import case1, two_tank, viscosity
from app.casestudies.case1 import gen_case1
from app.casestudies.truth import CaseTruth
from app.casestudies.two_tank import FlowSchedule, Trajectory, simulate_two_tank, two_tank_rhs
from app.casestudies.viscosity import gen_viscosity

TRUTHS = {
    "case1": case1.TRUTH,
    "two-tank": two_tank.TRUTH,
    "viscosity": viscosity.TRUTH,
}

__all__ = [
    "case1",
    "two_tank",
    "viscosity",
    "gen_case1",
    "CaseTruth",
    "FlowSchedule",
    "Trajectory",
    "simulate_two_tank",
    "two_tank_rhs",
    "gen_viscosity",
    "TRUTHS",
]
