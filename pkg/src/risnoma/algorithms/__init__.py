"""Optimization algorithms for the joint beamforming problem."""
from .common import RunTrace
from .iao import (PowerBounds, bounds_from_gains, build_active_subproblem, closed_form_power,
                  power_feasibility_bounds, run_iao)
from .ibcd import run_ibcd
from .sca import ScaState, build_joint_program, find_feasible_init, solve_joint_sca

__all__ = [
    "RunTrace", "PowerBounds", "bounds_from_gains", "build_active_subproblem", "closed_form_power",
    "power_feasibility_bounds", "run_iao", "run_ibcd", "ScaState", "build_joint_program",
    "find_feasible_init", "solve_joint_sca",
]
