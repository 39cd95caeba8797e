"""Facility location on unit disk graphs: exact oracle, primal-dual baseline, box PTAS and the separator/portal quasi-PTAS."""
from .box_ptas import NetEnumerationInfeasible, solve_bounded
from .graph import CoincidentPointsError, UnitDiskGraph, build_udg
from .instance import FLInstance, FLSolution, evaluate, exact_solve, read_instance, write_instance
from .pipeline import RunConfig, RunReport, generate_instance, run_pipeline
from .estimator import UDGFacilityLocation

__all__ = [
    "CoincidentPointsError", "FLInstance", "FLSolution", "NetEnumerationInfeasible", "RunConfig", "RunReport",
    "UDGFacilityLocation", "UnitDiskGraph", "build_udg", "evaluate", "exact_solve", "generate_instance",
    "read_instance", "run_pipeline", "solve_bounded", "write_instance",
]
