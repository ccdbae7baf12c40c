"""Multigrid V-cycle preconditioning for Crouzeix-Raviart discretizations
of elliptic problems with piecewise constant jump coefficients."""

from .assembly import CR, P1, DofMap, assemble_load, assemble_operator, local_stiffness_cr, local_stiffness_p1
from .krylov import PcgResult, SpectrumReport, dense_ba_spectrum, effective_condition, lanczos_spectrum, pcg
from .mesh import CoefficientField, SimplicialMesh, build_initial_mesh, evaluate_coefficient, refine_uniform
from .mgcycle import Hierarchy, MgConfig, MgPreconditioner, apply_error_propagation, build_hierarchy
from .transfer import cr_inclusion, p1_prolongation

__all__ = [
    "CR", "P1", "DofMap", "assemble_load", "assemble_operator", "local_stiffness_cr", "local_stiffness_p1",
    "PcgResult", "SpectrumReport", "dense_ba_spectrum", "effective_condition", "lanczos_spectrum", "pcg",
    "CoefficientField", "SimplicialMesh", "build_initial_mesh", "evaluate_coefficient", "refine_uniform",
    "Hierarchy", "MgConfig", "MgPreconditioner", "apply_error_propagation", "build_hierarchy",
    "cr_inclusion", "p1_prolongation",
]
