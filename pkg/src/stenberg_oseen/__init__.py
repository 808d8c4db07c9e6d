"""Stabilized H(div) Stenberg/DG discretization of the steady Oseen equations in 2D."""

from .mesh import Mesh, MeshError, build_structured_mesh, mesh_hierarchy, refine_uniform
from .problem import ManufacturedSolution, OseenCoefficients, benchmark_solution, polynomial_solution

__version__ = "0.1.0"

__all__ = [
    "Mesh",
    "MeshError",
    "build_structured_mesh",
    "mesh_hierarchy",
    "refine_uniform",
    "ManufacturedSolution",
    "OseenCoefficients",
    "benchmark_solution",
    "polynomial_solution",
]
