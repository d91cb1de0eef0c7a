"""Stabilized equal-order finite elements for Stokes flow with Nitsche slip walls."""
__version__ = "0.1.0"

from .mesh import (BoundaryTag, DegenerateCellError, MeshError, MeshFormatError, MeshIndexError,
                   OpenBoundaryError, SimplicialMesh, from_cells, generate_structured_cube,
                   generate_structured_square, load_mesh, read_mesh, save_mesh, write_mesh)
from .quadrature import QuadratureRule, quadrature_for
from .femspace import DiscreteField, FunctionSpace, LagrangeElement, interpolate
from .assembly import (AssembledSystem, CaseDefinition, ExactSolution, ProblemConfig, Spaces,
                       apply_operator, assemble, bilinear_value, make_spaces)
from .linsolve import (SingularSystemError, SolveReport, StokesSolution, solve_direct,
                       solve_iterative, solve_stokes)
from .analysis import (ConstantEstimates, ErrorReport, coercivity_probe, convergence_orders,
                       convergence_study, error_norms, estimate_constants, norm_matrix,
                       select_parameters, slip_violation, triple_norm)
from .cases import BuiltinCase, get_case
from .vtk import write_vtk

__all__ = [name for name in dir() if not name.startswith("_")]
