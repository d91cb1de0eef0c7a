"""How well is u.n = 0 satisfied on the slip wall?

The slip condition is imposed weakly, so u.n is only small, not zero. This
measures the boundary L2 norm of u.n on the slip side of the cavity for
several penalty values and both variants.
"""
from slipstokes.analysis import estimate_constants, select_parameters, slip_violation
from slipstokes.assembly import ProblemConfig, make_spaces
from slipstokes.cases import case_cavity2d, cavity_mesh
from slipstokes.linsolve import solve_stokes

case = case_cavity2d()
levels = (8, 16, 32)
print("theta  gamma0   " + "  ".join(f"n={n:<8d}" for n in levels))
for theta in (-1, 1):
    for gamma0 in (1e-3, 1.0, 1e3):
        row = []
        for n in levels:
            mesh = cavity_mesh(n)
            spaces = make_spaces(mesh, 1)
            beta, _ = select_parameters(theta, estimate_constants(mesh, spaces.pressure))
            sol = solve_stokes(mesh, ProblemConfig(theta=theta, gamma0=gamma0, beta=beta), case,
                               spaces)
            row.append(slip_violation(sol.velocity, case.g))
        print(f"{theta:5d}  {gamma0:7.0e}  " + "  ".join(f"{v:.3e}  " for v in row))
print("theta = 1 needs a large gamma0; with a tiny penalty its values are erratic.")
