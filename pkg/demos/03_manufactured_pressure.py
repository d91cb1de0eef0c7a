"""A manufactured solution with nonzero pressure.

The cavity solution has p = 0, which hides pressure errors. This case has a
genuine pressure field, so the pressure rate becomes visible.
"""
from slipstokes.analysis import convergence_study
from slipstokes.assembly import ProblemConfig
from slipstokes.cases import case_manufactured_pressure2d, cavity_mesh

for degree in (1, 2):
    study = convergence_study(case_manufactured_pressure2d(), ProblemConfig(degree=degree),
                              (4, 8, 16, 32), cavity_mesh, auto_beta=True)
    print(f"P{degree}/P{degree}")
    for r in study.reports:
        op = r.orders["err_p_L2"]
        print(f"  h={r.h:.4f}  |p-ph|={r.err_p_L2:.3e}  order "
              + ("---" if op is None else f"{op:.2f}"))
