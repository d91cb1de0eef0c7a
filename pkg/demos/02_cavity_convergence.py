"""Convergence of the P1/P1 scheme on the slip cavity.

Uses the skew-symmetric variant (theta = -1) with beta from the estimated
inverse constant. Expected rates: 1 in H1, 2 in L2 for the velocity, and
about 1.5 for the pressure.
"""
from slipstokes.analysis import convergence_study
from slipstokes.assembly import ProblemConfig
from slipstokes.cases import case_cavity2d, cavity_mesh

levels = (8, 16, 32, 64)
study = convergence_study(case_cavity2d(), ProblemConfig(theta=-1, gamma0=10.0), levels,
                          cavity_mesh, auto_beta=True)
print(f"beta chosen on each mesh: {study.configs[0].beta:.6g}")
print(study.to_csv())
