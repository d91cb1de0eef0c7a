"""Estimated constants, automatic parameters and a coercivity probe.

The inverse and trace constants are computed from local generalized
eigenvalue problems. They feed the parameter rule, and the probe samples the
ratio B(x, x) / |||x|||^2 over random discrete fields.
"""
from slipstokes.analysis import coercivity_probe, estimate_constants, select_parameters
from slipstokes.assembly import ProblemConfig, make_spaces
from slipstokes.cases import cavity_mesh

for n in (4, 8, 16):
    mesh = cavity_mesh(n)
    spaces = make_spaces(mesh, 1)
    est = estimate_constants(mesh, spaces.pressure)
    print(f"n={n:3d}: C_in={est.C_in:.4f}  C_tr={est.C_tr:.4f}")
    for theta in (-1, 0, 1):
        beta, gamma0 = select_parameters(theta, est)
        cfg = ProblemConfig(theta=theta, gamma0=gamma0, beta=beta)
        m = coercivity_probe(mesh, spaces, cfg, n_samples=50)
        print(f"   theta={theta:2d}: beta={beta:.3e} gamma0={gamma0:.3e} probe min={m:.4g}")

mesh = cavity_mesh(8)
spaces = make_spaces(mesh, 1)
beta, _ = select_parameters(1, estimate_constants(mesh, spaces.pressure))
bad = coercivity_probe(mesh, spaces, ProblemConfig(theta=1, gamma0=1e-3, beta=beta), 50)
good = coercivity_probe(mesh, spaces, ProblemConfig(theta=1, gamma0=select_parameters(
    1, estimate_constants(mesh, spaces.pressure))[1], beta=beta), 50)
print(f"theta=1, gamma0=1e-3: probe min={bad:.4g}, versus {good:.4g} with the selected gamma0")
