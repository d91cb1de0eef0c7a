"""Quadrature on reference simplices.

Rules are conical (collapsed) Gauss-Jacobi products: positive weights, any
degree, and the one-point rule is the centroid.  The reference simplex has
vertices ``0, e_1, ..., e_d``; points are returned in barycentric
coordinates ``(lambda_0, ..., lambda_d)`` with ``lambda_0 = 1 - sum(x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_DEGREE = {1: 30, 2: 20, 3: 16}


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray   # (nq, dim + 1) barycentric
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def dim(self) -> int:
        return self.points.shape[1] - 1

    @property
    def cartesian(self) -> np.ndarray:
        return self.points[:, 1:]


def _gauss_jacobi01(m, alpha):
    # nodes/weights on [0, 1] for the weight (1 - s)^alpha
    x, w = roots_jacobi(m, alpha, 0.0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def quadrature_for(dim: int, degree: int) -> QuadratureRule:
    """Rule on the reference ``dim``-simplex exact for total degree ``degree``."""
    if dim not in MAX_DEGREE:
        raise ValueError(f"unsupported dimension {dim}")
    if degree < 0 or degree > MAX_DEGREE[dim]:
        raise ValueError(f"unsupported quadrature degree {degree} in {dim}D")
    m = max(1, math.ceil((degree + 1) / 2))
    factors = [_gauss_jacobi01(m, float(dim - 1 - a)) for a in range(dim)]
    grids = np.meshgrid(*[f[0] for f in factors], indexing="ij")
    wgrid = np.meshgrid(*[f[1] for f in factors], indexing="ij")
    u = [g.ravel() for g in grids]
    w = np.prod([g.ravel() for g in wgrid], axis=0)
    # collapse: x_a = u_a * prod_{b<a} (1 - u_b)
    x = np.empty((u[0].size, dim))
    scale = np.ones(u[0].size)
    for a in range(dim):
        x[:, a] = u[a] * scale
        scale = scale * (1.0 - u[a])
    bary = np.column_stack([1.0 - x.sum(axis=1), x])
    bary.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(bary, w, degree)


def reference_volume(dim: int) -> float:
    return 1.0 / math.factorial(dim)
