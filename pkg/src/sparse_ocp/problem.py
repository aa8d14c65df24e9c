"""The parametrized optimal control problem wrapped as quadrature integrands."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import pde
from .field import FieldSpec
from .sparse_quad import Integrand

TARGETS = ("z_mid", "control", "pair")


def synthetic_data(mesh: pde.Mesh, z_d=None) -> np.ndarray:
    """State at control z_d (default sin(pi x)) with kappa = 0 and f = 0."""
    if z_d is None:
        z_d = np.sin(np.pi * mesh.interior)
    return pde.solve_state(mesh, None, None, z=z_d, kappa=0.0)


@dataclass
class OptimalControlProblem:
    mesh: pde.Mesh
    spec: FieldSpec
    beta: float
    f: np.ndarray
    u_d: np.ndarray

    @classmethod
    def default(cls, n: int, spec: FieldSpec, beta: float = 1e-4, f=None) -> "OptimalControlProblem":
        mesh = pde.Mesh(n)
        f = np.zeros(mesh.n_interior) if f is None else np.asarray(f, dtype=float)
        return cls(mesh, spec, beta, f, synthetic_data(mesh))

    def solve(self, y) -> pde.StateAdjointPair:
        return pde.solve_optimality(self.mesh, self.spec, y, self.f, self.u_d, self.beta)

    def control(self, y) -> np.ndarray:
        return self.solve(y).control(self.beta)

    def integrand(self, target: str = "z_mid", x: float = 0.5) -> Integrand:
        """Quadrature target: z(x) at a mesh node, the control field, or the pair (u, v)."""
        if target == "z_mid":
            k = self.mesh.node_index(x)
            return Integrand(self.spec.dim, lambda y: float(self.control(y)[k]))
        if target == "control":
            return Integrand(self.spec.dim, self.control, lambda z: pde.l2_norm(self.mesh, z))
        if target == "pair":
            N = self.mesh.n_interior

            def evaluate(y):
                w = self.solve(y)
                return np.concatenate([w.u, w.v])

            def norm(uv):
                return math.sqrt(self.beta * pde.v_norm(self.mesh, uv[:N]) ** 2 + pde.v_norm(self.mesh, uv[N:]) ** 2)

            return Integrand(self.spec.dim, evaluate, norm)
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
