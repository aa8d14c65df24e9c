"""P1 finite elements on (0, 1) for the parametrized state/adjoint optimality system.

All nodal vectors hold interior values only (homogeneous Dirichlet data).
The coupled system

    [ beta*A   M ] [u]   [ beta*M f ]
    [   -M     A ] [v] = [ -M u_d   ]

is solved with a banded LU after interleaving the unknowns (u_1, v_1, u_2, v_2, ...),
which gives three sub- and three super-diagonals.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solve_banded
from scipy.linalg.lapack import dgbsv

from .errors import NumericalError
from .field import FieldSpec

KAPPA_OVERFLOW = 700.0
POINCARE = 1.0 / math.pi
_GL = 1.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class Mesh:
    n: int

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("mesh needs at least 3 nodes")

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def interior(self) -> np.ndarray:
        return self.nodes[1:-1]

    @property
    def n_interior(self) -> int:
        return self.n - 2

    def gauss_points(self) -> np.ndarray:
        """Two Gauss-Legendre points per element, shape (n-1, 2)."""
        left = self.nodes[:-1]
        return left[:, None] + 0.5 * self.h * (1.0 + np.array([-_GL, _GL]))[None, :]

    def node_index(self, x: float) -> int:
        """Interior index of the node at exactly ``x``."""
        k = round(x * (self.n - 1))
        if not math.isclose(k * self.h, x, abs_tol=1e-14) or not 1 <= k <= self.n - 2:
            raise ValueError(f"x={x} is not an interior mesh node of a {self.n}-node mesh")
        return k - 1


@dataclass(frozen=True)
class SymTridiag:
    """Symmetric tridiagonal matrix stored as main diagonal and off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def toarray(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        out = self.diag * x
        out[:-1] += self.off * x[1:]
        out[1:] += self.off * x[:-1]
        return out

    def banded(self) -> np.ndarray:
        ab = np.zeros((3, len(self.diag)))
        ab[0, 1:] = self.off
        ab[1] = self.diag
        ab[2, :-1] = self.off
        return ab


@dataclass
class StateAdjointPair:
    u: np.ndarray
    v: np.ndarray
    mesh: Mesh

    def control(self, beta: float) -> np.ndarray:
        return -self.v / beta


@functools.lru_cache(maxsize=16)
def _gauss_modes(alpha: float, dim: int, basis, n: int) -> np.ndarray:
    spec = FieldSpec(alpha=alpha, dim=dim, rescale=1.0, basis=basis)
    x = Mesh(n).gauss_points().ravel()
    modes = spec.modes(x)
    modes.setflags(write=False)
    return modes


def kappa_at_gauss_points(mesh: Mesh, spec: FieldSpec, y) -> np.ndarray:
    """kappa sampled at the element Gauss points, shape (n-1, 2)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (spec.dim,):
        raise ValueError(f"parameter vector must have length {spec.dim}")
    modes = _gauss_modes(spec.alpha, spec.dim, spec.basis, mesh.n)
    nz = np.flatnonzero(y)
    kappa = modes[:, nz] @ y[nz] if len(nz) else np.zeros(modes.shape[0])
    return kappa.reshape(mesh.n - 1, 2)


def _element_coefficients(mesh: Mesh, kappa) -> np.ndarray:
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (mesh.n - 1, 2))
    if not np.all(np.isfinite(kappa)) or np.max(np.abs(kappa)) > KAPPA_OVERFLOW:
        raise NumericalError(f"|kappa| reaches {np.max(np.abs(kappa)):.4g}; exp(kappa) would overflow")
    e = np.exp(kappa)
    return 0.5 * (e[:, 0] + e[:, 1])


def assemble_stiffness(mesh: Mesh, spec: FieldSpec | None = None, y=None, kappa=None) -> SymTridiag:
    """Stiffness matrix of exp(kappa), with 2-point Gauss-Legendre on each element.

    ``kappa`` (scalar or Gauss-point array) overrides the field evaluation when given.
    """
    if kappa is None:
        kappa = kappa_at_gauss_points(mesh, spec, y)
    c = _element_coefficients(mesh, kappa) / mesh.h
    return SymTridiag(c[:-1] + c[1:], -c[1:-1])


def assemble_mass(mesh: Mesh) -> SymTridiag:
    N = mesh.n_interior
    return SymTridiag(np.full(N, 4.0 * mesh.h / 6.0), np.full(N - 1, mesh.h / 6.0))


def l2_norm(mesh: Mesh, x: np.ndarray) -> float:
    """L2 norm of the P1 function with interior nodal values x."""
    return math.sqrt(max(float(x @ (assemble_mass(mesh) @ x)), 0.0))


def v_norm(mesh: Mesh, x: np.ndarray) -> float:
    """H1 seminorm of the P1 function with interior nodal values x."""
    d = np.diff(np.concatenate(([0.0], x, [0.0])))
    return math.sqrt(float(d @ d) / mesh.h)


def _as_interior(mesh: Mesh, x) -> np.ndarray:
    if x is None:
        return np.zeros(mesh.n_interior)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return np.full(mesh.n_interior, float(x))
    if x.shape != (mesh.n_interior,):
        raise ValueError(f"expected {mesh.n_interior} interior values, got shape {x.shape}")
    return x


def solve_state(mesh: Mesh, spec: FieldSpec | None, y, z=None, f=None, kappa=None) -> np.ndarray:
    """Solve A u = M (f + z) for the interior state."""
    A = assemble_stiffness(mesh, spec, y, kappa)
    rhs = assemble_mass(mesh) @ (_as_interior(mesh, f) + _as_interior(mesh, z))
    try:
        return solve_banded((1, 1), A.banded(), rhs)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"state solve failed: {exc}") from exc


def optimality_banded(A: SymTridiag, M: SymTridiag, beta: float, lapack_rows: bool = False) -> np.ndarray:
    """Band storage (3, 3) of the interleaved block operator [beta A, M; -M, A].

    With ``lapack_rows`` three leading zero rows are added as LU fill-in workspace
    (the ``gbsv`` layout).
    """
    N = len(A.diag)
    pad = 3 if lapack_rows else 0
    full = np.zeros((7 + pad, 2 * N))
    ab = full[pad:]
    ab[3, 0::2] = beta * A.diag
    ab[3, 1::2] = A.diag
    ab[2, 1::2] = M.diag
    ab[4, 0::2] = -M.diag
    # row u_k
    ab[5, 0:2 * N - 2:2] = beta * A.off
    ab[4, 1:2 * N - 2:2] = M.off
    ab[1, 2::2] = beta * A.off
    ab[0, 3::2] = M.off
    # row v_k
    ab[6, 0:2 * N - 2:2] = -M.off
    ab[5, 1:2 * N - 2:2] = A.off
    ab[2, 2::2] = -M.off
    ab[1, 3::2] = A.off
    return full


def optimality_dense(A: SymTridiag, M: SymTridiag, beta: float) -> np.ndarray:
    """Block operator [beta A, M; -M, A] in the non-interleaved (u, v) layout."""
    a, m = A.toarray(), M.toarray()
    return np.block([[beta * a, m], [-m, a]])


def solve_optimality(mesh: Mesh, spec: FieldSpec | None, y, f, u_d, beta: float, kappa=None) -> StateAdjointPair:
    if beta <= 0:
        raise ValueError("beta must be positive")
    if kappa is None:
        kappa = kappa_at_gauss_points(mesh, spec, y)
    A = assemble_stiffness(mesh, kappa=kappa)
    M = assemble_mass(mesh)
    rhs = np.empty(2 * mesh.n_interior)
    rhs[0::2] = beta * (M @ _as_interior(mesh, f))
    rhs[1::2] = -(M @ _as_interior(mesh, u_d))
    _, _, sol, info = dgbsv(3, 3, optimality_banded(A, M, beta, lapack_rows=True), rhs,
                            overwrite_ab=True, overwrite_b=True)
    if info != 0 or not np.all(np.isfinite(sol)):
        knorm = float(np.max(np.abs(kappa)))
        raise NumericalError(f"optimality solve failed (gbsv info={info}, ||kappa||_inf = {knorm:.4g})")
    return StateAdjointPair(sol[0::2].copy(), sol[1::2].copy(), mesh)


def w_norm(w: StateAdjointPair, beta: float) -> float:
    """sqrt(beta ||u||_V^2 + ||v||_V^2) with the H1 seminorm."""
    return math.sqrt(beta * v_norm(w.mesh, w.u) ** 2 + v_norm(w.mesh, w.v) ** 2)


def apriori_bound(mesh: Mesh, spec, y, f, u_d, beta: float, kappa=None) -> float:
    """Right side C_P (sqrt(beta) ||f|| + ||u_d||) exp(||kappa||_inf)."""
    if kappa is None:
        kappa = kappa_at_gauss_points(mesh, spec, y)
    knorm = float(np.max(np.abs(kappa)))
    return POINCARE * (math.sqrt(beta) * l2_norm(mesh, _as_interior(mesh, f))
                       + l2_norm(mesh, _as_interior(mesh, u_d))) * math.exp(knorm)


def apriori_bound_check(w: StateAdjointPair, spec, y, f, u_d, beta: float, kappa=None) -> bool:
    return w_norm(w, beta) <= apriori_bound(w.mesh, spec, y, f, u_d, beta, kappa) * (1 + 1e-12)
