"""Sparse Gauss-Hermite quadrature for optimal control under lognormal diffusion."""
from .errors import NumericalError
from .field import FieldSpec, auto_rescale, kappa_eval, rho
from .multiindex import IndexSet, MultiIndex, is_downward_closed, leq, rectangle, reduced_forward_neighbors
from .pde import Mesh, StateAdjointPair, solve_optimality, solve_state, w_norm
from .problem import OptimalControlProblem
from .quad1d import UnivariateRule, apply_rule, gauss_hermite, hermite_bound_report, hermite_orthonormal
from .sparse_quad import (
    AdaptiveRun, EvalCache, Integrand, adaptive_construct, aposteriori_indicator, apriori_indicator, delta,
    sparse_quadrature,
)

__version__ = "0.1.0"
