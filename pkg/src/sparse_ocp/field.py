"""Lognormal diffusion parametrization kappa(x, y) = sum_j y_j kappa_j(x) and its rho-weights."""
from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np


def sine_basis(j: np.ndarray, x: np.ndarray, alpha: float) -> np.ndarray:
    """kappa_j(x) = j^-alpha sin(pi j x) / 2, broadcast over j and x."""
    return j ** (-alpha) * np.sin(np.pi * j * x) / 2.0


@dataclass(frozen=True)
class FieldSpec:
    alpha: float = 2.0
    dim: int = 257
    epsilon: float = 0.1
    r: int = 2
    rescale: Union[float, str] = 1.0
    basis: Callable[[np.ndarray, np.ndarray, float], np.ndarray] = dataclasses.field(
        default=sine_basis, compare=True, repr=False
    )

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.r < 1:
            raise ValueError("r must be a positive integer")
        if self.rescale != "auto" and not (isinstance(self.rescale, (int, float)) and self.rescale > 0):
            raise ValueError("rescale must be a positive number or 'auto'")

    def resolved(self) -> "FieldSpec":
        """Spec with a numeric rescale factor."""
        if self.rescale == "auto":
            return auto_rescale(dataclasses.replace(self, rescale=1.0))
        return self

    def modes(self, x) -> np.ndarray:
        """Matrix of kappa_j(x_i), shape (len(x), dim)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        j = np.arange(1, self.dim + 1, dtype=float)
        return self.basis(j[None, :], x[:, None], self.alpha)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "dim": self.dim, "epsilon": self.epsilon, "r": self.r, "rescale": self.rescale}

    @classmethod
    def from_dict(cls, d: dict) -> "FieldSpec":
        rescale = d.get("rescale", 1.0)
        if rescale != "auto":
            rescale = float(rescale)
        return cls(alpha=float(d["alpha"]), dim=int(d["dim"]), epsilon=float(d.get("epsilon", 0.1)),
                   r=int(d.get("r", 2)), rescale=rescale)


def kappa_eval(spec: FieldSpec, x, y) -> np.ndarray | float:
    """kappa(x, y) for a parameter vector of length dim."""
    y = np.asarray(y, dtype=float)
    if y.shape != (spec.dim,):
        raise ValueError(f"parameter vector must have length {spec.dim}")
    out = spec.modes(x) @ y
    return out if np.ndim(x) else float(out[0])


def rho(spec: FieldSpec, j: int) -> float:
    """rho_j = rescale * j^(alpha - 1 - epsilon)."""
    if not 1 <= j <= spec.dim:
        raise ValueError(f"dimension {j} outside 1..{spec.dim}")
    s = spec.resolved()
    return s.rescale * j ** (spec.alpha - 1.0 - spec.epsilon)


def rho_vector(spec: FieldSpec) -> np.ndarray:
    s = spec.resolved()
    j = np.arange(1, spec.dim + 1, dtype=float)
    return s.rescale * j ** (spec.alpha - 1.0 - spec.epsilon)


def default_grid_points(spec: FieldSpec) -> int:
    return max(101, 10 * spec.dim + 1)


def estimate_K(spec: FieldSpec, grid_points: int | None = None) -> float:
    """Grid estimate of sup_x sum_j rho_j |kappa_j(x)|."""
    grid_points = grid_points or default_grid_points(spec)
    x = np.linspace(0.0, 1.0, grid_points)
    rho_ = rho_vector(spec)
    # chunked to bound memory for large dim
    best = 0.0
    for chunk in np.array_split(x, max(1, grid_points * spec.dim // 2_000_000 + 1)):
        best = max(best, float(np.max(np.abs(spec.modes(chunk)) @ rho_)))
    return best


def budget(r: int) -> float:
    """C_r = ln 2 / sqrt(r)."""
    return math.log(2.0) / math.sqrt(r)


@functools.lru_cache(maxsize=64)
def auto_rescale(spec: FieldSpec, grid_points: int | None = None) -> FieldSpec:
    """Choose rescale so that the (grid) K sits at 99% of ln 2 / sqrt(r)."""
    grid_points = grid_points or default_grid_points(spec)
    if grid_points < 101:
        raise ValueError("grid_points must be >= 101")
    base = dataclasses.replace(spec, rescale=1.0)
    K = estimate_K(base, grid_points)
    if K == 0.0:
        raise ValueError("degenerate field: K = 0")
    return dataclasses.replace(spec, rescale=0.99 * budget(spec.r) / K)
