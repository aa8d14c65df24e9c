"""Gauss-Hermite rules for the standard normal measure and orthonormal Hermite polynomials."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

MAX_POINTS = 200


@dataclass(frozen=True)
class UnivariateRule:
    level: int
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def center(self) -> int | None:
        """Ordinal of the node at exactly 0 (odd rules only)."""
        m = len(self.nodes)
        return m // 2 if m % 2 else None


def n_points(level: int) -> int:
    """m(0) = 1 and m(level) = level + 1."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    return level + 1


@functools.lru_cache(maxsize=None)
def _gauss_hermite(m: int) -> tuple[np.ndarray, np.ndarray]:
    # Jacobi matrix of the probabilists' Hermite recurrence.
    off = np.sqrt(np.arange(1.0, m))
    try:
        x = eigh_tridiagonal(np.zeros(m), off, eigvals_only=True)
    except LinAlgError as exc:
        raise RuntimeError(f"eigen-solve for the {m}-point Gauss-Hermite rule did not converge") from exc
    # Christoffel weights 1 / sum_k H_k(x)^2: positive sums, so tail weights keep
    # full relative accuracy instead of underflowing in the eigenvectors
    h_prev, h = np.zeros(m), np.ones(m)
    s = np.ones(m)
    for k in range(m - 1):
        h_prev, h = h, (x * h - math.sqrt(k) * h_prev) / math.sqrt(k + 1)
        s += h * h
    w = 1.0 / s
    # exact symmetry; the middle node of an odd rule becomes exactly 0
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    w = w / w.sum()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_hermite(m: int) -> UnivariateRule:
    """m-point Gauss-Hermite rule for N(0, 1), exact up to degree 2m - 1."""
    if not 1 <= m <= MAX_POINTS:
        raise ValueError(f"number of points must be in [1, {MAX_POINTS}], got {m}")
    x, w = _gauss_hermite(m)
    return UnivariateRule(level=m - 1, nodes=x, weights=w)


def rule_for_level(level: int) -> UnivariateRule:
    return gauss_hermite(n_points(level))


def hermite_orthonormal(l: int, y):
    """Orthonormal Hermite polynomial H_l under N(0, 1), via the three-term recurrence.

    Works elementwise on arrays.
    """
    if not 0 <= l <= 500:
        raise ValueError("degree must be in [0, 500]")
    y = np.asarray(y, dtype=float)
    h_prev = np.ones_like(y)
    if l == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = y.copy()
    for k in range(1, l):
        h_prev, h = h, (y * h - math.sqrt(k) * h_prev) / math.sqrt(k + 1)
    return h if h.ndim else float(h)


def apply_rule(rule: UnivariateRule, f):
    """Sum of f(node) * weight over the rule."""
    total = None
    for y, w in zip(rule.nodes, rule.weights):
        term = w * np.asarray(f(float(y)), dtype=float)
        total = term if total is None else total + term
    return total if np.ndim(total) else float(total)


def hermite_bound_table(nu_max: int, l_max: int) -> np.ndarray:
    """Array ``T[nu, l] = |Q_nu[H_l]|`` for 0 <= nu <= nu_max, 0 <= l <= l_max."""
    if nu_max > 50 or l_max > 500:
        raise ValueError("nu_max <= 50 and l_max <= 500 required")
    table = np.empty((nu_max + 1, l_max + 1))
    for nu in range(nu_max + 1):
        rule = rule_for_level(nu)
        h_prev = np.ones_like(rule.nodes)
        h = rule.nodes.copy()
        table[nu, 0] = abs(rule.weights @ h_prev)
        if l_max >= 1:
            table[nu, 1] = abs(rule.weights @ h)
        for k in range(1, l_max):
            h_prev, h = h, (rule.nodes * h - math.sqrt(k) * h_prev) / math.sqrt(k + 1)
            table[nu, k + 1] = abs(rule.weights @ h)
    return table


@dataclass
class HermiteBoundReport:
    table: np.ndarray
    max_value: float
    argmax: tuple[int, int]
    flagged: list[tuple[int, int, float]]

    def rows(self):
        for nu in range(self.table.shape[0]):
            for l in range(self.table.shape[1]):
                yield nu, l, float(self.table[nu, l])


def hermite_bound_report(nu_max: int, l_max: int, flag_above: float = 2.0) -> HermiteBoundReport:
    """Maximum of |Q_nu[H_l]| over the sweep; entries above ``flag_above`` are flagged."""
    table = hermite_bound_table(nu_max, l_max)
    idx = np.unravel_index(np.argmax(table), table.shape)
    flagged = [(int(a), int(b), float(table[a, b])) for a, b in zip(*np.nonzero(table > flag_above))]
    return HermiteBoundReport(table, float(table[idx]), (int(idx[0]), int(idx[1])), flagged)
