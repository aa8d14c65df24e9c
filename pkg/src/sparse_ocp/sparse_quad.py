"""Sparse Gauss-Hermite quadrature on downward-closed index sets and its adaptive construction.

Quadrature nodes are identified by keys rather than coordinates: a key is the
sorted tuple of ``(dimension, level, ordinal)`` for every dimension whose node
is nonzero. Dimensions at level 0 sit at y = 0, and so does the middle node of
every odd rule, so those are left out of the key; any two (level, ordinal)
descriptions of the same parameter vector therefore share one key.
"""
from __future__ import annotations

import csv
import heapq
import io
import itertools
import math
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

import numpy as np

from .field import FieldSpec, rho_vector
from .multiindex import IndexSet, MultiIndex, is_admissible
from .quad1d import MAX_POINTS, rule_for_level

LEVEL_CAP = MAX_POINTS - 1

NodeKey = tuple


def default_norm(value) -> float:
    return float(np.linalg.norm(value)) if np.ndim(value) else abs(float(value))


@dataclass
class Integrand:
    """Map y -> psi(y) on R^dim with a norm on its values."""

    dim: int
    evaluate: Callable[[np.ndarray], Any]
    norm: Callable[[Any], float] = default_norm


class IntegrandError(RuntimeError):
    def __init__(self, y: np.ndarray, cause: BaseException):
        nz = {int(j) + 1: float(y[j]) for j in np.flatnonzero(y)}
        super().__init__(f"integrand failed at y = {nz} (nonzero entries, 1-based): {cause}")
        self.y = y


class EvalCache:
    """Node key -> integrand value, with hit/miss counters.

    ``enabled=False`` turns it into a pass-through that still counts.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._store: dict[NodeKey, Any] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._store)

    def __contains__(self, key: NodeKey) -> bool:
        return key in self._store

    def get(self, key: NodeKey, psi: Integrand):
        if self.enabled:
            try:
                value = self._store[key]
            except KeyError:
                pass
            else:
                self.hits += 1
                return value
        y = node_vector(key, psi.dim)
        try:
            value = psi.evaluate(y)
        except Exception as exc:
            raise IntegrandError(y, exc) from exc
        with self._lock:
            self.misses += 1
            if self.enabled:
                self._store.setdefault(key, value)
        return value


def node_vector(key: NodeKey, dim: int) -> np.ndarray:
    y = np.zeros(dim)
    for j, level, k in key:
        y[j - 1] = rule_for_level(level).nodes[k]
    return y


def _difference_rule(j: int, level: int) -> list[list[tuple[tuple | None, float]]]:
    """Signed nodes of Q_level - Q_{level-1} in dimension j, as (key part, weight).

    Nodes come in groups: each +-x pair of a rule shares a group, the zero node
    is alone. Summing a group before adding it to the total makes the
    contributions of an odd integrand cancel exactly.
    """
    out = []
    for lv, sign in ((level, 1.0), (level - 1, -1.0)):
        if lv < 0:
            continue
        rule = rule_for_level(lv)
        m = len(rule)
        for k in range((m + 1) // 2):
            mirror = m - 1 - k
            group = []
            for kk in ((k,) if mirror == k else (k, mirror)):
                part = None if (kk == rule.center or lv == 0) else (j, lv, kk)
                group.append((part, sign * float(rule.weights[kk])))
            out.append(group)
    return out


def grid_keys(nu: MultiIndex) -> Iterable[NodeKey]:
    """Keys of the full tensor grid of the rules at levels nu."""
    per_dim = []
    for j, level in nu.items():
        rule = rule_for_level(level)
        per_dim.append([None if k == rule.center else (j, level, k) for k in range(len(rule))])
    for combo in itertools.product(*per_dim):
        yield tuple(p for p in combo if p is not None)


def _check_support(nu: MultiIndex, psi: Integrand) -> None:
    if nu.max_dim > psi.dim:
        raise ValueError(f"{nu!r} activates a dimension beyond {psi.dim}")


def delta(nu: MultiIndex, psi: Integrand, cache: EvalCache | None = None):
    """Tensorized difference quadrature of psi at multi-index nu.

    Summed one dimension at a time, so the result is exactly zero whenever psi
    is odd in one of the active coordinates.
    """
    _check_support(nu, psi)
    cache = cache if cache is not None else EvalCache()
    rules = [_difference_rule(j, level) for j, level in nu.items()]

    def nested(depth: int, key: tuple):
        if depth == len(rules):
            return cache.get(key, psi)
        total = None
        for group in rules[depth]:
            part_sum = None
            for part, w in group:
                term = w * nested(depth + 1, key if part is None else key + (part,))
                part_sum = term if part_sum is None else part_sum + term
            total = part_sum if total is None else total + part_sum
        return total

    return nested(0, ())


def sparse_quadrature(index_set: Iterable[MultiIndex], psi: Integrand, cache: EvalCache | None = None):
    """Sum of the difference quadratures over the index set, in its iteration order."""
    cache = cache if cache is not None else EvalCache()
    total = None
    for nu in index_set:
        d = delta(nu, psi, cache)
        total = d if total is None else total + d
    return total


def tensor_quadrature(levels: dict[int, int], psi: Integrand):
    """Plain tensor-product rule with the given per-dimension levels (others at 0)."""
    dims = sorted(levels)
    rules = [rule_for_level(levels[j]) for j in dims]
    total = None
    for combo in itertools.product(*(range(len(r)) for r in rules)):
        y = np.zeros(psi.dim)
        w = 1.0
        for j, rule, k in zip(dims, rules, combo):
            y[j - 1] = rule.nodes[k]
            w *= rule.weights[k]
        term = w * psi.evaluate(y)
        total = term if total is None else total + term
    return total


def apriori_indicator(nu: MultiIndex, spec: FieldSpec, rho: np.ndarray | None = None) -> float:
    """b_nu = prod_j sum_{l=0}^{r} C(nu_j, l) rho_j^(2l)."""
    if rho is None:
        rho = rho_vector(spec)
    b = 1.0
    for j, level in nu.items():
        r2 = rho[j - 1] ** 2
        b *= sum(math.comb(level, l) * r2 ** l for l in range(min(spec.r, level) + 1))
    return b


def aposteriori_indicator(nu: MultiIndex, psi: Integrand, cache: EvalCache | None = None) -> float:
    return psi.norm(delta(nu, psi, cache))


@dataclass
class HistoryRecord:
    step: int
    n_indices: int
    n_points_lambda: int
    n_points_lambda_bar: int
    selected: MultiIndex
    indicator: float
    value: Any


HISTORY_COLUMNS = ["step", "N_indices", "n_points_lambda", "n_points_lambda_bar",
                   "selected_index", "indicator_value"]


@dataclass
class AdaptiveRun:
    psi: Integrand
    mode: str
    index_set: IndexSet
    front: dict[MultiIndex, float]
    value: Any
    cache: EvalCache
    points_lambda: set
    points_bar: set
    history: list[HistoryRecord] = field(default_factory=list)
    front_deltas: dict[MultiIndex, Any] = field(default_factory=dict)

    @property
    def n_points_lambda(self) -> int:
        return len(self.points_lambda)

    @property
    def n_points_lambda_bar(self) -> int:
        return len(self.points_bar)

    def front_indices(self) -> list[MultiIndex]:
        return sorted(self.front)

    def reference_value(self):
        """Quadrature over Lambda united with its reduced forward neighbors."""
        total = self.value
        for mu in self.front_indices():
            d = self.front_deltas.get(mu)
            if d is None:
                d = delta(mu, self.psi, self.cache)
            total = total + d
        return total

    def recompute(self):
        """From-scratch quadrature over the current index set."""
        return sparse_quadrature(self.index_set, self.psi, self.cache)

    def max_levels(self, include_front: bool = True) -> dict[int, int]:
        levels: dict[int, int] = {}
        indices = list(self.index_set) + (list(self.front) if include_front else [])
        for nu in indices:
            for j, v in nu.items():
                levels[j] = max(levels.get(j, 0), v)
        return levels

    def history_csv(self, value_format: Callable[[Any], str] | None = None) -> str:
        scalar = np.ndim(self.value) == 0
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(HISTORY_COLUMNS + ["quadrature_value" if scalar else "value_norm"])
        for rec in self.history:
            v = float(rec.value) if scalar else self.psi.norm(rec.value)
            writer.writerow([rec.step, rec.n_indices, rec.n_points_lambda, rec.n_points_lambda_bar,
                             rec.selected.to_json(), fmt(rec.indicator), fmt(v)])
        return buf.getvalue()


def fmt(x: float) -> str:
    """17 significant digits, so values round-trip exactly."""
    return format(float(x), ".17g")


MODES = ("apriori", "aposteriori")


def adaptive_construct(psi: Integrand, spec: FieldSpec | None, mode: str, n_max: int,
                       tol: float | None = None, cache: EvalCache | None = None,
                       dim_cap: int | None = None, max_points: int | None = None) -> AdaptiveRun:
    """Greedy enrichment of a downward-closed set from its reduced forward neighbors.

    In ``apriori`` mode the front member with the smallest b_nu is taken; in
    ``aposteriori`` mode the one with the largest ||Delta_nu[psi]||. Ties go to
    the first index in canonical order. With ``tol`` set, the loop also stops once
    the best front indicator (||Delta||, or 1/b_nu in apriori mode) drops below it.
    ``max_points`` stops the loop once Lambda holds that many unique points.
    Indices needing more than the largest available univariate rule are never
    proposed.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if mode == "apriori" and spec is None:
        raise ValueError("apriori mode needs a FieldSpec")
    cache = cache if cache is not None else EvalCache()
    cap = dim_cap or (spec.dim if spec is not None else psi.dim)
    cap = min(cap, psi.dim)
    rho = rho_vector(spec) if spec is not None else None

    zero = MultiIndex.zero()
    lam = IndexSet()
    run = AdaptiveRun(psi=psi, mode=mode, index_set=lam, front={}, value=delta(zero, psi, cache),
                      cache=cache, points_lambda=set(grid_keys(zero)), points_bar=set(grid_keys(zero)))
    heap: list = []

    def push(mu: MultiIndex) -> None:
        if mode == "apriori":
            ind = apriori_indicator(mu, spec, rho)
            prio = ind
        else:
            d = delta(mu, psi, cache)
            run.front_deltas[mu] = d
            ind = psi.norm(d)
            prio = -ind
        run.front[mu] = ind
        run.points_bar.update(grid_keys(mu))
        heapq.heappush(heap, (prio, mu.sort_key(), mu))

    first_ind = apriori_indicator(zero, spec, rho) if mode == "apriori" else psi.norm(run.value)
    run.history.append(HistoryRecord(1, 1, 1, 1, zero, first_ind, run.value))
    if cap >= 1:
        push(MultiIndex.unit(1))
    run.history[0].n_points_lambda_bar = run.n_points_lambda_bar

    while len(lam) < n_max and heap:
        _, _, nu = heap[0]
        ind = run.front[nu]
        if tol is not None and (1.0 / ind if mode == "apriori" else ind) < tol:
            break
        if max_points is not None and run.n_points_lambda >= max_points:
            break
        heapq.heappop(heap)
        del run.front[nu]
        d = run.front_deltas.pop(nu, None)
        if d is None:
            d = delta(nu, psi, cache)
        old_jmax = lam.j_max
        lam.add(nu)
        run.value = run.value + d
        run.points_lambda.update(grid_keys(nu))

        limit = min(lam.j_max + 1, cap)
        for k in range(1, limit + 1):
            cand = nu.shifted(k, 1)
            if cand[k] > LEVEL_CAP:
                continue
            if cand not in run.front and cand not in lam and is_admissible(cand, lam):
                push(cand)
        if lam.j_max > old_jmax and lam.j_max + 1 <= cap:
            new = MultiIndex.unit(lam.j_max + 1)
            if new not in run.front:
                push(new)
        run.history.append(HistoryRecord(len(lam), len(lam), run.n_points_lambda, run.n_points_lambda_bar,
                                         nu, ind, run.value))
    return run
