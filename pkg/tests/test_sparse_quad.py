import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sparse_ocp.field import FieldSpec, rho_vector
from sparse_ocp.multiindex import IndexSet, MultiIndex, rectangle, reduced_forward_neighbors
from sparse_ocp.problem import OptimalControlProblem
from sparse_ocp.quad1d import hermite_orthonormal
from sparse_ocp.sparse_quad import (
    HISTORY_COLUMNS, EvalCache, Integrand, IntegrandError, adaptive_construct, aposteriori_indicator,
    apriori_indicator, delta, grid_keys, sparse_quadrature, tensor_quadrature,
)

from conftest import downward_closed_sets, gaussian_moment

Z = MultiIndex.zero()
e = MultiIndex.unit


def monomial(nu: MultiIndex, dim: int) -> Integrand:
    return Integrand(dim, lambda y: math.prod(y[j - 1] ** k for j, k in nu.items()))


def exp_integrand(dim=4):
    c = 2.0 ** -np.arange(1, dim + 1)
    return Integrand(dim, lambda y: math.exp(float(c @ y)))


EXP_EXACT = math.exp(0.5 * sum(4.0 ** -j for j in range(1, 5)))


def tensor_set(level: int) -> IndexSet:
    full = [MultiIndex({1: a, 2: b}) for a in range(level + 1) for b in range(level + 1)]
    return IndexSet(sorted(full, key=lambda nu: (nu.order(), nu)))


def test_exp_constant():
    assert 0.5 * sum(4.0 ** -j for j in range(1, 5)) == 0.166015625


def test_delta_examples():
    psi = Integrand(3, lambda y: 3.0 + y[0])
    assert delta(Z, psi) == 3.0
    assert delta(e(1), Integrand(1, lambda y: y[0])) == pytest.approx(0.0, abs=1e-15)
    assert delta(e(1), Integrand(1, lambda y: y[0] ** 2)) == pytest.approx(1.0, abs=1e-14)


def test_delta_rejects_dimension_beyond_integrand():
    with pytest.raises(ValueError):
        delta(e(3), Integrand(2, lambda y: 1.0))


def test_sparse_quadrature_examples():
    psi = Integrand(2, lambda y: 1.0 + y[0] ** 2 * y[1] ** 2)
    assert sparse_quadrature(IndexSet(), psi) == 1.0
    lam = IndexSet([e(1), e(2), e(1, 2), e(1) + e(2), e(2, 2)])
    sq = Integrand(2, lambda y: y[0] ** 2 * y[1] ** 2)
    assert sparse_quadrature(lam, sq) == pytest.approx(1.0, abs=1e-13)


@pytest.mark.parametrize("nu, expected", [
    (Z, lambda r: 1.0),
    (e(3), lambda r: 1 + r[2] ** 2),
    (e(2, 2), lambda r: 1 + 2 * r[1] ** 2 + r[1] ** 4),
])
def test_apriori_indicator_examples(nu, expected):
    spec = FieldSpec(alpha=2.0, dim=5, r=2)
    assert apriori_indicator(nu, spec) == pytest.approx(expected(rho_vector(spec)), rel=1e-14)


def test_apriori_indicator_truncates_at_r():
    spec = FieldSpec(alpha=2.0, dim=3, r=1)
    r2 = rho_vector(spec)[0] ** 2
    assert apriori_indicator(e(1, 5), spec) == pytest.approx(1 + 5 * r2)


def test_aposteriori_indicator_examples():
    const = Integrand(3, lambda y: 2.5)
    for nu in (e(1), e(2, 3), e(1) + e(3)):
        assert aposteriori_indicator(nu, const) <= 1e-14
    assert aposteriori_indicator(e(1), Integrand(1, lambda y: y[0] ** 2)) == pytest.approx(1.0)
    cubic = Integrand(2, lambda y: y[0] ** 3 + y[0] * y[1] ** 2)
    for nu in (e(1, 2), e(1, 3), MultiIndex({1: 2, 2: 2}), e(2, 2)):
        assert aposteriori_indicator(nu, cubic) <= 1e-12


def test_vector_valued_delta():
    psi = Integrand(2, lambda y: np.array([y[0] ** 2, y[1] ** 2, 1.0]))
    np.testing.assert_allclose(delta(e(1), psi), [1.0, 0.0, 0.0], atol=1e-14)


def test_zero_nodes_share_keys():
    keys1 = set(grid_keys(e(1, 2)))
    assert () in keys1 and len(keys1) == 3
    assert set(grid_keys(Z)) == {()}
    psi_calls = []
    psi = Integrand(2, lambda y: psi_calls.append(tuple(y)) or 1.0)
    cache = EvalCache()
    sparse_quadrature(IndexSet([e(1), e(1, 2)]), psi, cache)
    # points: origin, two level-1 nodes, two nonzero level-2 nodes
    assert len(cache) == 5 and len(psi_calls) == 5
    assert len(set(psi_calls)) == 5


@given(lam=downward_closed_sets(max_dim=3, max_size=20), data=st.data())
def test_exactness_on_downward_closed_sets(lam, data):
    nu = data.draw(st.sampled_from(lam.members))
    exact = math.prod(gaussian_moment(k) for _, k in nu.items())
    got = sparse_quadrature(lam, monomial(nu, 3))
    assert abs(got - exact) <= 1e-11 * max(1.0, abs(exact))


@given(lam=downward_closed_sets(max_dim=3, max_size=20), data=st.data())
def test_rectangle_bound(lam, data):
    nu = data.draw(st.sampled_from(lam.members))
    if math.prod(1 + v for _, v in nu.items()) > 64:
        return
    sub = [mu for mu in lam if mu in set(rectangle(nu))]
    h_nu = Integrand(3, lambda y: math.prod(hermite_orthonormal(k, y[j - 1]) for j, k in nu.items()))
    assert abs(sparse_quadrature(sub, h_nu)) <= math.prod((1 + v) ** 3 for _, v in nu.items())


@pytest.mark.parametrize("level", range(5))
def test_tensor_equivalence(level):
    lam = tensor_set(level)
    for psi in (Integrand(2, lambda y: y[0] ** 4 * y[1] ** 2 + y[0] * y[1] + 1.0),
                Integrand(2, lambda y: math.exp(0.5 * y[0] - 0.25 * y[1]))):
        got = sparse_quadrature(lam, psi)
        ref = tensor_quadrature({1: level, 2: level}, psi)
        assert abs(got - ref) <= 1e-12 * abs(ref)


def test_cache_counts_and_soundness():
    psi = exp_integrand()
    on, off = EvalCache(True), EvalCache(False)
    a = adaptive_construct(psi, None, "aposteriori", 40, cache=on)
    b = adaptive_construct(psi, None, "aposteriori", 40, cache=off)
    assert a.value == b.value
    assert [r.value for r in a.history] == [r.value for r in b.history]
    assert on.misses == len(on) == a.n_points_lambda_bar
    assert on.hits > 0 and off.hits == 0 and off.misses > on.misses


def test_cache_concurrent_deltas():
    psi = exp_integrand()
    indices = [e(1, 3), e(2, 2), MultiIndex({1: 2, 2: 1}), e(3), e(1, 2), e(4)]
    serial = [delta(nu, psi, EvalCache()) for nu in indices]
    cache = EvalCache()
    with ThreadPoolExecutor(4) as pool:
        parallel = list(pool.map(lambda nu: delta(nu, psi, cache), indices))
    assert parallel == serial


def test_integrand_failure_reports_point():
    def bad(y):
        if y[1] != 0:
            raise ArithmeticError("boom")
        return 1.0

    with pytest.raises(IntegrandError, match="2:"):
        sparse_quadrature(IndexSet([e(1), e(2)]), Integrand(2, bad))


def test_adaptive_single_index():
    psi = exp_integrand()
    run = adaptive_construct(psi, FieldSpec(dim=4), "apriori", 1)
    assert run.index_set.members == [Z]
    assert run.value == psi.evaluate(np.zeros(4))


def test_adaptive_rejects_bad_args():
    psi = exp_integrand()
    with pytest.raises(ValueError):
        adaptive_construct(psi, None, "apriori", 5)
    with pytest.raises(ValueError):
        adaptive_construct(psi, None, "greedy", 5)
    with pytest.raises(ValueError):
        adaptive_construct(psi, None, "aposteriori", 0)


def test_apriori_second_index():
    spec = FieldSpec(alpha=1.0, dim=6)
    assert np.all(np.diff(rho_vector(spec)) < 0)
    run = adaptive_construct(exp_integrand(6 - 2), FieldSpec(alpha=1.0, dim=4), "apriori", 2)
    assert run.index_set.members[1] == e(1)


def test_aposteriori_finds_second_dimension():
    psi = Integrand(3, lambda y: y[1] ** 2)
    run = adaptive_construct(psi, None, "aposteriori", 6)
    assert e(2) in run.index_set
    assert abs(run.value - 1.0) <= 1e-12
    # only refining dimension 1 leaves the error at 1
    assert abs(sparse_quadrature([Z, e(1), e(1, 2), e(1, 3)], psi) - 1.0) == pytest.approx(1.0)


def test_aposteriori_ties_break_canonically():
    # symmetric in y1, y2: Delta_{e1} and Delta_{e2} tie
    psi = Integrand(2, lambda y: y[0] ** 2 + y[1] ** 2)
    run = adaptive_construct(psi, None, "aposteriori", 4)
    assert run.index_set.members[:3] == [Z, e(1), e(2)]


def test_apriori_set_independent_of_integrand():
    spec = FieldSpec(alpha=2.0, dim=4)
    a = adaptive_construct(exp_integrand(), spec, "apriori", 30)
    b = adaptive_construct(Integrand(4, lambda y: np.array([y[0], y[1] ** 3, 1.0])), spec, "apriori", 30)
    assert a.index_set.members == b.index_set.members


@pytest.mark.parametrize("mode", ["apriori", "aposteriori"])
def test_incremental_state_matches_recomputation(mode):
    spec = FieldSpec(alpha=2.0, dim=4)
    psi = exp_integrand()
    run = adaptive_construct(psi, spec, mode, 25)
    members = run.index_set.members
    for rec in run.history:
        fresh = sparse_quadrature(members[:rec.n_indices], psi)
        assert abs(rec.value - fresh) <= 1e-12 * abs(fresh)
        pts = set().union(*(grid_keys(nu) for nu in members[:rec.n_indices]))
        assert rec.n_points_lambda == len(pts)
    assert set(run.front) == set(reduced_forward_neighbors(run.index_set, 4))
    assert run.n_points_lambda_bar == len(set().union(*(grid_keys(nu) for nu in list(run.index_set) + list(run.front))))
    ref = sparse_quadrature(list(run.index_set) + run.front_indices(), psi)
    assert abs(run.reference_value() - ref) <= 1e-12 * abs(ref)


@given(lam_size=st.integers(1, 30), cap=st.integers(1, 5), alpha=st.floats(1.0, 3.0))
def test_incremental_front_matches_definition(lam_size, cap, alpha):
    spec = FieldSpec(alpha=alpha, dim=5)
    run = adaptive_construct(Integrand(5, lambda y: 1.0), spec, "apriori", lam_size, dim_cap=cap)
    assert sorted(run.front) == reduced_forward_neighbors(run.index_set, cap)


def test_front_respects_dim_cap():
    run = adaptive_construct(exp_integrand(), None, "aposteriori", 30, dim_cap=2)
    assert all(nu.max_dim <= 2 for nu in list(run.index_set) + list(run.front))


def test_tolerance_stop():
    psi = exp_integrand()
    run = adaptive_construct(psi, None, "aposteriori", 10_000, tol=1e-6)
    assert len(run.index_set) < 10_000
    assert max(run.front.values()) < 1e-6


def test_max_points_stop():
    run = adaptive_construct(exp_integrand(), None, "aposteriori", 10_000, max_points=50)
    assert 50 <= run.n_points_lambda < 50 + 40


def test_exp_oracle_convergence():
    run = adaptive_construct(exp_integrand(), None, "aposteriori", 200)
    first = next(r for r in run.history if abs(r.value - EXP_EXACT) <= 1e-8 * EXP_EXACT)
    assert first.n_points_lambda <= 500
    assert abs(run.value - EXP_EXACT) <= 1e-10 * EXP_EXACT


def test_pde_functional_integrand():
    prob = OptimalControlProblem.default(33, FieldSpec(alpha=2.0, dim=2))
    psi = prob.integrand("z_mid")
    lam = tensor_set(2)
    got = sparse_quadrature(lam, psi)
    assert abs(got - tensor_quadrature({1: 2, 2: 2}, psi)) <= 1e-12 * abs(got)


def test_history_csv():
    run = adaptive_construct(exp_integrand(), FieldSpec(dim=4), "apriori", 5)
    rows = list(csv.reader(io.StringIO(run.history_csv())))
    assert rows[0] == HISTORY_COLUMNS + ["quadrature_value"]
    assert len(rows) == 6
    assert json.loads(rows[2][4]) == {"1": 1}
    assert float(rows[-1][-1]) == run.value
    vec = adaptive_construct(Integrand(2, lambda y: np.array([1.0, y[0]])), None, "aposteriori", 3)
    assert vec.history_csv().splitlines()[0].endswith("value_norm")
