import csv
import io
import math

import numpy as np
import pytest
from scipy import stats

from sparse_ocp.montecarlo import (
    McConfig, McStudy, error_at, fit_slope, mc_convergence_study, mc_estimate, mc_running_estimates,
    standard_normals,
)
from sparse_ocp.sparse_quad import Integrand


def test_normals_reproducible_and_keyed():
    a = standard_normals(7, 3, 5)
    np.testing.assert_array_equal(a, standard_normals(7, 3, 5))
    assert not np.array_equal(a, standard_normals(7, 4, 5))
    assert not np.array_equal(a, standard_normals(8, 3, 5))
    assert not np.array_equal(a, standard_normals(7, 3, 5, trial=1))
    # shorter draws are prefixes of longer ones
    np.testing.assert_array_equal(standard_normals(7, 3, 2), a[:2])


def test_sample_independent_of_history():
    late = standard_normals(1, 500, 3)
    for i in range(10):
        standard_normals(2, i, 9, trial=4)
    np.testing.assert_array_equal(standard_normals(1, 500, 3), late)


def test_normals_look_gaussian():
    draws = np.concatenate([standard_normals(0, i, 4) for i in range(5000)])
    assert stats.kstest(draws, "norm").pvalue > 1e-3
    assert np.all(np.isfinite(draws))


@pytest.mark.parametrize("c", [0.1, -3.7, 1e10])
def test_constant_exact(c):
    for n in (1, 7, 1000):
        assert mc_estimate(Integrand(3, lambda y: c), n, seed=5) == c


def test_constant_vector_exact():
    c = np.array([0.1, 0.3])
    np.testing.assert_array_equal(mc_estimate(Integrand(2, lambda y: c), 99, seed=1), c)


def test_reproducible():
    psi = Integrand(2, lambda y: math.exp(y[0] - 0.5 * y[1]))
    assert mc_estimate(psi, 500, 3) == mc_estimate(psi, 500, 3)


def test_rejects_zero_samples():
    with pytest.raises(ValueError):
        mc_estimate(Integrand(1, lambda y: 1.0), 0, 0)


@pytest.mark.slow
def test_first_moment_band():
    est = mc_estimate(Integrand(1, lambda y: y[0]), 10 ** 6, seed=2024)
    assert abs(est) <= 5e-3


def test_unbiased_second_moment():
    psi = Integrand(1, lambda y: y[0] ** 2)
    n = 10 ** 4
    means = [mc_estimate(psi, n, seed=11, trial=t) for t in range(50)]
    se = math.sqrt(2.0 / n) / math.sqrt(50)
    assert abs(np.mean(means) - 1.0) <= 5 * se


def test_running_estimates_match_direct():
    psi = Integrand(2, lambda y: y[0] * y[1] + y[0] ** 2)
    cfg = McConfig(schedule=[4, 16, 64], n_trials=2, seed=9)
    rows = mc_running_estimates(psi, cfg)
    for t in range(2):
        for k, n in enumerate(cfg.schedule):
            assert rows[t][k] == mc_estimate(psi, n, 9, trial=t)


def test_convergence_study_rate():
    psi = Integrand(1, lambda y: y[0] ** 2)
    cfg = McConfig(schedule=[2 ** k for k in range(6, 12)], n_trials=10, seed=3)
    study = mc_convergence_study(psi, cfg, 1.0)
    assert study.errors.shape == (10, 6)
    assert -0.75 <= study.slope <= -0.25
    m = study.mean_errors
    assert all(m[k + 1] <= 3 * m[k] for k in range(len(m) - 1))


def test_fit_slope_exact_power_law():
    n = np.array([10, 100, 1000])
    assert fit_slope(n, 3.0 * n ** -0.5) == pytest.approx(-0.5)


def test_error_at_interpolates():
    study = McStudy([10, 1000], np.array([[1.0, 0.01]]), -1.0)
    assert error_at(study, 100) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        error_at(study, 5)


def test_study_csv():
    study = McStudy([4, 8], np.array([[0.5, 0.25], [0.3, 0.1]]), -1.0)
    rows = list(csv.reader(io.StringIO(study.to_csv())))
    assert rows[0] == ["n_samples", "trial", "error"]
    assert rows[1] == ["4", "0", "0.5"]
    assert rows[5] == ["4", "mean", "0.40000000000000002"]
    assert rows[-1][0] == "slope"


@pytest.mark.parametrize("kwargs", [dict(n_trials=0), dict(schedule=[]), dict(schedule=[8, 4]),
                                    dict(schedule=[0, 4])])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        McConfig(**kwargs)


def test_config_round_trip():
    cfg = McConfig(schedule=[3, 9], n_trials=4, seed=2 ** 63 + 5)
    assert McConfig.from_dict(cfg.to_dict()) == cfg
