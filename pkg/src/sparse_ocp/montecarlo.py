"""Seeded Monte Carlo baseline.

Sample ``i`` of trial ``t`` is drawn from a Philox stream keyed by ``(seed, t)``
whose counter starts at ``i`` in its second word, so every sample is
reproducible on its own, independent of how many samples or trials run
before it. Normals come from the inverse CDF of the uniform output.
"""
from __future__ import annotations

import csv
import io
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .sparse_quad import Integrand, fmt

_MASK64 = (1 << 64) - 1
_local = threading.local()


def _philox(seed: int, trial: int, index: int) -> np.random.Philox:
    # rewinding one generator per thread is much cheaper than constructing a new one
    gen = getattr(_local, "gen", None)
    if gen is None:
        gen = _local.gen = np.random.Philox(0)
        _local.state = gen.state
    state = _local.state
    state["state"]["key"] = np.array([seed & _MASK64, trial & _MASK64], dtype=np.uint64)
    state["state"]["counter"] = np.array([0, index, 0, 0], dtype=np.uint64)
    state["buffer_pos"] = 4
    state["has_uint32"] = 0
    gen.state = state
    return gen


def standard_normals(seed: int, index: int, dim: int, trial: int = 0) -> np.ndarray:
    """The ``dim`` standard normal components of sample ``index``."""
    raw = _philox(seed, trial, index).random_raw(dim)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def mc_samples(psi: Integrand, n: int, seed: int, trial: int = 0):
    """Yield psi at samples 0..n-1."""
    for i in range(n):
        yield psi.evaluate(standard_normals(seed, i, psi.dim, trial))


def _update(mean, value, i: int):
    # running mean; exact when every sample is equal
    return value * 1.0 if mean is None else mean + (value - mean) / i


def mc_estimate(psi: Integrand, n: int, seed: int, trial: int = 0):
    """Sample mean of psi over n draws, accumulated in sample order."""
    if n < 1:
        raise ValueError("n must be >= 1")
    mean = None
    for i, v in enumerate(mc_samples(psi, n, seed, trial), start=1):
        mean = _update(mean, v, i)
    return mean


@dataclass
class McConfig:
    schedule: list[int] = field(default_factory=lambda: [2 ** k for k in range(6, 15)])
    n_trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not self.schedule or any(b <= a for a, b in zip(self.schedule, self.schedule[1:])) or self.schedule[0] < 1:
            raise ValueError("schedule must be strictly increasing positive sample counts")

    def to_dict(self) -> dict:
        return {"schedule": list(self.schedule), "n_trials": self.n_trials, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "McConfig":
        return cls(schedule=[int(n) for n in d["schedule"]], n_trials=int(d["n_trials"]), seed=int(d["seed"]))


@dataclass
class McStudy:
    schedule: list[int]
    errors: np.ndarray  # shape (n_trials, len(schedule))
    slope: float

    @property
    def mean_errors(self) -> np.ndarray:
        return self.errors.mean(axis=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_samples", "trial", "error"])
        for t in range(self.errors.shape[0]):
            for n, e in zip(self.schedule, self.errors[t]):
                w.writerow([n, t, fmt(e)])
        for n, e in zip(self.schedule, self.mean_errors):
            w.writerow([n, "mean", fmt(e)])
        w.writerow(["slope", "", fmt(self.slope)])
        return buf.getvalue()


def fit_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def mc_running_estimates(psi: Integrand, config: McConfig) -> list[list]:
    """Estimates ``[trial][k]`` at each schedule size.

    Within a trial they are prefix means of one sample sequence, so each equals
    ``mc_estimate`` at that size.
    """
    marks = {n: k for k, n in enumerate(config.schedule)}
    out = []
    for t in range(config.n_trials):
        row = [None] * len(config.schedule)
        mean = None
        for i, v in enumerate(mc_samples(psi, config.schedule[-1], config.seed, t), start=1):
            mean = _update(mean, v, i)
            if i in marks:
                row[marks[i]] = mean
        out.append(row)
    return out


def study_from_estimates(psi: Integrand, config: McConfig, estimates, reference) -> McStudy:
    errors = np.array([[psi.norm(e - reference) for e in row] for row in estimates])
    return McStudy(list(config.schedule), errors, fit_slope(config.schedule, errors.mean(axis=0)))


def mc_convergence_study(psi: Integrand, config: McConfig, reference) -> McStudy:
    """Trial-averaged MC error per schedule size, with the fitted log-log slope."""
    return study_from_estimates(psi, config, mc_running_estimates(psi, config), reference)


def error_at(study: McStudy, n: float) -> float:
    """Trial-averaged error at n samples, log-log interpolated within the schedule."""
    x, y = np.log(study.schedule), np.log(study.mean_errors)
    if not study.schedule[0] <= n <= study.schedule[-1]:
        raise ValueError(f"{n} samples lies outside the schedule {study.schedule[0]}..{study.schedule[-1]}")
    return float(np.exp(np.interp(math.log(n), x, y)))
