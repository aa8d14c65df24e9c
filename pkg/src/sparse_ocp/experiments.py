"""Experiment configuration, presets, and the drivers behind the CLI.

Every driver writes CSV (header row, fixed column order, floats with 17
significant digits) and a JSON summary into an output directory.
"""
from __future__ import annotations

import copy
import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import pde
from .errors import NumericalError
from .field import FieldSpec
from .montecarlo import McConfig, McStudy, error_at, mc_running_estimates, standard_normals, study_from_estimates
from .problem import TARGETS, OptimalControlProblem, synthetic_data
from .sparse_quad import MODES, AdaptiveRun, EvalCache, adaptive_construct, fmt

log = logging.getLogger(__name__)

REFERENCE_POLICIES = ("lambda_bar", "oversampled")


@dataclass
class ExperimentConfig:
    n: int = 257
    field: FieldSpec = dataclasses.field(default_factory=FieldSpec)
    beta: float = 1e-4
    source: float = 0.0
    target: str = "z_mid"
    x_target: float = 0.5
    modes: tuple[str, ...] = MODES
    n_max: int = 2000
    max_points: int | None = None
    mc: McConfig = dataclasses.field(default_factory=McConfig)
    reference: str = "lambda_bar"
    out: str = "out"
    n_samples: int = 100

    def __post_init__(self):
        self.modes = tuple(self.modes)
        self.validate()

    def validate(self) -> None:
        if self.n < 3:
            raise ValueError("n must be >= 3")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise ValueError(f"modes must be a non-empty subset of {MODES}")
        if self.reference not in REFERENCE_POLICIES:
            raise ValueError(f"reference must be one of {REFERENCE_POLICIES}")
        if self.target == "z_mid":
            pde.Mesh(self.n).node_index(self.x_target)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "field": self.field.to_dict(), "beta": self.beta, "source": self.source,
            "target": self.target, "x_target": self.x_target, "modes": list(self.modes),
            "n_max": self.n_max, "max_points": self.max_points, "mc": self.mc.to_dict(),
            "reference": self.reference, "out": self.out, "n_samples": self.n_samples,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "field" in d:
            d["field"] = FieldSpec.from_dict(d["field"])
        if "mc" in d:
            d["mc"] = McConfig.from_dict(d["mc"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))

    def problem(self) -> OptimalControlProblem:
        mesh = pde.Mesh(self.n)
        return OptimalControlProblem(mesh, self.field.resolved(), self.beta,
                                     np.full(mesh.n_interior, float(self.source)), synthetic_data(mesh))


PRESETS: dict[str, dict] = {
    "desk": {"n": 257, "field": {"alpha": 2.0, "dim": 257, "epsilon": 0.1, "r": 2, "rescale": 1.0},
             "n_max": 2000},
    "paper": {"n": 1025, "field": {"alpha": 2.0, "dim": 1025, "epsilon": 0.1, "r": 2, "rescale": 1.0},
              "n_max": 1_000_000, "max_points": 10_000},
}


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def preset(name: str, **overrides: Any) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    base = ExperimentConfig().to_dict()
    return ExperimentConfig.from_dict(merge(merge(base, PRESETS[name]), overrides))


def make_synthetic_data(config: ExperimentConfig) -> np.ndarray:
    """u_d: the state for z_d = sin(pi x) with kappa = 0 (interior values)."""
    return synthetic_data(pde.Mesh(config.n))


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


# -- convergence ------------------------------------------------------------

def fit_rate(x, err, n_min: int = 10, resolution: float = 10.0, n_fit: int = 30) -> float:
    """Log-log slope of the error sequence over its resolved range.

    Steps before ``n_min`` are pre-asymptotic. Steps after the last one whose
    error still exceeds ``resolution`` times the final error are dominated by
    the reference itself and are dropped too. About ``n_fit`` steps, evenly
    spaced in log N, enter the least-squares fit.
    """
    err = np.asarray(err, dtype=float)
    x = np.asarray(x, dtype=float)
    resolved = np.flatnonzero(err >= resolution * err[-1])
    if len(resolved) == 0:
        return math.nan
    hi = int(resolved.max()) + 1
    if hi < 2 * n_min:
        return math.nan
    steps = np.unique(np.round(np.geomspace(n_min, hi, n_fit)).astype(int)) - 1
    steps = steps[err[steps] > 0]
    if len(steps) < 3:
        return math.nan
    return float(np.polyfit(np.log(x[steps]), np.log(err[steps]), 1)[0])


@dataclass
class ConvergenceResult:
    mode: str
    run: AdaptiveRun
    reference: Any
    errors: np.ndarray
    slope_vs_indices: float
    slope_vs_points: float
    slope_vs_points_bar: float
    mc: McStudy | None = None

    def summary(self) -> dict:
        out = {
            "mode": self.mode,
            "n_indices": len(self.run.index_set),
            "n_points_lambda": self.run.n_points_lambda,
            "n_points_lambda_bar": self.run.n_points_lambda_bar,
            "n_evaluations": self.run.cache.misses,
            "final_error": float(self.errors[-1]),
            "slope_vs_indices": self.slope_vs_indices,
            "slope_vs_points": self.slope_vs_points,
            "slope_vs_points_bar": self.slope_vs_points_bar,
        }
        if np.ndim(self.reference) == 0:
            out["reference"] = float(self.reference)
        if self.mc is not None:
            out["mc_slope"] = self.mc.slope
            n = self.run.n_points_lambda
            try:
                out["mc_error_at_final_points"] = error_at(self.mc, n)
            except ValueError:
                out["mc_error_at_final_points"] = None
        return out


def adaptive_for(config: ExperimentConfig, problem: OptimalControlProblem, mode: str,
                 n_max: int | None = None, cache: EvalCache | None = None) -> AdaptiveRun:
    psi = problem.integrand(config.target, config.x_target)
    return adaptive_construct(psi, problem.spec, mode, n_max or config.n_max, cache=cache,
                              max_points=config.max_points)


def convergence(config: ExperimentConfig, mode: str, problem: OptimalControlProblem | None = None) -> ConvergenceResult:
    problem = problem or config.problem()
    cache = EvalCache()
    run = adaptive_for(config, problem, mode, cache=cache)
    if config.reference == "lambda_bar":
        reference = run.reference_value()
    else:
        reference = adaptive_for(config, problem, mode, n_max=2 * len(run.index_set), cache=cache).reference_value()
    psi = run.psi
    errors = np.array([psi.norm(rec.value - reference) for rec in run.history])
    steps = np.arange(1, len(errors) + 1)
    pts = np.array([rec.n_points_lambda for rec in run.history])
    pts_bar = np.array([rec.n_points_lambda_bar for rec in run.history])
    return ConvergenceResult(mode, run, reference, errors, fit_rate(steps, errors), fit_rate(pts, errors),
                             fit_rate(pts_bar, errors))


def run_convergence(config: ExperimentConfig, out: str | Path | None = None, with_mc: bool = True) -> dict:
    """Adaptive runs in each configured mode plus the MC baseline against the same references."""
    out = Path(out or config.out)
    problem = config.problem()
    results = []
    for mode in config.modes:
        log.info("adaptive %s run, alpha=%s, n_max=%d", mode, config.field.alpha, config.n_max)
        res = convergence(config, mode, problem)
        results.append(res)
        rows = ([rec.step, rec.n_indices, rec.n_points_lambda, rec.n_points_lambda_bar, rec.selected.to_json(),
                 float(rec.indicator), value_column(res.run, rec.value), float(err)]
                for rec, err in zip(res.run.history, res.errors))
        write_csv(out / f"convergence_{mode}.csv",
                  ["step", "N_indices", "n_points_lambda", "n_points_lambda_bar", "selected_index",
                   "indicator_value", "quadrature_value" if np.ndim(res.reference) == 0 else "value_norm", "error"],
                  rows)
        write_levels(out / f"levels_{mode}.csv", res.run)
    if with_mc:
        psi = problem.integrand(config.target, config.x_target)
        log.info("Monte Carlo study: %d trials up to %d samples", config.mc.n_trials, config.mc.schedule[-1])
        estimates = mc_running_estimates(psi, config.mc)
        for res in results:
            res.mc = study_from_estimates(psi, config.mc, estimates, res.reference)
            (out / f"mc_{res.mode}.csv").write_text(res.mc.to_csv())
    summary = {"config": config.to_dict(), "runs": [r.summary() for r in results]}
    write_json(out / "summary.json", summary)
    return {"results": results, "summary": summary}


def value_column(run: AdaptiveRun, value) -> float:
    return float(value) if np.ndim(value) == 0 else run.psi.norm(value)


# -- per-dimension levels -----------------------------------------------------

def level_rows(run: AdaptiveRun) -> list[tuple[int, int, int, int]]:
    """(dimension, l_j over Lambda-bar, activated in Lambda, activated in Lambda-bar)."""
    levels = run.max_levels(include_front=True)
    return [(j, levels[j], int(levels[j] >= 2), int(levels[j] >= 1)) for j in sorted(levels)]


def write_levels(path: Path, run: AdaptiveRun) -> None:
    write_csv(path, ["dimension", "level", "activated_in_lambda", "activated_in_lambda_bar"], level_rows(run))


def run_levels(config: ExperimentConfig, out: str | Path | None = None) -> dict[str, list]:
    out = Path(out or config.out)
    problem = config.problem()
    result = {}
    for mode in config.modes:
        run = adaptive_for(config, problem, mode)
        write_levels(out / f"levels_{mode}.csv", run)
        result[mode] = level_rows(run)
    return result


# -- samples ------------------------------------------------------------------

def run_samples(config: ExperimentConfig, n_samples: int | None = None, seed: int = 0,
                out: str | Path | None = None, ys: list | None = None) -> dict:
    """Optimal state and control at seeded parameter samples, with their sample means."""
    out = Path(out or config.out)
    problem = config.problem()
    mesh = problem.mesh
    if ys is None:
        n_samples = n_samples or config.n_samples
        if n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        ys = [standard_normals(seed, i, problem.spec.dim) for i in range(n_samples)]
    us, zs = [], []
    for i, y in enumerate(ys):
        try:
            w = problem.solve(np.asarray(y, dtype=float))
        except NumericalError as exc:
            raise NumericalError(f"sample {i}: {exc}") from exc
        us.append(np.concatenate(([0.0], w.u, [0.0])))
        zs.append(np.concatenate(([0.0], w.control(problem.beta), [0.0])))
    us, zs = np.array(us), np.array(zs)
    x = mesh.nodes
    u_d = np.concatenate(([0.0], problem.u_d, [0.0]))
    z_d = np.sin(np.pi * x)
    z_d[[0, -1]] = 0.0
    mean_u, mean_z = us.mean(axis=0), zs.mean(axis=0)
    header = ["x", "mean", "data"] + [f"sample_{i}" for i in range(len(ys))]
    write_csv(out / "samples_u.csv", header, (list(map(float, r)) for r in np.column_stack([x, mean_u, u_d, us.T])))
    write_csv(out / "samples_z.csv", header, (list(map(float, r)) for r in np.column_stack([x, mean_z, z_d, zs.T])))
    rel = pde.l2_norm(mesh, mean_z[1:-1] - z_d[1:-1]) / pde.l2_norm(mesh, z_d[1:-1])
    summary = {"n_samples": len(ys), "seed": seed, "mean_control_rel_l2_to_z_d": rel,
               "mean_state_rel_l2_to_u_d": pde.l2_norm(mesh, mean_u[1:-1] - problem.u_d) / pde.l2_norm(mesh, problem.u_d)}
    write_json(out / "samples_summary.json", summary)
    return {"x": x, "u": us, "z": zs, "mean_u": mean_u, "mean_z": mean_z, **summary}


# -- single solve -------------------------------------------------------------

def run_solve(config: ExperimentConfig, y=None, seed: int = 0, out: str | Path | None = None) -> pde.StateAdjointPair:
    out = Path(out or config.out)
    problem = config.problem()
    if y is None:
        y = standard_normals(seed, 0, problem.spec.dim)
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.spec.dim,):
        if y.ndim == 1 and len(y) < problem.spec.dim:
            y = np.concatenate([y, np.zeros(problem.spec.dim - len(y))])
        else:
            raise ValueError(f"parameter vector longer than dim={problem.spec.dim}")
    w = problem.solve(y)
    pad = lambda a: np.concatenate(([0.0], a, [0.0]))  # noqa: E731
    cols = np.column_stack([problem.mesh.nodes, pad(w.u), pad(w.v), pad(w.control(problem.beta))])
    write_csv(out / "solve.csv", ["x", "u", "v", "z"], (list(map(float, r)) for r in cols))
    return w


def run_mc(config: ExperimentConfig, reference: float | None = None, out: str | Path | None = None) -> McStudy:
    """MC study; without a given reference, the a-posteriori Lambda-bar value is used."""
    out = Path(out or config.out)
    problem = config.problem()
    psi = problem.integrand(config.target, config.x_target)
    if reference is None:
        reference = adaptive_for(config, problem, "aposteriori").reference_value()
    study = study_from_estimates(psi, config.mc, mc_running_estimates(psi, config.mc), reference)
    out.mkdir(parents=True, exist_ok=True)
    (out / "mc.csv").write_text(study.to_csv())
    return study
