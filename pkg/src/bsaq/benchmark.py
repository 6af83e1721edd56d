"""Monte-Carlo RMSE comparison of the root-finding procedures.

Six methods run on the synthetic response models: the slice-posterior
procedure with mean or mode updates, the classical fixed-gain recursion, the
adaptive-gain recursion, the averaged slow-gain recursion, and the sequential
logistic-MAP design.  The slice-posterior methods operate on (0, 1); the
others run in native (-3, 3) coordinates where their gain constants live.
Final-point errors are always compared in (0, 1) after the affine map.

Each (method, replication) pair draws outcomes from its own derived stream,
so results are reproducible under the master seed and independent of which
other methods ran.  Replications advance in lockstep lanes for speed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .driver import SSchedule
from .models import MODEL_NAMES, TestModel, get_model, to_unit
from .numerics import SeededRng, std_normal_pdf, std_normal_quantile
from .vectorized import BsaLanes, RmjLanes, RmLanes, RpjLanes, WuLanes

__all__ = [
    "METHOD_CODES",
    "MODEL_CODES",
    "BenchmarkConfig",
    "CellResult",
    "BenchmarkResult",
    "run_benchmark",
    "emit_csv",
    "emit_plotdata",
]

METHOD_CODES = {
    "bsa-bayes": 1,
    "bsa-map": 2,
    "rm": 3,
    "rmj": 4,
    "rpj": 5,
    "wu-map": 6,
}

MODEL_CODES = {name: code for code, name in enumerate(MODEL_NAMES, start=1)}

_SCALED_METHODS = ("bsa-bayes", "bsa-map")


@dataclass(frozen=True)
class BenchmarkConfig:
    """One benchmark request: a model, an alpha grid, and the methods to race."""

    model: str
    alphas: tuple[float, ...]
    methods: tuple[str, ...] = tuple(METHOD_CODES)
    horizon: int = 20
    replications: int = 1000
    master_seed: int = 0
    schedule: SSchedule = SSchedule.fixed(17)

    def __post_init__(self) -> None:
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "methods", tuple(str(m) for m in self.methods))
        if self.model not in MODEL_CODES:
            raise ValueError(f"unknown model {self.model!r}")
        for m in self.methods:
            if m not in METHOD_CODES:
                raise ValueError(f"unknown method {m!r}")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha must lie in (0, 1), got {a}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")
        if get_model(self.model).dim == 2:
            bad = [m for m in self.methods if m not in _SCALED_METHODS]
            if bad:
                raise ValueError(
                    f"methods {bad} are univariate; {self.model} is bivariate"
                )


@dataclass(frozen=True)
class CellResult:
    """Outcome of one (method, alpha) cell: per-replication finals and RMSE."""

    method: str
    model: str
    alpha: float
    n: int
    replications: int
    seed: int
    rmse: float
    final_x: np.ndarray
    true_root: np.ndarray
    errors: np.ndarray


@dataclass(frozen=True)
class BenchmarkResult:
    config: BenchmarkConfig
    cells: tuple[CellResult, ...]

    def cell(self, method: str, alpha: float) -> CellResult:
        for c in self.cells:
            if c.method == method and c.alpha == alpha:
                return c
        raise KeyError(f"no cell for method={method!r}, alpha={alpha}")

    def rmse(self, method: str, alpha: float) -> float:
        return self.cell(method, alpha).rmse


def replication_streams(
    master_seed: int, model: str, method: str, alpha: float, horizon: int, reps: int
) -> np.ndarray:
    """Uniform draws (horizon, reps): column r is replication r's own stream."""
    am = int(round(alpha * 1000))
    key_base = (MODEL_CODES[model], METHOD_CODES[method], am)
    cols = [
        SeededRng(master_seed, key_base + (rep,)).uniforms(horizon)
        for rep in range(reps)
    ]
    return np.stack(cols, axis=1)


def _final_points(
    model: TestModel, method: str, alpha: float, config: BenchmarkConfig
) -> np.ndarray:
    """Lockstep run of one cell; returns final scaled points (reps,) or (reps, 2)."""
    if model.dim == 2:
        from .multivariate import mv_final_points

        return mv_final_points(model, method, alpha, config)
    reps = config.replications
    u = replication_streams(
        config.master_seed, model.name, method, alpha, config.horizon, reps
    )
    if method in _SCALED_METHODS:
        est = "bayes" if method == "bsa-bayes" else "map"
        eng = BsaLanes(alpha, reps, config.schedule, est, start=0.5)
        for k in range(config.horizon):
            y = u[k] < model.prob(eng.x, alpha)
            eng.step(y.astype(float))
        return eng.x
    if method == "rm":
        eng = RmLanes(0.0, alpha, model.slope_native(alpha), reps)
    elif method == "rmj":
        beta = model.slope_native(alpha) / std_normal_pdf(std_normal_quantile(alpha))
        eng = RmjLanes(0.0, alpha, beta, reps)
    elif method == "rpj":
        eng = RpjLanes(0.0, alpha, reps)
    else:
        eng = WuLanes(0.0, alpha, reps)
    for k in range(config.horizon):
        y = u[k] < model.prob_native(eng.x, alpha)
        eng.step(y.astype(float))
    final = eng.average if method == "rpj" else eng.x
    return to_unit(final)


def run_benchmark(config: BenchmarkConfig) -> BenchmarkResult:
    """Race the configured methods; errors and RMSE are in scaled coordinates."""
    model = get_model(config.model)
    cells = []
    for alpha in config.alphas:
        root = np.atleast_1d(np.asarray(model.root_scaled(alpha), dtype=float))
        for method in config.methods:
            final = _final_points(model, method, alpha, config)
            if model.dim == 1:
                errors = final - root[0]
            else:
                errors = np.sqrt(((final - root[None, :]) ** 2).sum(axis=1))
            cells.append(
                CellResult(
                    method=method,
                    model=config.model,
                    alpha=alpha,
                    n=config.horizon,
                    replications=config.replications,
                    seed=config.master_seed,
                    rmse=float(np.sqrt(np.mean(errors**2))),
                    final_x=final,
                    true_root=root,
                    errors=errors,
                )
            )
    return BenchmarkResult(config=config, cells=tuple(cells))


def _fmt(values: Sequence[float] | np.ndarray) -> str:
    """Space-joined repr floats: one token for scalars, two for planar points."""
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def emit_csv(result: BenchmarkResult, path) -> None:
    """Summary table, one row per (method, alpha) cell."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "model", "alpha", "n", "replications", "seed", "rmse"])
        for c in result.cells:
            w.writerow(
                [c.method, c.model, repr(c.alpha), c.n, c.replications, c.seed, repr(c.rmse)]
            )


def emit_plotdata(result: BenchmarkResult, path) -> None:
    """Long-format table, one row per replication."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["method", "model", "alpha", "replication", "final_x", "true_root", "error"]
        )
        for c in result.cells:
            for i in range(c.replications):
                w.writerow(
                    [
                        c.method,
                        c.model,
                        repr(c.alpha),
                        i,
                        _fmt(c.final_x[i]),
                        _fmt(c.true_root),
                        repr(float(c.errors[i])),
                    ]
                )
