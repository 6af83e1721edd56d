"""Sequential root-finding sessions driven by the local posterior.

A session tracks the full outcome history, the per-slice prior bounds, and
the pending design point.  Each outcome updates the local model on the slice
containing the point that was just probed; the next design point is the
posterior mean (Bayes) or the posterior mode (MAP) of the root, and when the
procedure leaves a slice the posterior of the crossed endpoint tightens the
prior bounds of the landing slice.

All internal coordinates live in (0, 1]; user-facing values are mapped from
and to the configured experimental domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .local_model import (
    LocalModel,
    Observation,
    PosteriorCurve,
    PriorBounds,
    Subinterval,
    credible_interval,
    posterior_rho0,
    posterior_rho1,
    posterior_theta,
)
from .numerics import DEFAULT_QUADRATURE, Quadrature

__all__ = [
    "SSchedule",
    "SessionConfig",
    "SessionState",
    "StepResult",
    "SchemaError",
    "default_estimator",
    "locate",
    "schedule_s",
    "new_session",
    "step",
    "advance",
    "estimate",
    "update_bounds",
    "scale_to_unit",
    "unscale_from_unit",
    "state_to_doc",
    "state_from_doc",
]

ESTIMATORS = ("bayes", "map")


class SchemaError(ValueError):
    """Serialized session document is malformed or from an unknown version."""


def default_estimator(alpha: float) -> str:
    """Bayes for central quantiles, MAP for extreme ones."""
    return "bayes" if 0.2 <= alpha <= 0.8 else "map"


@dataclass(frozen=True)
class SSchedule:
    """Grid sizes per step: stage1 before switch_step, stage2 from it on."""

    stage1: int
    stage2: int
    switch_step: int = 11

    def __post_init__(self) -> None:
        if self.stage1 < 1 or self.stage2 < 1:
            raise ValueError("grid sizes must be >= 1")
        if self.switch_step < 1:
            raise ValueError("switch_step must be >= 1")

    @classmethod
    def fixed(cls, s: int) -> "SSchedule":
        return cls(s, s, switch_step=1)

    @classmethod
    def from_alpha(cls, alpha: float) -> "SSchedule":
        """Coarser grids for central alpha, finer for extreme alpha.

        Band boundaries resolve to the smaller-s band.
        """
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        if 0.4 <= alpha <= 0.6:
            return cls(5, 9)
        if 0.1 <= alpha <= 0.9:
            return cls(9, 17)
        return cls(13, 23)

    def s_at(self, n: int) -> int:
        """Grid size in effect at step n (1-based)."""
        if n < 1:
            raise ValueError(f"step index must be >= 1, got {n}")
        return self.stage1 if n < self.switch_step else self.stage2


def schedule_s(alpha: float, n: int) -> int:
    return SSchedule.from_alpha(alpha).s_at(n)


def locate(x: float, s: int) -> Subinterval:
    """Grid slice containing x; exact slice boundaries map downward."""
    return Subinterval.containing(x, s)


def scale_to_unit(x: float, domain: tuple[float, float]) -> float:
    lo, hi = domain
    return (x - lo) / (hi - lo)


def unscale_from_unit(x: float, domain: tuple[float, float]) -> float:
    lo, hi = domain
    return lo + x * (hi - lo)


@dataclass(frozen=True)
class SessionConfig:
    """Immutable run settings for one root-finding session."""

    alpha: float
    estimator: str = ""
    schedule: SSchedule | None = None
    domain: tuple[float, float] = (0.0, 1.0)
    start: float | None = None
    bound_carryover: bool = True
    quadrature: Quadrature = DEFAULT_QUADRATURE

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        est = self.estimator or default_estimator(self.alpha)
        object.__setattr__(self, "estimator", est)
        if est not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}, got {est!r}")
        if self.schedule is None:
            object.__setattr__(self, "schedule", SSchedule.from_alpha(self.alpha))
        lo, hi = self.domain
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError(f"domain must be a finite interval, got {self.domain}")
        start = 0.5 * (lo + hi) if self.start is None else float(self.start)
        if not lo <= start <= hi:
            raise ValueError(f"start {start} outside domain {self.domain}")
        object.__setattr__(self, "start", start)


@dataclass(frozen=True)
class SessionState:
    """Full state after `steps` completed design points; `x` is the pending point."""

    config: SessionConfig
    x: float
    steps: int = 0
    history: tuple[Observation, ...] = ()
    bounds: Mapping[int, tuple[float, float]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        """Index of the pending design point (1-based)."""
        return self.steps + 1

    @property
    def x_original(self) -> float:
        return unscale_from_unit(self.x, self.config.domain)


@dataclass(frozen=True)
class StepResult:
    """Posterior snapshot behind one recommendation."""

    step: int
    x: float
    x_original: float
    mean: float
    mode: float
    ci90: tuple[float, float]
    sub: Subinterval
    m: int
    bounds: tuple[float, float]
    curve: PosteriorCurve
    model: LocalModel


def new_session(config: SessionConfig) -> SessionState:
    x1 = scale_to_unit(config.start, config.domain)
    s1 = config.schedule.s_at(1)
    if x1 <= 0.0:
        # the lower domain edge itself is outside (0, 1]; probe the interior
        # midpoint of the smallest slice instead
        x1 = 1.0 / (2 * s1)
    return SessionState(config=config, x=x1)


def _slice_bounds(
    bounds_map: Mapping[int, tuple[float, float]], t: int, alpha: float
) -> PriorBounds:
    lo, hi = bounds_map.get(t, (0.0, 1.0))
    return PriorBounds(lo, hi, alpha)


def _build_model(
    config: SessionConfig,
    history: Sequence[Observation],
    bounds_map: Mapping[int, tuple[float, float]],
    anchor_x: float,
    s: int,
) -> LocalModel:
    sub = locate(anchor_x, s)
    members = [o for o in history if sub.contains_strictly(o.x)]
    return LocalModel(
        sub,
        _slice_bounds(bounds_map, sub.t, config.alpha),
        members,
        quadrature=config.quadrature,
    )


def _summarize(
    config: SessionConfig, model: LocalModel, step_index: int
) -> tuple[StepResult, float]:
    curve = posterior_theta(model)
    mean = curve.mean
    mode = curve.mode
    x_next = mean if config.estimator == "bayes" else mode
    result = StepResult(
        step=step_index,
        x=x_next,
        x_original=unscale_from_unit(x_next, config.domain),
        mean=mean,
        mode=mode,
        ci90=credible_interval(curve, 0.9),
        sub=model.sub,
        m=model.m,
        bounds=(model.bounds.rho_lo, model.bounds.rho_hi),
        curve=curve,
        model=model,
    )
    return result, x_next


def update_bounds(
    model: LocalModel,
    moved_up: bool,
    adjacent: bool = True,
    stored: tuple[float, float] = (0.0, 1.0),
) -> tuple[float, float]:
    """Prior bounds for the landing slice after leaving `model`'s slice.

    Moving up, the crossed endpoint is v1, so the 5th percentile of the rho1
    posterior becomes the landing slice's lower bound; moving down, the 95th
    percentile of the rho0 posterior becomes its upper bound.  On a move to an
    adjacent slice the other bound is inherited from the departed slice, so a
    tightened range travels with the path and the landing range is never wider
    than the departed one.  A jump over one or more slices instead keeps the
    landing slice's own stored value for the other bound; skipped slices are
    never chained through.  If the result no longer straddles alpha the landing
    slice falls back to the uninformative (0, 1).
    """
    if moved_up:
        other = model.bounds.rho_hi if adjacent else stored[1]
        cand = (posterior_rho1(model).quantile(0.05), other)
    else:
        other = model.bounds.rho_lo if adjacent else stored[0]
        cand = (other, posterior_rho0(model).quantile(0.95))
    if not cand[0] < model.alpha < cand[1]:
        return (0.0, 1.0)
    return cand


def advance(state: SessionState, ys: Sequence[int]) -> tuple[SessionState, StepResult]:
    """Consume the outcome(s) observed at the pending point, propose the next one.

    Multiple outcomes are treated as independent observations at the same
    design point (used by the continuous-response encoders); the step counter
    advances once.
    """
    ys = tuple(int(y) for y in ys)
    if not ys:
        raise ValueError("at least one outcome is required")
    if any(y not in (0, 1) for y in ys):
        raise ValueError(f"outcomes must be 0 or 1, got {ys}")
    config = state.config
    history = state.history + tuple(Observation(state.x, y) for y in ys)
    steps = state.steps + 1
    n_next = steps + 1
    s_new = config.schedule.s_at(n_next)
    bounds_map = dict(state.bounds)
    if s_new != config.schedule.s_at(steps):
        # grid changed: stored per-slice bounds refer to the old grid
        bounds_map = {}
    model = _build_model(config, history, bounds_map, state.x, s_new)
    result, x_next = _summarize(config, model, n_next)
    if config.bound_carryover:
        landing = locate(x_next, s_new)
        if landing.t != model.sub.t:
            bounds_map[landing.t] = update_bounds(
                model,
                moved_up=landing.t > model.sub.t,
                adjacent=abs(landing.t - model.sub.t) == 1,
                stored=bounds_map.get(landing.t, (0.0, 1.0)),
            )
    next_state = replace(
        state, x=x_next, steps=steps, history=history, bounds=bounds_map
    )
    return next_state, result


def step(state: SessionState, y: int) -> tuple[SessionState, StepResult]:
    """Consume one binary outcome at the pending point."""
    return advance(state, (y,))


def estimate(state: SessionState) -> StepResult:
    """Recompute the posterior behind the pending recommendation; no state change.

    For a fresh session this is the prior on the start point's slice, with the
    configured start as the recommendation.
    """
    config = state.config
    if state.steps == 0:
        model = _build_model(config, (), state.bounds, state.x, config.schedule.s_at(1))
        result, _ = _summarize(config, model, 1)
        return replace(
            result,
            x=state.x,
            x_original=unscale_from_unit(state.x, config.domain),
        )
    s_cur = config.schedule.s_at(state.n)
    anchor = state.history[-1].x
    model = _build_model(config, state.history, state.bounds, anchor, s_cur)
    result, _ = _summarize(config, model, state.n)
    return result


def state_to_doc(state: SessionState) -> dict:
    """JSON-serializable session document; floats round-trip exactly."""
    c = state.config
    return {
        "version": 1,
        "dimension": 1,
        "alpha": c.alpha,
        "estimator": c.estimator,
        "schedule": {
            "stage1": c.schedule.stage1,
            "stage2": c.schedule.stage2,
            "switch_step": c.schedule.switch_step,
        },
        "domain": [c.domain[0], c.domain[1]],
        "start": c.start,
        "bound_carryover": c.bound_carryover,
        "steps": state.steps,
        "x": state.x,
        "history": [[o.x, o.y] for o in state.history],
        "bounds": {str(t): [lo, hi] for t, (lo, hi) in sorted(state.bounds.items())},
    }


def state_from_doc(doc: Mapping) -> SessionState:
    try:
        if doc["version"] != 1:
            raise SchemaError(f"unsupported session document version {doc['version']!r}")
        if doc.get("dimension", 1) != 1:
            raise SchemaError("document describes a multivariate session")
        sched = doc["schedule"]
        config = SessionConfig(
            alpha=float(doc["alpha"]),
            estimator=str(doc["estimator"]),
            schedule=SSchedule(
                int(sched["stage1"]), int(sched["stage2"]), int(sched["switch_step"])
            ),
            domain=(float(doc["domain"][0]), float(doc["domain"][1])),
            start=float(doc["start"]),
            bound_carryover=bool(doc["bound_carryover"]),
        )
        return SessionState(
            config=config,
            x=float(doc["x"]),
            steps=int(doc["steps"]),
            history=tuple(Observation(float(x), int(y)) for x, y in doc["history"]),
            bounds={int(t): (float(lo), float(hi)) for t, (lo, hi) in doc["bounds"].items()},
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise SchemaError(f"malformed session document: {exc!r}") from exc
