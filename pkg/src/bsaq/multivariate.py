"""Root search on the unit hypercube via per-coordinate conditional models.

The response surface M(x) on (0,1]^p is approximated inside the hypercube
containing the current point by p hyperplane segments, one per coordinate.
Freezing the scaled slopes of the other coordinates turns each segment into
the univariate slice model, with two changes: the prior envelope endpoints
shift by the frozen slopes' contribution at the hypercube corners, and each
observation's constant term picks up the same shift evaluated at that
observation.  Averaging the per-coordinate conditional estimates over a
deterministic slope grid gives p candidate points; a user objective picks the
one to probe next.

The hypercube prior bounds stay at the defaults (0, 1) for every step:
unlike the univariate driver there is no bound carry-over, because a crossed
face does not identify which neighbor vertex inherits the posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .driver import SSchedule, SchemaError
from .local_model import (
    EmptySupportError,
    PosteriorCurve,
    PriorBounds,
    esym_coeffs,
    product_integral,
    series_value,
)
from .numerics import DEFAULT_QUADRATURE, Quadrature, SeededRng

__all__ = [
    "Hypercube",
    "MvObservation",
    "ConditionalModel",
    "MvConfig",
    "MvState",
    "MvStepResult",
    "locate_hypercube",
    "conditional_theta_weight",
    "conditional_posterior_theta",
    "conditional_posterior_beta",
    "betatilde_support",
    "slope_cap",
    "beta_rest_nodes",
    "averaged_theta",
    "candidate_points",
    "next_point",
    "euclidean_norm",
    "diagonal_distance",
    "U_FUNCTIONS",
    "default_mv_estimator",
    "new_mv_session",
    "mv_step",
    "mv_estimate",
    "mv_state_to_doc",
    "mv_state_from_doc",
    "MvLanes",
    "mv_final_points",
]


@dataclass(frozen=True)
class Hypercube:
    """Axis-aligned grid cell prod_j ((t_j-1)/s, t_j/s] of edge 1/s."""

    t: tuple[int, ...]
    s: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", tuple(int(v) for v in self.t))
        if self.s < 1:
            raise ValueError(f"grid size s must be >= 1, got {self.s}")
        if not self.t:
            raise ValueError("index vector must be non-empty")
        for tj in self.t:
            if not 1 <= tj <= self.s:
                raise ValueError(f"cell index {tj} outside 1..{self.s}")

    @classmethod
    def containing(cls, x: Sequence[float], s: int) -> "Hypercube":
        """Cell containing x; coordinates exactly 0 probe the lowest cell."""
        idx = []
        for xj in x:
            if not 0.0 <= xj <= 1.0:
                raise ValueError(f"coordinates must lie in [0, 1], got {xj}")
            if xj == 0.0:
                xj = 1.0 / (2 * s)
            idx.append(int(math.ceil(xj * s)))
        return cls(tuple(idx), s)

    @property
    def p(self) -> int:
        return len(self.t)

    @property
    def vertices(self) -> np.ndarray:
        """Rows v_0..v_p: v_0 is the low corner, each row advances one axis.

        Advanced coordinates are t_j / s exactly, not v_0 plus an increment,
        so face tests agree with the cell located by `containing`.
        """
        tv = np.asarray(self.t, dtype=float)
        out = np.tile((tv - 1.0) / self.s, (self.p + 1, 1))
        for a in range(1, self.p + 1):
            out[a:, a - 1] = tv[a - 1] / self.s
        return out

    @property
    def v0(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def vp(self) -> np.ndarray:
        return self.vertices[self.p]

    def contains_strictly(self, x: Sequence[float]) -> bool:
        xv = np.asarray(x, dtype=float)
        return bool(np.all(xv > self.v0) and np.all(xv < self.vp))


@dataclass(frozen=True)
class MvObservation:
    """One binary outcome at a p-dimensional design point."""

    x: tuple[float, ...]
    y: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        if self.y not in (0, 1):
            raise ValueError(f"y must be 0 or 1, got {self.y}")
        for xj in self.x:
            if not 0.0 < xj <= 1.0:
                raise ValueError(f"coordinates must lie in (0, 1], got {xj}")


class ConditionalModel:
    """Univariate slice model for axis j with the other slopes frozen.

    beta_rest lists the scaled slopes of the other axes in increasing axis
    order.  They must be an interior point of the slope simplex: positive,
    with the shifted envelope endpoints alpha0 and alpha1 still strictly
    inside the prior bounds.
    """

    def __init__(
        self,
        j: int,
        cube: Hypercube,
        bounds: PriorBounds,
        x_n: Sequence[float],
        members: Iterable[MvObservation] = (),
        beta_rest: Sequence[float] = (),
        quadrature: Quadrature = DEFAULT_QUADRATURE,
    ):
        if not 0 <= j < cube.p:
            raise ValueError(f"axis {j} outside 0..{cube.p - 1}")
        self.j = int(j)
        self.cube = cube
        self.bounds = bounds
        self.x_n = tuple(float(v) for v in x_n)
        self.members = tuple(members)
        self.beta_rest = tuple(float(b) for b in beta_rest)
        self.quadrature = quadrature
        if len(self.x_n) != cube.p:
            raise ValueError("current point dimension does not match the cell")
        if len(self.beta_rest) != cube.p - 1:
            raise ValueError(f"need {cube.p - 1} frozen slopes, got {len(self.beta_rest)}")
        for obs in self.members:
            if not cube.contains_strictly(obs.x):
                raise ValueError(f"member at {obs.x} is not strictly inside the cell")
        s = cube.s
        v0, vp = cube.v0, cube.vp
        rest = [a for a in range(cube.p) if a != self.j]
        self.alpha0 = bounds.alpha + sum(
            b * s * (v0[a] - self.x_n[a]) for b, a in zip(self.beta_rest, rest)
        )
        self.alpha1 = bounds.alpha + sum(
            b * s * (vp[a] - self.x_n[a]) for b, a in zip(self.beta_rest, rest)
        )
        for b in self.beta_rest:
            if b <= 0.0:
                raise EmptySupportError(f"frozen slope {b} must be positive")
        if not (self.alpha0 > bounds.rho_lo and self.alpha1 < bounds.rho_hi):
            raise EmptySupportError(
                f"frozen slopes push the envelope outside the prior bounds: "
                f"alpha0={self.alpha0}, alpha1={self.alpha1}"
            )

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def alpha(self) -> float:
        return self.bounds.alpha

    @property
    def v0j(self) -> float:
        return float(self.cube.v0[self.j])

    @property
    def vpj(self) -> float:
        return float(self.cube.vp[self.j])

    @property
    def theta0(self) -> float:
        up = self.bounds.rho_hi - self.alpha1
        down = self.alpha0 - self.bounds.rho_lo
        return (up * self.v0j + down * self.vpj) / (up + down)

    def eta(self, theta):
        """Largest scaled slope along axis j keeping the segment in bounds."""
        th = np.asarray(theta, dtype=float)
        s = self.cube.s
        with np.errstate(divide="ignore"):
            up = (self.bounds.rho_hi - self.alpha1) / (s * (self.vpj - th))
            down = (self.alpha0 - self.bounds.rho_lo) / (s * (th - self.v0j))
        out = np.where(th <= self.theta0, up, down)
        return float(out) if out.ndim == 0 else out

    def alpha_at(self, x: Sequence[float]) -> float:
        """Envelope level shifted to the point x by the frozen slopes."""
        s = self.cube.s
        rest = [a for a in range(self.cube.p) if a != self.j]
        return self.alpha + sum(
            b * s * (x[a] - self.x_n[a]) for b, a in zip(self.beta_rest, rest)
        )

    def __repr__(self) -> str:  # pragma: no cover
        return (
            f"ConditionalModel(j={self.j}, t={self.cube.t}, s={self.cube.s}, "
            f"m={self.m}, beta_rest={self.beta_rest})"
        )


def locate_hypercube(x: Sequence[float], s: int) -> Hypercube:
    """Grid cell containing x; exact face values map to the lower cell."""
    return Hypercube.containing(x, s)


def _member_ratio_rows(model: ConditionalModel, theta: np.ndarray) -> np.ndarray:
    """Rows z_i = b_i(theta) / a_i with the per-observation envelope shift."""
    s = model.cube.s
    z = np.empty((model.m,) + theta.shape)
    for i, obs in enumerate(model.members):
        sign = 2 * obs.y - 1
        a = 1 - obs.y + sign * model.alpha_at(obs.x)
        z[i] = s * sign * (obs.x[model.j] - theta) / a
    return z


def conditional_theta_weight(model: ConditionalModel, theta) -> np.ndarray:
    """Unnormalized conditional root posterior along axis j."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    e = (
        esym_coeffs(_member_ratio_rows(model, th))
        if model.m
        else np.ones((1,) + th.shape)
    )
    ev = np.asarray(model.eta(th))
    return series_value(e, ev, 2)


def conditional_posterior_theta(model: ConditionalModel) -> PosteriorCurve:
    """Conditional posterior of the axis-j root, truncated to (0, 1)."""
    return PosteriorCurve(
        lambda th: conditional_theta_weight(model, th),
        support=(0.0, 1.0),
        breakpoints=(model.theta0,),
        quadrature=model.quadrature,
    )


def betatilde_support(model: ConditionalModel) -> tuple[float, float]:
    """Slope range along axis j compatible with a root in (0, 1)."""
    s = model.cube.s
    b = model.bounds
    floor = max(
        (b.rho_hi - model.alpha1) / (s * model.vpj),
        (model.alpha0 - b.rho_lo) / (s * (1.0 - model.v0j)),
    )
    top = b.width - sum(model.beta_rest)
    return floor, top


def conditional_posterior_beta(model: ConditionalModel) -> PosteriorCurve:
    """Conditional posterior of the axis-j scaled slope."""
    s = model.cube.s
    bnd = model.bounds
    floor, top = betatilde_support(model)
    if not floor < top:
        raise EmptySupportError(f"slope support ({floor}, {top}) is empty")
    shifts = [model.alpha_at(obs.x) for obs in model.members]

    def unnorm(bt):
        grid = np.atleast_1d(np.asarray(bt, dtype=float))
        ell = model.vpj - (bnd.rho_hi - model.alpha1) / (s * grid)
        u = model.v0j + (model.alpha0 - bnd.rho_lo) / (s * grid)
        if model.m == 0:
            return s * grid * (u - ell)
        a = np.empty((model.m,) + grid.shape)
        b = np.empty_like(a)
        for i, obs in enumerate(model.members):
            sign = 2 * obs.y - 1
            a[i] = 1 - obs.y + sign * (shifts[i] + s * grid * obs.x[model.j])
            b[i] = -sign * s * grid
        return s * grid * product_integral(a, b, ell, u)

    return PosteriorCurve(unnorm, support=(floor, top), quadrature=model.quadrature)


def slope_cap(j: int, cube: Hypercube, bounds: PriorBounds, x_n: Sequence[float]) -> float:
    """Upper end of the frozen-slope interval for the other axis when p = 2.

    The cap is where one of the two envelope constraints binds: the level
    shifted to the low corner reaching rho_lo, or to the high corner reaching
    rho_hi.  A point on the closed high face makes the second constraint
    vacuous.
    """
    if cube.p != 2:
        raise ValueError("slope_cap applies to two-dimensional cells only")
    o = 1 - j
    s = cube.s
    xo = float(x_n[o])
    lo_gap = xo - float(cube.v0[o])
    hi_gap = float(cube.vp[o]) - xo
    first = (bounds.alpha - bounds.rho_lo) / (s * lo_gap)
    second = (bounds.rho_hi - bounds.alpha) / (s * hi_gap) if hi_gap > 0.0 else math.inf
    return min(first, second)


def beta_rest_nodes(
    j: int,
    cube: Hypercube,
    bounds: PriorBounds,
    x_n: Sequence[float],
    nodes: int = 7,
    draws: int = 64,
    rng: SeededRng | None = None,
) -> list[tuple[float, ...]]:
    """Frozen-slope vectors to average the conditional estimates over.

    p = 2 uses the deterministic interior grid {i/(nodes+1) * cap}; higher
    dimensions fall back to rejection sampling from the box (0, width)^(p-1),
    accepting vectors whose shifted envelope stays inside the bounds.
    """
    if cube.p == 1:
        return [()]
    if cube.p == 2:
        cap = slope_cap(j, cube, bounds, x_n)
        return [((i * cap) / (nodes + 1),) for i in range(1, nodes + 1)]
    if rng is None:
        raise ValueError("rejection sampling for p > 2 needs an rng")
    rest = np.array([a for a in range(cube.p) if a != j])
    s = cube.s
    lo_gap = s * (cube.v0[rest] - np.asarray(x_n, dtype=float)[rest])
    hi_gap = s * (cube.vp[rest] - np.asarray(x_n, dtype=float)[rest])
    out: list[tuple[float, ...]] = []
    for _ in range(200):
        cand = rng.uniforms(draws * (cube.p - 1)).reshape(draws, -1) * bounds.width
        keep = (
            (cand > 0.0).all(axis=1)
            & (bounds.alpha + cand @ lo_gap > bounds.rho_lo)
            & (bounds.alpha + cand @ hi_gap < bounds.rho_hi)
        )
        out.extend(tuple(float(b) for b in row) for row in cand[keep])
        if len(out) >= draws:
            return out[:draws]
    if not out:
        raise EmptySupportError("no frozen-slope vector satisfied the envelope bounds")
    return out


def euclidean_norm(x) -> float:
    """Objective favoring candidates closest to the origin."""
    return float(np.linalg.norm(np.asarray(x, dtype=float)))


def diagonal_distance(x) -> float:
    """Objective favoring candidates closest to the main diagonal."""
    xv = np.asarray(x, dtype=float)
    return float(np.linalg.norm(xv - xv.mean()))


U_FUNCTIONS: dict[str, Callable] = {
    "euclidean": euclidean_norm,
    "diagonal": diagonal_distance,
}


def default_mv_estimator(alpha: float) -> str:
    """Conservative mode estimate away from the central band."""
    return "map" if alpha <= 0.25 or alpha >= 0.75 else "bayes"


@dataclass(frozen=True)
class MvConfig:
    """Immutable run settings for one hypercube search session."""

    alpha: float
    dimension: int = 2
    estimator: str = ""
    schedule: SSchedule | None = None
    start: tuple[float, ...] | None = None
    u_name: str = "diagonal"
    nodes: int = 7
    draws: int = 64
    draw_seed: int = 0
    quadrature: Quadrature = DEFAULT_QUADRATURE

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        est = self.estimator or default_mv_estimator(self.alpha)
        if est not in ("bayes", "map"):
            raise ValueError(f"estimator must be 'bayes' or 'map', got {est!r}")
        object.__setattr__(self, "estimator", est)
        if self.schedule is None:
            object.__setattr__(self, "schedule", SSchedule.from_alpha(self.alpha))
        if self.start is None:
            object.__setattr__(self, "start", (0.6,) * self.dimension)
        else:
            object.__setattr__(self, "start", tuple(float(v) for v in self.start))
        if len(self.start) != self.dimension:
            raise ValueError("start dimension does not match the configuration")
        if self.u_name not in U_FUNCTIONS:
            raise ValueError(f"unknown objective {self.u_name!r}")
        if self.nodes < 1:
            raise ValueError("need at least one slope node")


@dataclass(frozen=True)
class MvState:
    """Session state; `x` is the pending design point."""

    config: MvConfig
    x: tuple[float, ...]
    steps: int = 0
    history: tuple[MvObservation, ...] = ()

    @property
    def n(self) -> int:
        return self.steps + 1


@dataclass(frozen=True)
class MvStepResult:
    """Per-axis candidates and the chosen next point."""

    step: int
    x: tuple[float, ...]
    candidates: tuple[tuple[float, ...], ...]
    theta: tuple[float, ...]
    j_star: int
    cube: Hypercube
    m: int


def new_mv_session(config: MvConfig) -> MvState:
    return MvState(config=config, x=config.start)


def _conditional_models(state: MvState, j: int) -> list[ConditionalModel]:
    config = state.config
    # the candidate being built is design point len(history)+1
    s = config.schedule.s_at(len(state.history) + 1)
    cube = locate_hypercube(state.x, s)
    members = [o for o in state.history if cube.contains_strictly(o.x)]
    bounds = PriorBounds(0.0, 1.0, config.alpha)
    rng = None
    if cube.p > 2:
        rng = SeededRng(config.draw_seed, (state.steps, j))
    nodes = beta_rest_nodes(
        j, cube, bounds, state.x, nodes=config.nodes, draws=config.draws, rng=rng
    )
    return [
        ConditionalModel(
            j, cube, bounds, state.x, members, br, quadrature=config.quadrature
        )
        for br in nodes
    ]


def averaged_theta(j: int, state: MvState) -> float:
    """Average of the axis-j conditional estimates over the slope nodes."""
    config = state.config
    vals = []
    for cm in _conditional_models(state, j):
        curve = conditional_posterior_theta(cm)
        vals.append(curve.mean if config.estimator == "bayes" else curve.mode)
    return float(np.mean(vals))


def candidate_points(state: MvState) -> tuple[tuple[float, ...], ...]:
    """One candidate per axis: the current point with that axis re-estimated."""
    out = []
    for j in range(state.config.dimension):
        cand = list(state.x)
        cand[j] = averaged_theta(j, state)
        out.append(tuple(cand))
    return tuple(out)


def next_point(state: MvState, u: Callable | None = None) -> tuple[tuple[float, ...], int]:
    """Candidate minimizing the objective; ties pick the smallest axis."""
    if u is None:
        u = U_FUNCTIONS[state.config.u_name]
    cands = candidate_points(state)
    scores = [u(c) for c in cands]
    j_star = int(np.argmin(scores))
    return cands[j_star], j_star


def mv_step(state: MvState, y: int) -> tuple[MvState, MvStepResult]:
    """Consume one outcome at the pending point, propose the next one."""
    if y not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {y}")
    history = state.history + (MvObservation(state.x, y),)
    probed = replace(state, history=history)
    cands = candidate_points(probed)
    u = U_FUNCTIONS[state.config.u_name]
    scores = [u(c) for c in cands]
    j_star = int(np.argmin(scores))
    x_next = cands[j_star]
    steps = state.steps + 1
    cube = locate_hypercube(state.x, state.config.schedule.s_at(steps + 1))
    result = MvStepResult(
        step=steps,
        x=x_next,
        candidates=cands,
        theta=tuple(c[j] for j, c in enumerate(cands)),
        j_star=j_star,
        cube=cube,
        m=sum(1 for o in history if cube.contains_strictly(o.x)),
    )
    return replace(state, x=x_next, steps=steps, history=history), result


def mv_estimate(state: MvState) -> MvStepResult:
    """Recompute the candidates behind the pending point; no state change.

    The pending point was produced with the last observed point as the
    anchor, so the replay re-anchors there; a fresh session reports the prior
    candidates at the start point.
    """
    anchor = state.history[-1].x if state.history else state.x
    replay = replace(state, x=anchor)
    cands = candidate_points(replay)
    u = U_FUNCTIONS[state.config.u_name]
    scores = [u(c) for c in cands]
    j_star = int(np.argmin(scores))
    cube = locate_hypercube(anchor, state.config.schedule.s_at(state.n))
    return MvStepResult(
        step=state.steps,
        x=cands[j_star],
        candidates=cands,
        theta=tuple(c[j] for j, c in enumerate(cands)),
        j_star=j_star,
        cube=cube,
        m=sum(1 for o in state.history if cube.contains_strictly(o.x)),
    )


def mv_state_to_doc(state: MvState) -> dict:
    """JSON-serializable session document; floats round-trip exactly."""
    c = state.config
    return {
        "version": 1,
        "dimension": c.dimension,
        "alpha": c.alpha,
        "estimator": c.estimator,
        "schedule": {
            "stage1": c.schedule.stage1,
            "stage2": c.schedule.stage2,
            "switch_step": c.schedule.switch_step,
        },
        "start": list(c.start),
        "u_name": c.u_name,
        "nodes": c.nodes,
        "draws": c.draws,
        "draw_seed": c.draw_seed,
        "steps": state.steps,
        "x": list(state.x),
        "history": [[list(o.x), o.y] for o in state.history],
    }


def mv_state_from_doc(doc) -> MvState:
    try:
        if doc["version"] != 1:
            raise SchemaError(f"unsupported session document version {doc['version']!r}")
        if doc.get("dimension", 1) < 2:
            raise SchemaError("document describes a univariate session")
        sched = doc["schedule"]
        config = MvConfig(
            alpha=float(doc["alpha"]),
            dimension=int(doc["dimension"]),
            estimator=str(doc["estimator"]),
            schedule=SSchedule(
                int(sched["stage1"]), int(sched["stage2"]), int(sched["switch_step"])
            ),
            start=tuple(float(v) for v in doc["start"]),
            u_name=str(doc["u_name"]),
            nodes=int(doc["nodes"]),
            draws=int(doc["draws"]),
            draw_seed=int(doc["draw_seed"]),
        )
        return MvState(
            config=config,
            x=tuple(float(v) for v in doc["x"]),
            steps=int(doc["steps"]),
            history=tuple(
                MvObservation(tuple(float(v) for v in x), int(y))
                for x, y in doc["history"]
            ),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise SchemaError(f"malformed session document: {exc!r}") from exc


# --- lockstep engine (p = 2) -------------------------------------------------

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class MvLanes:
    """Two-dimensional search paths advanced in parallel, one lane per path.

    Mirrors the sequential pipeline: per axis, seven interior slope nodes,
    conditional posterior mean (Bayes) or mode (MAP) per node, node average as
    the axis candidate, and the diagonal objective picking the next point.
    """

    def __init__(
        self,
        alpha: float,
        lanes: int,
        schedule: SSchedule,
        estimator: str,
        start: tuple[float, float] = (0.6, 0.6),
        nodes: int = 7,
    ):
        if estimator not in ("bayes", "map"):
            raise ValueError(f"estimator must be 'bayes' or 'map', got {estimator!r}")
        self.alpha = float(alpha)
        self.lanes = int(lanes)
        self.schedule = schedule
        self.estimator = estimator
        self.nodes = int(nodes)
        self.steps = 0
        self.x = np.tile(np.asarray(start, dtype=float)[:, None], (1, self.lanes))
        self._hx: list[np.ndarray] = []
        self._hy: list[np.ndarray] = []

    def step(self, y) -> np.ndarray:
        """Consume one outcome row (lanes,); returns the next points (2, lanes)."""
        self._hx.append(self.x.copy())
        self._hy.append(np.asarray(y, dtype=float))
        self.steps += 1
        s = self.schedule.s_at(self.steps + 1)
        t = np.ceil(self.x * s).astype(np.int64)
        v0 = (t - 1.0) / s
        vp = t / s
        X = np.stack(self._hx)
        Y = np.stack(self._hy)
        member = ((X > v0[None]) & (X < vp[None])).all(axis=1)
        r_cap = int(member.sum(axis=0).max())
        theta = np.empty((2, self.lanes))
        for j in (0, 1):
            theta[j] = self._axis_candidate(j, s, v0, vp, X, Y, member, r_cap)
        d0 = np.abs(self.x[1] - theta[0])
        d1 = np.abs(self.x[0] - theta[1])
        pick0 = d0 <= d1
        x_next = self.x.copy()
        x_next[0] = np.where(pick0, theta[0], self.x[0])
        x_next[1] = np.where(pick0, self.x[1], theta[1])
        self.x = x_next
        return self.x

    def _axis_candidate(self, j, s, v0, vp, X, Y, member, r_cap):
        o = 1 - j
        xo = self.x[o]
        lo_gap = xo - v0[o]
        hi_gap = vp[o] - xo
        with np.errstate(divide="ignore"):
            cap = np.minimum(
                self.alpha / (s * lo_gap),
                np.where(hi_gap > 0.0, (1.0 - self.alpha) / (s * hi_gap), np.inf),
            )
        acc = np.zeros(self.lanes)
        for i in range(1, self.nodes + 1):
            br = (i * cap) / (self.nodes + 1)
            alpha0 = self.alpha + br * s * (v0[o] - xo)
            alpha1 = self.alpha + br * s * (vp[o] - xo)
            alpha_i = self.alpha + br[None, :] * s * (X[:, o, :] - xo[None, :])
            if self.estimator == "bayes":
                acc += self._cond_mean(
                    s, v0[j], vp[j], alpha0, alpha1, X[:, j, :], Y, member, alpha_i, r_cap
                )
            else:
                acc += self._cond_mode(
                    s, v0[j], vp[j], alpha0, alpha1, X[:, j, :], Y, member, alpha_i, r_cap
                )
        return acc / self.nodes

    @staticmethod
    def _esym(s, Xj, Y, member, alpha_i, r_cap, theta):
        e = np.zeros((r_cap + 1,) + theta.shape)
        e[0] = 1.0
        if r_cap == 0:
            return e
        seen = 0
        tmp = np.empty(theta.shape)
        for i in range(Xj.shape[0]):
            mi = member[i]
            if not mi.any():
                continue
            seen += 1
            sign = 2.0 * Y[i] - 1.0
            a = 1.0 - Y[i] + sign * alpha_i[i]
            z = np.where(mi, s * sign * (Xj[i] - theta) / a, 0.0)
            for r in range(min(seen, r_cap), 0, -1):
                np.multiply(z, e[r - 1], out=tmp)
                e[r] += tmp
        return e

    @staticmethod
    def _piece_nodes(k, lo_u, hi_u):
        span = np.log(hi_u / lo_u)
        panels = int(min(40, max(2, math.ceil(k * float(span.max()) / 28.0))))
        pos, wt = _mv_panel_nodes(panels, 24)
        u = lo_u * np.exp(pos[:, None] * span)
        w = wt[:, None] * span * u
        return u, w

    def _cond_mean(self, s, v0j, vpj, alpha0, alpha1, Xj, Y, member, alpha_i, r_cap):
        up = 1.0 - alpha1
        down = alpha0
        theta0 = (up * v0j + down * vpj) / (up + down)
        k = r_cap + 1
        u1, w1 = self._piece_nodes(k, vpj - theta0, vpj)
        u2, w2 = self._piece_nodes(k, theta0 - v0j, 1.0 - v0j)
        th = np.concatenate([vpj - u1, v0j + u2], axis=0)
        ev = np.concatenate([up / (s * u1), down / (s * u2)], axis=0)
        e = self._esym(s, Xj, Y, member, alpha_i, r_cap, th)
        f = series_value(e, ev, 2)
        w = np.concatenate([w1, w2], axis=0)
        z0 = (w * f).sum(axis=0)
        z1 = (w * f * th).sum(axis=0)
        return z1 / z0

    def _cond_weight(self, s, v0j, vpj, theta0, up, down, Xj, Y, member, alpha_i, r_cap, theta):
        e = self._esym(s, Xj, Y, member, alpha_i, r_cap, theta)
        with np.errstate(divide="ignore"):
            hi = up / (s * (vpj - theta))
            lo = down / (s * (theta - v0j))
        ev = np.where(theta <= theta0, hi, lo)
        return series_value(e, ev, 2)

    def _cond_mode(self, s, v0j, vpj, alpha0, alpha1, Xj, Y, member, alpha_i, r_cap):
        up = 1.0 - alpha1
        down = alpha0
        theta0 = (up * v0j + down * vpj) / (up + down)
        eps = 1e-12
        zero = np.zeros(self.lanes)
        one = np.ones(self.lanes)
        xs1 = np.linspace(zero + eps, theta0 - eps, 513, axis=0)
        xs2 = np.linspace(theta0 + eps, one - eps, 513, axis=0)
        vals = self._cond_weight(
            s, v0j, vpj, theta0, up, down, Xj, Y, member, alpha_i, r_cap,
            np.concatenate([xs1, xs2], axis=0),
        )
        i1 = np.argmax(vals[:513], axis=0)
        i2 = np.argmax(vals[513:], axis=0)
        top2 = np.take_along_axis(vals[513:], i2[None], axis=0)[0]
        lo_b = np.concatenate(
            [
                np.take_along_axis(xs1, np.maximum(i1 - 1, 0)[None], axis=0)[0],
                np.take_along_axis(xs2, np.maximum(i2 - 1, 0)[None], axis=0)[0],
            ]
        )
        hi_b = np.concatenate(
            [
                np.take_along_axis(xs1, np.minimum(i1 + 1, 512)[None], axis=0)[0],
                np.take_along_axis(xs2, np.minimum(i2 + 1, 512)[None], axis=0)[0],
            ]
        )

        v0j2 = np.tile(v0j, 2)
        vpj2 = np.tile(vpj, 2)
        theta02 = np.tile(theta0, 2)
        up2 = np.tile(up, 2)
        down2 = np.tile(down, 2)
        Xj2 = np.tile(Xj, (1, 2))
        Y2 = np.tile(Y, (1, 2))
        member2 = np.tile(member, (1, 2))
        alpha_i2 = np.tile(alpha_i, (1, 2))

        def f(th):
            return self._cond_weight(
                s, v0j2, vpj2, theta02, up2, down2, Xj2, Y2, member2,
                alpha_i2, r_cap, th,
            )

        gx, gv = _mv_golden(f, lo_b, hi_b)
        refine = top2 > gv[: self.lanes]
        return np.where(refine, gx[self.lanes :], gx[: self.lanes])


def _mv_panel_nodes(panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    from .vectorized import _panel_nodes

    return _panel_nodes(panels, order)


def _mv_golden(f, a, b):
    from .vectorized import _golden_lanes

    return _golden_lanes(f, a, b)


def mv_final_points(model, method: str, alpha: float, config) -> np.ndarray:
    """Lockstep run of one bivariate cell; returns final points (reps, 2)."""
    from .benchmark import replication_streams

    reps = config.replications
    u = replication_streams(
        config.master_seed, model.name, method, alpha, config.horizon, reps
    )
    est = "bayes" if method == "bsa-bayes" else "map"
    eng = MvLanes(alpha, reps, config.schedule, est)
    for k in range(config.horizon):
        y = u[k] < model.prob(np.stack([eng.x[0], eng.x[1]], axis=-1), alpha)
        eng.step(y.astype(float))
    return np.stack([eng.x[0], eng.x[1]], axis=-1)
