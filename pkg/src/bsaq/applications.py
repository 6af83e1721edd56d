"""Continuous-response front ends for the binary quantile driver.

Two reductions are provided.  Root finding for a monotone regression
function squashes each observed response through a sigmoid, approximates the
squashed value by the nearest fraction a/q, and feeds the resulting q
binaries to the median search (alpha = 0.5).  Minimum finding for a convex
objective probes both sides of the current point and applies the same
reduction to the scaled difference quotient, whose root is the minimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .competitors import EfficientRM
from .driver import SessionConfig, SessionState, SSchedule, advance, new_session
from .numerics import SeededRng
from .vectorized import BsaLanes, RmjLanes

__all__ = [
    "SigmoidEncoder",
    "RootSearchResult",
    "KwSearchResult",
    "KwClassicState",
    "root_search",
    "kw_search",
    "kw_classic_step",
    "probe_width",
    "clipped_probes",
    "REGRESSIONS",
    "cubic_drift",
    "quadratic_bowl",
    "rmj_sign_root",
    "rmj_sign_minimum",
    "app_noise_streams",
    "root_trajectories",
    "minimum_trajectories",
]


@dataclass(frozen=True)
class SigmoidEncoder:
    """Squash a real response into (0, 1) and round it to q binaries.

    b scales the sigmoid; q is the number of binaries per response.  q = 1
    reduces to dichotomizing the response by its sign.
    """

    b: float = 1.0
    q: int = 1

    def __post_init__(self) -> None:
        if not self.b > 0.0:
            raise ValueError(f"sigmoid scale must be positive, got {self.b}")
        if self.q < 1:
            raise ValueError(f"binary count must be >= 1, got {self.q}")

    @classmethod
    def for_range(cls, half_width: float, q: int = 1) -> "SigmoidEncoder":
        """Encoder for responses known to lie in (-half_width, half_width)."""
        if not half_width > 0.0:
            raise ValueError(f"range half-width must be positive, got {half_width}")
        return cls(b=3.0 / half_width, q=q)

    def squash(self, y: float) -> float:
        return float(expit(self.b * y))

    def encode(self, y: float) -> tuple[int, ...]:
        """a ones then q-a zeros with a/q the nearest fraction; ties round up."""
        if not math.isfinite(y):
            raise ValueError(f"response must be finite, got {y}")
        a = int(math.floor(self.q * self.squash(y) + 0.5))
        a = min(a, self.q)
        return (1,) * a + (0,) * (self.q - a)


def probe_width(n: int) -> float:
    """Half-width of the two minimum-search probes at step n."""
    if n < 1:
        raise ValueError(f"step index must be >= 1, got {n}")
    return float(n) ** (-1.0 / 3.0)


def clipped_probes(
    x: float, c: float, domain: tuple[float, float] | None = (0.0, 1.0)
) -> tuple[float, float, bool]:
    """Probe pair (x+c, x-c) clipped into the domain, with a flag when clipping hit.

    domain=None means the objective accepts any real probe; nothing is clipped.
    """
    hi = x + c
    lo = x - c
    if domain is None:
        return hi, lo, False
    clipped = hi > domain[1] or lo < domain[0]
    return min(hi, domain[1]), max(lo, domain[0]), clipped


@dataclass(frozen=True)
class RootSearchResult:
    """Design-point trajectory; xs[k] is the point pending after k outcomes."""

    xs: np.ndarray
    state: SessionState


@dataclass(frozen=True)
class KwSearchResult:
    """Trajectory plus a per-step flag marking probes clipped at the domain edge."""

    xs: np.ndarray
    state: SessionState
    clipped: np.ndarray


def _median_session(start: float, schedule: SSchedule | None) -> SessionState:
    config = SessionConfig(
        alpha=0.5,
        estimator="bayes",
        schedule=schedule if schedule is not None else SSchedule(5, 9),
        start=start,
    )
    return new_session(config)


def root_search(
    oracle: Callable[[float, SeededRng], float],
    encoder: SigmoidEncoder,
    horizon: int,
    seed: int | SeededRng,
    *,
    start: float = 0.5,
    schedule: SSchedule | None = None,
) -> RootSearchResult:
    """Median search on the encoded binaries of a noisy regression oracle."""
    rng = SeededRng(seed) if isinstance(seed, int) else seed
    state = _median_session(start, schedule)
    xs = [state.x]
    for _ in range(horizon):
        y = float(oracle(state.x, rng))
        state, _ = advance(state, encoder.encode(y))
        xs.append(state.x)
    return RootSearchResult(np.asarray(xs), state)


def kw_search(
    oracle: Callable[[float, SeededRng], float],
    encoder: SigmoidEncoder,
    horizon: int,
    seed: int | SeededRng,
    *,
    start: float = 0.5,
    schedule: SSchedule | None = None,
    domain: tuple[float, float] | None = (0.0, 1.0),
) -> KwSearchResult:
    """Minimum search: difference quotients of paired probes drive the root finder.

    Step n probes x_n + c_n then x_n - c_n, clipped into the domain when one is
    given; the scaled difference (y1 - y2)/c_n keeps the nominal c_n
    denominator either way and is encoded for the median search.  Pass
    domain=None for objectives defined beyond the unit interval; clipping an
    unbounded objective displaces the difference-quotient root away from the
    minimizer until c_n shrinks below the distance to the domain edge.
    """
    rng = SeededRng(seed) if isinstance(seed, int) else seed
    state = _median_session(start, schedule)
    xs = [state.x]
    flags = []
    for n in range(1, horizon + 1):
        c = probe_width(n)
        hi, lo, clip = clipped_probes(state.x, c, domain)
        y1 = float(oracle(hi, rng))
        y2 = float(oracle(lo, rng))
        state, _ = advance(state, encoder.encode((y1 - y2) / c))
        xs.append(state.x)
        flags.append(clip)
    return KwSearchResult(np.asarray(xs), state, np.asarray(flags, dtype=bool))


@dataclass(frozen=True)
class KwClassicState:
    """Finite-difference recursion state: current point and 1-based step index."""

    x: float
    n: int = 1


def kw_classic_step(state: KwClassicState, y1: float, y2: float) -> KwClassicState:
    """x - (y1 - y2)/(n * c_n) with gain 1/n and probe half-width c_n."""
    gamma = 1.0 / state.n
    c = probe_width(state.n)
    return KwClassicState(state.x - gamma * (y1 - y2) / c, state.n + 1)


def cubic_drift(x: float, rng: SeededRng) -> float:
    """Steep odd curve crossing zero at 0.3, plus standard normal noise."""
    return 200.0 * (x - 0.3) ** 3 + rng.standard_normal()


def quadratic_bowl(x: float, rng: SeededRng) -> float:
    """Convex curve with minimum at 0.3, plus standard normal noise."""
    return 200.0 * (x - 0.3) ** 2 + rng.standard_normal()


REGRESSIONS: dict[str, Callable[[float, SeededRng], float]] = {
    "cubic": cubic_drift,
    "quadratic": quadratic_bowl,
}


def rmj_sign_root(
    oracle: Callable[[float, SeededRng], float],
    horizon: int,
    seed: int | SeededRng,
    *,
    start: float = 0.5,
    beta: float = 1.0,
) -> np.ndarray:
    """Baseline: efficient Robbins-Monro on the response signs.

    Runs in the native (-3, 3) coordinates like the quantile benchmark; the
    oracle is queried at the back-mapped point, which is not clipped.
    """
    rng = SeededRng(seed) if isinstance(seed, int) else seed
    proc = EfficientRM(6.0 * start - 3.0, 0.5, beta)
    xs = [start]
    for _ in range(horizon):
        y = float(oracle(xs[-1], rng))
        proc.update(1 if y > 0 else 0)
        xs.append((proc.x + 3.0) / 6.0)
    return np.asarray(xs)


def rmj_sign_minimum(
    oracle: Callable[[float, SeededRng], float],
    horizon: int,
    seed: int | SeededRng,
    *,
    start: float = 0.5,
    beta: float = 1.0,
    domain: tuple[float, float] | None = (0.0, 1.0),
) -> np.ndarray:
    """Baseline: efficient Robbins-Monro on the difference-quotient signs."""
    rng = SeededRng(seed) if isinstance(seed, int) else seed
    proc = EfficientRM(6.0 * start - 3.0, 0.5, beta)
    xs = [start]
    for n in range(1, horizon + 1):
        c = probe_width(n)
        hi, lo, _ = clipped_probes(xs[-1], c, domain)
        y1 = float(oracle(hi, rng))
        y2 = float(oracle(lo, rng))
        proc.update(1 if y1 - y2 > 0 else 0)
        xs.append((proc.x + 3.0) / 6.0)
    return np.asarray(xs)


# --- lockstep replication arrays ---------------------------------------------

APP_CODES = {"root": 1, "minimum": 2}
APP_METHOD_CODES = {"bsa": 1, "rmj-sign": 2}


def app_noise_streams(
    master_seed: int, app: str, method: str, horizon: int, reps: int, per_step: int
) -> np.ndarray:
    """Reproducible N(0,1) noise, shape (horizon, per_step, reps).

    Stream (rep) is keyed by (app, method, rep) so methods never share noise
    and adding replications never perturbs earlier ones.
    """
    out = np.empty((horizon, per_step, reps))
    for rep in range(reps):
        rng = SeededRng(master_seed, (APP_CODES[app], APP_METHOD_CODES[method], rep))
        out[:, :, rep] = rng.standard_normals(horizon * per_step).reshape(
            horizon, per_step
        )
    return out


def _encode_rows(ystar: np.ndarray, q: int) -> np.ndarray:
    """Counts a = nearest integer to q*ystar (ties up) as q stacked binary rows."""
    a = np.floor(q * ystar + 0.5)
    return (np.arange(q)[:, None] < a[None, :]).astype(float)


def root_trajectories(
    master_seed: int,
    horizon: int,
    reps: int,
    method: str = "bsa",
    *,
    mean_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    b: float = 1.0,
    q: int = 2,
    start: float = 0.5,
    schedule: SSchedule | None = None,
    beta: float = 1.0,
) -> np.ndarray:
    """Design points (horizon+1, reps) for the root application, all lanes at once.

    Row k holds x_{k+1}; lane r reproduces the sequential run seeded with
    (app, method, r) bit for bit.
    """
    if method not in APP_METHOD_CODES:
        raise ValueError(f"unknown method {method!r}")
    noise = app_noise_streams(master_seed, "root", method, horizon, reps, 1)[:, 0, :]
    if mean_fn is None:
        mean_fn = lambda x: 200.0 * (x - 0.3) ** 3
    out = np.empty((horizon + 1, reps))
    out[0] = start
    if method == "bsa":
        eng = BsaLanes(
            0.5, reps, schedule if schedule is not None else SSchedule(5, 9), "bayes",
            start=start,
        )
        for k in range(horizon):
            y = mean_fn(eng.x) + noise[k]
            eng.step(_encode_rows(expit(b * y), q))
            out[k + 1] = eng.x
        return out
    eng = RmjLanes(6.0 * start - 3.0, 0.5, beta, reps)
    x_scaled = np.full(reps, float(start))
    for k in range(horizon):
        y = mean_fn(x_scaled) + noise[k]
        eng.step((y > 0).astype(float))
        x_scaled = (eng.x + 3.0) / 6.0
        out[k + 1] = x_scaled
    return out


def minimum_trajectories(
    master_seed: int,
    horizon: int,
    reps: int,
    method: str = "bsa",
    *,
    mean_fn: Callable[[np.ndarray], np.ndarray] | None = None,
    b: float = 1.0,
    q: int = 2,
    start: float = 0.5,
    schedule: SSchedule | None = None,
    beta: float = 1.0,
    domain: tuple[float, float] | None = (0.0, 1.0),
) -> np.ndarray:
    """Design points (horizon+1, reps) for the minimum application.

    domain has the same meaning as in kw_search; the built-in objective is a
    polynomial on the whole line, so comparisons in its native setting pass
    domain=None.
    """
    if method not in APP_METHOD_CODES:
        raise ValueError(f"unknown method {method!r}")
    noise = app_noise_streams(master_seed, "minimum", method, horizon, reps, 2)
    if mean_fn is None:
        mean_fn = lambda x: 200.0 * (x - 0.3) ** 2

    def probes(x: np.ndarray, c: float) -> tuple[np.ndarray, np.ndarray]:
        if domain is None:
            return x + c, x - c
        return np.minimum(x + c, domain[1]), np.maximum(x - c, domain[0])

    out = np.empty((horizon + 1, reps))
    out[0] = start
    if method == "bsa":
        eng = BsaLanes(
            0.5, reps, schedule if schedule is not None else SSchedule(5, 9), "bayes",
            start=start,
        )
        for k in range(horizon):
            c = probe_width(k + 1)
            hi, lo = probes(eng.x, c)
            ytilde = (
                mean_fn(hi) + noise[k, 0] - mean_fn(lo) - noise[k, 1]
            ) / c
            eng.step(_encode_rows(expit(b * ytilde), q))
            out[k + 1] = eng.x
        return out
    eng = RmjLanes(6.0 * start - 3.0, 0.5, beta, reps)
    x_scaled = np.full(reps, float(start))
    for k in range(horizon):
        c = probe_width(k + 1)
        hi, lo = probes(x_scaled, c)
        ytilde = (mean_fn(hi) + noise[k, 0] - mean_fn(lo) - noise[k, 1]) / c
        eng.step((ytilde > 0).astype(float))
        x_scaled = (eng.x + 3.0) / 6.0
        out[k + 1] = x_scaled
    return out
