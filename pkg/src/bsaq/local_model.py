"""Local linear posterior machinery on one grid subinterval.

The design grid splits (0, 1] into s slices; on the slice (v0, v1] containing
the current point the response probability is modeled linearly,

    F(x) = alpha + beta (x - theta),    beta > 0,

where theta is the root being sought.  With rho0 = F(v0), rho1 = F(v1) and the
scaled slope betatilde = beta / s, the pair (rho0, rho1) is given a uniform
prior over ordered pairs in (rho_lo, rho_hi).  Binary outcomes observed
strictly inside the slice update the prior; every posterior used downstream
(theta, rho0, rho1, betatilde) has the closed polynomial-series form computed
here.

The series coefficients come from expanding the likelihood product
prod_i (a_i + b_i t) in powers of t; the recursion that builds them is
equivalent to brute-force expansion over all subsets and is the only
data-dependent part of the computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .numerics import DEFAULT_QUADRATURE, Quadrature, integrate

__all__ = [
    "Subinterval",
    "PriorBounds",
    "Observation",
    "LocalModel",
    "PosteriorCurve",
    "DegenerateModelError",
    "EmptySupportError",
    "theta_zero",
    "eta",
    "likelihood_coeffs",
    "esym_coeffs",
    "poly_coeffs",
    "product_integral",
    "d_coefficients",
    "posterior_theta",
    "posterior_rho0",
    "posterior_rho1",
    "posterior_betatilde",
    "posterior_mean",
    "posterior_map",
    "credible_interval",
    "theta_density_direct",
    "theta_density_recursive",
    "x2_oracle",
]


class DegenerateModelError(RuntimeError):
    """Posterior normalization constant vanished; the local model is unusable."""


class EmptySupportError(ValueError):
    """Requested posterior has empty support under the current bounds."""


@dataclass(frozen=True)
class Subinterval:
    """Slice t of the uniform grid with s slices: (v0, v1] = ((t-1)/s, t/s]."""

    t: int
    s: int

    def __post_init__(self) -> None:
        if self.s < 1:
            raise ValueError(f"grid size s must be >= 1, got {self.s}")
        if not 1 <= self.t <= self.s:
            raise ValueError(f"slice index t must lie in 1..{self.s}, got {self.t}")

    @classmethod
    def containing(cls, x: float, s: int) -> "Subinterval":
        """Slice containing x in (0, 1]; exact boundaries map to the lower slice."""
        if not 0.0 < x <= 1.0:
            raise ValueError(f"x must lie in (0, 1], got {x}")
        return cls(int(math.ceil(x * s)), s)

    @property
    def v0(self) -> float:
        return (self.t - 1) / self.s

    @property
    def v1(self) -> float:
        return self.t / self.s

    def contains_strictly(self, x: float) -> bool:
        return self.v0 < x < self.v1


@dataclass(frozen=True)
class PriorBounds:
    """Known envelope rho_lo < F < rho_hi on the slice, with the target level alpha inside."""

    rho_lo: float
    rho_hi: float
    alpha: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.rho_lo < self.alpha < self.rho_hi <= 1.0):
            raise ValueError(
                f"need 0 <= rho_lo < alpha < rho_hi <= 1, got "
                f"({self.rho_lo}, {self.alpha}, {self.rho_hi})"
            )

    @property
    def width(self) -> float:
        return self.rho_hi - self.rho_lo


@dataclass(frozen=True)
class Observation:
    """One binary outcome y observed at design point x (both in scaled coordinates)."""

    x: float
    y: int

    def __post_init__(self) -> None:
        if self.y not in (0, 1):
            raise ValueError(f"y must be 0 or 1, got {self.y}")
        if not 0.0 < self.x <= 1.0:
            raise ValueError(f"x must lie in (0, 1], got {self.x}")


def theta_zero(sub: Subinterval, bounds: PriorBounds) -> float:
    """Kink of the prior envelope: root location if F spans the full envelope."""
    w = bounds.width
    return ((bounds.rho_hi - bounds.alpha) * sub.v0 + (bounds.alpha - bounds.rho_lo) * sub.v1) / w


def eta(theta, sub: Subinterval, bounds: PriorBounds):
    """Largest scaled slope betatilde keeping F inside (rho_lo, rho_hi) on the slice.

    Piecewise hyperbolic with a kink at theta_zero, where it attains its
    maximum rho_hi - rho_lo.  Vectorized over theta.
    """
    th = np.asarray(theta, dtype=float)
    t0 = theta_zero(sub, bounds)
    s = sub.s
    # both branches are evaluated; the one dividing by zero at th == v0 or
    # th == v1 is always the masked-out side
    with np.errstate(divide="ignore"):
        up = (bounds.rho_hi - bounds.alpha) / (s * (sub.v1 - th))
        down = (bounds.alpha - bounds.rho_lo) / (s * (th - sub.v0))
    out = np.where(th <= t0, up, down)
    return float(out) if out.ndim == 0 else out


def likelihood_coeffs(obs: Observation, alpha: float, s: int, theta):
    """Coefficients (a_i, b_i(theta)) with P(y_i | theta, betatilde) = a_i + b_i betatilde."""
    sign = 2 * obs.y - 1
    a = 1 - obs.y + sign * alpha
    b = s * sign * (obs.x - np.asarray(theta, dtype=float))
    return a, b


def esym_coeffs(z: np.ndarray) -> np.ndarray:
    """Elementary symmetric polynomials e_0..e_m of the rows of z.

    z has shape (m, ...); the result has shape (m+1, ...) with e_0 = 1.
    A zero row is the identity update, which is how callers mask out
    non-member observations without changing the result.
    """
    z = np.asarray(z, dtype=float)
    m = z.shape[0]
    e = np.zeros((m + 1,) + z.shape[1:], dtype=float)
    e[0] = 1.0
    for i in range(m):
        for r in range(i + 1, 0, -1):
            e[r] += z[i] * e[r - 1]
    return e


def poly_coeffs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Coefficients d_0..d_m of prod_i (a_i + b_i t) in powers of t.

    a and b have shape (m, ...); the result has shape (m+1, ...).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = a.shape[0]
    d = np.zeros((m + 1,) + np.broadcast_shapes(a.shape, b.shape)[1:], dtype=float)
    d[0] = 1.0
    for i in range(m):
        for r in range(i + 1, 0, -1):
            d[r] = d[r] * a[i] + d[r - 1] * b[i]
        d[0] = d[0] * a[i]
    return d


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def product_integral(a: np.ndarray, b: np.ndarray, lo, hi) -> np.ndarray:
    """Integral of prod_i (a_i + b_i t) dt from lo to hi, per column.

    a and b have shape (m, G); lo and hi broadcast against (G,).  The product
    of m linear factors is a degree-m polynomial, so Gauss-Legendre with
    m // 2 + 1 nodes integrates it exactly; evaluating the factored form
    keeps large-m values conditioned where the expanded-coefficient
    antiderivative cancels catastrophically.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = a.shape[0]
    k = m // 2 + 1
    try:
        nodes, weights = _GAUSS_CACHE[k]
    except KeyError:
        nodes, weights = leggauss(k)
        _GAUSS_CACHE[k] = (nodes, weights)
    shape = np.broadcast_shapes(a.shape[1:], np.shape(lo), np.shape(hi))
    lo_b = np.broadcast_to(np.asarray(lo, dtype=float), shape)
    hi_b = np.broadcast_to(np.asarray(hi, dtype=float), shape)
    mid = 0.5 * (hi_b + lo_b)
    half = 0.5 * (hi_b - lo_b)
    t = mid[None] + half[None] * nodes[:, None]
    vals = np.broadcast_to(weights[:, None], t.shape).copy()
    for i in range(m):
        vals *= a[i][None] + b[i][None] * t
    return half * vals.sum(axis=0)


def d_coefficients(
    observations: Sequence[Observation], theta, sub: Subinterval, alpha: float
) -> np.ndarray:
    """Likelihood expansion coefficients d_{m,r}(theta), r = 0..m.

    Expanding prod_i {a_i + b_i(theta) betatilde} in powers of betatilde,
    where a_i = 1 - y_i + (2y_i - 1) alpha and b_i = s (2y_i - 1)(x_i - theta).
    The returned array has shape (m+1,) + shape(theta).
    """
    th = np.asarray(theta, dtype=float)
    m = len(observations)
    if m == 0:
        return np.ones((1,) + th.shape, dtype=float)
    a = np.empty((m,) + th.shape, dtype=float)
    b = np.empty((m,) + th.shape, dtype=float)
    for i, obs in enumerate(observations):
        ai, bi = likelihood_coeffs(obs, alpha, sub.s, th)
        a[i] = ai
        b[i] = bi
    return poly_coeffs(a, b)


def series_value(coeffs: np.ndarray, base: np.ndarray, offset: int) -> np.ndarray:
    """sum_r coeffs[r] * base**(r+offset) / (r+offset), vectorized over the grid."""
    power = base**offset
    out = np.zeros_like(power)
    for r in range(coeffs.shape[0]):
        out += coeffs[r] * power / (r + offset)
        power = power * base
    return out


class LocalModel:
    """A slice, its prior bounds, and the outcomes observed strictly inside it."""

    def __init__(
        self,
        sub: Subinterval,
        bounds: PriorBounds,
        members: Iterable[Observation] = (),
        quadrature: Quadrature = DEFAULT_QUADRATURE,
    ):
        self.sub = sub
        self.bounds = bounds
        # canonical order makes every downstream float reduction independent
        # of the order observations arrived in, so permuted histories give
        # bitwise-identical densities
        self.members = tuple(sorted(members, key=lambda o: (o.x, o.y)))
        self.quadrature = quadrature
        for obs in self.members:
            if not sub.contains_strictly(obs.x):
                raise ValueError(
                    f"member at x={obs.x} is not strictly inside ({sub.v0}, {sub.v1})"
                )

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def alpha(self) -> float:
        return self.bounds.alpha

    @property
    def theta0(self) -> float:
        return theta_zero(self.sub, self.bounds)

    def eta(self, theta):
        return eta(theta, self.sub, self.bounds)

    def __repr__(self) -> str:  # pragma: no cover
        return (
            f"LocalModel(t={self.sub.t}, s={self.sub.s}, m={self.m}, "
            f"bounds=({self.bounds.rho_lo}, {self.bounds.rho_hi}))"
        )


class PosteriorCurve:
    """Normalized one-dimensional posterior with lazy summary statistics."""

    def __init__(
        self,
        unnormalized,
        support: tuple[float, float],
        breakpoints: Sequence[float] = (),
        quadrature: Quadrature = DEFAULT_QUADRATURE,
    ):
        lo, hi = support
        if not hi > lo:
            raise EmptySupportError(f"support ({lo}, {hi}) is empty")
        self._raw = unnormalized
        self.support = (float(lo), float(hi))
        self.breakpoints = tuple(float(b) for b in breakpoints if lo < b < hi)
        self.quadrature = quadrature
        self.normalizer = integrate(
            unnormalized, lo, hi, quadrature=quadrature, breakpoints=self.breakpoints
        )
        if not math.isfinite(self.normalizer) or self.normalizer <= 1e-300:
            raise DegenerateModelError(
                f"posterior normalization constant {self.normalizer!r} is unusable"
            )
        # the quadrature tolerance is absolute; long histories shrink the raw
        # mass multiplicatively, so refine to the curve's own scale or small
        # curves lose relative accuracy in every downstream ratio
        target = self.normalizer * 1e-8
        if target < quadrature.tol:
            self.quadrature = Quadrature(
                tol=max(target, 1e-300), max_depth=quadrature.max_depth
            )
            self.normalizer = integrate(
                unnormalized,
                lo,
                hi,
                quadrature=self.quadrature,
                breakpoints=self.breakpoints,
            )
        self._mean: float | None = None
        self._mode: float | None = None

    def density(self, x):
        """Normalized density; zero outside the support."""
        xv = np.asarray(x, dtype=float)
        lo, hi = self.support
        inside = (xv > lo) & (xv < hi)
        vals = np.where(inside, self._raw(np.clip(xv, lo, hi)) / self.normalizer, 0.0)
        return float(vals) if vals.ndim == 0 else vals

    @property
    def mean(self) -> float:
        if self._mean is None:
            lo, hi = self.support
            first = integrate(
                lambda x: x * self._raw(x),
                lo,
                hi,
                quadrature=self.quadrature,
                breakpoints=self.breakpoints,
            )
            self._mean = first / self.normalizer
        return self._mean

    def cdf(self, x: float) -> float:
        lo, hi = self.support
        if x <= lo:
            return 0.0
        if x >= hi:
            return 1.0
        part = integrate(
            self._raw,
            lo,
            x,
            quadrature=self.quadrature,
            breakpoints=[b for b in self.breakpoints if b < x],
        )
        return min(1.0, max(0.0, part / self.normalizer))

    def quantile(self, p: float) -> float:
        """Inverse CDF by bisection; p must lie in (0, 1)."""
        if not 0.0 < p < 1.0:
            raise ValueError(f"quantile level must lie in (0, 1), got {p}")
        lo, hi = self.support
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.cdf(mid) < p:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    @property
    def mode(self) -> float:
        """Global maximizer of the density over the support."""
        if self._mode is None:
            lo, hi = self.support
            pieces = sorted({lo, hi, *self.breakpoints})
            eps = 1e-12 * max(1.0, abs(lo), abs(hi))
            best_x, best_v = lo + eps, -np.inf
            for a, b in zip(pieces[:-1], pieces[1:]):
                xs = np.linspace(a + eps, b - eps, 513)
                vals = self._raw(xs)
                i = int(np.argmax(vals))
                if vals[i] > best_v:
                    best_v = vals[i]
                    best_x = xs[i]
                    lo_b = xs[max(i - 1, 0)]
                    hi_b = xs[min(i + 1, len(xs) - 1)]
                    best_x, best_v = _golden_max(self._raw, lo_b, hi_b)
            self._mode = float(best_x)
        return self._mode


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, a: float, b: float) -> tuple[float, float]:
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = float(f(np.array([c]))[0])
    fd = float(f(np.array([d]))[0])
    for _ in range(90):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = float(f(np.array([c]))[0])
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = float(f(np.array([d]))[0])
        if b - a < 1e-13:
            break
    x = 0.5 * (a + b)
    return x, float(f(np.array([x]))[0])


def _member_ratio_arrays(model: LocalModel, theta: np.ndarray) -> np.ndarray:
    """Rows z_i(theta) = b_i(theta) / a_i for the member observations."""
    z = np.empty((model.m,) + theta.shape, dtype=float)
    for i, obs in enumerate(model.members):
        a, b = likelihood_coeffs(obs, model.alpha, model.sub.s, theta)
        z[i] = b / a
    return z


def theta_weight(model: LocalModel, theta) -> np.ndarray:
    """Unnormalized theta posterior up to a positive constant.

    Rescaled by prod_i a_i relative to the raw likelihood expansion, which
    keeps the series conditioned for large member counts; the constant is
    irrelevant after normalization.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    e = esym_coeffs(_member_ratio_arrays(model, th)) if model.m else np.ones((1,) + th.shape)
    ev = np.asarray(model.eta(th))
    return series_value(e, ev, 2)


def theta_density_direct(model: LocalModel, theta) -> np.ndarray:
    """Unnormalized c_m h_m(theta): direct series with raw d coefficients."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    d = d_coefficients(model.members, th, model.sub, model.alpha)
    ev = np.asarray(model.eta(th))
    const = 2.0 * model.sub.s / model.bounds.width**2
    return const * series_value(d, ev, 2)


def theta_density_recursive(model: LocalModel, theta) -> np.ndarray:
    """Unnormalized c_m h_m(theta) built one observation at a time.

    Uses the update c_m h_m = c_{m-1} h_{m-1} {a_m + b_m eta R_{m-1}} where
    R_{m-1} is the ratio of the (r+3)- to (r+2)-weighted coefficient sums of
    the first m-1 observations.  Must agree with theta_density_direct.
    """
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    ev = np.asarray(model.eta(th))
    const = 2.0 * model.sub.s / model.bounds.width**2
    val = const * series_value(np.ones((1,) + th.shape), ev, 2)
    for m_prev in range(model.m):
        prev = model.members[:m_prev]
        d_prev = d_coefficients(prev, th, model.sub, model.alpha)
        # series ratio equals eta * R_{m-1}, folding in the explicit eta factor
        ratio = series_value(d_prev, ev, 3) / series_value(d_prev, ev, 2)
        a, b = likelihood_coeffs(model.members[m_prev], model.alpha, model.sub.s, th)
        val = val * (a + b * ratio)
    return val


def posterior_theta(model: LocalModel) -> PosteriorCurve:
    """Posterior of the root theta, truncated to (0, 1) and normalized."""
    return PosteriorCurve(
        lambda th: theta_weight(model, th),
        support=(0.0, 1.0),
        breakpoints=(model.theta0,),
        quadrature=model.quadrature,
    )


def _rho_arrays(model: LocalModel, grid: np.ndarray, which: str):
    q = np.array([model.sub.s * (model.sub.v1 - obs.x) for obs in model.members])
    ysign = np.array([2 * obs.y - 1 for obs in model.members], dtype=float)
    ybase = np.array([1 - obs.y for obs in model.members], dtype=float)
    if which == "rho0":
        a = ybase[:, None] + ysign[:, None] * q[:, None] * grid[None, :]
        b = np.broadcast_to((ysign * (1 - q))[:, None], a.shape)
    else:
        a = ybase[:, None] + ysign[:, None] * ((1 - q)[:, None]) * grid[None, :]
        b = np.broadcast_to((ysign * q)[:, None], a.shape)
    return a, b


def posterior_rho0(model: LocalModel) -> PosteriorCurve:
    """Posterior of rho0 = F(v0) on (rho_lo, rho_hi).

    Marginalizes the likelihood over rho1 from rho0 to rho_hi in closed form;
    no truncation of theta is involved.
    """
    hi = model.bounds.rho_hi

    def unnorm(r0):
        grid = np.atleast_1d(np.asarray(r0, dtype=float))
        if model.m == 0:
            return hi - grid
        a, b = _rho_arrays(model, grid, "rho0")
        return product_integral(a, b, grid, hi)

    return PosteriorCurve(
        unnorm, support=(model.bounds.rho_lo, hi), quadrature=model.quadrature
    )


def posterior_rho1(model: LocalModel) -> PosteriorCurve:
    """Posterior of rho1 = F(v1) on (rho_lo, rho_hi)."""
    lo = model.bounds.rho_lo

    def unnorm(r1):
        grid = np.atleast_1d(np.asarray(r1, dtype=float))
        if model.m == 0:
            return grid - lo
        a, b = _rho_arrays(model, grid, "rho1")
        return product_integral(a, b, lo, grid)

    return PosteriorCurve(
        unnorm, support=(lo, model.bounds.rho_hi), quadrature=model.quadrature
    )


def betatilde_floor(model: LocalModel) -> float:
    """Smallest scaled slope compatible with theta in (0, 1)."""
    s = model.sub.s
    b = model.bounds
    return max(
        (b.rho_hi - b.alpha) / (s * model.sub.v1),
        (b.alpha - b.rho_lo) / (s * (1.0 - model.sub.v0)),
    )


def posterior_betatilde(model: LocalModel) -> PosteriorCurve:
    """Posterior of the scaled slope betatilde on (betatilde_floor, width)."""
    s = model.sub.s
    bnd = model.bounds
    floor = betatilde_floor(model)
    top = bnd.width
    if not floor < top:
        raise EmptySupportError(
            f"betatilde support ({floor}, {top}) is empty for this slice"
        )

    def unnorm(bt):
        grid = np.atleast_1d(np.asarray(bt, dtype=float))
        ell = model.sub.v1 - (bnd.rho_hi - bnd.alpha) / (s * grid)
        u = model.sub.v0 + (bnd.alpha - bnd.rho_lo) / (s * grid)
        if model.m == 0:
            return s * grid * (u - ell)
        a = np.empty((model.m,) + grid.shape)
        b = np.empty_like(a)
        for i, obs in enumerate(model.members):
            sign = 2 * obs.y - 1
            a[i] = 1 - obs.y + sign * (bnd.alpha + s * grid * obs.x)
            b[i] = -sign * s * grid
        return s * grid * product_integral(a, b, ell, u)

    return PosteriorCurve(unnorm, support=(floor, top), quadrature=model.quadrature)


def posterior_mean(curve: PosteriorCurve) -> float:
    return curve.mean


def posterior_map(curve: PosteriorCurve) -> float:
    return curve.mode


def credible_interval(curve: PosteriorCurve, level: float = 0.9) -> tuple[float, float]:
    """Central credible interval at the given level."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    tail = (1.0 - level) / 2.0
    return curve.quantile(tail), curve.quantile(1.0 - tail)


def x2_oracle(x1: float, y1: int, alpha: float, sub: Subinterval) -> float:
    """Closed-form second design point after one outcome, for bounds (0, 1).

    This is the piecewise map-mode solution for m = 1: it returns theta0 in
    the interior region, and the explicit linear pullback when (x1, y1) falls
    in one of the two boundary regions.  Both published algebraic forms of
    each branch are computed and must agree to roundoff.
    """
    if y1 not in (0, 1):
        raise ValueError(f"y1 must be 0 or 1, got {y1}")
    v0, v1 = sub.v0, sub.v1
    if not v0 < x1 < v1:
        raise ValueError(f"x1={x1} must lie strictly inside ({v0}, {v1})")
    theta0 = (1 - alpha) * v0 + alpha * v1
    t0 = ((2 + alpha) * v0 + (1 - alpha) * v1) / 3.0
    t1 = (alpha * v0 + (3 - alpha) * v1) / 3.0
    if y1 == 1 and x1 < t0:
        first = x1 - (1 - 4 * alpha) / (2 + alpha) * (v1 - x1)
        second = theta0 - 3 * (1 - alpha) / (2 + alpha) * (t0 - x1)
    elif y1 == 0 and x1 > t1:
        first = x1 + (4 * alpha - 3) / (3 - alpha) * (x1 - v0)
        second = theta0 + 3 * alpha / (3 - alpha) * (x1 - t1)
    else:
        return theta0
    if abs(first - second) > 1e-12 * max(1.0, abs(first)):
        raise AssertionError(
            f"algebraic forms disagree: {first!r} vs {second!r}"
        )
    return first
