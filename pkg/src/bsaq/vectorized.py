"""Lockstep engines: many independent search paths advanced in parallel.

Monte-Carlo studies need thousands of replications; advancing them one at a
time through the sequential classes is prohibitively slow in Python.  Each
engine here reproduces the sequential arithmetic exactly (or to quadrature
accuracy where integration is involved), with replications as numpy lanes.
Equivalence against the sequential code paths is pinned by tests.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .competitors import WuPrior, _compass, _search_axes, wu_map_logpost
from .driver import SSchedule
from .local_model import series_value
from .numerics import std_normal_cdf, std_normal_pdf, std_normal_quantile

__all__ = [
    "BsaLanes",
    "RmLanes",
    "RmjLanes",
    "RpjLanes",
    "WuLanes",
]

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@lru_cache(maxsize=None)
def _panel_nodes(panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on (0, 1): positions and weights."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    pos = ((np.arange(panels)[:, None] + (xg[None, :] + 1.0) / 2.0) / panels).ravel()
    wt = np.broadcast_to(wg[None, :] / (2.0 * panels), (panels, order)).copy().ravel()
    return pos, wt


def _poly_eval(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Horner evaluation of ascending-power coefficients (K, L) at x (L,)."""
    out = np.zeros_like(x)
    for c in coeffs[::-1]:
        out = out * x + c
    return out


def _masked_esym(alpha: float, s: int, X, Y, member, r_cap: int, theta) -> np.ndarray:
    """Elementary symmetric coefficients of the member likelihood ratios.

    theta carries lanes in its trailing axis.  Rows masked out for a lane are
    exact identity updates, so lane j reproduces the member-only recursion of
    that lane's sequential model bit for bit.
    """
    e = np.zeros((r_cap + 1,) + theta.shape)
    e[0] = 1.0
    if r_cap == 0:
        return e
    seen = 0
    tmp = np.empty(theta.shape)
    for i in range(X.shape[0]):
        mi = member[i]
        if not mi.any():
            continue
        seen += 1
        sign = 2.0 * Y[i] - 1.0
        a = 1.0 - Y[i] + sign * alpha
        z = np.where(mi, s * sign * (X[i] - theta) / a, 0.0)
        for r in range(min(seen, r_cap), 0, -1):
            np.multiply(z, e[r - 1], out=tmp)
            e[r] += tmp
    return e


class _SliceView:
    """Per-lane slice geometry and prior bounds for the pending step."""

    __slots__ = ("s", "t", "v0", "v1", "lo", "hi", "theta0")

    def __init__(self, s: int, t, v0, v1, lo, hi, alpha: float):
        self.s = s
        self.t = t
        self.v0 = v0
        self.v1 = v1
        self.lo = lo
        self.hi = hi
        self.theta0 = ((hi - alpha) * v0 + (alpha - lo) * v1) / (hi - lo)

    def tile(self, k: int) -> "_SliceView":
        view = _SliceView.__new__(_SliceView)
        view.s = self.s
        for name in ("t", "v0", "v1", "lo", "hi", "theta0"):
            setattr(view, name, np.tile(getattr(self, name), k))
        return view


class BsaLanes:
    """Quantile-search paths sharing one configuration, one lane per path.

    Each step consumes one outcome row (or several, for encoded continuous
    responses) observed at the pending points and proposes the next points
    from the per-lane posterior, with the same slice location, prior bound
    carry-over, and grid-switch rules as the sequential driver.
    """

    def __init__(
        self,
        alpha: float,
        lanes: int,
        schedule: SSchedule,
        estimator: str,
        start: float = 0.5,
        bound_carryover: bool = True,
    ):
        if estimator not in ("bayes", "map"):
            raise ValueError(f"estimator must be 'bayes' or 'map', got {estimator!r}")
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        self.alpha = float(alpha)
        self.lanes = int(lanes)
        self.schedule = schedule
        self.estimator = estimator
        self.carryover = bool(bound_carryover)
        self.steps = 0
        self.x = np.full(self.lanes, float(start))
        self._s = schedule.s_at(1)
        self._hx: list[np.ndarray] = []
        self._hy: list[np.ndarray] = []
        self._lane_idx = np.arange(self.lanes)
        self._reset_bounds()

    @property
    def n(self) -> int:
        return self.steps + 1

    def _reset_bounds(self) -> None:
        self._blo = np.zeros((self._s + 1, self.lanes))
        self._bhi = np.ones((self._s + 1, self.lanes))

    def step(self, ys) -> np.ndarray:
        """Consume outcome rows (k, lanes) at the pending points; propose next."""
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        for row in ys:
            self._hx.append(self.x.copy())
            self._hy.append(row.astype(float))
        self.steps += 1
        s_new = self.schedule.s_at(self.steps + 1)
        if s_new != self.schedule.s_at(self.steps):
            self._s = s_new
            self._reset_bounds()
        s = self._s
        t = np.ceil(self.x * s).astype(np.int64)
        sl = _SliceView(
            s,
            t,
            (t - 1) / s,
            t / s,
            self._blo[t, self._lane_idx],
            self._bhi[t, self._lane_idx],
            self.alpha,
        )
        X = np.stack(self._hx)
        Y = np.stack(self._hy)
        member = (X > sl.v0) & (X < sl.v1)
        r_cap = int(member.sum(axis=0).max())
        if self.estimator == "bayes":
            x_next = self._mean(sl, X, Y, member, r_cap)
        else:
            x_next = self._mode(sl, X, Y, member, r_cap)
        if self.carryover:
            t_new = np.ceil(x_next * s).astype(np.int64)
            moved = t_new != t
            if moved.any():
                self._carry(sl, X, Y, member, t_new, moved)
        self.x = x_next
        return self.x

    def _piece_nodes(self, k: int, lo_u, hi_u):
        """Log-spaced quadrature nodes u and the d(theta) weights for one piece."""
        span = np.log(hi_u / lo_u)
        panels = int(min(40, max(2, math.ceil(k * float(span.max()) / 28.0))))
        pos, wt = _panel_nodes(panels, 24)
        u = lo_u * np.exp(pos[:, None] * span)
        w = wt[:, None] * span * u
        return u, w

    def _mean(self, sl, X, Y, member, r_cap):
        k = r_cap + 1
        u1, w1 = self._piece_nodes(k, sl.v1 - sl.theta0, sl.v1)
        u2, w2 = self._piece_nodes(k, sl.theta0 - sl.v0, 1.0 - sl.v0)
        th = np.concatenate([sl.v1 - u1, sl.v0 + u2], axis=0)
        ev = np.concatenate(
            [(sl.hi - self.alpha) / (sl.s * u1), (self.alpha - sl.lo) / (sl.s * u2)],
            axis=0,
        )
        e = _masked_esym(self.alpha, sl.s, X, Y, member, r_cap, th)
        f = series_value(e, ev, 2)
        w = np.concatenate([w1, w2], axis=0)
        z0 = (w * f).sum(axis=0)
        z1 = (w * f * th).sum(axis=0)
        return z1 / z0

    def _weight(self, sl, X, Y, member, r_cap, theta):
        """Unnormalized posterior of the root, same series as the slice model."""
        e = _masked_esym(self.alpha, sl.s, X, Y, member, r_cap, theta)
        with np.errstate(divide="ignore"):
            up = (sl.hi - self.alpha) / (sl.s * (sl.v1 - theta))
            down = (self.alpha - sl.lo) / (sl.s * (theta - sl.v0))
        ev = np.where(theta <= sl.theta0, up, down)
        return series_value(e, ev, 2)

    def _mode(self, sl, X, Y, member, r_cap):
        eps = 1e-12
        zero = np.zeros(self.lanes)
        one = np.ones(self.lanes)
        xs1 = np.linspace(zero + eps, sl.theta0 - eps, 513, axis=0)
        xs2 = np.linspace(sl.theta0 + eps, one - eps, 513, axis=0)
        vals = self._weight(sl, X, Y, member, r_cap, np.concatenate([xs1, xs2], axis=0))
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
        sl2 = sl.tile(2)
        X2 = np.tile(X, (1, 2))
        Y2 = np.tile(Y, (1, 2))
        member2 = np.tile(member, (1, 2))

        def f(th):
            return self._weight(sl2, X2, Y2, member2, r_cap, th)

        gx, gv = _golden_lanes(f, lo_b, hi_b)
        refine = top2 > gv[: self.lanes]
        return np.where(refine, gx[self.lanes :], gx[: self.lanes])

    def _carry(self, sl, X, Y, member, t_new, moved):
        idx = np.nonzero(moved)[0]
        up = t_new[idx] > sl.t[idx]
        q = np.empty(idx.size)
        for pick, which, p in ((up, "rho1", 0.05), (~up, "rho0", 0.95)):
            sub = idx[pick]
            if sub.size:
                q[pick] = _rho_quantile(
                    which,
                    p,
                    sl.s,
                    sl.v1[sub],
                    sl.lo[sub],
                    sl.hi[sub],
                    X[:, sub],
                    Y[:, sub],
                    member[:, sub],
                )
        # adjacent move: the landing slice inherits the departed slice's other
        # bound, so a tightened range travels with the path; a jump keeps the
        # landing slice's own stored value instead (no chaining over skipped
        # slices)
        adjacent = np.abs(t_new[idx] - sl.t[idx]) == 1
        other_lo = np.where(adjacent, sl.lo[idx], self._blo[t_new[idx], idx])
        other_hi = np.where(adjacent, sl.hi[idx], self._bhi[t_new[idx], idx])
        cand_lo = np.where(up, q, other_lo)
        cand_hi = np.where(up, other_hi, q)
        bad = ~((cand_lo < self.alpha) & (self.alpha < cand_hi))
        self._blo[t_new[idx], idx] = np.where(bad, 0.0, cand_lo)
        self._bhi[t_new[idx], idx] = np.where(bad, 1.0, cand_hi)


def _golden_lanes(f, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-lane golden-section maximization mirroring the scalar search."""
    a = a.copy()
    b = b.copy()
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc = f(c)
    fd = f(d)
    active = np.ones(a.shape, dtype=bool)
    for _ in range(90):
        if not active.any():
            break
        left = fc >= fd
        a2 = np.where(left, a, c)
        b2 = np.where(left, d, b)
        c2 = np.where(left, b2 - _INV_PHI * (b2 - a2), d)
        d2 = np.where(left, c, a2 + _INV_PHI * (b2 - a2))
        xe = np.where(left, c2, d2)
        fe = f(xe)
        fc2 = np.where(left, fe, fd)
        fd2 = np.where(left, fc, fe)
        a = np.where(active, a2, a)
        b = np.where(active, b2, b)
        c = np.where(active, c2, c)
        d = np.where(active, d2, d)
        fc = np.where(active, fc2, fc)
        fd = np.where(active, fd2, fd)
        active = active & (b - a >= 1e-13)
    x = 0.5 * (a + b)
    return x, f(x)


def _rho_quantile(which, p, s, v1, lo, hi, X, Y, member):
    """Batched quantile of a crossed-endpoint posterior over (lo, hi).

    The unnormalized density is a polynomial in the endpoint value, so the
    CDF is assembled exactly from accumulated monomial coefficients and the
    quantile extracted by the same 80-step bisection as the scalar curve.
    """
    r_cap = int(member.sum(axis=0).max())
    n_lanes = v1.shape[0]
    # deg[r, k] = coefficient of (integrated endpoint)^r (kept endpoint)^k
    deg = np.zeros((r_cap + 1, r_cap + 1, n_lanes))
    deg[0, 0] = 1.0
    seen = 0
    for i in range(X.shape[0]):
        mi = member[i]
        if not mi.any():
            continue
        seen = min(seen + 1, r_cap)
        sign = 2.0 * Y[i] - 1.0
        qi = s * (v1 - X[i])
        if which == "rho0":
            c1 = np.where(mi, sign * qi, 0.0)
            b = np.where(mi, sign * (1.0 - qi), 0.0)
        else:
            c1 = np.where(mi, sign * (1.0 - qi), 0.0)
            b = np.where(mi, sign * qi, 0.0)
        c0 = np.where(mi, 1.0 - Y[i], 1.0)
        blk = deg[: seen + 1, : seen + 1]
        old = blk.copy()
        blk *= c0
        blk[:, 1:] += old[:, :-1] * c1
        blk[1:, :] += old[:-1, :] * b
    coeffs = np.zeros((2 * r_cap + 2, n_lanes))
    end = hi if which == "rho0" else lo
    sgn = 1.0 if which == "rho0" else -1.0
    ep = end.copy()
    for r in range(r_cap + 1):
        coeffs[: r_cap + 1] += sgn * deg[r] * (ep / (r + 1))
        coeffs[r + 1 : r + 2 + r_cap] -= sgn * deg[r] / (r + 1)
        ep = ep * end
    anti = np.zeros((coeffs.shape[0] + 1, n_lanes))
    anti[1:] = coeffs / np.arange(1, coeffs.shape[0] + 1)[:, None]
    a_lo = _poly_eval(anti, lo)
    norm = _poly_eval(anti, hi) - a_lo
    a = lo.copy()
    b = hi.copy()
    for _ in range(80):
        mid = 0.5 * (a + b)
        cdf = np.minimum(1.0, np.maximum(0.0, (_poly_eval(anti, mid) - a_lo) / norm))
        take = cdf < p
        a = np.where(take, mid, a)
        b = np.where(take, b, mid)
    return 0.5 * (a + b)


class RmLanes:
    """Fixed-slope recursions advanced one outcome row per step."""

    def __init__(self, x1: float, alpha: float, slope: float, lanes: int):
        self.x = np.full(lanes, float(x1))
        self.alpha = float(alpha)
        self.slope = float(slope)
        self.n = 1

    def step(self, y: np.ndarray) -> np.ndarray:
        self.x = self.x - (y - self.alpha) / (self.n * self.slope)
        self.n += 1
        return self.x


class RmjLanes:
    """Adaptive-gain recursions; the gain sequence is outcome-independent."""

    TAU2_FLOOR = 1e-12

    def __init__(self, x1: float, alpha: float, beta: float, lanes: int):
        self.x = np.full(lanes, float(x1))
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.tau2 = 1.0
        self.z_alpha = std_normal_quantile(alpha)
        self.n = 1

    def step(self, y: np.ndarray) -> np.ndarray:
        root = math.sqrt(1.0 + self.beta**2 * self.tau2)
        alpha_n = std_normal_cdf(self.z_alpha / root)
        a_n = (
            self.beta
            * self.tau2
            / (alpha_n * (1.0 - alpha_n) * root)
            * std_normal_pdf(self.z_alpha / root)
        )
        self.x = self.x - a_n * (y - alpha_n)
        self.tau2 = max(self.tau2 - alpha_n * (1.0 - alpha_n) * a_n**2, self.TAU2_FLOOR)
        self.n += 1
        return self.x


class RpjLanes:
    """Slow-gain recursions with the running trajectory average as estimate."""

    def __init__(self, x1: float, alpha: float, lanes: int):
        self.x = np.full(lanes, float(x1))
        self.alpha = float(alpha)
        self.n = 1
        self.average = np.full(lanes, float(x1))

    def step(self, y: np.ndarray) -> np.ndarray:
        self.x = self.x - self.n ** (-2.0 / 3.0) * (y - self.alpha)
        self.n += 1
        self.average = self.average + (self.x - self.average) / self.n
        return self.x


class WuLanes:
    """Logistic-MAP designs refit after every outcome row.

    The seeding grid's log-likelihood is accumulated incrementally (one new
    observation term per step, same summation order as a from-scratch fit),
    so each step costs one grid update plus the shared compass descent.
    """

    def __init__(self, x1: float, alpha: float, lanes: int, prior: WuPrior = WuPrior()):
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        self.x = np.full(lanes, float(x1))
        self.alpha = float(alpha)
        self.prior = prior
        self._mm, self._ll = _search_axes(prior)
        self._sig = np.exp(self._ll)[:, None]
        self._logprior = (
            -((self._mm - prior.mu0) ** 2) / (2.0 * prior.tau**2)
            - np.exp(self._ll) / prior.xi
        )
        self._grid_ll = np.zeros((self._mm.size, lanes))
        self._hx: list[np.ndarray] = []
        self._hy: list[np.ndarray] = []
        self.mu = np.full(lanes, prior.mu0)
        self.sigma = np.full(lanes, prior.sigma_min)

    def step(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        self._hx.append(self.x.copy())
        self._hy.append(y)
        t = (self.x - self._mm[:, None]) / self._sig
        self._grid_ll = self._grid_ll - (np.logaddexp(0.0, -t) + (1.0 - y) * t)
        best = np.argmax(self._grid_ll + self._logprior[:, None], axis=0)
        x_obs = np.stack(self._hx)[:, None, :]
        y_obs = np.stack(self._hy)[:, None, :]
        prior = self.prior

        def value(mu_v, ls_v):
            # one transcendental pass over all observations; the per-row
            # accumulation below keeps the fit's summation order, so values
            # stay bit-identical to a from-scratch wu_map_logpost call
            mu2 = np.atleast_2d(mu_v)
            sigma = np.exp(np.atleast_2d(ls_v))
            t = (x_obs - mu2) / sigma
            term = np.logaddexp(0.0, -t)
            term += (1.0 - y_obs) * t
            loglik = 0.0
            for row in term:
                loglik = loglik - row
            out = loglik + (
                -((mu2 - prior.mu0) ** 2) / (2.0 * prior.tau**2) - sigma / prior.xi
            )
            return out if np.ndim(mu_v) > 1 else out[0]

        mu, ls = _compass(self._mm[best], self._ll[best], value, prior)
        self.mu = mu
        self.sigma = np.exp(ls)
        self.x = self.mu + self.sigma * math.log(self.alpha / (1.0 - self.alpha))
        return self.x
