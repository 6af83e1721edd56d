"""Independent numerical oracles for the posterior tests.

Every routine here avoids the package's series expansions: likelihoods are
evaluated directly as F^y (1-F)^(1-y) with F = alpha + s*betatilde*(x - theta)
(or the endpoint interpolation for the rho marginals), and marginalization is
brute-force trapezoid integration on fine grids.  Subset expansions are
enumerated with itertools.combinations.  Slow by design.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from bsaq.local_model import LocalModel, Observation, Subinterval


def brute_force_d(observations, theta, sub: Subinterval, alpha: float) -> np.ndarray:
    """d_{m,r}(theta) by explicit enumeration of all r-subsets."""
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    m = len(observations)
    a = np.empty(m)
    b = np.empty((m,) + th.shape)
    for i, obs in enumerate(observations):
        sign = 2 * obs.y - 1
        a[i] = 1 - obs.y + sign * alpha
        b[i] = sub.s * sign * (obs.x - th)
    out = np.zeros((m + 1,) + th.shape)
    idx = range(m)
    for r in range(m + 1):
        for subset in itertools.combinations(idx, r):
            term = np.ones(th.shape)
            for i in idx:
                term = term * (b[i] if i in subset else a[i])
            out[r] += term
    return out


def direct_likelihood(model: LocalModel, theta: np.ndarray, betatilde: np.ndarray) -> np.ndarray:
    """prod_i F^y (1-F)^(1-y) at F = alpha + s*betatilde*(x_i - theta).

    theta and betatilde must broadcast together.
    """
    out = np.ones(np.broadcast_shapes(np.shape(theta), np.shape(betatilde)))
    for obs in model.members:
        F = model.alpha + model.sub.s * betatilde * (obs.x - theta)
        out = out * (F if obs.y == 1 else 1.0 - F)
    return out


def grid_theta_density(model: LocalModel, thetas: np.ndarray, n_beta: int = 4097) -> np.ndarray:
    """h_m on the supplied theta grid, by trapezoid integration over betatilde.

    Returned values are normalized by trapezoid over the same theta grid, so
    compare against implementation values normalized the same way.
    """
    thetas = np.asarray(thetas, dtype=float)
    vals = np.empty_like(thetas)
    for k, th in enumerate(thetas):
        top = float(model.eta(th))
        bt = np.linspace(0.0, top, n_beta)
        integrand = bt * direct_likelihood(model, th, bt)
        vals[k] = np.trapezoid(integrand, bt)
    norm = np.trapezoid(vals, thetas)
    return vals / norm


def grid_rho0_density(model: LocalModel, grid: np.ndarray, n_inner: int = 4097) -> np.ndarray:
    """rho0 marginal by integrating the endpoint-interpolated likelihood over rho1."""
    grid = np.asarray(grid, dtype=float)
    q = np.array([model.sub.s * (model.sub.v1 - obs.x) for obs in model.members])
    y = np.array([obs.y for obs in model.members])
    vals = np.empty_like(grid)
    for k, r0 in enumerate(grid):
        r1 = np.linspace(r0, model.bounds.rho_hi, n_inner)
        lik = np.ones_like(r1)
        for i in range(len(y)):
            F = q[i] * r0 + (1 - q[i]) * r1
            lik = lik * (F if y[i] == 1 else 1.0 - F)
        vals[k] = np.trapezoid(lik, r1)
    norm = np.trapezoid(vals, grid)
    return vals / norm


def grid_rho1_density(model: LocalModel, grid: np.ndarray, n_inner: int = 4097) -> np.ndarray:
    """rho1 marginal by integrating over rho0."""
    grid = np.asarray(grid, dtype=float)
    q = np.array([model.sub.s * (model.sub.v1 - obs.x) for obs in model.members])
    y = np.array([obs.y for obs in model.members])
    vals = np.empty_like(grid)
    for k, r1 in enumerate(grid):
        r0 = np.linspace(model.bounds.rho_lo, r1, n_inner)
        lik = np.ones_like(r0)
        for i in range(len(y)):
            F = q[i] * r0 + (1 - q[i]) * r1
            lik = lik * (F if y[i] == 1 else 1.0 - F)
        vals[k] = np.trapezoid(lik, r0)
    norm = np.trapezoid(vals, grid)
    return vals / norm


def grid_betatilde_density(model: LocalModel, grid: np.ndarray, n_inner: int = 4097) -> np.ndarray:
    """betatilde marginal by integrating the likelihood over theta in (ell, u)."""
    grid = np.asarray(grid, dtype=float)
    s = model.sub.s
    bnd = model.bounds
    vals = np.empty_like(grid)
    for k, bt in enumerate(grid):
        ell = model.sub.v1 - (bnd.rho_hi - bnd.alpha) / (s * bt)
        u = model.sub.v0 + (bnd.alpha - bnd.rho_lo) / (s * bt)
        th = np.linspace(ell, u, n_inner)
        vals[k] = s * bt * np.trapezoid(direct_likelihood(model, th, bt), th)
    norm = np.trapezoid(vals, grid)
    return vals / norm


def random_model(rng: np.random.Generator, m: int, *, default_bounds: bool = False) -> LocalModel:
    """A random but well-posed local model for property tests."""
    s = int(rng.choice([1, 3, 5, 7, 9, 17]))
    t = int(rng.integers(1, s + 1))
    sub = Subinterval(t, s)
    if default_bounds:
        lo, hi = 0.0, 1.0
        alpha = float(rng.uniform(0.1, 0.9))
    else:
        lo = float(rng.uniform(0.0, 0.5))
        hi = float(rng.uniform(lo + 0.3, 1.0))
        alpha = float(rng.uniform(lo + 0.05, hi - 0.05))
    from bsaq.local_model import PriorBounds

    bounds = PriorBounds(lo, hi, alpha)
    members = [
        Observation(float(rng.uniform(sub.v0 + 1e-9, sub.v1 - 1e-9)), int(rng.integers(0, 2)))
        for _ in range(m)
    ]
    return LocalModel(sub, bounds, members)


def mv_direct_likelihood(cm, theta, betaj) -> np.ndarray:
    """prod_i F^y (1-F)^(1-y) with F = alpha_at(x_i) + s*betaj*(x_ij - theta).

    The frozen-slope shift enters through alpha_at; theta and betaj must
    broadcast together.
    """
    out = np.ones(np.broadcast_shapes(np.shape(theta), np.shape(betaj)))
    for obs in cm.members:
        F = cm.alpha_at(obs.x) + cm.cube.s * betaj * (obs.x[cm.j] - theta)
        out = out * (F if obs.y == 1 else 1.0 - F)
    return out


def grid_conditional_theta_density(cm, thetas: np.ndarray, n_beta: int = 4097) -> np.ndarray:
    """Axis-j root density by trapezoid integration over the axis slope."""
    thetas = np.asarray(thetas, dtype=float)
    vals = np.empty_like(thetas)
    for k, th in enumerate(thetas):
        top = float(cm.eta(th))
        bt = np.linspace(0.0, top, n_beta)
        integrand = bt * mv_direct_likelihood(cm, th, bt)
        vals[k] = np.trapezoid(integrand, bt)
    return vals / np.trapezoid(vals, thetas)


def grid_conditional_beta_density(cm, grid: np.ndarray, n_inner: int = 4097) -> np.ndarray:
    """Axis-j slope density by integrating the likelihood over theta in (ell, u)."""
    grid = np.asarray(grid, dtype=float)
    s = cm.cube.s
    up = cm.bounds.rho_hi - cm.alpha1
    down = cm.alpha0 - cm.bounds.rho_lo
    vals = np.empty_like(grid)
    for k, bj in enumerate(grid):
        ell = cm.vpj - up / (s * bj)
        u = cm.v0j + down / (s * bj)
        th = np.linspace(ell, u, n_inner)
        vals[k] = s * bj * np.trapezoid(mv_direct_likelihood(cm, th, bj), th)
    return vals / np.trapezoid(vals, grid)
