"""Baseline stochastic approximation procedures for binary-response quantiles.

All baselines operate in the experiment's native coordinates and know nothing
about the (0, 1) scaling used by the local-model procedure.  They are small
recursions; the logistic-MAP design additionally needs a two-parameter
posterior maximization, implemented as a coarse grid seeded compass search so
fits are deterministic and array-vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import std_normal_cdf, std_normal_pdf, std_normal_quantile

__all__ = [
    "RobbinsMonro",
    "EfficientRM",
    "AveragedRM",
    "WuPrior",
    "wu_map_logpost",
    "wu_map_fit",
    "wu_map_next",
    "WuMap",
]


class RobbinsMonro:
    """x_{n+1} = x_n - (y_n - alpha) / (n * slope), slope = M'(root)."""

    def __init__(self, x1: float, alpha: float, slope: float):
        if slope <= 0:
            raise ValueError(f"slope must be positive, got {slope}")
        self.x = float(x1)
        self.alpha = float(alpha)
        self.slope = float(slope)
        self.n = 1

    def update(self, y: int) -> float:
        self.x -= (y - self.alpha) / (self.n * self.slope)
        self.n += 1
        return self.x


class EfficientRM:
    """Adaptive-gain recursion x_{n+1} = x_n - a_n (y_n - alpha_n).

    The gain a_n and the shifted level alpha_n shrink with the posterior
    variance proxy tau_n^2, which starts at 1 and contracts by
    alpha_n (1 - alpha_n) a_n^2 each step (floored to stay positive).
    beta is the slope of the response curve at the root divided by
    phi(Phi^-1(alpha)).
    """

    TAU2_FLOOR = 1e-12

    def __init__(self, x1: float, alpha: float, beta: float, tau2: float = 1.0):
        if beta <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.x = float(x1)
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.tau2 = float(tau2)
        self.z_alpha = std_normal_quantile(alpha)
        self.n = 1

    def gains(self) -> tuple[float, float]:
        """Current (a_n, alpha_n)."""
        root = math.sqrt(1.0 + self.beta**2 * self.tau2)
        alpha_n = std_normal_cdf(self.z_alpha / root)
        a_n = (
            self.beta
            * self.tau2
            / (alpha_n * (1.0 - alpha_n) * root)
            * std_normal_pdf(self.z_alpha / root)
        )
        return a_n, alpha_n

    def update(self, y: int) -> float:
        a_n, alpha_n = self.gains()
        self.x -= a_n * (y - alpha_n)
        self.tau2 = max(self.tau2 - alpha_n * (1.0 - alpha_n) * a_n**2, self.TAU2_FLOOR)
        self.n += 1
        return self.x


class AveragedRM:
    """Slowly-decaying gains a_n = n^(-2/3); the estimator is the running
    average of the design trajectory (final proposal included)."""

    def __init__(self, x1: float, alpha: float):
        self.x = float(x1)
        self.alpha = float(alpha)
        self.n = 1
        self.average = float(x1)

    def update(self, y: int) -> float:
        self.x -= self.n ** (-2.0 / 3.0) * (y - self.alpha)
        self.n += 1
        self.average += (self.x - self.average) / self.n
        return self.x


@dataclass(frozen=True)
class WuPrior:
    """Logistic response prior: mu ~ N(mu0, tau^2), sigma ~ Exp(scale xi)."""

    mu0: float = 0.0
    tau: float = 3.0
    xi: float = 3.0
    sigma_min: float = 1e-3
    mu_range: tuple[float, float] = (-3.0, 3.0)
    sigma_max: float = 6.0


def wu_map_logpost(mu, sigma, x, y, prior: WuPrior):
    """Unnormalized log posterior of (mu, sigma); broadcasts over parameters.

    x and y carry the observations in their leading axis; mu/sigma must
    broadcast against their trailing shape.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    # Accumulate observation by observation so the summation order does not
    # depend on the lane count; lane j of a batched call then reproduces a
    # single-lane call bit for bit.
    loglik = 0.0
    for xi, yi in zip(x, y):
        t = (xi - mu) / sigma
        # log F = -softplus(-t) and softplus(t) = softplus(-t) + t
        loglik = loglik - (np.logaddexp(0.0, -t) + (1.0 - yi) * t)
    logprior = -((mu - prior.mu0) ** 2) / (2.0 * prior.tau**2) - sigma / prior.xi
    return loglik + logprior


def _search_axes(prior: WuPrior) -> tuple[np.ndarray, np.ndarray]:
    """Flattened 33 x 25 (mu, log sigma) grid used to seed the descent."""
    mu_grid = np.linspace(prior.mu_range[0], prior.mu_range[1], 33)
    ls_grid = np.log(np.geomspace(prior.sigma_min, prior.sigma_max, 25))
    mm, ll = np.meshgrid(mu_grid, ls_grid, indexing="ij")
    return mm.ravel(), ll.ravel()


def _grid_steps(prior: WuPrior) -> tuple[float, float]:
    mu_grid = np.linspace(prior.mu_range[0], prior.mu_range[1], 33)
    ls_grid = np.log(np.geomspace(prior.sigma_min, prior.sigma_max, 25))
    return float(mu_grid[1] - mu_grid[0]), float(ls_grid[1] - ls_grid[0])


def _compass(mu, ls, value, prior: WuPrior):
    """Descent from (mu, ls): best of the four axis moves, halving steps.

    `value` maps stacked (mu, ls) arrays to log-posterior values; lanes are
    independent, so lane j of a batched call reproduces a single-lane call.
    """
    h_mu0, h_ls0 = _grid_steps(prior)
    h_mu = np.full_like(mu, h_mu0)
    h_ls = np.full_like(ls, h_ls0)
    lo_ls = math.log(prior.sigma_min)
    hi_ls = math.log(prior.sigma_max)
    cur = value(mu, ls)
    for _ in range(60):
        cand_mu = np.stack(
            (
                np.clip(mu + h_mu, prior.mu_range[0], prior.mu_range[1]),
                np.clip(mu - h_mu, prior.mu_range[0], prior.mu_range[1]),
                mu,
                mu,
            )
        )
        cand_ls = np.stack(
            (
                ls,
                ls,
                np.clip(ls + h_ls, lo_ls, hi_ls),
                np.clip(ls - h_ls, lo_ls, hi_ls),
            )
        )
        vals = value(cand_mu, cand_ls)
        pick = np.argmax(vals, axis=0)
        best = np.take_along_axis(vals, pick[None], axis=0)[0]
        better = best > cur
        mu = np.where(better, np.take_along_axis(cand_mu, pick[None], axis=0)[0], mu)
        ls = np.where(better, np.take_along_axis(cand_ls, pick[None], axis=0)[0], ls)
        cur = np.where(better, best, cur)
        h_mu = np.where(better, h_mu, 0.5 * h_mu)
        h_ls = np.where(better, h_ls, 0.5 * h_ls)
    return mu, ls


def wu_map_fit(x, y, prior: WuPrior = WuPrior()) -> tuple[np.ndarray, np.ndarray]:
    """MAP estimate of (mu, sigma) for each lane of observations.

    x, y have shape (n,) or (n, L).  With no observations the prior mode
    (mu0, sigma_min) is returned.  The search is a 33 x 25 grid over
    (mu, log sigma) followed by a compass descent with halving steps; both
    stages are deterministic.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 1
    if scalar:
        x = x[:, None]
        y = y[:, None]
    n, lanes = x.shape
    if n == 0:
        mu = np.full(lanes, prior.mu0)
        sigma = np.full(lanes, prior.sigma_min)
        return (mu[0], sigma[0]) if scalar else (mu, sigma)

    mm, ll = _search_axes(prior)
    # grid axis broadcasts against the lane axis: result (grid, L)
    vals = wu_map_logpost(
        mm[:, None], np.exp(ll)[:, None], x[:, None, :], y[:, None, :], prior
    )
    best = np.argmax(vals, axis=0)

    def value(mu_v, ls_v):
        return wu_map_logpost(mu_v, np.exp(ls_v), x, y, prior)

    mu, ls = _compass(mm[best], ll[best], value, prior)
    sigma = np.exp(ls)
    return (float(mu[0]), float(sigma[0])) if scalar else (mu, sigma)


def wu_map_next(mu, sigma, alpha: float):
    """Plug-in alpha-quantile of the fitted logistic curve."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return mu + sigma * math.log(alpha / (1.0 - alpha))


class WuMap:
    """Sequential logistic-MAP design: refit after each outcome."""

    def __init__(self, x1: float, alpha: float, prior: WuPrior = WuPrior()):
        self.x = float(x1)
        self.alpha = float(alpha)
        self.prior = prior
        self.xs: list[float] = []
        self.ys: list[int] = []
        self.mu = prior.mu0
        self.sigma = prior.sigma_min

    def update(self, y: int) -> float:
        self.xs.append(self.x)
        self.ys.append(int(y))
        self.mu, self.sigma = wu_map_fit(np.array(self.xs), np.array(self.ys), self.prior)
        self.x = wu_map_next(self.mu, self.sigma, self.alpha)
        return self.x
