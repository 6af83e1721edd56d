"""Synthetic response models for benchmarking the root-finding procedures.

Ten response curves: a fixed normal CDF whose alpha-quantile moves across the
domain (M1), six shifted families with a common root at zero in native
coordinates (M2-M7: normal, uniform, logistic, extreme value, skewed
logistic, Cauchy), and three bivariate normal CDF surfaces with correlation
0, 0.8, -0.8 (M8-M10).

Scaled coordinates live in (0, 1); native coordinates are the affine image
(-3, 3) via z = 6x - 3.  All probability evaluations are vectorized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import brentq
from scipy.special import ndtr

from .numerics import bivariate_normal_cdf, std_normal_quantile

__all__ = [
    "TestModel",
    "MODEL_NAMES",
    "get_model",
    "to_native",
    "to_unit",
    "bivariate_prob",
]


def to_native(x):
    """Scaled (0,1) to native (-3,3)."""
    return 6.0 * np.asarray(x, dtype=float) - 3.0


def to_unit(z):
    """Native (-3,3) to scaled (0,1)."""
    return (np.asarray(z, dtype=float) + 3.0) / 6.0


def _m1(z, alpha):
    return ndtr(z)


def _m2(z, alpha):
    return ndtr(std_normal_quantile(alpha) + z)


def _m3(z, alpha):
    return np.clip(alpha + z / 3.0, 0.0, 1.0)


def _m4(z, alpha):
    c = math.log((1.0 - alpha) / alpha)
    return np.exp(-np.logaddexp(0.0, c - z))


def _m5(z, alpha):
    with np.errstate(over="ignore"):
        return -np.expm1(math.log1p(-alpha) * np.exp(z))


def _m6(z, alpha):
    ra = math.sqrt(alpha)
    c = math.log((1.0 - ra) / ra)
    return np.exp(-2.0 * np.logaddexp(0.0, c - z))


def _m7(z, alpha):
    return 0.5 + np.arctan(z + math.tan(math.pi * (alpha - 0.5))) / math.pi


_UNIVARIATE = {
    "M1": _m1,
    "M2": _m2,
    "M3": _m3,
    "M4": _m4,
    "M5": _m5,
    "M6": _m6,
    "M7": _m7,
}

_BIVARIATE_RHO = {"M8": 0.0, "M9": 0.8, "M10": -0.8}

MODEL_NAMES = tuple(_UNIVARIATE) + tuple(_BIVARIATE_RHO)

_GL32 = leggauss(32)


def bivariate_prob(z1, z2, rho: float) -> np.ndarray:
    """Vectorized bivariate normal CDF over arrays of (z1, z2) pairs.

    Fixed 12-panel composite Gauss-Legendre over the conditional-normal
    integral; agrees with the adaptive scalar routine to ~1e-12.
    """
    z1 = np.atleast_1d(np.asarray(z1, dtype=float))
    z2 = np.atleast_1d(np.asarray(z2, dtype=float))
    if rho == 0.0:
        return ndtr(z1) * ndtr(z2)
    denom = math.sqrt(1.0 - rho * rho)
    lo = np.minimum(-9.0, z1 - 2.0)
    out = np.zeros(np.broadcast_shapes(z1.shape, z2.shape))
    edges = np.linspace(0.0, 1.0, 13)
    nodes, weights = _GL32
    for a, b in zip(edges[:-1], edges[1:]):
        # affine panel [lo + a*(z1-lo), lo + b*(z1-lo)] per lane
        width = (z1 - lo) * (b - a)
        mid = lo + (z1 - lo) * 0.5 * (a + b)
        t = mid[None, ...] + 0.5 * width[None, ...] * nodes.reshape((-1,) + (1,) * z1.ndim)
        f = np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi) * ndtr((z2 - rho * t) / denom)
        out = out + 0.5 * np.einsum("k,k...->...", weights, f) * width
    return out


@dataclass(frozen=True)
class TestModel:
    """One response surface with root and slope helpers."""

    name: str

    @property
    def dim(self) -> int:
        return 1 if self.name in _UNIVARIATE else 2

    @property
    def rho(self) -> float:
        if self.dim != 2:
            raise ValueError(f"{self.name} is univariate")
        return _BIVARIATE_RHO[self.name]

    def prob_native(self, z, alpha: float):
        """Response probability at native coordinates."""
        if self.dim == 1:
            return _UNIVARIATE[self.name](np.asarray(z, dtype=float), alpha)
        z = np.asarray(z, dtype=float)
        return bivariate_prob(z[..., 0], z[..., 1], self.rho)

    def prob(self, x, alpha: float):
        """Response probability at scaled coordinates in (0, 1)."""
        return self.prob_native(to_native(x), alpha)

    def root_native(self, alpha: float) -> float:
        """Root of M(z) = alpha in native coordinates (diagonal for dim 2)."""
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        if self.name == "M1":
            return std_normal_quantile(alpha)
        if self.dim == 1:
            return 0.0
        rho = self.rho
        return brentq(
            lambda z: bivariate_normal_cdf(z, z, rho) - alpha, -8.0, 8.0, xtol=1e-12
        )

    def root_scaled(self, alpha: float):
        r = to_unit(self.root_native(alpha))
        return float(r) if self.dim == 1 else np.array([float(r), float(r)])

    def slope_native(self, alpha: float, h: float = 1e-5) -> float:
        """M'(root) by central difference, used for oracle baseline gains."""
        if self.dim != 1:
            raise ValueError("slope is defined for univariate models only")
        z = self.root_native(alpha)
        lo = float(self.prob_native(z - h, alpha))
        hi = float(self.prob_native(z + h, alpha))
        return (hi - lo) / (2.0 * h)


def get_model(name: str) -> TestModel:
    if name not in MODEL_NAMES:
        raise KeyError(f"unknown model {name!r}; expected one of {MODEL_NAMES}")
    return TestModel(name)
