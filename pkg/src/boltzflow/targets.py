"""Analytic test densities with exact samplers.

These provide the endpoint densities for Moser-transport checks, the 1D
quantile-map oracle and the periodic two-angle surrogate target.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr
from scipy.stats import norm, truncnorm

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class TruncatedMixture:
    """Diagonal Gaussian mixture restricted to a box, optionally blended with the
    uniform density: ``(1 - uniform_weight) * mixture + uniform_weight / |box|``."""

    means: np.ndarray
    sigmas: np.ndarray
    weights: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    uniform_weight: float = 0.0

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        sigmas = np.broadcast_to(np.asarray(self.sigmas, dtype=float), means.shape).copy()
        weights = np.asarray(self.weights, dtype=float)
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if weights.shape != (means.shape[0],) or np.any(weights < 0) or weights.sum() <= 0:
            raise InvalidArgumentError("need one nonnegative weight per component")
        if lower.shape != (means.shape[1],) or np.any(lower >= upper):
            raise InvalidArgumentError("invalid box")
        if not 0.0 <= self.uniform_weight < 1.0:
            raise InvalidArgumentError("uniform_weight must lie in [0, 1)")
        for name, val in (("means", means), ("sigmas", sigmas), ("weights", weights / weights.sum()),
                          ("lower", lower), ("upper", upper)):
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def _component_mass(self) -> np.ndarray:
        a = (self.lower - self.means) / self.sigmas
        b = (self.upper - self.means) / self.sigmas
        return np.prod(ndtr(b) - ndtr(a), axis=1)

    def _mix_weights(self) -> np.ndarray:
        wm = self.weights * self._component_mass()
        return wm / wm.sum()

    def pdf(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mass = self._component_mass()
        norm_const = np.sum(self.weights * mass)
        dens = np.zeros(x.shape[0])
        for w, mu, sg in zip(self.weights, self.means, self.sigmas):
            dens += w * np.prod(norm.pdf(x, mu, sg), axis=1)
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=1)
        mix = np.where(inside, dens / norm_const, 0.0)
        return (1.0 - self.uniform_weight) * mix + np.where(inside, self.uniform_weight / self.volume, 0.0)

    def sample(self, n: int, rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        comp = rng.choice(len(self.weights), size=n, p=self._mix_weights())
        out = np.empty((n, self.dim))
        for k in range(len(self.weights)):
            sel = comp == k
            m = int(sel.sum())
            if m == 0:
                continue
            a = (self.lower - self.means[k]) / self.sigmas[k]
            b = (self.upper - self.means[k]) / self.sigmas[k]
            out[sel] = truncnorm.rvs(a, b, loc=self.means[k], scale=self.sigmas[k], size=(m, self.dim), random_state=rng)
        if self.uniform_weight > 0:
            uni = rng.random(n) < self.uniform_weight
            out[uni] = self.lower + (self.upper - self.lower) * rng.random((int(uni.sum()), self.dim))
        return out

    def cdf_1d(self, x) -> np.ndarray:
        """Cumulative distribution function; one-dimensional mixtures only."""
        if self.dim != 1:
            raise InvalidArgumentError("cdf_1d needs a one-dimensional mixture")
        x = np.clip(np.asarray(x, dtype=float), self.lower[0], self.upper[0])
        mu, sg = self.means[:, 0], self.sigmas[:, 0]
        lo, hi = self.lower[0], self.upper[0]
        num = np.sum(self.weights * (ndtr((x[..., None] - mu) / sg) - ndtr((lo - mu) / sg)), axis=-1)
        mix = num / np.sum(self.weights * self._component_mass())
        uni = (x - lo) / (hi - lo)
        return (1.0 - self.uniform_weight) * mix + self.uniform_weight * uni

    def quantile_1d(self, q) -> np.ndarray:
        """Inverse CDF by bracketed root finding (independent of any grid)."""
        q = np.atleast_1d(np.asarray(q, dtype=float))
        lo, hi = self.lower[0], self.upper[0]
        out = np.empty_like(q)
        for i, qi in enumerate(q):
            if qi <= 0.0:
                out[i] = lo
            elif qi >= 1.0:
                out[i] = hi
            else:
                out[i] = brentq(lambda s: float(self.cdf_1d(s)) - qi, lo, hi, xtol=1e-14, rtol=1e-14)
        return out


@dataclass(frozen=True)
class WrappedMixture:
    """Mixture of diagonal Gaussians wrapped onto the torus ``[-pi, pi)^d``.

    A stand-in for backbone dihedral-angle distributions with a few metastable
    basins.
    """

    means: np.ndarray
    sigmas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        sigmas = np.broadcast_to(np.asarray(self.sigmas, dtype=float), means.shape).copy()
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "weights", weights / weights.sum())

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def sample(self, n: int, rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        raw = self.means[comp] + self.sigmas[comp] * rng.standard_normal((n, self.dim))
        return wrap_angle(raw)

    def pdf(self, x, n_wraps: int = 3) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dens = np.zeros(x.shape[0])
        shifts = 2.0 * np.pi * np.arange(-n_wraps, n_wraps + 1)
        for w, mu, sg in zip(self.weights, self.means, self.sigmas):
            per_axis = [
                np.sum(norm.pdf(x[:, [j]] + shifts, mu[j], sg[j]), axis=1) for j in range(self.dim)
            ]
            dens += w * np.prod(per_axis, axis=0)
        return dens


def wrap_angle(a):
    """Map angles to ``[-pi, pi)``."""
    return np.mod(np.asarray(a) + np.pi, 2.0 * np.pi) - np.pi


def two_gaussians_1d(lower: float = 0.0, upper: float = 1.0):
    """The pair of truncated 1D Gaussians used for the quantile-map oracle."""
    rho0 = TruncatedMixture([[0.38]], [[0.2]], [1.0], [lower], [upper])
    rho1 = TruncatedMixture([[0.64]], [[0.22]], [1.0], [lower], [upper])
    return rho0, rho1


def mixture_pair_2d(lower=(-2.5, -2.5), upper=(2.5, 2.5), uniform_weight: float = 0.02):
    """A unimodal source and a bimodal target on a box, both bounded below."""
    rho0 = TruncatedMixture([[0.0, 0.0]], [[1.0, 1.0]], [1.0], lower, upper, uniform_weight)
    rho1 = TruncatedMixture(
        [[-1.0, 0.6], [1.1, -0.5]], [[0.55, 0.7], [0.6, 0.5]], [0.45, 0.55], lower, upper, uniform_weight
    )
    return rho0, rho1


def alanine_surrogate() -> WrappedMixture:
    """Three-basin wrapped mixture on the (phi, psi) torus, loosely shaped like
    the beta, alpha_R and alpha_L regions."""
    return WrappedMixture(
        means=[[-1.4, 2.6], [-1.3, -0.7], [1.0, 0.6]],
        sigmas=[[0.35, 0.40], [0.25, 0.30], [0.20, 0.25]],
        weights=[0.55, 0.38, 0.07],
    )
