"""Closed-form steady-state overlap quantities for the M/M/1 queue.

Maximum overlap ``M = max(W_n, W_{n+1})`` and minimum adjacent overlap
``M* = min(W_n, W_{n+1})`` both have an atom at zero and are exponential
with rate ``mu - lambda`` conditional on being positive::

    P(W > t)  = (lambda / mu)                       * exp(-(mu - lambda) t)
    P(M > t)  = 2 lambda / (mu + lambda)            * exp(-(mu - lambda) t)
    P(M* > t) = 2 lambda^2 / (mu (mu + lambda))     * exp(-(mu - lambda) t)

Transforms are Laplace-Stieltjes transforms ``E[exp(-theta X)]``.
Functions taking ``t`` or ``theta`` accept scalars or arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_MOMENT_ORDER = 20


class StabilityError(ValueError):
    """Raised for rates that do not satisfy ``0 < lambda < mu``."""


@dataclass(frozen=True)
class QueueParams:
    lam: float
    mu: float
    max_load: float = 0.999

    def __post_init__(self):
        lam, mu = self.lam, self.mu
        if not (math.isfinite(lam) and math.isfinite(mu)):
            raise StabilityError("rates must be finite")
        if not (0.0 < lam < mu):
            raise StabilityError(
                f"stability requires 0 < lambda < mu, got lambda={lam!r}, mu={mu!r}"
            )
        if lam / mu > self.max_load:
            raise StabilityError(
                f"load lambda/mu = {lam / mu:.6g} exceeds the guard max_load={self.max_load}"
            )

    @property
    def gap(self) -> float:
        """Decay rate ``mu - lambda`` shared by every tail."""
        return self.mu - self.lam

    @property
    def total(self) -> float:
        return self.mu + self.lam

    @property
    def rho(self) -> float:
        return self.lam / self.mu


@dataclass(frozen=True)
class TailCurve:
    t: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        if self.t.shape != self.p.shape:
            raise ValueError("t and p must have the same shape")
        if np.any(self.p < 0) or np.any(self.p > 1):
            raise ValueError("tail probabilities must lie in [0, 1]")
        if np.any(np.diff(self.p) > 0):
            raise ValueError("tail must be non-increasing")


def _times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("t must be >= 0")
    return arr


def _thetas(theta):
    arr = np.asarray(theta, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("theta must be >= 0")
    return arr


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def _exp_tail(q: QueueParams, coeff: float, t):
    arr = _times(t)
    return _out(coeff * np.exp(-q.gap * arr))


def wait_coefficient(q: QueueParams) -> float:
    return q.lam / q.mu


def max_coefficient(q: QueueParams) -> float:
    return 2.0 * q.lam / q.total


def min_coefficient(q: QueueParams) -> float:
    return 2.0 * q.lam**2 / (q.mu * q.total)


def wait_tail(q: QueueParams, t):
    """P(W > t)."""
    return _exp_tail(q, wait_coefficient(q), t)


def diff_density(q: QueueParams, z):
    """Density of ``S - A`` with ``S ~ Exp(mu)``, ``A ~ Exp(lambda)`` independent."""
    z = np.asarray(z, dtype=float)
    c = q.lam * q.mu / q.total
    neg = np.exp(q.lam * np.minimum(z, 0.0))
    pos = np.exp(-q.mu * np.maximum(z, 0.0))
    return _out(c * np.where(z < 0, neg, pos))


def prob_service_lt_arrival(q: QueueParams) -> float:
    """P(S < A) = mu / (mu + lambda)."""
    return q.mu / q.total


def max_tail(q: QueueParams, t):
    """P(M > t) for the maximum overlap time."""
    return _exp_tail(q, max_coefficient(q), t)


def max_atom_zero(q: QueueParams) -> float:
    """P(M = 0) = (mu - lambda) / (mu + lambda)."""
    return 1.0 - max_coefficient(q)


def _moment(q: QueueParams, coeff: float, p: int) -> float:
    if isinstance(p, bool) or int(p) != p:
        raise ValueError(f"moment order must be an integer, got {p!r}")
    p = int(p)
    if p < 1:
        raise ValueError(f"moment order must be >= 1, got {p}")
    if p > MAX_MOMENT_ORDER:
        raise ValueError(f"moment order {p} > {MAX_MOMENT_ORDER}; factorial loses exactness")
    return coeff * math.factorial(p) / q.gap**p


def max_moment(q: QueueParams, p: int) -> float:
    """E[M^p] = 2 lambda / (mu + lambda) * p! / (mu - lambda)^p."""
    return _moment(q, max_coefficient(q), p)


def max_variance(q: QueueParams) -> float:
    return 4.0 * q.lam * q.mu / (q.total**2 * q.gap**2)


def _transform(q: QueueParams, coeff: float, theta):
    th = _thetas(theta)
    # (1 - c) + c g / (g + theta), rearranged so theta = 0 gives exactly 1
    with np.errstate(invalid="ignore"):
        frac = np.where(np.isinf(th), 1.0, th / (q.gap + th))
    return _out(1.0 - coeff * frac)


def max_transform(q: QueueParams, theta):
    """E[exp(-theta M)]."""
    return _transform(q, max_coefficient(q), theta)


def min_tail(q: QueueParams, t):
    """P(M* > t) for the minimum adjacent overlap time."""
    return _exp_tail(q, min_coefficient(q), t)


def min_atom_zero(q: QueueParams) -> float:
    return 1.0 - min_coefficient(q)


def min_moment(q: QueueParams, p: int) -> float:
    """E[M*^p] = 2 lambda^2 / (mu (mu + lambda)) * p! / (mu - lambda)^p."""
    return _moment(q, min_coefficient(q), p)


def min_variance(q: QueueParams) -> float:
    return min_moment(q, 2) - min_moment(q, 1) ** 2


def min_transform(q: QueueParams, theta):
    """E[exp(-theta M*)]."""
    return _transform(q, min_coefficient(q), theta)


# The two displays below integrate the tail against exp(-theta t) instead of
# the density, so they are not normalized at theta = 0.  Kept only for
# side-by-side reporting (``analytic --paper-exact``).

def max_transform_printed(q: QueueParams, theta):
    th = _thetas(theta)
    return _out(q.gap / q.total + 2.0 * q.lam / (q.total * (q.gap + th)))


def min_transform_printed(q: QueueParams, theta):
    th = _thetas(theta)
    c = min_coefficient(q)
    return _out((1.0 - c) + c / (q.gap + th))


def tail_curve(q: QueueParams, t, which: str = "max") -> TailCurve:
    fn = {"max": max_tail, "min": min_tail, "wait": wait_tail}[which]
    t = np.atleast_1d(_times(t))
    return TailCurve(t, np.atleast_1d(fn(q, t)))
