"""Overlap tails by quadrature from a waiting-time tail and an S - A density.

With ``Z = S - A`` independent of the stationary wait ``W``::

    P(M > t)  = P(W > t) P(Z < 0) + int_0^t P(W > t - x) f(x) dx + int_t^inf f(x) dx
    P(M* > t) = P(W > t) P(Z >= 0) + int_{-inf}^0 P(W > t - x) f(x) dx

Nothing here assumes exponential inputs; the M/M/1 helpers at the bottom
only build the inputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import mm1

QUAD_ABS_TOL = 1e-10
MASS_REL_TOL = 1e-4
TRUNCATION = 1e-12


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class TailFunction:
    """``t -> P(X > t)`` for ``t >= 0``.

    ``decay`` is an exponential rate bounding the tail beyond ``horizon``;
    ``horizon`` defaults to the point where ``exp(-decay t)`` falls below
    the truncation level.
    """

    func: Callable[[float], float]
    decay: float | None = None
    horizon: float | None = None

    def __call__(self, t):
        return self.func(t)

    def domain_hint(self) -> float:
        if self.horizon is not None:
            return self.horizon
        if self.decay is None:
            raise ValueError("tail has neither a horizon nor a decay hint")
        return -math.log(TRUNCATION) / self.decay


@dataclass(frozen=True)
class SignedDensity:
    """Density on the real line with exponential decay hints on each side."""

    func: Callable[[float], float]
    negative_decay: float
    positive_decay: float

    def __call__(self, z):
        return self.func(z)

    def neg_horizon(self) -> float:
        return -math.log(TRUNCATION) / self.negative_decay

    def pos_horizon(self) -> float:
        return -math.log(TRUNCATION) / self.positive_decay


def _quad(f, a, b, points=None):
    if b <= a:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, info, *rest = integrate.quad(
            f, a, b, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=500, points=points, full_output=1
        )
    if rest and rest[0] and err > 1e-8:
        raise QuadratureError(f"quadrature on [{a:.6g}, {b:.6g}] did not converge (err={err:.3g}): {rest[0]}")
    return val


def _check_mass(diff: SignedDensity, p_lt: float):
    if not 0.0 <= p_lt <= 1.0:
        raise ValueError(f"probability out of range: {p_lt}")
    neg = _quad(diff, -diff.neg_horizon(), 0.0)
    ref = max(p_lt, 1e-300)
    if abs(neg - p_lt) > MASS_REL_TOL * ref and abs(neg - p_lt) > 1e-12:
        raise ValueError(
            f"P(S < A) = {p_lt!r} does not match the density's mass on (-inf, 0) = {neg!r}"
        )


def _wait_at(wait: TailFunction, s: float) -> float:
    # P(W > s) = 1 for s < 0
    return 1.0 if s < 0 else float(wait(s))


def max_tail_numeric(wait: TailFunction, diff: SignedDensity, p_lt: float, t: float) -> float:
    """P(M > t) assembled from the three-term decomposition."""
    if t < 0:
        raise ValueError("t must be >= 0")
    _check_mass(diff, p_lt)
    head = _wait_at(wait, t) * p_lt
    mid = _quad(lambda x: _wait_at(wait, t - x) * diff(x), 0.0, t)
    tail = _quad(diff, t, t + diff.pos_horizon())
    return float(min(1.0, max(0.0, head + mid + tail)))


def min_tail_numeric(wait: TailFunction, diff: SignedDensity, p_ge: float, t: float) -> float:
    """P(M* > t) from the split on the sign of S - A."""
    if t < 0:
        raise ValueError("t must be >= 0")
    _check_mass(diff, 1.0 - p_ge)
    head = _wait_at(wait, t) * p_ge
    body = _quad(lambda x: _wait_at(wait, t - x) * diff(x), -diff.neg_horizon(), 0.0)
    return float(min(1.0, max(0.0, head + body)))


def tail_to_moments(tail: TailFunction, p: int) -> float:
    """E[X^p] = int_0^inf p t^(p-1) P(X > t) dt, p in {1, 2, 3}.

    The integral is truncated at the tail's horizon and the remainder is
    added in closed form assuming ``P(X > t) <= P(X > H) exp(-decay (t - H))``.
    """
    if p not in (1, 2, 3):
        raise ValueError(f"p must be 1, 2 or 3, got {p!r}")
    if tail.decay is None:
        raise ValueError("tail_to_moments needs a decay hint; the truncated integral may diverge")
    r = tail.decay
    # widen so p t^(p-1) growth is also beaten by the exponential
    H = tail.domain_hint() + (p - 1) * math.log1p(tail.domain_hint()) / r + (p - 1) * 10.0 / r
    body = _quad(lambda t: p * t ** (p - 1) * tail(t), 0.0, H)
    upper = special.gammaincc(p, r * H) * math.gamma(p) / r**p
    remainder = float(tail(H)) * math.exp(r * H) * p * upper
    return body + remainder


def mm1_wait(q: mm1.QueueParams) -> TailFunction:
    return TailFunction(lambda t: mm1.wait_tail(q, t), decay=q.gap)


def mm1_diff(q: mm1.QueueParams) -> SignedDensity:
    return SignedDensity(lambda z: mm1.diff_density(q, z), negative_decay=q.lam, positive_decay=q.mu)


def mm1_max_tail_numeric(q: mm1.QueueParams, t: float) -> float:
    return max_tail_numeric(mm1_wait(q), mm1_diff(q), mm1.prob_service_lt_arrival(q), t)


def mm1_min_tail_numeric(q: mm1.QueueParams, t: float) -> float:
    return min_tail_numeric(mm1_wait(q), mm1_diff(q), 1.0 - mm1.prob_service_lt_arrival(q), t)


def tail_grid(q: mm1.QueueParams, points: int = 200) -> np.ndarray:
    return np.linspace(0.0, 10.0 / q.gap, points)
