"""Parametric interarrival/service distributions and seeded random streams.

Every variate is produced by inverse transform from open-interval uniforms,
so a ``(seed, stream_id)`` pair pins the whole sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_U_BITS = 52
_U_SCALE = 2.0 ** -_U_BITS


class RngStream:
    """Counter-based (Philox) stream keyed by ``(seed, stream_id)``.

    Distinct stream ids map to distinct spawn keys of one ``SeedSequence``,
    which is the numpy-sanctioned way of getting independent streams
    without coordination between workers.
    """

    def __init__(self, seed: int, stream_id: int = 0, _key: tuple[int, ...] | None = None):
        if not (0 <= int(seed) < 2**64) or not (0 <= int(stream_id) < 2**64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._key = _key if _key is not None else (self.stream_id,)
        ss = np.random.SeedSequence(self.seed, spawn_key=self._key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, role: int) -> "RngStream":
        """Independent sub-stream, e.g. role 0 for arrivals and 1 for services."""
        return RngStream(self.seed, self.stream_id, _key=self._key + (int(role),))

    def uniforms(self, size: int) -> np.ndarray:
        # (k + 1/2) / 2^52 lies strictly inside (0, 1) and is exactly representable
        k = self._gen.integers(0, 2**_U_BITS, size=size, dtype=np.int64)
        return (k.astype(np.float64) + 0.5) * _U_SCALE

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, key={self._key})"


@dataclass(frozen=True)
class DistributionSpec:
    """Base class; use the concrete kinds below or :func:`parse_spec`."""

    #: uniforms consumed per variate
    draws: int = field(default=1, init=False, repr=False)

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        """Map a ``(size, draws)`` block of uniforms to ``size`` variates."""
        raise NotImplementedError

    def pdf(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(DistributionSpec):
    rate: float = 1.0

    def __post_init__(self):
        _positive("rate", self.rate)

    def mean(self):
        return 1.0 / self.rate

    def variance(self):
        return 1.0 / self.rate**2

    def from_uniforms(self, u):
        return -np.log(u[:, 0]) / self.rate

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def __str__(self):
        return f"exp:{self.rate!r}"


@dataclass(frozen=True)
class Deterministic(DistributionSpec):
    value: float = 1.0

    def __post_init__(self):
        _positive("value", self.value)
        object.__setattr__(self, "draws", 0)

    def mean(self):
        return float(self.value)

    def variance(self):
        return 0.0

    def from_uniforms(self, u):
        return np.full(u.shape[0], float(self.value))

    def pdf(self, x):
        raise ValueError("deterministic distribution has no density")

    def __str__(self):
        return f"det:{self.value!r}"


@dataclass(frozen=True)
class Erlang(DistributionSpec):
    shape: int = 1
    rate: float = 1.0

    def __post_init__(self):
        if isinstance(self.shape, bool) or int(self.shape) != self.shape or self.shape < 1:
            raise ValueError(f"Erlang shape must be a positive integer, got {self.shape!r}")
        _positive("rate", self.rate)
        object.__setattr__(self, "shape", int(self.shape))
        object.__setattr__(self, "draws", int(self.shape))

    def mean(self):
        return self.shape / self.rate

    def variance(self):
        return self.shape / self.rate**2

    def from_uniforms(self, u):
        # sum of k exponentials, no rejection step
        return -np.log(u).sum(axis=1) / self.rate

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        xp = np.maximum(x, 0.0)
        k, r = self.shape, self.rate
        logf = k * math.log(r) + (k - 1) * np.log(np.where(xp > 0, xp, 1.0)) - r * xp - math.lgamma(k)
        out = np.exp(logf)
        if k > 1:
            out = np.where(xp > 0, out, 0.0)
        return np.where(x >= 0, out, 0.0)

    def __str__(self):
        return f"erlang:{self.shape}:{self.rate!r}"


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("uniform bounds must be finite")
        if not (0.0 <= self.lower < self.upper):
            raise ValueError(f"uniform needs 0 <= lower < upper, got ({self.lower}, {self.upper})")

    def mean(self):
        return 0.5 * (self.lower + self.upper)

    def variance(self):
        return (self.upper - self.lower) ** 2 / 12.0

    def from_uniforms(self, u):
        return self.lower + (self.upper - self.lower) * u[:, 0]

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower) & (x <= self.upper)
        return np.where(inside, 1.0 / (self.upper - self.lower), 0.0)

    def __str__(self):
        return f"unif:{self.lower!r}:{self.upper!r}"


def _positive(name, value):
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a finite positive number, got {value!r}")


def parse_spec(text: str) -> DistributionSpec:
    """Parse ``exp:rate``, ``det:value``, ``erlang:k:rate`` or ``unif:a:b``."""
    parts = [p.strip() for p in str(text).strip().split(":")]
    kind, args = parts[0].lower(), parts[1:]
    try:
        if kind == "exp" and len(args) == 1:
            return Exponential(float(args[0]))
        if kind == "det" and len(args) == 1:
            return Deterministic(float(args[0]))
        if kind == "erlang" and len(args) == 2:
            k = float(args[0])
            if k != int(k):
                raise ValueError(f"Erlang shape must be an integer, got {args[0]}")
            return Erlang(int(k), float(args[1]))
        if kind == "unif" and len(args) == 2:
            return Uniform(float(args[0]), float(args[1]))
    except ValueError as exc:
        raise ValueError(f"bad distribution spec {text!r}: {exc}") from None
    raise ValueError(
        f"bad distribution spec {text!r}; expected exp:rate, det:value, erlang:k:rate or unif:a:b"
    )


def sample_n(spec: DistributionSpec, stream: RngStream, size: int) -> np.ndarray:
    """``size`` independent variates from ``spec``."""
    u = stream.uniforms(size * spec.draws).reshape(size, spec.draws)
    return spec.from_uniforms(u)


def sample(spec: DistributionSpec, stream: RngStream) -> float:
    return float(sample_n(spec, stream, 1)[0])


def mean(spec: DistributionSpec) -> float:
    return spec.mean()


def variance(spec: DistributionSpec) -> float:
    return spec.variance()
