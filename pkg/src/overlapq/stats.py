"""Steady-state estimation from overlap series.

Zero overlaps are exact zeros (the Lindley recursion clamps with max), so
the atom at zero is counted with ``== 0.0`` and the positive part is
histogrammed separately.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .mm1 import QueueParams, TailCurve, max_coefficient, max_moment, min_coefficient, min_moment

DEFAULT_BURN_IN = 10_000
DEFAULT_STRIDE = 50
DEFAULT_BINS = 60
DEFAULT_BATCHES = 32
KS_CRITICAL_5PCT = 1.36
MIN_KS_SAMPLES = 100


class InsufficientDataError(ValueError):
    pass


@dataclass
class Histogram:
    bin_edges: np.ndarray
    density: np.ndarray
    atom_at_zero: float

    def rows(self):
        return list(zip(self.bin_edges[:-1], self.bin_edges[1:], self.density))

    def conditional(self) -> "Histogram":
        """Same bins, renormalized over the positive part only."""
        pos = 1.0 - self.atom_at_zero
        dens = self.density / pos if pos > 0 else self.density
        return Histogram(self.bin_edges, dens, 0.0)


@dataclass
class SampleSummary:
    count_used: int
    burn_in: int
    mean: float
    second_moment: float
    third_moment: float
    frac_positive: float
    histogram: Histogram
    empirical_tail: TailCurve

    def moment(self, p: int) -> float:
        return {1: self.mean, 2: self.second_moment, 3: self.third_moment}[p]

    def to_dict(self) -> dict:
        return {
            "count_used": self.count_used,
            "burn_in": self.burn_in,
            "mean": self.mean,
            "second_moment": self.second_moment,
            "third_moment": self.third_moment,
            "frac_positive": self.frac_positive,
            "atom_at_zero": self.histogram.atom_at_zero,
        }


@dataclass
class GofReport:
    kind: str
    ks_statistic: float
    ks_threshold: float
    effective_n: int
    rate: float
    tail_coefficient: float
    frac_positive: float
    moment_rel_errors: list[tuple[int, float]] = field(default_factory=list)
    ci_halfwidths: list[tuple[int, float]] = field(default_factory=list)
    moments: list[dict] = field(default_factory=list)
    pass_: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("pass_")
        d["moment_rel_errors"] = [list(x) for x in self.moment_rel_errors]
        d["ci_halfwidths"] = [list(x) for x in self.ci_halfwidths]
        return d


def _trim(series, burn_in: int) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    return x[burn_in:]


def summarize(series, burn_in: int = DEFAULT_BURN_IN, bins: int = DEFAULT_BINS) -> SampleSummary:
    """Moments, atom, histogram and empirical tail of ``series[burn_in:]``.

    Positive values are binned over ``[0, q99.9]`` of the positive part
    with the overflow folded into the last bin, so the bar areas sum to
    ``frac_positive`` and ``atom + sum(density * width) = 1``.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    n_all = len(series)
    if n_all <= burn_in + 100:
        raise InsufficientDataError(
            f"need more than burn_in + 100 = {burn_in + 100} samples, got {n_all}"
        )
    x = _trim(series, burn_in)
    n = x.shape[0]
    pos = x[x > 0.0]
    frac_pos = pos.shape[0] / n

    if pos.size:
        hi = float(np.quantile(pos, 0.999))
        if hi <= 0.0:
            hi = float(pos.max())
        edges = np.linspace(0.0, hi, bins + 1)
        counts, _ = np.histogram(np.minimum(pos, hi), bins=edges)
        density = counts / (n * np.diff(edges))
    else:
        edges = np.zeros(1)
        density = np.zeros(0)
    hist = Histogram(edges, density, 1.0 - frac_pos)

    grid = edges if pos.size else np.zeros(1)
    srt = np.sort(x)
    tail_p = 1.0 - np.searchsorted(srt, grid, side="right") / n
    tail = TailCurve(grid.copy(), np.clip(tail_p, 0.0, 1.0))

    return SampleSummary(
        count_used=n,
        burn_in=burn_in,
        mean=float(np.mean(x)),
        second_moment=float(np.mean(x**2)),
        third_moment=float(np.mean(x**3)),
        frac_positive=frac_pos,
        histogram=hist,
        empirical_tail=tail,
    )


def _chains(samples) -> list[np.ndarray]:
    if isinstance(samples, np.ndarray):
        return [samples]
    seq = list(samples)
    if seq and np.ndim(seq[0]) == 0:
        return [np.asarray(seq, dtype=float)]
    return [np.asarray(s, dtype=float) for s in seq]


def ks_conditional_exponential(positive_samples, rate: float, subsample_stride: int = DEFAULT_STRIDE):
    """KS distance of stride-thinned samples from ``Exp(rate)``.

    ``positive_samples`` may be one array or a list of per-replication
    arrays; each is thinned separately and the survivors are pooled.
    Returns ``(statistic, threshold, effective_n)`` with the asymptotic
    5% threshold ``1.36 / sqrt(effective_n)``.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    if subsample_stride < 1:
        raise ValueError("subsample_stride must be >= 1")
    thinned = np.concatenate([c[::subsample_stride] for c in _chains(positive_samples)] or [np.zeros(0)])
    n_eff = int(thinned.shape[0])
    if n_eff < MIN_KS_SAMPLES:
        raise InsufficientDataError(f"KS needs >= {MIN_KS_SAMPLES} effective samples, got {n_eff}")
    stat = sps.kstest(thinned, sps.expon(scale=1.0 / rate).cdf).statistic
    return float(stat), KS_CRITICAL_5PCT / math.sqrt(n_eff), n_eff


def batch_means(series, burn_in: int, num_batches: int = DEFAULT_BATCHES, p: int = 1) -> np.ndarray:
    """Means of ``x**p`` over ``num_batches`` contiguous equal batches."""
    if num_batches < 10:
        raise ValueError("num_batches must be >= 10")
    x = _trim(series, burn_in)
    if x.shape[0] < 100 * num_batches:
        raise InsufficientDataError(
            f"need >= {100 * num_batches} post-burn-in samples for {num_batches} batches, got {x.shape[0]}"
        )
    size = x.shape[0] // num_batches
    return (x[: size * num_batches] ** p).reshape(num_batches, size).mean(axis=1)


def ci_from_batch_means(means: np.ndarray, level: float = 0.95) -> tuple[float, float]:
    b = means.shape[0]
    point = float(means.mean())
    sd = float(means.std(ddof=1))
    half = float(sps.t.ppf(0.5 + level / 2, b - 1)) * sd / math.sqrt(b)
    return point, half


def batch_means_ci(series, burn_in: int = DEFAULT_BURN_IN, num_batches: int = DEFAULT_BATCHES, p: int = 1):
    """``(point, halfwidth)`` of a 95% batch-means interval for ``E[X^p]``."""
    return ci_from_batch_means(batch_means(series, burn_in, num_batches, p))


def pooled_batch_means_ci(chains: Sequence, burn_in: int, num_batches: int, p: int):
    """Batch means from independent replications, pooled into one interval."""
    means = np.concatenate([batch_means(c, burn_in, num_batches, p) for c in chains])
    return ci_from_batch_means(means)


def verify(q: QueueParams, summary: SampleSummary, cis: dict, ks: tuple, kind: str = "max") -> GofReport:
    """Compare estimates against the closed forms for ``kind`` in {"max", "min"}.

    ``cis`` maps moment order to ``(point, halfwidth)``.  The report passes
    iff the KS statistic is below threshold and every analytic moment lies
    inside its interval.
    """
    if kind == "max":
        coeff, moment = max_coefficient(q), max_moment
    elif kind == "min":
        coeff, moment = min_coefficient(q), min_moment
    else:
        raise ValueError(f"kind must be 'max' or 'min', got {kind!r}")
    stat, thr, n_eff = ks
    rel_errors, halfwidths, rows = [], [], []
    covered = True
    for p in sorted(cis):
        point, half = cis[p]
        exact = moment(q, p)
        inside = (point - half) <= exact <= (point + half)
        covered &= inside
        rel_errors.append((p, abs(point - exact) / exact))
        halfwidths.append((p, half))
        rows.append({"p": p, "analytic": exact, "estimate": point, "halfwidth": half, "covered": bool(inside)})
    return GofReport(
        kind=kind,
        ks_statistic=stat,
        ks_threshold=thr,
        effective_n=n_eff,
        rate=q.gap,
        tail_coefficient=coeff,
        frac_positive=summary.frac_positive,
        moment_rel_errors=rel_errors,
        ci_halfwidths=halfwidths,
        moments=rows,
        pass_=bool(stat < thr and covered),
    )
