"""Replicated simulation runs and the M/M/1 verification pipeline."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import stats
from .dist_core import DistributionSpec, Exponential, RngStream
from .mm1 import QueueParams
from .sim import iter_overlaps


def run_replication(arrival: DistributionSpec, service: DistributionSpec, n: int, seed: int, rep: int):
    """``(M, Mstar)`` for customers 2..n-1 of replication ``rep``."""
    ms, mstars = [], []
    for _, m, mstar in iter_overlaps(arrival, service, n, RngStream(seed, rep)):
        ms.append(m)
        mstars.append(mstar)
    return np.concatenate(ms), np.concatenate(mstars)


def _run(args):
    return run_replication(*args)


def run_replications(arrival, service, n, seed, replications, threads=None):
    """Independent replications, optionally on a process pool.

    Results do not depend on ``threads``: replication ``r`` always uses
    stream id ``r`` under ``seed``.
    """
    jobs = [(arrival, service, n, seed, r) for r in range(replications)]
    workers = threads or os.cpu_count() or 1
    if workers <= 1 or replications <= 1:
        return [_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, replications)) as pool:
        return list(pool.map(_run, jobs))


@dataclass
class VerifyResult:
    reports: dict
    summaries: dict

    @property
    def passed(self) -> bool:
        return all(r.pass_ for r in self.reports.values())

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "reports": {k: r.to_dict() for k, r in self.reports.items()},
            "summaries": {k: s.to_dict() for k, s in self.summaries.items()},
        }


def check_series(q_ref: QueueParams, chains, kind: str, burn_in: int, stride: int, batches: int, bins: int = stats.DEFAULT_BINS):
    """Summary and GofReport for one overlap kind pooled over replications."""
    trimmed = [c[burn_in:] for c in chains]
    summary = stats.summarize(np.concatenate(trimmed), burn_in=0, bins=bins)
    summary.burn_in = burn_in
    ks = stats.ks_conditional_exponential([c[c > 0.0] for c in trimmed], q_ref.gap, stride)
    cis = {p: stats.pooled_batch_means_ci(trimmed, 0, batches, p) for p in (1, 2)}
    return summary, stats.verify(q_ref, summary, cis, ks, kind=kind)


def verify_mm1(
    q: QueueParams,
    n: int,
    seed: int,
    replications: int = 4,
    burn_in: int = stats.DEFAULT_BURN_IN,
    stride: int = stats.DEFAULT_STRIDE,
    batches: int = stats.DEFAULT_BATCHES,
    bins: int = stats.DEFAULT_BINS,
    threads: int | None = None,
    reference: QueueParams | None = None,
) -> VerifyResult:
    """Simulate M/M/1 at ``q`` and test against the closed forms at ``reference`` (default ``q``)."""
    ref = reference or q
    runs = run_replications(Exponential(q.lam), Exponential(q.mu), n, seed, replications, threads)
    reports, summaries = {}, {}
    for idx, kind in enumerate(("max", "min")):
        summaries[kind], reports[kind] = check_series(
            ref, [r[idx] for r in runs], kind, burn_in, stride, batches, bins
        )
    return VerifyResult(reports, summaries)
