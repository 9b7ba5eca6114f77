"""G/G/1 FIFO trajectories and the adjacent-overlap series derived from them.

Conventions (customers are 1-indexed in the docs, 0-indexed in arrays):

* ``A[k]`` is the interarrival time between customer k and k+1, so the
  arrival epochs are ``T[0] = 0`` and ``T[k+1] = T[k] + A[k]``.
* ``W`` follows the Lindley recursion ``W[k+1] = max(W[k] + S[k] - A[k], 0)``.
* ``D`` is computed from the FIFO rule ``D[k] = max(T[k], D[k-1]) + S[k]``,
  which never looks at ``W``; that is what makes :func:`overlap_by_departure`
  an independent check of the waiting-time identity ``O_{k,k+1} = W_{k+1}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterator

import numba
import numpy as np

from .dist_core import DistributionSpec, RngStream, sample_n

DEFAULT_CHUNK = 1 << 16


@numba.njit(cache=True)
def _advance(A, S, w, t, t_comp, d_prev, W, T, D):
    # one pass over a chunk; carries (w, t, t_comp, d_prev) across chunks
    n = A.shape[0]
    for k in range(n):
        W[k] = w
        T[k] = t
        start = t if t > d_prev else d_prev
        d_prev = start + S[k]
        D[k] = d_prev
        w = w + S[k] - A[k]
        if w < 0.0:
            w = 0.0
        # Kahan-compensated arrival epochs
        y = A[k] - t_comp
        s = t + y
        t_comp = (s - t) - y
        t = s
    return w, t, t_comp, d_prev


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """Per-customer arrays for customers ``offset+1 .. offset+n``.

    ``w_next`` is the waiting time of the customer right after the last one
    held here (known because its predecessor's A and S are known).
    """

    A: np.ndarray
    S: np.ndarray
    W: np.ndarray
    T: np.ndarray
    D: np.ndarray
    w_next: float
    offset: int = 0

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def check(self, atol: float | None = None) -> None:
        """Assert the structural invariants; raises AssertionError.

        ``atol`` defaults to 1e-9, widened to 64 ulps of the largest epoch
        once epochs are large enough that 1e-9 is below their resolution.
        """
        W, A, S = self.W, self.A, self.S
        if atol is None:
            atol = max(1e-9, 64 * np.finfo(float).eps * float(np.max(self.D, initial=0.0)))
        if self.offset == 0:
            assert W[0] == 0.0, "W_1 must be 0"
        lindley = np.maximum(W[:-1] + S[:-1] - A[:-1], 0.0)
        assert np.array_equal(W[1:], lindley), "Lindley recursion violated"
        assert np.all(W >= 0) and np.all(A >= 0) and np.all(S >= 0) and np.all(self.D >= 0)
        gap = np.max(np.abs(self.D - (self.T + W + S))) if self.n else 0.0
        assert gap <= atol, f"FIFO departure drift {gap}"
        assert np.all(np.diff(self.D) >= 0), "FIFO departures must be non-decreasing"
        assert np.all(self.D >= self.T + S - atol), "departure before arrival + service"


@dataclass(frozen=True)
class OverlapSeries:
    """``O_adj[k]`` = O_{k,k+1} for k=1..n-1; ``M``, ``Mstar`` for k=2..n-1."""

    O_adj: np.ndarray
    M: np.ndarray
    Mstar: np.ndarray


def iter_trajectory(
    arrival: DistributionSpec,
    service: DistributionSpec,
    n: int,
    stream: RngStream,
    chunk_size: int = DEFAULT_CHUNK,
) -> Iterator[Trajectory]:
    """Stream a trajectory of ``n`` customers in bounded-memory chunks.

    Arrivals and services come from two child streams of ``stream`` so the
    sequences are independent and do not depend on ``chunk_size``.
    """
    if n < 3:
        raise ValueError(f"need at least 3 customers, got n={n}")
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive")
    arr_stream, svc_stream = stream.child(0), stream.child(1)
    state = (0.0, 0.0, 0.0, 0.0)
    done = 0
    while done < n:
        m = min(chunk_size, n - done)
        A = sample_n(arrival, arr_stream, m)
        S = sample_n(service, svc_stream, m)
        W, T, D = np.empty(m), np.empty(m), np.empty(m)
        state = _advance(A, S, *state, W, T, D)
        yield Trajectory(
            A=_frozen(A), S=_frozen(S), W=_frozen(W), T=_frozen(T), D=_frozen(D),
            w_next=float(state[0]), offset=done,
        )
        done += m


def simulate(
    arrival: DistributionSpec,
    service: DistributionSpec,
    n: int,
    stream: RngStream,
    chunk_size: int = DEFAULT_CHUNK,
) -> Trajectory:
    """Full trajectory of ``n`` customers; deterministic in ``stream``."""
    parts = list(iter_trajectory(arrival, service, n, stream, chunk_size))
    cat = lambda name: _frozen(np.concatenate([getattr(p, name) for p in parts]))  # noqa: E731
    return Trajectory(
        A=cat("A"), S=cat("S"), W=cat("W"), T=cat("T"), D=cat("D"),
        w_next=parts[-1].w_next, offset=0,
    )


def trajectory_from_arrays(A, S) -> Trajectory:
    """Trajectory from explicit interarrival/service arrays (hand traces, tests)."""
    A = np.ascontiguousarray(A, dtype=float)
    S = np.ascontiguousarray(S, dtype=float)
    if A.shape != S.shape or A.ndim != 1:
        raise ValueError("A and S must be 1-d arrays of equal length")
    if np.any(A < 0) or np.any(S < 0):
        raise ValueError("times must be nonnegative")
    m = A.shape[0]
    W, T, D = np.empty(m), np.empty(m), np.empty(m)
    w, *_ = _advance(A, S, 0.0, 0.0, 0.0, 0.0, W, T, D)
    return Trajectory(A=_frozen(A), S=_frozen(S), W=_frozen(W), T=_frozen(T), D=_frozen(D), w_next=float(w))


def overlap_by_departure(traj: Trajectory) -> np.ndarray:
    """O_{k,k+1} = max(D_k - T_{k+1}, 0) for k=1..n-1, from epochs only."""
    return np.maximum(traj.D[:-1] - traj.T[1:], 0.0)


def overlap_series(traj: Trajectory) -> OverlapSeries:
    W = traj.W
    lo, hi = W[1:-1], W[2:]
    return OverlapSeries(O_adj=W[1:].copy(), M=np.maximum(lo, hi), Mstar=np.minimum(lo, hi))


def max_overlap_indicator(traj: Trajectory) -> np.ndarray:
    """Case-split form W_k 1{S_k < A_k} + (W_k + S_k - A_k) 1{S_k >= A_k}, k=2..n-1.

    Equals ``max(W_k, W_{k+1})`` whenever ``W_k + S_k - A_k >= 0``.
    """
    W, S, A = traj.W[1:-1], traj.S[1:-1], traj.A[1:-1]
    return np.where(S >= A, W + S - A, W)


def min_overlap_indicator(traj: Trajectory) -> np.ndarray:
    """W_k 1{S_k >= A_k} + (W_k + S_k - A_k)^+ 1{S_k < A_k}, k=2..n-1."""
    W, S, A = traj.W[1:-1], traj.S[1:-1], traj.A[1:-1]
    return np.where(S >= A, W, np.maximum(W + S - A, 0.0))


def iter_overlaps(
    arrival: DistributionSpec,
    service: DistributionSpec,
    n: int,
    stream: RngStream,
    chunk_size: int = DEFAULT_CHUNK,
) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield ``(first_k, M, Mstar)`` chunks covering k=2..n-1 without holding the run.

    Concatenating the chunks reproduces ``overlap_series(simulate(...))``.
    """
    for part in iter_trajectory(arrival, service, n, stream, chunk_size):
        W_ext = np.append(part.W, part.w_next)
        lo, hi = W_ext[:-1], W_ext[1:]
        first = part.offset + 1  # 1-indexed customer number of lo[0]
        start = 1 if part.offset == 0 else 0
        stop = part.n - 1 if part.offset + part.n == n else part.n
        if stop > start:
            yield first + start, np.maximum(lo[start:stop], hi[start:stop]), np.minimum(lo[start:stop], hi[start:stop])


def write_raw_csv(traj: Trajectory, path) -> None:
    """Dump interior customers with header ``k,A,S,W,D,O_adj,M,Mstar``."""
    ov = overlap_series(traj)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "A", "S", "W", "D", "O_adj", "M", "Mstar"])
        for i in range(1, traj.n - 1):
            j = i - 1
            w.writerow([
                i + 1,
                *(f"{x:.17g}" for x in (traj.A[i], traj.S[i], traj.W[i], traj.D[i],
                                        ov.O_adj[i], ov.M[j], ov.Mstar[j])),
            ])
