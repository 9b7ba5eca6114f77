import csv

import numpy as np
import pytest

from overlapq.dist_core import Deterministic, Erlang, Exponential, RngStream, Uniform
from overlapq.sim import (
    iter_overlaps,
    max_overlap_indicator,
    min_overlap_indicator,
    overlap_by_departure,
    overlap_series,
    simulate,
    trajectory_from_arrays,
    write_raw_csv,
)

PAIRINGS = [
    (Exponential(0.8), Exponential(1.0)),
    (Deterministic(1.25), Exponential(1.0)),
    (Exponential(0.8), Deterministic(1.0)),
    (Erlang(2, 1.6), Uniform(0.0, 2.0)),
    (Uniform(0.5, 2.0), Erlang(3, 3.5)),
    (Deterministic(1.0), Uniform(0.2, 1.6)),
]


def test_hand_trace():
    # A = (1, 1), S = (2, 0.5): W_2 = max(0 + 2 - 1, 0) = 1, W_3 = max(1 + 0.5 - 1, 0) = 0.5
    traj = trajectory_from_arrays([1.0, 1.0, 1.0], [2.0, 0.5, 1.0])
    np.testing.assert_array_equal(traj.W, [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(traj.T, [0.0, 1.0, 2.0])
    np.testing.assert_array_equal(traj.D, [2.0, 2.5, 3.5])
    o = overlap_by_departure(traj)
    assert o[0] == 1.0 and o[1] == 0.5
    ov = overlap_series(traj)
    assert ov.M.tolist() == [1.0] and ov.Mstar.tolist() == [0.5]
    traj.check()


def test_underloaded_no_waiting():
    traj = trajectory_from_arrays([5.0, 5.0, 5.0], [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(traj.W, 0.0)
    np.testing.assert_array_equal(overlap_by_departure(traj), 0.0)
    ov = overlap_series(traj)
    assert not ov.M.any() and not ov.Mstar.any()


def test_deterministic_synchronized():
    traj = simulate(Deterministic(1.0), Deterministic(1.0), 1000, RngStream(0))
    np.testing.assert_array_equal(traj.W, 0.0)
    np.testing.assert_array_equal(overlap_by_departure(traj), 0.0)


def test_n_below_three_rejected():
    with pytest.raises(ValueError):
        simulate(Exponential(0.5), Exponential(1.0), 2, RngStream(0))


@pytest.mark.parametrize("arrival, service", PAIRINGS, ids=lambda s: str(s))
def test_departure_oracle_and_invariants(arrival, service):
    traj = simulate(arrival, service, 10**5, RngStream(17))
    traj.check(atol=1e-9)
    err = np.max(np.abs(overlap_by_departure(traj) - traj.W[1:]))
    assert err < 1e-9


@pytest.mark.parametrize("arrival, service", PAIRINGS, ids=lambda s: str(s))
def test_proposition_case_split(arrival, service):
    traj = simulate(arrival, service, 50_000, RngStream(8))
    ov = overlap_series(traj)
    W, S, A = traj.W[1:-1], traj.S[1:-1], traj.A[1:-1]
    nonneg = W + S - A >= 0
    ind = max_overlap_indicator(traj)
    np.testing.assert_allclose(ind[nonneg], ov.M[nonneg], rtol=0, atol=1e-12)
    # when W_{k+1} = 0 the max is W_k
    zero_next = traj.W[2:] == 0.0
    np.testing.assert_array_equal(ov.M[zero_next], W[zero_next])
    np.testing.assert_allclose(min_overlap_indicator(traj), ov.Mstar, rtol=0, atol=1e-12)
    assert np.all(ov.Mstar <= ov.M)


def test_tie_goes_to_service_ge_branch():
    traj = trajectory_from_arrays([1.0, 1.0, 1.0, 1.0], [2.0, 1.0, 1.0, 1.0])
    # customer 2 has S = A exactly; both branches give W_2
    assert max_overlap_indicator(traj)[0] == traj.W[1] == 1.0


def test_determinism_and_chunk_independence():
    a = simulate(Erlang(2, 1.6), Uniform(0.0, 2.0), 20_000, RngStream(5, 2))
    b = simulate(Erlang(2, 1.6), Uniform(0.0, 2.0), 20_000, RngStream(5, 2), chunk_size=777)
    for name in "ASWTD":
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_streaming_overlaps_match_full_trajectory():
    arr, svc, n = Exponential(0.8), Exponential(1.0), 10_001
    full = overlap_series(simulate(arr, svc, n, RngStream(3)))
    chunks = list(iter_overlaps(arr, svc, n, RngStream(3), chunk_size=1000))
    assert chunks[0][0] == 2
    np.testing.assert_array_equal(np.concatenate([c[1] for c in chunks]), full.M)
    np.testing.assert_array_equal(np.concatenate([c[2] for c in chunks]), full.Mstar)
    assert full.M.shape == (n - 2,)


def test_arrays_are_immutable():
    traj = simulate(Exponential(0.5), Exponential(1.0), 100, RngStream(1))
    with pytest.raises(ValueError):
        traj.W[0] = 1.0


def test_raw_csv(tmp_path):
    traj = trajectory_from_arrays([1.0, 1.0, 1.0, 3.0], [2.0, 0.5, 1.0, 1.0])
    path = tmp_path / "raw.csv"
    write_raw_csv(traj, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["k", "A", "S", "W", "D", "O_adj", "M", "Mstar"]
    assert len(rows) == 1 + traj.n - 2
    k, A, S, W, D, O, M, Ms = map(float, rows[1])
    assert (k, W, D, O, M, Ms) == (2, 1.0, 2.5, 0.5, 1.0, 0.5)
