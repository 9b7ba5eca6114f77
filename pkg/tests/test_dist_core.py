import math

import numpy as np
import pytest
from scipy import integrate

from overlapq.dist_core import (
    Deterministic,
    Erlang,
    Exponential,
    RngStream,
    Uniform,
    mean,
    parse_spec,
    sample,
    sample_n,
    variance,
)

SPECS = [Exponential(1.3), Deterministic(2.0), Erlang(3, 2.0), Uniform(0.5, 2.5)]


def test_deterministic_sample():
    s = RngStream(1)
    assert all(sample(Deterministic(2.0), s) == 2.0 for _ in range(10))


def test_exponential_inverse_transform():
    u = np.array([[math.exp(-3.0)]])
    assert Exponential(1.0).from_uniforms(u)[0] == pytest.approx(3.0, abs=1e-15)
    assert Exponential(2.0).from_uniforms(u)[0] == pytest.approx(1.5, abs=1e-15)


def test_erlang_mean_1e6():
    x = sample_n(Erlang(2, 1.0), RngStream(7), 10**6)
    assert abs(x.mean() - 2.0) < 0.01


@pytest.mark.parametrize(
    "spec, m, v",
    [
        (Exponential(1.0), 1.0, 1.0),
        (Exponential(4.0), 0.25, 1 / 16),
        (Deterministic(5.0), 5.0, 0.0),
        (Erlang(3, 2.0), 1.5, 0.75),
        (Uniform(0.0, 1.0), 0.5, 1 / 12),
    ],
)
def test_closed_form_moments(spec, m, v):
    assert mean(spec) == pytest.approx(m, rel=1e-15)
    assert variance(spec) == pytest.approx(v, rel=1e-15)


@pytest.mark.parametrize("spec", [Exponential(1.3), Erlang(3, 2.0), Uniform(0.5, 2.5)])
def test_variance_by_numeric_integration(spec):
    lo, hi = (spec.lower, spec.upper) if isinstance(spec, Uniform) else (0.0, np.inf)
    m1 = integrate.quad(lambda x: x * spec.pdf(x), lo, hi)[0]
    m2 = integrate.quad(lambda x: x * x * spec.pdf(x), lo, hi)[0]
    assert m1 == pytest.approx(spec.mean(), rel=1e-9)
    assert m2 - m1**2 == pytest.approx(spec.variance(), rel=1e-8)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_empirical_mean_within_5_standard_errors(spec):
    n = 10**6
    x = sample_n(spec, RngStream(2026, 3), n)
    se = math.sqrt(spec.variance() / n)
    assert abs(x.mean() - spec.mean()) <= max(5 * se, 1e-12)
    assert np.all(x >= 0)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_reproducible_bitwise(spec):
    a = sample_n(spec, RngStream(99, 5), 1000)
    b = sample_n(spec, RngStream(99, 5), 1000)
    assert a.tobytes() == b.tobytes()


def test_chunked_draws_match_single_draw():
    s1, s2 = RngStream(3, 1), RngStream(3, 1)
    whole = sample_n(Erlang(2, 1.0), s1, 1000)
    parts = np.concatenate([sample_n(Erlang(2, 1.0), s2, k) for k in (1, 99, 400, 500)])
    assert whole.tobytes() == parts.tobytes()


def test_distinct_streams_differ_and_are_uncorrelated():
    a = sample_n(Exponential(1.0), RngStream(11, 0), 10**5)
    b = sample_n(Exponential(1.0), RngStream(11, 1), 10**5)
    c = sample_n(Exponential(1.0), RngStream(11, 0).child(1), 10**5)
    assert not np.array_equal(a, b)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.015
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.015


def test_uniforms_open_interval():
    u = RngStream(0).uniforms(10**6)
    assert u.min() > 0.0 and u.max() < 1.0
    assert 0.0 < (0.5 * 2.0**-52) < 1.0 - 2.0**-53 < 1.0


def test_memorylessness():
    rate = 0.7
    x = sample_n(Exponential(rate), RngStream(5), 10**6)
    s = t = 1.0 / rate
    cond = np.mean(x[x > s] > s + t)
    uncond = np.mean(x > t)
    assert abs(cond - uncond) < 0.01


@pytest.mark.parametrize(
    "text, spec",
    [
        ("exp:0.8", Exponential(0.8)),
        ("det:2", Deterministic(2.0)),
        ("erlang:3:1.5", Erlang(3, 1.5)),
        ("unif:0:2", Uniform(0.0, 2.0)),
        (" EXP : 1 ", Exponential(1.0)),
    ],
)
def test_parse_spec(text, spec):
    assert parse_spec(text) == spec
    assert parse_spec(str(spec)) == spec


@pytest.mark.parametrize(
    "text",
    ["exp:0", "exp:-1", "det:0", "erlang:0:1", "erlang:2.5:1", "unif:1:1", "unif:-1:2", "gamma:1:1", "exp", "exp:x", "exp:nan"],
)
def test_parse_spec_rejects(text):
    with pytest.raises(ValueError):
        parse_spec(text)


def test_invalid_construction():
    with pytest.raises(ValueError):
        Exponential(float("inf"))
    with pytest.raises(ValueError):
        Uniform(2.0, 1.0)
    with pytest.raises(ValueError):
        RngStream(-1)
