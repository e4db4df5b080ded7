import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from randswitch.quadrature import (
    N_MAX,
    QuadratureError,
    RandomiserSpec,
    golub_welsch,
    moments,
    rule_for,
)


def numeric_moments(spec, upto):
    if spec.family == "normal":
        lo, hi = spec.params[0] - 40 * spec.params[1], spec.params[0] + 40 * spec.params[1]
    elif spec.family == "exponential":
        lo, hi = 0.0, 60.0 / spec.params[0]
    else:
        lo, hi = spec.params
    if spec.truncation is not None:
        hi = min(hi, spec.truncation)
    return np.array([
        integrate.quad(lambda x: x**k * spec.pdf(x), lo, hi, limit=200, epsabs=1e-13, epsrel=1e-12)[0]
        for k in range(upto + 1)
    ])


@pytest.mark.parametrize("spec", [
    RandomiserSpec.normal(0.15, 0.1),
    RandomiserSpec.normal(0.3, 1.0),
    RandomiserSpec.exponential(2.0),
    RandomiserSpec.uniform(-0.5, 2.0),
    RandomiserSpec.exponential(2.0).truncated(1.5),
    RandomiserSpec.normal(0.3, 1.0).truncated(0.5),
])
def test_moments_match_numerical_integration(spec):
    m = moments(spec, 8)
    ref = numeric_moments(spec, 8)
    np.testing.assert_allclose(m, ref, rtol=1e-8, atol=1e-12)


def test_exponential_moments():
    np.testing.assert_allclose(moments(RandomiserSpec.exponential(2.0), 2), [1.0, 0.5, 0.5], rtol=1e-14)


def test_point_mass_moments():
    np.testing.assert_allclose(moments(RandomiserSpec.point(0.2), 3), 0.2 ** np.arange(4), rtol=1e-14)


def test_truncated_exponential_mean():
    m1 = moments(RandomiserSpec.exponential(2.0).truncated(1.5), 1)[1]
    closed = 0.5 - 1.5 * math.exp(-3) / (1 - math.exp(-3))
    assert m1 == pytest.approx(closed, rel=1e-12)
    assert m1 == pytest.approx(0.4214065, abs=1e-7)


def test_normal_two_point_rule():
    r = rule_for(RandomiserSpec.normal(0.0, 1.0), 2)
    np.testing.assert_allclose(r.nodes, [-1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(r.weights, [0.5, 0.5], atol=1e-12)


def test_calm_three_point_rule():
    r = rule_for(RandomiserSpec.normal(0.15, 0.1), 3)
    s3 = 0.1 * math.sqrt(3)
    np.testing.assert_allclose(r.nodes, [0.15 - s3, 0.15, 0.15 + s3], atol=1e-12)
    np.testing.assert_allclose(r.weights, [1 / 6, 2 / 3, 1 / 6], atol=1e-12)


def test_brute_force_moment_system():
    # four moment equations for two nodes, solved independently
    from scipy.optimize import fsolve

    m = moments(RandomiserSpec.normal(0.0, 1.0), 3)

    def eqs(v):
        w1, w2, x1, x2 = v
        return [w1 * x1**k + w2 * x2**k - m[k] for k in range(4)]

    w1, w2, x1, x2 = fsolve(eqs, [0.4, 0.6, -0.8, 1.2], xtol=1e-12)
    r = rule_for(RandomiserSpec.normal(0.0, 1.0), 2)
    np.testing.assert_allclose(sorted([x1, x2]), r.nodes, atol=1e-10)


@pytest.mark.parametrize("order", [1, 3, 7, 10])
def test_point_mass_single_node(order):
    r = rule_for(RandomiserSpec.point(0.2), order)
    assert r.order == 1
    assert r.nodes[0] == 0.2 and r.weights[0] == 1.0


def test_zero_std_normal_short_circuits():
    r = rule_for(RandomiserSpec.normal(0.3, 0.0), 7)
    assert r.order == 1 and r.nodes[0] == pytest.approx(0.3)


def test_golub_welsch_from_raw_moments_matches_rule_for():
    spec = RandomiserSpec.normal(0.3, 1.0)
    a = golub_welsch(moments(spec, 14), 7)
    b = rule_for(spec, 7)
    np.testing.assert_allclose(a.nodes, b.nodes, atol=1e-9)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-9)


def test_order_above_cap_rejected():
    with pytest.raises(QuadratureError):
        rule_for(RandomiserSpec.normal(0, 1), N_MAX + 1)


def test_indefinite_hankel_falls_back():
    # moments of a two-point law: order 3 is impossible, order 2 is exact
    nodes, w = np.array([-1.0, 2.0]), np.array([0.6, 0.4])
    mom = np.array([np.sum(w * nodes**k) for k in range(7)])
    r = golub_welsch(mom, 3)
    assert r.order == 2
    assert r.diagnostics.get("fallback_from") == 3
    np.testing.assert_allclose(r.nodes, nodes, atol=1e-8)


def test_invalid_specs():
    with pytest.raises(QuadratureError):
        RandomiserSpec("gamma", (1.0,))
    with pytest.raises(QuadratureError):
        RandomiserSpec.exponential(-1.0)
    with pytest.raises(QuadratureError):
        RandomiserSpec.exponential(1.0).truncated(0.0)


def test_convergence_diagnostic_for_smooth_integrand():
    spec = RandomiserSpec.normal(0.3, 1.0)
    ref = integrate.quad(lambda x: np.cos(x) * stats.norm.pdf(x, 0.3, 1.0), -12, 12)[0]
    errs = [abs(rule_for(spec, n).integrate(np.cos) - ref) for n in (2, 4, 6, 8)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_sampling_and_ppf_consistent():
    spec = RandomiserSpec.exponential(2.0).truncated(1.5)
    g = np.random.default_rng(0)
    x = spec.sample(g, 200_000)
    assert x.max() < 1.5
    assert abs(x.mean() - spec.mean()) < 4 * spec.std() / math.sqrt(len(x))
    q = np.array([0.1, 0.5, 0.9])
    np.testing.assert_allclose(spec.cdf(spec.ppf(q)), q, atol=1e-12)


# properties -------------------------------------------------------------------

laws = st.one_of(
    st.builds(RandomiserSpec.normal, st.floats(-2, 2), st.floats(0.01, 3)),
    st.builds(RandomiserSpec.exponential, st.floats(0.1, 10)),
    st.builds(lambda a, w: RandomiserSpec.uniform(a, a + w), st.floats(-2, 2), st.floats(0.05, 4)),
    st.builds(lambda r, b: RandomiserSpec.exponential(r).truncated(b), st.floats(0.1, 10), st.floats(0.05, 3)),
)


@given(laws, st.integers(1, 8))
def test_rule_invariants(spec, n):
    r = rule_for(spec, n)
    assert np.all(r.weights > 0)
    assert abs(r.weights.sum() - 1) < 1e-12
    assert np.all(np.diff(r.nodes) > 0)
    if spec.family == "exponential":
        hi = spec.truncation if spec.truncation is not None else np.inf
        assert np.all(r.nodes >= 0) and np.all(r.nodes <= hi)
    if spec.family == "uniform":
        assert np.all(r.nodes >= spec.params[0]) and np.all(r.nodes <= spec.params[1])


@given(laws, st.integers(1, 7), st.data())
def test_polynomial_exactness(spec, n, data):
    r = rule_for(spec, n)
    deg = 2 * r.order - 1
    coef = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=deg + 1, max_size=deg + 1)))
    m = moments(spec, deg)
    exact = float(coef @ m)
    quad = float(np.sum(r.weights * np.polyval(coef[::-1], r.nodes)))
    scale = float(np.abs(coef) @ np.abs(moments(spec, deg)))
    assert abs(quad - exact) <= 1e-8 * max(scale, 1.0)
