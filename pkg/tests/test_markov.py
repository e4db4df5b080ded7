import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, linalg, stats

from randswitch import models, montecarlo
from randswitch.markov import (
    ExpmError,
    MarkovSpec,
    chf_markov,
    expm_pade13,
    markov_diagnostics,
)
from randswitch.processes import ComponentSpec, JumpSpec, ModelError, integrated_exponent, levy_exponent
from randswitch.quadrature import RandomiserSpec, rule_for

CALM, EXCITED = models.alternating(2)


def random_generator(rng, n, scale=3.0):
    Q = rng.uniform(0, scale, (n, n))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


@given(st.integers(0, 2**32 - 1), st.floats(-40, 40), st.floats(0.01, 50))
def test_expm_against_scipy(seed, shift, scale):
    g = np.random.default_rng(seed)
    n = int(g.integers(1, 7))
    A = scale * (g.standard_normal((n, n)) + 1j * g.standard_normal((n, n))) / n + shift * np.eye(n)
    ref = linalg.expm(A)
    got = expm_pade13(A)
    assert np.max(np.abs(got - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))


def test_expm_small_cases():
    assert expm_pade13(np.zeros((3, 3))) == pytest.approx(np.eye(3))
    np.testing.assert_allclose(expm_pade13(np.diag([1.0, -2.0])), np.diag([math.e, math.exp(-2)]), rtol=1e-14)
    with pytest.raises(ExpmError):
        expm_pade13(np.array([[np.inf]]))


@given(st.integers(0, 2**32 - 1), st.integers(1, 5), st.floats(0.0, 3.0))
def test_u_zero_is_one(seed, n, t):
    g = np.random.default_rng(seed)
    p = g.dirichlet(np.ones(n))
    spec = MarkovSpec(random_generator(g, n), p, models.alternating(n))
    assert abs(chf_markov(spec, t, 0.0) - 1) < 1e-12


def test_zero_generator_is_diagonal():
    Q = np.zeros((3, 3))
    comps = models.alternating(3)
    u = 1.7
    for j in range(3):
        p = np.eye(3)[j]
        got = chf_markov(MarkovSpec(Q, p, comps), 0.8, u)
        assert got == pytest.approx(complex(np.exp(-0.8 * integrated_exponent(comps[j], u))), abs=1e-14)


def test_commuting_point_mass_identity():
    g = np.random.default_rng(7)
    Q = random_generator(g, 3)
    comp = ComponentSpec(RandomiserSpec.point(0.25), jumps=JumpSpec(0.5, -0.05, 0.1))
    spec = MarkovSpec(Q, [0.2, 0.5, 0.3], (comp,) * 3)
    for u in (0.5, 1.0, 4.0):
        assert chf_markov(spec, 1.3, u) == pytest.approx(complex(np.exp(-1.3 * levy_exponent(comp, 0.25, u))), abs=1e-10)


def test_integrated_exponent_quadrature_and_oracle():
    assert integrated_exponent(EXCITED, 0.0) == 0
    a = integrated_exponent(EXCITED, 1.0, rule_for(EXCITED.randomiser, 7))
    b = integrated_exponent(EXCITED, 1.0, rule_for(EXCITED.randomiser, 9))
    assert abs(a - b) < 1e-6
    ref = [integrate.quad(lambda th, k=k: (levy_exponent(EXCITED, th, 1.0) * stats.norm.pdf(th, 0.3, 1.0)).real
                          if k == 0 else (levy_exponent(EXCITED, th, 1.0) * stats.norm.pdf(th, 0.3, 1.0)).imag,
                          -15, 15)[0] for k in (0, 1)]
    assert abs(a - complex(*ref)) < 1e-9
    point = ComponentSpec(RandomiserSpec.point(0.2))
    assert integrated_exponent(point, 1.3) == pytest.approx(levy_exponent(point, 0.2, 1.3))


@given(st.floats(-20, 20), st.floats(0, 2))
def test_modulus_and_symmetry(u, t):
    spec = MarkovSpec([[-2, 2], [2, -2]], [0.4, 0.6], (CALM, EXCITED))
    a, b = chf_markov(spec, t, u), chf_markov(spec, t, -u)
    assert abs(a) <= 1 + 1e-12
    assert abs(b - np.conj(a)) < 1e-12


def test_fast_switching_approaches_average_exponent():
    u, t = 2.0, 1.0
    avg = 0.5 * (integrated_exponent(CALM, u) + integrated_exponent(EXCITED, u))
    target = np.exp(-t * avg)
    dist = [abs(chf_markov(MarkovSpec([[-r, r], [r, -r]], [0.5, 0.5], (CALM, EXCITED)), t, u) - target)
            for r in (1.0, 10.0, 100.0)]
    assert dist[0] > dist[1] > dist[2]
    assert dist[2] < 1e-2


def test_array_u_shape():
    spec = MarkovSpec([[-2, 2], [2, -2]], [1, 0], (CALM, EXCITED))
    u = np.linspace(0, 3, 6).reshape(2, 3)
    assert chf_markov(spec, 1.0, u).shape == (2, 3)
    assert isinstance(chf_markov(spec, 1.0, 1.0), complex)


def test_validation():
    with pytest.raises(ModelError):
        MarkovSpec([[-1, 2], [2, -2]], [1, 0], (CALM, EXCITED))
    with pytest.raises(ModelError):
        MarkovSpec([[-2, 2], [2, -2]], [0.7, 0.7], (CALM, EXCITED))
    with pytest.raises(ModelError):
        MarkovSpec([[1, -1], [2, -2]], [1, 0], (CALM, EXCITED))
    with pytest.raises(ModelError):
        chf_markov(MarkovSpec([[0.0]], [1.0], (CALM,)), -1.0, 1.0)


def test_diagnostics_show_jensen_gap():
    spec = MarkovSpec([[-2, 2], [2, -2]], [1, 0], (CALM, EXCITED))
    d = markov_diagnostics(spec, 1.0, 2.0)
    gaps = [abs(s["exp_of_mean_exponent"] - s["mean_of_exp"]) for s in d["states"]]
    assert gaps[1] > 1e-3  # non-degenerate randomiser: the two averages differ


def test_markov_against_monte_carlo():
    model = models.MarkovModel(MarkovSpec([[-2, 2], [2, -2]], [1, 0], (CALM, EXCITED)))
    n = 10**6
    x = montecarlo.simulate_terminal(model, 1.0, n, seed=31)
    u = np.array([0.5, 1.0, 2.0, 5.0])
    emp, radius = montecarlo.empirical_chf(x, u)
    assert np.all(np.abs(emp - model.chf(u, 1.0)) <= radius)


def test_per_visit_randomisers_give_a_different_law():
    # redrawing theta at each visit is not the exponent-averaged model
    model = models.MarkovModel(MarkovSpec([[-2, 2], [2, -2]], [1, 0], (CALM, EXCITED)))
    n = 10**6
    x = montecarlo.simulate_markov_terminal(model, 1.0, n, seed=32, per_visit=True)
    emp, radius = montecarlo.empirical_chf(x, [2.0])
    assert abs(emp[0] - model.chf(2.0, 1.0)) > radius
