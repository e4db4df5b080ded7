import math
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from randswitch import models, rng
from randswitch.montecarlo import (
    SimulationError,
    driver_checks,
    empirical_chf,
    read_paths_csv,
    sample_sojourns,
    simulate_paths,
    simulate_terminal,
    time_grid,
)
from randswitch.processes import ComponentSpec, JumpSpec, ScheduleDeterministic
from randswitch.quadrature import RandomiserSpec
from randswitch.switching import SojournSpec

U = np.array([0.5, 1.0, 2.0, 5.0])


def point(theta, jumps=JumpSpec()):
    return ComponentSpec(RandomiserSpec.point(theta), jumps=jumps, order=1)


# empirical chf -----------------------------------------------------------------

def test_empirical_chf_at_zero_is_one():
    x = np.random.default_rng(3).standard_normal(1000)
    vals, radius = empirical_chf(x, [0.0])
    assert vals[0] == 1.0
    assert radius == pytest.approx(4 / math.sqrt(1000))


def test_empirical_chf_standard_normal():
    x = rng.stream(7, "test").standard_normal(10**6)
    vals, radius = empirical_chf(x, [1.0])
    assert abs(vals[0] - math.exp(-0.5)) < 4e-3
    assert radius == pytest.approx(4e-3)


@given(st.floats(-5, 5), st.floats(-10, 10))
def test_empirical_chf_of_constant(a, u):
    vals, _ = empirical_chf(np.full(50, a), [u])
    assert abs(vals[0] - np.exp(1j * u * a)) < 1e-12


# terminal sampling ----------------------------------------------------------------

def test_calm_no_switch_matches_chf_both_laws():
    model = models.NoSwitchModel(models.regime(models.CALM))
    for law in ("quadrature", "continuous"):
        x = simulate_terminal(model, 1.0, 200_000, seed=2, law=law)
        emp, radius = empirical_chf(x, U)
        assert np.all(np.abs(emp - model.chf(U, 1.0)) <= radius), law


def test_jumps_match_chf():
    comp = point(0.2, JumpSpec(3.0, -0.1, 0.15))
    model = models.NoSwitchModel(comp)
    x = simulate_terminal(model, 1.0, 200_000, seed=4)
    emp, radius = empirical_chf(x, U)
    assert np.all(np.abs(emp - model.chf(U, 1.0)) <= radius)


def test_terminal_reproducible_and_thread_independent(monkeypatch):
    model = models.DeterministicModel(models.alternating(3), (0.3, 0.7))
    n = rng.CHUNK + 1000  # two chunks
    monkeypatch.setenv(rng.THREADS_ENV, "1")
    a = simulate_terminal(model, 1.0, n, seed=9)
    monkeypatch.setenv(rng.THREADS_ENV, "4")
    b = simulate_terminal(model, 1.0, n, seed=9)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, simulate_terminal(model, 1.0, n, seed=10))


def test_sojourns_stay_below_horizon():
    g = rng.stream(1, "test")
    soj = SojournSpec.iid(RandomiserSpec.exponential(2.0), 3)
    for law in ("continuous", "quadrature"):
        z = sample_sojourns(soj, 3, 1.0, g, 5000, law)
        assert z.shape == (5000, 3)
        assert np.all(z > 0) and np.all(z.sum(axis=1) < 1.0 + 1e-12)


def test_unknown_law():
    with pytest.raises(ValueError):
        simulate_terminal(models.NoSwitchModel(models.regime(models.CALM)), 1.0, 10, law="bogus")


# paths ------------------------------------------------------------------------------

def test_point_mass_common_noise_paths_identical():
    sched = models.DeterministicModel((point(0.2), point(0.5)), (0.5,))
    p = simulate_paths(sched, 1.0, 0.01, 5, seed=3, common_noise=True)
    assert np.all(p.values == p.values[0])
    q = simulate_paths(sched, 1.0, 0.01, 5, seed=3, common_noise=False)
    assert not np.all(q.values == q.values[0])


def test_quadratic_variation_per_regime():
    thetas = (0.2, 0.6, 0.2, 0.6)
    model = models.DeterministicModel(tuple(point(t) for t in thetas), (0.5, 1.0, 1.5))
    step = 1e-3
    p = simulate_paths(model, 2.0, step, 20, seed=1)
    dx = np.diff(p.values, axis=1)
    edges = [0.0, 0.5, 1.0, 1.5, 2.0]
    for j, theta in enumerate(thetas):
        sel = (p.times[1:] > edges[j] + 1e-12) & (p.times[1:] <= edges[j + 1] + 1e-12)
        qv = np.sum(dx[:, sel] ** 2, axis=1).mean()
        length = edges[j + 1] - edges[j]
        target = theta**2 * length
        sd = target * math.sqrt(2.0 / (sel.sum() * 20))
        assert abs(qv - target) < 3 * sd + 1e-6, (j, qv, target)


def test_path_csv_round_trip():
    p = simulate_paths(models.NoSwitchModel(models.regime(models.CALM)), 0.5, 0.1, 3, seed=0)
    back = read_paths_csv(p.to_csv())
    np.testing.assert_allclose(back.times, p.times, rtol=1e-11)
    np.testing.assert_allclose(back.values, p.values, rtol=1e-11, atol=1e-12)


def test_paths_terminal_law_stochastic():
    comps = (point(0.2), point(0.5))
    model = models.StochasticModel(comps, SojournSpec.iid(RandomiserSpec.exponential(2.0), 1))
    p = simulate_paths(model, 1.0, 0.05, 100_000, seed=5, sojourn_law="quadrature")
    emp, radius = empirical_chf(p.values[:, -1], U)
    assert np.all(np.abs(emp - model.chf(U, 1.0)) <= radius)


def test_grid_misalignment():
    with pytest.raises(SimulationError):
        time_grid(1.0, 0.3)
    with pytest.raises(SimulationError):
        time_grid(1.0, 0.1, (0.55,))
    model = models.DeterministicModel((point(0.2), point(0.5)), (0.55,))
    with pytest.raises(SimulationError):
        simulate_paths(model, 1.0, 0.1, 2)


# concatenated drivers -------------------------------------------------------------

def test_driver_checks_pass():
    sched = ScheduleDeterministic((0.5, 1.0), (point(0.2, JumpSpec(2.0)),) * 3)
    rep = driver_checks(sched, 20_000, seed=1)
    assert rep["pass"], rep["checks"]
    names = [c["name"] for c in rep["checks"]]
    assert any("chi2" in s for s in names) and any("corr" in s for s in names)


def test_driver_checks_without_jumps():
    sched = ScheduleDeterministic((0.5,), (point(0.2), point(0.3)))
    rep = driver_checks(sched, 5000, seed=2)
    assert rep["pass"]
    assert any(c["name"].startswith("zero jumps") for c in rep["checks"])


def test_threads_env(monkeypatch):
    monkeypatch.setenv(rng.THREADS_ENV, "3")
    assert rng.threads() == 3
    monkeypatch.delenv(rng.THREADS_ENV)
    assert 1 <= rng.threads() <= max(8, os.cpu_count() or 1)
