import numpy as np
import pytest
from scipy import integrate

from sharplimit.errors import InvalidArgumentError
from sharplimit.profile import (Mollifier, cutoff, mollifier_eval, potential_derivative, surface_tension,
                                surface_tension_whole_line, theta)

CLOSED_FORM_S = 4.0 * np.sqrt(2.0) / 3.0


@pytest.mark.parametrize("u, order, expected", [(0.0, 0, 1.0), (1.0, 1, 0.0), (1.0, 2, 8.0), (0.5, 3, 12.0)])
def test_potential_examples(u, order, expected):
    assert potential_derivative(u, order) == expected


def test_potential_wells():
    u = np.linspace(-3, 3, 601)
    assert np.all(potential_derivative(u) >= 0)
    assert potential_derivative(1.0) == potential_derivative(-1.0) == 0.0
    assert potential_derivative(-1.0, 2) == 8.0 and potential_derivative(0.0, 2) == -4.0


def test_potential_bad_order():
    with pytest.raises(InvalidArgumentError):
        potential_derivative(0.0, 4)


def test_potential_derivatives_match_finite_differences():
    u = np.linspace(-1.5, 1.5, 31)
    h = 1e-5
    for k in range(3):
        fd = (potential_derivative(u + h, k) - potential_derivative(u - h, k)) / (2 * h)
        assert np.allclose(fd, potential_derivative(u, k + 1), atol=1e-6)


def test_theta_examples():
    assert theta(0.0) == 0.0
    assert theta(1.0) == pytest.approx(np.tanh(np.sqrt(2.0)), abs=1e-15)
    assert theta(1.0) == pytest.approx(0.888386, abs=1e-6)
    assert theta(0.0, 1) == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_theta_profile_equations():
    z = np.linspace(-20, 20, 10_000)
    th = theta(z)
    assert np.abs(theta(z, 2) - potential_derivative(th, 1)).max() < 1e-12
    assert np.abs(theta(z, 1) - np.sqrt(2.0 * potential_derivative(th))).max() < 1e-12
    assert np.all(np.diff(th) >= 0) and np.all(np.abs(th) <= 1)
    core = np.abs(z) < 8     # further out consecutive tanh values round to the same double
    assert np.all(np.diff(th[core]) > 0) and np.all(np.abs(th[core]) < 1)


def test_theta_tail_decay_rate():
    z = np.linspace(2, 12, 200)
    slope = np.polyfit(z, np.log(1.0 - theta(z)), 1)[0]
    assert abs(-slope / (2 * np.sqrt(2.0)) - 1) < 0.05


def test_theta_tails_bounded_by_sqrt2_exponential():
    z = np.linspace(2, 30, 500)
    assert np.all((1.0 - theta(z)) <= 2.0 * np.exp(-np.sqrt(2.0) * z))


def test_surface_tension():
    S = surface_tension()
    assert abs(S - CLOSED_FORM_S) < 1e-8
    assert S == pytest.approx(1.8856181, abs=1e-7)
    assert abs(surface_tension_whole_line() - S) < 1e-10
    twice_f, _ = integrate.quad(lambda z: 2 * potential_derivative(theta(z)), -40, 40, epsabs=1e-13, limit=200)
    assert abs(twice_f - S) < 1e-10


@pytest.mark.parametrize("variant", ["bump", "poly7"])
def test_mollifier_plateaus_and_mass(variant):
    m = Mollifier(variant=variant)
    z = np.linspace(-3, 3, 6001)
    eta = m(z)
    assert np.all(eta[z <= -1] == 0) and np.all(eta[z >= 1] == 1)
    assert np.all(np.diff(eta) >= -1e-15)
    out = np.abs(z) > 1
    assert np.all(m(z, 1)[out] == 0) and np.all(m(z, 2)[out] == 0)
    assert integrate.trapezoid(m(z, 1), z) == pytest.approx(1.0, abs=1e-8)


def test_mollifier_derivatives_consistent():
    m = Mollifier()
    z = np.linspace(-0.99, 0.99, 199)
    h = 1e-6
    assert np.allclose((m(z + h) - m(z - h)) / (2 * h), m(z, 1), atol=1e-6)
    assert np.allclose((m(z + h, 1) - m(z - h, 1)) / (2 * h), m(z, 2), atol=1e-4)


def test_mollifier_examples():
    assert mollifier_eval(-1.5) == 0.0
    assert mollifier_eval(2.0) == 1.0
    assert mollifier_eval(0.0, "plus", shift=3.0) == 0.0
    assert mollifier_eval(4.5, "plus", shift=3.0) == 1.0
    assert mollifier_eval(-4.5, "minus", shift=3.0) == 1.0


def test_mollifier_rejects_small_shift():
    with pytest.raises(InvalidArgumentError):
        Mollifier(shift=1.0)


def test_cutoff_plateaus():
    s = np.linspace(-2, 2, 4001)
    z = cutoff(s)
    assert np.all(z[np.abs(s) <= 0.5] == 1) and np.all(z[np.abs(s) >= 1] == 0)
    assert np.all((z >= 0) & (z <= 1))
