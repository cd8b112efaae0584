import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adhesion import FourierSeries, HopfLaxPotential, ViscousSolution
from adhesion.viscous import (second_derivative_bound_check, second_difference_sample, spacetime_hessian_bound,
                              viscous_trajectory)

from oracles import fd_psi, spectral_eval

COS = FourierSeries.cosine()
MIXED = FourierSeries.from_terms([{"k": [1], "cos": 1.0}, {"k": [2], "sin": 0.4}], [2 * math.pi])


@pytest.fixture(scope="module")
def fd_reference():
    N = 512
    x = np.arange(N) * (2 * math.pi / N)
    return {nu: (x, fd_psi(MIXED(x), nu, 0.5)) for nu in (0.2, 0.1)}


@pytest.mark.parametrize("nu", [0.2, 0.1])
def test_psi_matches_finite_difference_solver(fd_reference, nu):
    x, ref = fd_reference[nu]
    S = ViscousSolution(MIXED, nu)
    np.testing.assert_allclose(S.psi(x, np.full(x.size, 0.5)), ref, atol=1e-6)


@pytest.mark.parametrize("nu", [0.2, 0.1])
def test_velocity_matches_spectral_derivative(fd_reference, nu):
    x, ref = fd_reference[nu]
    S = ViscousSolution(MIXED, nu)
    xs = np.array([0.1, 1.7, 3.3, 5.9])
    h = 1e-5
    fd = (spectral_eval(ref, xs + h) - spectral_eval(ref, xs - h)) / (2 * h)
    np.testing.assert_allclose(S.velocity(xs, np.full(4, 0.5)), fd, atol=1e-5)


@given(st.floats(0, 2 * math.pi))
def test_initial_data_reproduced(x):
    S = ViscousSolution(MIXED, 0.05)
    assert S.psi(x, 0.0) == pytest.approx(MIXED(x), abs=1e-12)
    assert S.psi(x, 1e-6) == pytest.approx(MIXED(x), abs=1e-4)


@given(st.floats(0, 2 * math.pi), st.floats(0.2, 2.0))
def test_periodic_in_space(x, t):
    S = ViscousSolution(COS, 0.05)
    assert S.psi(x, t) == pytest.approx(S.psi(x + 2 * math.pi, t), abs=1e-9)


@pytest.mark.parametrize("t", [0.5, 2.0])
def test_psi_approaches_limit_as_nu_decreases(t):
    x = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    phi = HopfLaxPotential(COS).value_many(x, np.full(64, t))
    diffs = []
    for nu in (0.2, 0.05, 0.0125):
        d = ViscousSolution(COS, nu).psi(x, np.full(64, t)) - phi
        diffs.append(np.max(np.abs(d - d.mean())))
    assert diffs[0] > diffs[1] > diffs[2]


def test_symmetric_particle_stays_on_symmetry_axis():
    tr = viscous_trajectory(ViscousSolution(COS, 0.05), [0.0, math.pi], 2.0, 1e-2)
    np.testing.assert_allclose(tr.points[-1], [0.0, math.pi], atol=1e-9)


def test_spacetime_bound_exceeds_nominal():
    b0 = spacetime_hessian_bound(COS, 0.0)
    assert b0 == pytest.approx(1.0887, abs=1e-3)
    assert spacetime_hessian_bound(COS, 0.1) > 1.0


def test_second_differences_of_quadratic_are_exact():
    f = lambda x, t: 0.5 * x * x + 0.25 * t * t
    q, _, _ = second_difference_sample(f, 1.0, 1.0, 10, 4, 1e-2, seed=1)
    th = np.arange(4) * np.pi / 4
    np.testing.assert_allclose(q, np.broadcast_to(np.cos(th) ** 2 + 0.5 * np.sin(th) ** 2, q.shape), atol=1e-9)


def test_bound_check_report():
    rep = second_derivative_bound_check(ViscousSolution(COS, 0.1), 2.0, n_samples=200, seed=3)
    assert rep.nominal_bound == pytest.approx(1.0)
    assert rep.within_spacetime
    assert rep.samples == 200 * 8


@pytest.mark.parametrize("kw", [{"nu": 0.0}, {"nu": 0.1, "quadrature_points": 100}])
def test_validation(kw):
    with pytest.raises(ValueError):
        ViscousSolution(COS, **kw)
