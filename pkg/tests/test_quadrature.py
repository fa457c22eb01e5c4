import math

import numpy as np
import pytest
from scipy import linalg
from scipy.special import beta, ellipk

from hamiltonia.errors import NotPositiveDefinite
from hamiltonia.quadrature import (
    LatticeState,
    Potential1D,
    action_of_energy,
    central_actions,
    central_frequencies,
    energy_of_action,
    free_rotator_flow,
    lax_eigenvalue_drift,
    melnikov_closed_form,
    melnikov_matrix,
    normal_mode_actions,
    normal_modes,
    period,
    standard_solution,
    turning_points,
)


def test_harmonic_period_and_action():
    pot = Potential1D.harmonic(2.0)
    assert period(pot, 1.0) == pytest.approx(math.pi, rel=1e-10)
    assert action_of_energy(pot, 1.0) == pytest.approx(0.5, rel=1e-10)
    assert energy_of_action(pot, 0.5) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("E", [0.1, 1.0, 7.0])
def test_quartic_period_beta_function(E):
    # V = q^4: T = 4 a / sqrt(2E) * B(1/4, 1/2) / 4 with a = E^(1/4)
    ref = E**0.25 / math.sqrt(2 * E) * beta(0.25, 0.5)
    assert period(Potential1D.quartic(), E) == pytest.approx(ref, rel=1e-9)
    assert turning_points(Potential1D.quartic(), E)[1] == pytest.approx(E**0.25, rel=1e-12)


@pytest.mark.parametrize("E", [0.2, 1.0, 1.9])
def test_pendulum_period_elliptic(E):
    ref = 4 * ellipk(E / 2)
    assert period(Potential1D.pendulum(), E) == pytest.approx(ref, rel=1e-8)


def test_standard_solution_conserves_energy():
    pot = Potential1D.quartic()
    E, h = 1.0, 1e-5
    for t in (0.0, 0.3, 1.1):
        q, qd = standard_solution(pot, E, t)
        assert qd * qd / 2 + q**4 == pytest.approx(E, abs=1e-9)
        q1 = float(standard_solution(pot, E, t + h)[0])
        q0 = float(standard_solution(pot, E, t - h)[0])
        assert (q1 - q0) / (2 * h) == pytest.approx(qd, abs=1e-6)
    assert float(standard_solution(pot, E, 0.0)[0]) == pytest.approx(-1.0)


def test_central_newton_and_harmonic():
    V, dV = (lambda r: -1 / r), (lambda r: 1 / r**2)
    w0, w1 = central_frequencies(V, dV, -0.5, 0.8)
    assert w1 / w0 == pytest.approx(1.0, abs=1e-9)
    assert w0 == pytest.approx(1.0, rel=1e-9)  # (-2E)^(3/2)
    assert central_actions(V, dV, -0.5, 0.8)[0] == pytest.approx(1.0 - 0.8, abs=1e-9)
    w0, w1 = central_frequencies(lambda r: 0.5 * r * r, lambda r: r, 2.0, 0.8)
    assert w0 / w1 == pytest.approx(2.0, abs=1e-9)


def test_normal_modes_generalized_eigh():
    m = [1.0, 2.0, 0.5]
    c = np.array([[2.0, -1, 0], [-1, 2, -1], [0, -1, 2]])
    w, V = normal_modes(m, c)
    ref = np.sqrt(linalg.eigh(c, np.diag(m), eigvals_only=True))
    np.testing.assert_allclose(w, ref, rtol=1e-12)
    np.testing.assert_allclose(V.T @ V, np.eye(3), atol=1e-12)
    with pytest.raises(NotPositiveDefinite):
        normal_modes([1, 1], np.array([[1.0, 1], [1, 1]]))


def test_normal_mode_actions_energy():
    m = [1.0, 2.0]
    c = np.array([[2.0, -1], [-1, 2]])
    p, q = np.array([0.3, -0.2]), np.array([0.1, 0.4])
    A, _ = normal_mode_actions(m, c, p, q)
    w, _ = normal_modes(m, c)
    E = 0.5 * np.sum(p**2 / np.asarray(m)) + 0.5 * q @ c @ q
    assert float(w @ A) == pytest.approx(E, rel=1e-12)


def test_free_rotator():
    np.testing.assert_allclose(free_rotator_flow([1, 2], [0.5, 0.3], [0.1, 0.2], 1.0), [0.6, 0.35])


@pytest.mark.parametrize("state", [
    LatticeState("toda", [0.3, -0.1, 0.2], [0.0, 1.0, 2.5]),
    LatticeState("calogero", [0.3, -0.1, 0.2], [0.0, 1.5, 3.0]),
    LatticeState("sutherland", [0.3, -0.1, 0.2], [0.0, 1.5, 3.0]),
])
def test_lax_isospectral(state):
    r = lax_eigenvalue_drift(state, 10.0)
    assert r["drift"] <= 1e-7
    assert r["energy_drift"] <= 1e-8
    assert r["entry_variation"] >= 1e-2


def test_melnikov_determinant():
    def f(A, a, p, q):
        return (math.cos(a[0]) + math.sin(a[1])) * (math.cos(q) - 1.0)

    for a in ([0.3, 1.1], [1.0, -0.4]):
        _, d = melnikov_matrix(f, [1.0, 1.0], a, omega=(0.0, 0.0))
        assert d == pytest.approx(16 * abs(math.cos(a[0]) * math.sin(a[1])), abs=1e-6)
    D, _ = melnikov_matrix(f, [0.7, 1.0], [0.3, 1.1])
    np.testing.assert_allclose(D, melnikov_closed_form([0.3, 1.1], omega=(0.7, 1.0)), atol=1e-6)


def test_leapfrog_long_time_energy():
    from hamiltonia.quadrature import leapfrog

    P, Q = leapfrog(lambda q: np.sin(q), [0.0], [1.0], 0.05, 20000)
    E = 0.5 * P[:, 0] ** 2 + 1 - np.cos(Q[:, 0])
    assert np.ptp(E) <= 1e-3  # bounded, no secular drift
    # second order: halving dt quarters the energy oscillation
    P2, Q2 = leapfrog(lambda q: np.sin(q), [0.0], [1.0], 0.025, 40000)
    E2 = 0.5 * P2[:, 0] ** 2 + 1 - np.cos(Q2[:, 0])
    assert np.ptp(E) / np.ptp(E2) == pytest.approx(4.0, rel=0.05)
