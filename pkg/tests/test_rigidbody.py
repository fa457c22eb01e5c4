import math

import numpy as np
import pytest

from hamiltonia.quadrature import integrate_ode
from hamiltonia.rigidbody import (
    deprit_from_euler,
    deprit_hamiltonian,
    euler_from_deprit,
    euler_poisson_rhs,
    euler_rhs,
    gyroscope_gradient,
    gyroscope_hamiltonian,
    integrate_free_body,
    integrate_gyroscope,
    kinetic_energy,
    omega_from_deprit,
    rigid_body_periods,
    rot_x,
    rot_z,
    verify_deprit_canonicity,
    zxz_angles,
    zxz_matrix,
)

I = (1.0, 2.0, 3.0)


def test_euler_rhs_cross_product():
    w = np.array([0.3, -0.5, 0.8])
    M = np.asarray(I) * w
    np.testing.assert_allclose(euler_rhs(I, w) * np.asarray(I), np.cross(M, w), atol=1e-15)


@pytest.mark.parametrize("w0", [[1, 0.01, 0.01], [0.01, 1, 0.01], [0.3, -0.5, 0.8]])
def test_free_body_invariants(w0):
    r = integrate_free_body(I, w0, 100.0, samples=101)
    assert max(r.K_drift, r.G2_drift) <= 1e-10


def test_zxz_roundtrip():
    for ang in [(0.3, 1.1, -2.0), (2.5, 0.4, 0.9)]:
        np.testing.assert_allclose(zxz_angles(zxz_matrix(*ang)), ang, atol=1e-12)


def test_deprit_roundtrip_and_canonicity():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = np.concatenate([rng.normal(size=3), [rng.uniform(0.3, 2.8)], rng.uniform(-3, 3, size=2)])
        assert verify_deprit_canonicity(x) <= 1e-6
        np.testing.assert_allclose(euler_from_deprit(deprit_from_euler(x)), x, atol=1e-10)


def test_deprit_energy_matches_body_frame():
    x = np.array([0.4, -0.3, 0.9, 1.1, 0.5, -0.7])
    M3, L, G, ga, psi, phi = deprit_from_euler(x)
    w = omega_from_deprit(I, L, G, psi)
    assert deprit_hamiltonian(I, L, G, psi) == pytest.approx(kinetic_energy(I, w), abs=1e-14)


def test_periods_return_map():
    w0 = np.array([0.3, -0.5, 0.8])
    E = kinetic_energy(I, w0)
    Mb = np.asarray(I) * w0
    G = float(np.linalg.norm(Mb))
    P = rigid_body_periods(I, E, G, math.atan2(Mb[0], Mb[1]))
    r = integrate_free_body(I, w0, P["T_L"], samples=2)
    np.testing.assert_allclose(np.asarray(I) * r.omega[-1], Mb, atol=1e-8)


def test_gyroscope_gradient_and_euler_poisson():
    Ie, I3, m, g, h = 1.0, 2.0, 1.0, 1.0, 0.7
    y0 = np.array([0.5, 0.8, 1.3, 0.2, 0.4, 1.1])

    def H(y):
        return gyroscope_hamiltonian(Ie, I3, m, g, h, y[0], y[1], y[2], y[5])

    fd = [(H(y0 + 1e-6 * e) - H(y0 - 1e-6 * e)) / 2e-6 for e in np.eye(6)]
    np.testing.assert_allclose(gyroscope_gradient(Ie, I3, m, g, h, y0), fd, atol=1e-8)

    sol = integrate_gyroscope(Ie, I3, m, g, h, y0, 20.0)
    Hs = [H(sol.y[:, k]) for k in range(sol.y.shape[1])]
    assert max(abs(v - Hs[0]) for v in Hs) <= 1e-9

    # independent body-frame Euler-Poisson integration
    M3, L, G, ga, psi, phi = y0
    zeta, theta = math.acos(M3 / G), math.acos(L / G)
    Rm = rot_z(ga) @ rot_x(zeta)
    R0 = Rm @ zxz_matrix(phi, theta, psi)
    Mb = R0.T @ (G * Rm[:, 2])
    Gam = R0.T @ np.array([0, 0, 1.0])
    ep = integrate_ode(euler_poisson_rhs([Ie, Ie, I3], m * g * h), (0, 20), np.concatenate([Mb, Gam]),
                       t_eval=sol.t, rtol=1e-13, atol=1e-13)
    c, a = sol.y[0] / sol.y[2], sol.y[1] / sol.y[2]
    cos_theta0 = c * a - np.sqrt(1 - c**2) * np.sqrt(1 - a**2) * np.cos(sol.y[5])
    assert np.max(np.abs(cos_theta0 - ep.y[5])) <= 1e-8
    assert np.ptp(cos_theta0) > 1e-2
