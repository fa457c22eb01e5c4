import json

import numpy as np
import pytest

from hamiltonia.canonical import (
    ObservableFn,
    identity_map,
    jacobi_residual,
    map_from_generating_function,
    point_transformation,
    poisson_bracket,
    polar_map,
    scaling_map,
    symplectic_matrix,
    symplectic_residual,
    verification_report,
)
from hamiltonia.errors import ImplicitSolveFailed, JacobianSingular
from hamiltonia.canonical import PhaseMap

rng = np.random.default_rng(0)
PTS = [rng.normal(size=4) for _ in range(10)]


def R(q):
    return q + 0.1 * np.sin(q)


def dR(q):
    return np.diag(1 + 0.1 * np.cos(q))


def test_symplectic_matrix():
    E = symplectic_matrix(2)
    np.testing.assert_array_equal(E @ E, -np.eye(4))


@pytest.mark.parametrize("m", [identity_map(2), polar_map(), point_transformation(R, dR, 2)])
def test_canonical_maps_accepted(m):
    assert max(symplectic_residual(m, x) for x in PTS) <= 1e-6


def test_scaling_rejected():
    assert symplectic_residual(scaling_map(2), PTS[0]) > 1.0


def test_polar_roundtrip_and_bracket():
    x = np.array([0.3, -0.7, 1.2, 0.5])
    assert polar_map().roundtrip_error(x) <= 1e-14
    # angular momentum q1 p2 - q2 p1
    res, L = symplectic_residual(polar_map(), x, return_jacobian=True)
    assert L[1] == pytest.approx([-x[3], x[2], x[1], -x[0]], abs=1e-8)


def test_singular_jacobian():
    m = PhaseMap(1, lambda x: np.array([x[0], 0.0]))
    with pytest.raises(JacobianSingular):
        symplectic_residual(m, [0.1, 0.2])


def test_generating_function_reproduces_point_transformation():
    m = map_from_generating_function(lambda pn, q: pn @ R(q), 2, "phi")
    for x in PTS[:4]:
        np.testing.assert_allclose(m(x), point_transformation(R, dR, 2)(x), atol=1e-9)


@pytest.mark.parametrize("family,gen", [
    ("gamma", lambda q, qn: q @ qn + 0.1 * np.sum(np.cos(q + qn))),
    ("f", lambda p, qn: -p @ qn - 0.1 * np.sum(np.sin(p) * qn**2)),
    ("g", lambda p, pn: -p @ pn + 0.05 * np.sum(p**2 * pn)),
])
def test_generating_families_canonical(family, gen):
    m = map_from_generating_function(gen, 2, family)
    assert max(symplectic_residual(m, 0.5 * x) for x in PTS) <= 1e-6


def test_generating_function_box():
    m = map_from_generating_function(lambda pn, q: pn @ R(q), 2, "phi", box=(10.0, 11.0))
    with pytest.raises(ImplicitSolveFailed):
        m(PTS[0])


def test_brackets():
    p = ObservableFn(1, lambda z: z[0])
    q = ObservableFn(1, lambda z: z[1])
    assert poisson_bracket(p, q, [1.0, 2.0]) == pytest.approx(1.0)
    F = ObservableFn(1, lambda z: z[0] ** 2 * z[1])
    G = ObservableFn(1, lambda z: z[0] * z[1] ** 2)
    Q = ObservableFn(1, lambda z: np.sin(z[0]) + z[1])
    # {p^2 q, p q^2} = 2pq * 2pq - p^2 * q^2 = 3 p^2 q^2
    assert poisson_bracket(F, G, [1.0, 2.0]) == pytest.approx(12.0, rel=1e-10)
    assert jacobi_residual(F, G, Q, [1.0, 2.0]) <= 1e-8


def test_report_json():
    rows = json.loads(verification_report(identity_map(2), PTS[:2]))
    assert all(r["pass"] for r in rows)
