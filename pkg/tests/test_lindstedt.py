import numpy as np
import pytest

from hamiltonia.core import GOLDEN, FourierSeries, FrequencyVector, golden_frequency
from hamiltonia.errors import (
    DegenerateHessian,
    NotClosed,
    PreconditionViolated,
    ResonantDenominator,
    ResummationDiverges,
    StationarityViolated,
)
from hamiltonia.lindstedt import (
    TorusSeries,
    birkhoff_conjugacy_error,
    birkhoff_series,
    build_torus,
    cluster_matrix,
    default_perturbation,
    geometric_propagator,
    lindstedt_coefficient,
    poincare_obstruction_scan,
    resonant_lindstedt,
    resonant_residual,
    restricted_tree_ratios,
    resummed_propagator,
    siegel_constant,
    smallest_divisors,
    torus_generating_function,
    torus_residual,
    verify_torus_flow,
)

W = golden_frequency()
F = default_perturbation()


@pytest.fixture(scope="module")
def torus8():
    return build_torus(F, W, 8)


def test_first_order_closed_form():
    # h1 solves (w.d)^2 h = -d f; for f = cos(a1 + a2) each component is (i/2) / (w.nu)^2
    h1 = lindstedt_coefficient(FourierSeries.cosine((1, 1)), W, 1)
    np.testing.assert_allclose(np.asarray(h1[(1, 1)]), [0.5j / (1 + GOLDEN) ** 2] * 2, rtol=1e-14)
    # pointwise: (w.d)^2 h1 = sin(a1 + a2) = -grad f
    x = np.array([0.3, 1.7])
    h = 2 * np.real(np.asarray(h1[(1, 1)]) * np.exp(1j * x.sum()))
    np.testing.assert_allclose(-(1 + GOLDEN) ** 2 * h, np.sin(x.sum()) * np.ones(2), atol=1e-14)


@pytest.mark.parametrize("k", range(1, 6))
def test_trees_match_recursion(k):
    a = lindstedt_coefficient(F, W, k)
    b = lindstedt_coefficient(F, W, k, "trees")
    scale = max(np.max(np.abs(v)) for _, v in a.items())
    assert a.max_abs_diff(b) <= 1e-12 * scale


def test_torus_residual_and_order(torus8):
    assert torus_residual(torus8, 1e-3) <= 1e-15
    r1 = torus_residual(torus8, 1e-3, dps=50)
    r2 = torus_residual(torus8, 2e-3, dps=50)
    assert 0.75 <= r2 / r1 / 2**9 <= 1.25


def test_torus_json_roundtrip(torus8):
    T2 = TorusSeries.from_json(torus8.to_json())
    assert torus_residual(T2, 1e-3) == pytest.approx(torus_residual(torus8, 1e-3), abs=1e-18)


def test_torus_flow(torus8):
    assert verify_torus_flow(torus8, 1e-3, (0.3, 0.5), 10.0)["max_deviation"] <= 1e-8


def test_birkhoff_conventions_and_conjugacy():
    B = birkhoff_series(F, (1.0, GOLDEN), 6)
    mm = B.convention_mismatch()
    assert mm["derived_vs_taylor"] <= 1e-12
    assert mm["printed_shifted"] <= 1e-12
    assert mm["printed_raw"] > 1e-3
    # first order closed form
    assert complex(B.phi(0.05)[(1, 1)]) == pytest.approx(-0.05 * 0.5 / (1j * (1 + GOLDEN + 0.05)))
    assert birkhoff_conjugacy_error(F, (1.0, GOLDEN), 0.05) <= 1e-8
    assert birkhoff_conjugacy_error(F, (1.0, GOLDEN), 0.05, sign=-1) > 1e-3
    with pytest.raises(ResonantDenominator):
        birkhoff_conjugacy_error(FourierSeries.cosine((1, -1)), (1.0, GOLDEN), 1.0 - GOLDEN)


def test_obstruction_scan():
    box = [(0.5, 1.5), (0.5, 1.5)]
    hits = poincare_obstruction_scan(FourierSeries.cosine((1, -1)), lambda A: np.asarray(A, float), box, 2)
    assert len(hits) == 1
    pts = np.asarray(hits[0]["points"])
    assert np.max(np.abs(pts[:, 0] - pts[:, 1])) <= 1e-12
    assert poincare_obstruction_scan(FourierSeries({}, 2), lambda A: np.asarray(A, float), box, 2) == []
    with pytest.raises(PreconditionViolated):
        poincare_obstruction_scan(FourierSeries.cosine((1, -1)),
                                  lambda A: np.array([A[0] + A[1], A[0] + A[1]]), box, 2)


def test_resonant_series():
    fr = FourierSeries.cosine((0, 1)) + FourierSeries.cosine((1, 1))
    R = resonant_lindstedt(fr, FrequencyVector((1.0,)), [np.pi])
    assert max(resonant_residual(R, fr).values()) <= 1e-12
    with pytest.raises(StationarityViolated):
        resonant_lindstedt(fr, FrequencyVector((1.0,)), [0.3])
    with pytest.raises(DegenerateHessian):
        resonant_lindstedt(FourierSeries.cosine((1, 0)), FrequencyVector((1.0,)), [0.3])


def test_resonant_shift_is_detected():
    fr = (FourierSeries.cosine((0, 1)) + FourierSeries.cosine((1, 1))
          + FourierSeries({(2, 1): 0.15j, (-2, -1): -0.15j}, 2, real=True)
          + FourierSeries.cosine((2, -1), 0.4))
    R = resonant_lindstedt(fr, FrequencyVector((1.0,)), [np.pi], order=2)
    assert max(resonant_residual(R, fr).values()) <= 1e-12
    R.raw[2][(0,)] = R.raw[2][(0,)] + np.array([0, 1e-6])
    assert max(resonant_residual(R, fr).values()) > 1e-9


def test_cluster_matrix_two_node_oracle():
    f = FourierSeries.cosine((1, 1)) + FourierSeries.cosine((1, -1))
    nu = (1, 0)
    C = cluster_matrix(f, W, nu, 4)
    assert np.max(np.abs(C.coeffs[1])) <= 1e-14
    w = W.as_array()
    M2 = np.zeros((2, 2))
    for mu, fm in f.items():
        m = np.array(mu, float)
        fmm = complex(fm) * complex(f[tuple(-x for x in mu)])
        d1, d2 = w @ (np.array(nu) - m), w @ m
        if W.C * abs(d1) > 1:
            M2 += (fmm * np.outer(m, m) * (m @ m) / d1**2).real
        if W.C * abs(d2) > 1:
            M2 -= (fmm * np.outer(m, m) * (m @ m) / d2**2).real
    np.testing.assert_allclose(C.coeffs[2], M2, atol=1e-14)


def test_cluster_ratio_bounded():
    eps = 1e-2
    ratios = []
    for nu in smallest_divisors(W, 20, 30):
        M = cluster_matrix(F, W, nu, 2).value(eps)
        assert np.max(np.abs(M - M.T)) <= 1e-12 * max(1.0, np.max(np.abs(M)))
        ratios.append(np.linalg.norm(M, 2) / (eps**2 * W.dot(nu) ** 2))
    assert max(ratios) / min(ratios) <= 10


def test_propagators():
    M = cluster_matrix(F, W, (1, 0), 4).value(1e-3)
    R = resummed_propagator((1, 0), M, W)
    S = geometric_propagator((1, 0), M, W, 10)
    assert np.max(np.abs(R - S)) <= 1e-15
    with pytest.raises(ResummationDiverges):
        resummed_propagator((1, 0), 10 * np.eye(2), W)


def test_generating_function(torus8):
    g = torus_generating_function(torus8, 1e-3)
    assert g["exactness"] <= 1e-8
    assert g["torus_error"] <= 1e-10
    np.testing.assert_allclose(g["a"], g["a_alt"], atol=1e-8)


def test_generating_function_not_closed():
    T = build_torus(F, W, 4)
    o = [dict(x) for x in T.orders]
    o[0][(0, 1)] = (0.3j, 0.0)
    o[0][(0, -1)] = (-0.3j, 0.0)
    with pytest.raises(NotClosed):
        torus_generating_function(TorusSeries(W, 4, o, F), 1e-2)


def test_siegel_ratios():
    B = siegel_constant(F, W, 2)
    assert B > 0
    r = restricted_tree_ratios(F, W, 4, 2)
    assert max(r.values()) <= 1.0
