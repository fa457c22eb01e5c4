import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import jv

from hamiltonia.kepler import (
    anomalies,
    crude_radius_bounds,
    fg_leading_coefficients,
    kepler_series_recursion,
    kepler_series_trees,
    lagrange_series,
    laplace_radius,
    levi_civita_eval,
    r3bp_hamiltonian_delaunay,
    regularized_r3bp_hamiltonian,
    resummed_series_eval,
    series_eval,
    solve_kepler,
    zero_current_sum,
)
from hamiltonia.kepler import regular_to_delaunay


def bessel_h(e, lam, nmax=60):
    """Classical Bessel expansion of xi - lam."""
    n = np.arange(1, nmax + 1)
    return float(np.sum(2.0 / n * jv(n, n * e) * np.sin(n * lam)))


@pytest.mark.parametrize("e", [0.0, 0.1, 0.5, 0.9, 0.99])
def test_solver_matches_brentq(e):
    for lam in np.linspace(-3, 3, 13):
        ref = brentq(lambda x: x - e * math.sin(x) - lam, lam - 1.1, lam + 1.1, xtol=1e-15)
        assert solve_kepler(e, lam) == pytest.approx(ref, abs=1e-13)


@pytest.mark.parametrize("k", range(1, 9))
def test_recursion_trees_lagrange_agree(k):
    s = kepler_series_recursion(k)
    assert s.exact_equal(kepler_series_trees(k))
    assert s.exact_equal(lagrange_series(k))


def test_zero_current_sum_vanishes():
    for k in range(2, 6):
        assert all(v == 0 for v in zero_current_sum(k).values())


def test_series_matches_bessel_expansion():
    # truncation tail scales like (e / 0.6627)^16
    for e, lam in [(0.1, 0.4), (0.3, 2.0), (0.4, -1.2)]:
        tol = 10 * (e / 0.6627) ** 16
        assert series_eval(e, lam, 15) == pytest.approx(bessel_h(e, lam), abs=tol)
    assert series_eval(0.1, 0.4, 15) == pytest.approx(bessel_h(0.1, 0.4), abs=1e-14)
    assert levi_civita_eval(0.1, 0.4, 15) == pytest.approx(bessel_h(0.1, 0.4), abs=1e-12)


def test_resummed_matches_solver():
    plain, resummed = None, None
    resummed, plain = resummed_series_eval(0.3, 1.0, 12, both=True)
    ex = solve_kepler(0.3, 1.0) - 1.0
    assert resummed == pytest.approx(ex, abs=1e-6)
    assert plain == pytest.approx(ex, abs=1e-6)


def test_laplace_radius_oracle():
    # Laplace limit: e exp(sqrt(1+e^2)) / (1 + sqrt(1+e^2)) = 1
    ref = brentq(lambda e: e * math.exp(math.sqrt(1 + e * e)) / (1 + math.sqrt(1 + e * e)) - 1, 0.1, 1.0)
    assert laplace_radius() == pytest.approx(ref, abs=1e-10)
    lo, hi = crude_radius_bounds()
    assert lo <= ref and hi <= ref


def test_anomaly_identities_and_half_angle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        e, lam = rng.uniform(0, 0.99), rng.uniform(-np.pi, np.pi)
        tr = anomalies(e, lam)
        assert max(tr.residuals().values()) <= 1e-12
        ref = 2 * math.atan(math.sqrt((1 + e) / (1 - e)) * math.tan(tr.xi / 2))
        assert math.remainder(tr.theta - ref, 2 * math.pi) == pytest.approx(0, abs=1e-10)


def test_fg_coefficients():
    gx, gxy, fx, fxy = fg_leading_coefficients()
    assert (gx, fx) == (pytest.approx(1, abs=1e-3), pytest.approx(2, abs=1e-3))
    assert (gxy, fxy) == (pytest.approx(1, abs=1e-2), pytest.approx(2.5, abs=1e-2))


def test_regularized_composition():
    rng = np.random.default_rng(4)
    for _ in range(10):
        L, lam = rng.uniform(0.8, 1.5), rng.uniform(-3, 3)
        p, q = rng.uniform(-0.3, 0.3, size=2)
        h = regularized_r3bp_hamiltonian(L, lam, p, q, 0.05)
        ref = r3bp_hamiltonian_delaunay(*regular_to_delaunay(L, lam, p, q), 0.05)
        assert h == pytest.approx(ref, abs=1e-10)


@pytest.mark.xfail(strict=True, reason="empirical geometric tail bound is exceeded near e = 0.6")
def test_heuristic_tail_bound():
    rng = np.random.default_rng(0)
    K = 15
    for _ in range(1000):
        e, lam = rng.uniform(0, 0.6), rng.uniform(-np.pi, np.pi)
        xi = lam + series_eval(e, lam, K)
        res = abs(xi - e * math.sin(xi) - lam)
        assert res <= 2 * e ** (K + 1) / (1 - e)
