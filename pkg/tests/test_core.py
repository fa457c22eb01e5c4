import json
import math
from fractions import Fraction

import numpy as np
import pytest

from hamiltonia.core import (
    GOLDEN,
    FourierSeries,
    FrequencyVector,
    GaussianRational,
    ScalarTower,
    fourier_eval,
    golden_frequency,
    harmonic_norm,
    small_divisor,
)
from hamiltonia.errors import DiophantineViolation, TruncationExceeded


def test_gaussian_rational_matches_complex():
    a = GaussianRational(Fraction(1, 3), Fraction(-2, 7))
    b = GaussianRational(Fraction(5, 2), 1)
    za, zb = complex(a), complex(b)
    assert complex(a * b) == pytest.approx(za * zb, rel=1e-15)
    assert complex(a / b) == pytest.approx(za / zb, rel=1e-15)
    assert complex(a - b) == pytest.approx(za - zb)
    assert complex(a**3) == pytest.approx(za**3, rel=1e-15)
    assert (a * a.conjugate()).im == 0
    assert GaussianRational.i() ** 2 == GaussianRational(-1)


def test_scalar_tower_close():
    x = ScalarTower.exact(GaussianRational(1, 2))
    y = ScalarTower.float64(1 + 2j + 1e-13)
    assert x.close(y)
    assert not x.close(ScalarTower.float64(1 + 2.1j))


def test_harmonic_norm():
    assert harmonic_norm((3, -4, 0)) == 7


def _random_series(rng, dim, deg):
    c = {}
    for _ in range(6):
        nu = tuple(int(v) for v in rng.integers(-deg // dim, deg // dim + 1, size=dim))
        c[nu] = complex(rng.normal(), rng.normal())
    return FourierSeries(c, dim)


def test_product_matches_pointwise_evaluation():
    rng = np.random.default_rng(1)
    a, b = _random_series(rng, 2, 4), _random_series(rng, 2, 4)
    pts = rng.uniform(0, 2 * np.pi, size=(7, 2))
    ab = a.multiply(b)
    for x in pts:
        assert fourier_eval(ab, x) == pytest.approx(fourier_eval(a, x) * fourier_eval(b, x), rel=1e-12)


def test_derivative_matches_finite_difference():
    rng = np.random.default_rng(2)
    a = _random_series(rng, 2, 4)
    u = (0.3, -1.1)
    d = a.derivative(u)
    x, h = np.array([0.4, 1.3]), 1e-5
    fd = (fourier_eval(a, x + h * np.array(u)) - fourier_eval(a, x - h * np.array(u))) / (2 * h)
    assert fourier_eval(d, x) == pytest.approx(fd, rel=1e-8)


def test_cosine_is_real_and_evaluates():
    c = FourierSeries.cosine((1, 2), 3.0)
    assert c.is_conjugate_symmetric()
    assert fourier_eval(c, [0.2, 0.5]) == pytest.approx(3 * math.cos(1.2))


def test_real_flag_checked():
    with pytest.raises(ValueError):
        FourierSeries({(1,): 1.0}, 1, real=True)


def test_truncation():
    with pytest.raises(TruncationExceeded):
        FourierSeries({(3,): 1.0}, 1, degree=2)
    a = FourierSeries({(2,): 1.0}, 1)
    with pytest.raises(TruncationExceeded):
        a.multiply(a, limit=3)


def test_json_roundtrip():
    rng = np.random.default_rng(3)
    a = _random_series(rng, 2, 4)
    b = FourierSeries.from_json(a.to_json())
    assert a.max_abs_diff(b) == 0.0
    json.loads(a.to_json())


def test_gradient_is_vector():
    g = FourierSeries.cosine((1, 2)).gradient()
    assert g.is_vector
    x = np.array([0.3, 0.9])
    np.testing.assert_allclose(np.real(fourier_eval(g, x)), -np.sin(x @ [1, 2]) * np.array([1, 2]), atol=1e-14)


def test_small_divisor_and_diophantine():
    w = golden_frequency()
    assert small_divisor(w, (1, 1)) == pytest.approx(1 + GOLDEN)
    with pytest.raises(ValueError):
        small_divisor(w, (0, 0))
    bad = FrequencyVector((1.0, 1.0), C=1.0, tau=1.0)
    with pytest.raises(DiophantineViolation):
        small_divisor(bad, (1, -1))
    # the golden frequency satisfies the bound for every harmonic up to norm 60
    for a in range(-60, 61):
        for b in range(-60, 61):
            if (a, b) != (0, 0) and abs(a) + abs(b) <= 60:
                small_divisor(w, (a, b))


def test_dyadic_scale():
    w = golden_frequency()
    for nu in [(1, 0), (2, -1), (-8, 5), (13, -21)]:
        n = w.scale(nu)
        x = w.C * abs(w.dot(nu))
        if n == 0:
            assert x > 1
        else:
            assert 2.0**-n < x <= 2.0 ** (-n + 1)
