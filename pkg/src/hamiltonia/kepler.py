"""Two-body machinery: Kepler equation, its tree and Lagrange series,
resummations, anomalies, and the regularized restricted three-body
Hamiltonian near circular orbits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import optimize

from .core import FourierSeries, GaussianRational
from .errors import (
    DomainViolation,
    FitIllConditioned,
    NoConvergence,
    OrderTooLarge,
)
from .trees import enumerate_trees, kepler_tree_value

__all__ = [
    "OrbitElements",
    "AnomalyTriple",
    "solve_kepler",
    "kepler_series_recursion",
    "kepler_series_trees",
    "zero_current_sum",
    "lagrange_series",
    "lagrange_coefficient",
    "series_eval",
    "levi_civita_eval",
    "starred_series_eval",
    "resummed_series_eval",
    "laplace_radius",
    "laplace_probes",
    "eta_parameter",
    "crude_radius_bounds",
    "anomalies",
    "fg_leading_coefficients",
    "r3bp_hamiltonian_delaunay",
    "regularized_r3bp_hamiltonian",
    "levi_civita_map",
    "TREE_ORDER_BUDGET",
]

TREE_ORDER_BUDGET = 8
_I = GaussianRational(0, 1)


# ---------------------------------------------------------------------------
# elements and anomalies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitElements:
    """Keplerian elements in units with ``E = -k^2 m^3 / (2 L^2)``."""

    L: float
    G: float
    e: float
    a: float

    @classmethod
    def from_actions(cls, L: float, G: float, k: float = 1.0, m: float = 1.0) -> "OrbitElements":
        if L <= 0 or abs(G) > L:
            raise DomainViolation("need L > 0 and |G| <= L")
        e = math.sqrt(max(0.0, 1.0 - (G / L) ** 2))
        return cls(L, G, e, L**2 / (k * m**2))

    def __post_init__(self):
        if not (0.0 <= self.e < 1.0) or self.a <= 0:
            raise DomainViolation("bound orbit requires 0 <= e < 1 and a > 0")
        if abs(abs(self.G) - self.L * math.sqrt(1.0 - self.e**2)) > 1e-12 * max(1.0, self.L):
            raise DomainViolation("G inconsistent with L and e")

    def energy(self, k: float = 1.0, m: float = 1.0) -> float:
        return -(k**2) * m**3 / (2.0 * self.L**2)


@dataclass(frozen=True)
class AnomalyTriple:
    """Mean, eccentric and true anomaly with the radius ratio."""

    e: float
    lam: float
    xi: float
    theta: float
    rho_over_a: float

    def residuals(self) -> dict:
        e = self.e
        return {
            "kepler": abs(self.xi - e * math.sin(self.xi) - self.lam),
            "product": abs((1 - e * math.cos(self.xi)) * (1 + e * math.cos(self.theta)) - (1 - e * e)),
            "radius_true": abs(self.rho_over_a - (1 - e * e) / (1 + e * math.cos(self.theta))),
            "radius_ecc": abs(self.rho_over_a - (1 - e * math.cos(self.xi))),
        }

    def __post_init__(self):
        bad = {k: v for k, v in self.residuals().items() if v > 1e-12 * max(1.0, abs(self.lam))}
        if bad:
            raise ValueError(f"anomaly identities violated: {bad}")


def solve_kepler(e: float, lam: float, method: str = "newton", tol: float = 1e-15) -> float:
    """Solve ``xi - e sin xi = lam`` for the eccentric anomaly.

    Newton iteration from ``lam + e sin lam`` with a bisection fallback
    on non-monotone progress. The result lies in the branch of ``lam``.

    Raises
    ------
    NoConvergence
        If neither method reaches the tolerance within 200 iterations.
    """
    if not (0.0 <= e < 1.0):
        raise DomainViolation("0 <= e < 1 required")
    if e == 0.0:
        return float(lam)
    # reduce to [-pi, pi] and restore the branch at the end
    k = math.floor((lam + math.pi) / (2 * math.pi))
    m = lam - 2 * math.pi * k
    lo, hi = m - e, m + e  # F(lo) <= 0 <= F(hi)

    def F(x):
        return x - e * math.sin(x) - m

    if method == "newton":
        x = m + e * math.sin(m)
        prev = math.inf
        for _ in range(200):
            fx = F(x)
            if abs(fx) <= tol * max(1.0, abs(m)):
                return x + 2 * math.pi * k
            if fx > 0:
                hi = min(hi, x)
            else:
                lo = max(lo, x)
            step = fx / (1.0 - e * math.cos(x))
            xn = x - step
            if not (lo <= xn <= hi) or abs(fx) >= prev:
                break  # fall back to bisection
            prev = abs(fx)
            x = xn
            if abs(step) < 1e-17:
                return x + 2 * math.pi * k
        method = "bisection"
    if method == "bisection":
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = F(mid)
            if fm > 0:
                hi = mid
            else:
                lo = mid
            if hi - lo <= 4e-16 * max(1.0, abs(mid)):
                # polish with one Newton step inside the bracket
                x = mid - fm / (1.0 - e * math.cos(mid))
                if not lo <= x <= hi:
                    x = mid
                return x + 2 * math.pi * k
        raise NoConvergence("Kepler bisection did not converge")
    raise ValueError(f"unknown method {method!r}")


def anomalies(e: float, lam: float) -> AnomalyTriple:
    """Mean, eccentric and true anomalies and ``rho/a`` for given ``e``, ``lam``."""
    xi = solve_kepler(e, lam)
    beta = e / (1.0 + math.sqrt(1.0 - e * e))
    theta = xi + 2.0 * math.atan2(beta * math.sin(xi), 1.0 - beta * math.cos(xi))
    return AnomalyTriple(e, float(lam), xi, theta, 1.0 - e * math.cos(xi))


# ---------------------------------------------------------------------------
# exact series
# ---------------------------------------------------------------------------

_C = {1: Fraction(1, 2), -1: Fraction(1, 2)}


def _conv(a: dict, b: dict) -> dict:
    out: dict = {}
    for k1, v1 in a.items():
        for k2, v2 in b.items():
            k = k1 + k2
            out[k] = out.get(k, GaussianRational(0)) + v1 * v2
    return {k: v for k, v in out.items() if v}


@lru_cache(maxsize=None)
def _recursion_table(kmax: int) -> tuple:
    """Coefficients ``h^(k)`` for ``k <= kmax`` from the Kepler recursion.

    ``h^(k)_nu = -sum_{p>=1} 1/p! sum_{nu0} (i nu0)^(p+1) c_nu0 [h^p]^(k-1)_{nu-nu0}``
    where ``[h^p]^(m)`` is the order-m part of the p-th power of the
    series. ``[h^0]^(0) = 1``.
    """
    h: list[dict] = [dict()]  # h[0] unused
    # powers[p][m] = order-m coefficient dict of h^p
    powers: list[list[dict]] = [[{0: GaussianRational(1)}] + [dict() for _ in range(kmax)]]
    for k in range(1, kmax + 1):
        m = k - 1
        hk: dict = {}
        for p in range(0, m + 1):
            src = powers[p][m] if p < len(powers) else {}
            if not src:
                continue
            fact = Fraction(1, math.factorial(p))
            for nu0, c in _C.items():
                pref = (_I * nu0) ** (p + 1) * c * fact
                for nu, v in src.items():
                    key = nu + nu0
                    hk[key] = hk.get(key, GaussianRational(0)) - pref * v
        h.append({k_: v for k_, v in hk.items() if v})
        # extend power table with the new order
        while len(powers) <= k:
            powers.append([dict() for _ in range(kmax + 1)])
        for p in range(1, k + 1):
            # [h^p]^(k) = sum_{j=1..k} h^(j) * [h^(p-1)]^(k-j)
            acc: dict = {}
            for j in range(1, k + 1):
                prev = powers[p - 1][k - j]
                if not prev or not h[j]:
                    continue
                for key, v in _conv(h[j], prev).items():
                    acc[key] = acc.get(key, GaussianRational(0)) + v
            powers[p][k] = {key: v for key, v in acc.items() if v}
    return tuple(h)


def _to_series(d: dict) -> FourierSeries:
    return FourierSeries({(k,): v for k, v in d.items()}, dim=1)


def kepler_series_recursion(k: int) -> FourierSeries:
    """Exact Fourier coefficients ``h^(k)_nu`` of the Kepler series.

    Coefficients are :class:`GaussianRational`; ``c_{+-1} = 1/2``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return _to_series(_recursion_table(k)[k])


def _check_tree_order(k: int, max_order: int):
    if k > max_order:
        raise OrderTooLarge(f"tree order {k} exceeds budget {max_order}")


def kepler_series_trees(
    k: int, nonzero_currents_only: bool = False, max_order: int = TREE_ORDER_BUDGET
) -> FourierSeries:
    """Kepler coefficients as a sum of tree values over canonical trees.

    Parameters
    ----------
    k : int
        Order.
    nonzero_currents_only : bool
        Skip trees with a zero-current line; by the cancellation
        property the result is unchanged.
    max_order : int
        Order budget.
    """
    _check_tree_order(k, max_order)
    acc: dict = {}
    for tree in enumerate_trees(k, [(1,), (-1,)]):
        if nonzero_currents_only and any(c == (0,) for c in tree.currents):
            continue
        v = kepler_tree_value(tree) * tree.multiplicity
        nu = tree.root_current[0]
        acc[nu] = acc.get(nu, GaussianRational(0)) + v
    return _to_series({n: v for n, v in acc.items() if v})


def zero_current_sum(k: int) -> dict:
    """Sum of Kepler tree values over trees with at least one zero-current line.

    Returned per root current; all entries should vanish exactly.
    """
    acc: dict = {}
    for tree in enumerate_trees(k, [(1,), (-1,)]):
        if any(c == (0,) for c in tree.currents):
            nu = tree.root_current[0]
            v = kepler_tree_value(tree) * tree.multiplicity
            acc[nu] = acc.get(nu, GaussianRational(0)) + v
    return acc


@lru_cache(maxsize=None)
def lagrange_series(k: int) -> FourierSeries:
    """Fourier coefficients of ``(1/k!) d^(k-1)/dpsi^(k-1) sin^k psi`` (exact)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    # sin^k = (2i)^-k sum_j C(k,j) (-1)^(k-j) e^{i(2j-k)psi}
    pref = GaussianRational(1) / ((2 * _I) ** k * math.factorial(k))
    out = {}
    for j in range(k + 1):
        nu = 2 * j - k
        c = pref * (math.comb(k, j) * (-1) ** (k - j)) * (_I * nu) ** (k - 1)
        if c:
            out[(nu,)] = c
    return FourierSeries(out, dim=1)


def lagrange_coefficient(k: int, psi: float) -> float:
    """Value of ``h^(k)(psi) = (1/k!) d^(k-1) sin^k psi``."""
    return float(lagrange_series(k)(np.array([psi])).real)


def _real_eval(series: FourierSeries, psi: float) -> float:
    z = 0j
    for (nu,), c in series.items():
        z += complex(c) * complex(math.cos(nu * psi), math.sin(nu * psi))
    return z.real


def series_eval(e: float, psi: float, K: int) -> float:
    """Plain power series ``sum_{k<=K} e^k h^(k)(psi)``."""
    return sum(e**k * _real_eval(lagrange_series(k), psi) for k in range(1, K + 1))


def _taylor_w(e: float, psi: float, deg: int) -> np.ndarray:
    """Taylor coefficients in ``s`` of ``1/(1 - e cos(psi + s))``."""
    c, s = math.cos(psi), math.sin(psi)
    cos_s = np.zeros(deg + 1)
    sin_s = np.zeros(deg + 1)
    for n in range(deg + 1):
        if n % 2 == 0:
            cos_s[n] = (-1) ** (n // 2) / math.factorial(n)
        else:
            sin_s[n] = (-1) ** (n // 2) / math.factorial(n)
    den = -e * (c * cos_s - s * sin_s)
    den[0] += 1.0
    w = np.zeros(deg + 1)
    w[0] = 1.0 / den[0]
    for n in range(1, deg + 1):
        w[n] = -np.dot(den[1 : n + 1], w[n - 1 :: -1][:n]) / den[0]
    return w


def levi_civita_eval(e: float, psi: float, K: int) -> float:
    """Resummed series ``sum_{k<=K} (e sin psi)^k/k! (w d/dpsi)^k psi``
    with ``w = 1/(1 - e cos psi)``, evaluated by Taylor-jet arithmetic."""
    w = _taylor_w(e, psi, K + 1)
    poly = np.zeros(K + 2)
    poly[0], poly[1] = psi, 1.0
    x = e * math.sin(psi)
    total = 0.0
    for k in range(1, K + 1):
        d = np.arange(1, len(poly)) * poly[1:]
        poly = np.convolve(w, d)[: K + 2]
        total += x**k / math.factorial(k) * poly[0]
    return total


def starred_series_eval(e: float, psi: float, K: int, max_order: int = TREE_ORDER_BUDGET) -> float:
    """Partially resummed series over trees without simple nodes.

    Each line factor ``nu_v' nu_v`` is divided by ``1 - e cos psi``; the
    sum runs over trees of order ``<= K`` where no node has exactly one
    child.
    """
    _check_tree_order(K, max_order)
    w = 1.0 / (1.0 - e * math.cos(psi))
    total = 0j
    for k in range(1, K + 1):
        for tree in enumerate_trees(k, [(1,), (-1,)]):
            if any(len(node[1]) == 1 for node in _iter_nodes(tree.root)):
                continue
            v = complex(kepler_tree_value(tree)) * tree.multiplicity
            nu = tree.root_current[0]
            total += v * (e * w) ** k * complex(math.cos(nu * psi), math.sin(nu * psi))
    return total.real


def _iter_nodes(root):
    stack = [root]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(n[1])


def resummed_series_eval(e: float, psi: float, K: int, both: bool = False):
    """Evaluate ``h(psi)`` by the resummed Levi-Civita form truncated at ``K``.

    Parameters
    ----------
    both : bool
        Also return the plain power series value.

    Returns
    -------
    float or (float, float)
    """
    if K > 60:
        raise OrderTooLarge(f"K={K} exceeds the supported truncation 60")
    if not (0.0 <= e < laplace_radius()):
        raise DomainViolation("e must lie below the Laplace radius")
    a = levi_civita_eval(e, psi, K)
    if both:
        return a, series_eval(e, psi, K)
    return a


# ---------------------------------------------------------------------------
# Laplace radius
# ---------------------------------------------------------------------------


def _laplace_fn(y: float) -> float:
    r = math.sqrt(1.0 + y * y)
    return y * math.exp(r) / (1.0 + r) - 1.0


@lru_cache(maxsize=1)
def laplace_radius() -> float:
    """Positive root of ``y exp(sqrt(1+y^2)) / (1 + sqrt(1+y^2)) = 1``."""
    return optimize.brentq(_laplace_fn, 0.1, 1.0, xtol=1e-15, rtol=1e-15)


def eta_parameter(eps: complex) -> complex:
    """Resummation parameter ``eps exp(sqrt(1-eps^2)) / (1 + sqrt(1-eps^2))``."""
    r = np.sqrt(1.0 - complex(eps) ** 2)
    return complex(eps * np.exp(r) / (1.0 + r))


def laplace_probes() -> dict:
    """Locate ``|eta| = 1`` on the real and on the imaginary ``eps`` axis.

    On the imaginary axis ``eps = i y`` the condition reduces to the
    Laplace equation; on the real axis ``|eta(eps)| < 1`` for
    ``0 < eps < 1`` with ``eta(1) = 1``.
    """
    r = laplace_radius()
    ys = np.linspace(1e-3, 0.999, 400)
    real_max = max(abs(eta_parameter(y)) for y in ys)
    return {
        "imaginary_axis_root": r,
        "eta_at_imaginary_root": abs(eta_parameter(1j * r)),
        "real_axis_root": 1.0,
        "eta_at_real_root": abs(eta_parameter(1.0)),
        "real_axis_max_below_1": real_max,
    }


def crude_radius_bounds() -> tuple[float, float]:
    """Radius estimates from ``sum|h^(k)| <= 4^k`` and from the Cayley count.

    The second is ``lim (k!/k^(k-1))^(1/k) = 1/e``; it is evaluated at
    ``k = 10^7`` through ``lgamma``.
    """
    k = 10**7
    cayley = math.exp((math.lgamma(k + 1) - (k - 1) * math.log(k)) / k)
    return 0.25, cayley


# ---------------------------------------------------------------------------
# f/g expansions
# ---------------------------------------------------------------------------


def fg_leading_coefficients(fit_orders: int = 9, e_max: float = 0.1, n: int = 40) -> tuple:
    """Fit ``xi - lam`` and ``theta - lam`` as odd-in-x polynomials of
    ``x = e sin lam``, ``y = e cos lam``.

    Returns
    -------
    tuple
        ``(g_x, g_xy, f_x, f_xy)``: coefficients of ``x`` and ``x y``.
    """
    es = np.linspace(e_max / n, e_max, n)
    lams = np.linspace(0, 2 * np.pi, 2 * n, endpoint=False)
    E, Lm = np.meshgrid(es, lams, indexing="ij")
    E, Lm = E.ravel(), Lm.ravel()
    g = np.empty_like(E)
    f = np.empty_like(E)
    for i, (e, lam) in enumerate(zip(E, Lm)):
        tr = anomalies(e, lam)
        g[i] = tr.xi - lam
        f[i] = tr.theta - lam
    x, y = E * np.sin(Lm), E * np.cos(Lm)
    monos = [(a, b) for a in range(1, fit_orders + 1, 2) for b in range(0, fit_orders + 1 - a)]
    A = np.stack([(x / e_max) ** a * (y / e_max) ** b for a, b in monos], axis=1)
    if np.linalg.cond(A) > 1e12:
        raise FitIllConditioned("design matrix condition number too large")
    out = []
    for target in (g, f):
        coef, *_ = np.linalg.lstsq(A, target, rcond=None)
        coef = {m: c / e_max ** (m[0] + m[1]) for m, c in zip(monos, coef)}
        out.extend([coef[(1, 0)], coef[(1, 1)]])
    return tuple(float(v) for v in out)


# ---------------------------------------------------------------------------
# restricted three-body problem near circular orbits
# ---------------------------------------------------------------------------


def _delta(G0: float, eps: float, g: float, R: float, omega: float) -> float:
    return -((1.0 + eps) ** 0.5 - 1.0) * omega * G0 - eps * g / (2 * R) * G0**4 / (g**2 * R**2)


def r3bp_hamiltonian_delaunay(L0, G0, lam0, gam0, eps, g=1.0, R=1.0, omega=1.0) -> float:
    """Low-order circular restricted three-body Hamiltonian in ``(L0, G0, lam0, gam0)``.

    ``e = sqrt(1 - G0^2/L0^2)``.
    """
    if L0 <= 0 or not (0 < G0 <= L0):
        raise DomainViolation("need 0 < G0 <= L0")
    e = math.sqrt(max(0.0, 1.0 - (G0 / L0) ** 2))
    bracket = (
        3 * math.cos(2 * (lam0 + gam0))
        - e * math.cos(lam0)
        - 4.5 * e * math.cos(lam0 + 2 * gam0)
        + 1.5 * e * math.cos(3 * lam0 + 2 * gam0)
    )
    return (
        -(g**2) / (2 * L0**2)
        - omega * G0
        + _delta(G0, eps, g, R, omega)
        - eps * g / (2 * R) * G0**4 / (g**2 * R**2) * bracket
    )


def regularized_r3bp_hamiltonian(L, lam, p, q, eps, g=1.0, R=1.0, omega=1.0, form: str = "derived") -> float:
    """Three-body Hamiltonian in the regular chart ``p = sqrt(2G) cos gam``,
    ``q = sqrt(2G) sin gam`` with ``G = L - G0``.

    Parameters
    ----------
    form : {"derived", "printed"}
        ``derived`` is obtained by substituting the chart into the
        ``(L0, G0, lam0, gam0)`` form and is analytic at ``p = q = 0``.
        ``printed`` keeps the literal published coefficients (different
        sign of the eccentricity terms, no square root in ``C`` and
        ``delta`` evaluated at ``G``); it is kept for comparison only.

    Raises
    ------
    DomainViolation
        If ``p^2 + q^2 >= 2L`` or ``L <= 0``.
    """
    G = 0.5 * (p * p + q * q)
    if L <= 0 or G >= L:
        raise DomainViolation("need L > 0 and p^2 + q^2 < 2L")
    G0 = L - G
    pq = (-11 * math.cos(lam) + 3 * math.cos(3 * lam)) * p - (7 * math.sin(lam) + 3 * math.sin(3 * lam)) * q
    if form == "derived":
        C = 0.5 * math.sqrt(1.0 - G / (2 * L)) / math.sqrt(L)
        bracket = 3 * math.cos(2 * lam) + pq * C
        delta = _delta(G0, eps, g, R, omega)
    elif form == "printed":
        C = 0.5 * (1.0 - G / (2 * L)) / math.sqrt(L)
        bracket = 3 * math.cos(2 * lam) - pq * C
        delta = _delta(G, eps, g, R, omega)
    else:
        raise ValueError(f"unknown form {form!r}")
    return (
        -(g**2) / (2 * L**2)
        - omega * L
        + omega * G
        + delta
        - eps * g / (2 * R) * G0**4 / (g**2 * R**2) * bracket
    )


def regular_to_delaunay(L, lam, p, q) -> tuple[float, float, float, float]:
    """Map ``(L, lam, p, q)`` to ``(L0, G0, lam0, gam0)``."""
    G = 0.5 * (p * p + q * q)
    gam = math.atan2(q, p)
    return L, L - G, lam + gam, -gam


def levi_civita_map(x: float, y: float) -> list[tuple[float, float]]:
    """Square roots ``(xi, eta)`` of ``x + i y = (xi + i eta)^2``."""
    z = complex(x, y)
    if z == 0:
        return [(0.0, 0.0)]
    w = np.sqrt(z)
    return [(float(w.real), float(w.imag)), (float(-w.real), float(-w.imag))]
