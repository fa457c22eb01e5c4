"""Perturbation series for invariant tori of the Thirring model.

The model is ``H(A, alpha) = A^2/2 + eps f(alpha)`` on ``R^l x T^l``. A torus
with frequency ``omega`` is parametrized as ``alpha = psi + h(psi)``,
``A = omega + D h(psi)`` with ``D = omega . d/dpsi``, where ``h`` solves
``D^2 h = -eps d_alpha f(psi + h)``.

Series coefficients are kept as sparse dicts ``nu -> value`` so that the
same recursion runs in double precision or with :mod:`mpmath` scalars.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from .core import GOLDEN, FourierSeries, FrequencyVector, harmonic_norm
from .errors import (
    BudgetExceeded,
    DegenerateHessian,
    NotClosed,
    PreconditionViolated,
    ResonantDenominator,
    ResummationDiverges,
    StationarityViolated,
    ZeroCurrentLine,
    ZeroMeanObstruction,
)
from .quadrature import integrate_ode
from .trees import budget, enumerate_trees, is_restricted, lindstedt_tree_vector

__all__ = [
    "default_perturbation",
    "lindstedt_coefficient",
    "TorusSeries",
    "build_torus",
    "torus_residual",
    "verify_torus_flow",
    "BirkhoffSeries",
    "birkhoff_series",
    "birkhoff_conjugacy_error",
    "poincare_obstruction_scan",
    "ResonantSeries",
    "resonant_lindstedt",
    "resonant_residual",
    "ClusterMatrix",
    "cluster_matrix",
    "smallest_divisors",
    "resummed_propagator",
    "geometric_propagator",
    "torus_generating_function",
    "siegel_constant",
    "restricted_tree_ratios",
    "default_grid",
]

ZERO_MEAN_TOL = 1e-12


def default_perturbation() -> FourierSeries:
    """``f = cos(a1 + a2) + cos(a1)``."""
    return FourierSeries.cosine((1, 1)) + FourierSeries.cosine((1, 0))


# ---------------------------------------------------------------------------
# scalar backends
# ---------------------------------------------------------------------------


class _Num:
    """Scalar backend: python complex or mpmath at a given precision."""

    def __init__(self, dps: int | None = None):
        self.dps = dps
        if dps is None:
            self.I = 1j
            self.one = 1.0 + 0j
            self.real = float
            self.cplx = complex
        else:
            self.I = mpmath.mpc(0, 1)
            self.one = mpmath.mpc(1)
            self.real = mpmath.mpf
            self.cplx = mpmath.mpc

    def exp(self, z):
        return np.exp(z) if self.dps is None else mpmath.exp(z)


def _add(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def _vadd(a, b):
    return b if a is None else tuple(x + y for x, y in zip(a, b))


def _coeffs(f: FourierSeries, num: _Num) -> dict:
    return {k: num.cplx(complex(v)) for k, v in f.items()}


def _conv_into(acc: dict, a: dict, b: dict, w) -> None:
    for k1, v1 in a.items():
        for k2, v2 in b.items():
            k = _add(k1, k2)
            p = w * v1 * v2
            acc[k] = acc[k] + p if k in acc else p


def _exp_series(g: list, k: int, E: list) -> dict:
    """Order-``k`` coefficient of ``exp(sum_j g_j eps^j)`` given lower orders."""
    acc: dict = {}
    for j in range(1, k + 1):
        if g[j]:
            _conv_into(acc, g[j], E[k - j], j)
    return {nu: c / k for nu, c in acc.items()}


# ---------------------------------------------------------------------------
# Thirring recursion
# ---------------------------------------------------------------------------


def _thirring_orders(f: FourierSeries, omega: Sequence, K: int, num: _Num) -> list[dict]:
    """Return ``[None, h1, ..., hK]`` with ``hk: nu -> l-tuple``."""
    ell = len(omega)
    w = [num.real(x) for x in omega]
    zero = (0,) * ell
    fco = _coeffs(f, num)
    if zero in fco:
        raise ValueError("f must have zero mean")
    E = {mu: [{zero: num.one}] for mu in fco}
    g = {mu: [None] for mu in fco}
    h: list = [None]
    for k in range(1, K + 1):
        rhs: dict = {}
        for mu, fm in fco.items():
            for nu, c in E[mu][k - 1].items():
                a = num.I * fm * c
                key = _add(nu, mu)
                rhs[key] = _vadd(rhs.get(key), tuple(a * m for m in mu))
        scale = max((abs(x) for v in rhs.values() for x in v), default=1.0) or 1.0
        z = rhs.pop(zero, None)
        if z is not None and max(abs(x) for x in z) > ZERO_MEAN_TOL * scale:
            raise ZeroMeanObstruction(
                f"order {k}: zero mode {max(abs(x) for x in z):.3e} of the right-hand side"
            )
        hk = {}
        for nu, v in rhs.items():
            d = sum(wi * n for wi, n in zip(w, nu))
            if d == 0:
                raise ResonantDenominator(f"omega.nu = 0 for nu={nu}")
            hk[nu] = tuple(x / (d * d) for x in v)
        h.append(hk)
        for mu in fco:
            g[mu].append({nu: num.I * sum(m * x for m, x in zip(mu, v)) for nu, v in hk.items()})
            E[mu].append(_exp_series(g[mu], k, E[mu]))
    return h


def _trees_order(f: FourierSeries, omega: FrequencyVector, k: int) -> dict:
    out: dict = {}
    for tree in enumerate_trees(k, f.support()):
        try:
            v = lindstedt_tree_vector(tree, omega, f)
        except ZeroCurrentLine:
            continue
        key = tree.root_current
        v = v * tree.multiplicity
        out[key] = out[key] + v if key in out else v
    return out


def _vector_series(d: dict, ell: int) -> FourierSeries:
    return FourierSeries(
        {k: np.array([complex(x) for x in v]) for k, v in d.items()}, ell
    )


def lindstedt_coefficient(
    f: FourierSeries, omega: FrequencyVector, k: int, method: str = "recursion"
) -> FourierSeries:
    """Order-``k`` Lindstedt coefficient ``h^(k)`` as an ``l``-vector series.

    Parameters
    ----------
    f : FourierSeries
        Real trigonometric polynomial with zero mean.
    omega : FrequencyVector
    k : int
        Order, ``k >= 1``.
    method : {"recursion", "trees"}
        Order-by-order Fourier solve, or sum over labeled trees with
        nonzero currents.

    Raises
    ------
    ZeroMeanObstruction
        If a right-hand side acquires a zero mode.
    """
    if k < 1:
        raise ValueError("order must be >= 1")
    if method == "recursion":
        return _vector_series(_thirring_orders(f, omega.omega, k, _Num())[k], omega.dim)
    if method == "trees":
        return FourierSeries(_trees_order(f, omega, k), omega.dim)
    raise ValueError("method must be 'recursion' or 'trees'")


# ---------------------------------------------------------------------------
# torus series
# ---------------------------------------------------------------------------


@dataclass
class TorusSeries:
    """Truncated torus parametrization ``h = sum_k eps^k h^(k)``.

    ``H = D h`` is derived on demand. ``orders[k-1]`` holds ``h^(k)``.
    """

    omega: FrequencyVector
    K: int
    orders: list
    f: FourierSeries
    _mp: dict = field(default_factory=dict, repr=False)

    @property
    def ell(self) -> int:
        return self.omega.dim

    def combined(self, eps: float) -> dict:
        """``nu -> sum_k eps^k h^(k)_nu`` as complex vectors."""
        out: dict = {}
        for k, hk in enumerate(self.orders, start=1):
            for nu, v in hk.items():
                out[nu] = out.get(nu, 0) + eps**k * np.asarray(v)
        return out

    def _eval(self, eps: float, psi, derivative: bool) -> np.ndarray:
        c = self.combined(eps)
        psi = np.atleast_2d(np.asarray(psi, dtype=float))
        if not c:
            return np.zeros(psi.shape)
        keys = np.array(list(c), dtype=float)
        vals = np.array(list(c.values()))
        if derivative:
            vals = vals * (1j * (keys @ self.omega.as_array()))[:, None]
        return np.real(np.exp(1j * psi @ keys.T) @ vals)

    def h(self, psi, eps: float) -> np.ndarray:
        return self._eval(eps, psi, False)

    def H(self, psi, eps: float) -> np.ndarray:
        """Action displacement ``D h``."""
        return self._eval(eps, psi, True)

    def mp_orders(self, dps: int) -> list:
        if dps not in self._mp:
            with mpmath.workdps(dps):
                self._mp[dps] = _thirring_orders(self.f, self.omega.omega, self.K, _Num(dps))[1:]
        return self._mp[dps]

    def to_json(self) -> str:
        return json.dumps(
            {
                "omega": list(self.omega.omega),
                "K": self.K,
                "orders": [_vector_series(hk, self.ell).to_records() for hk in self.orders],
                "f": self.f.to_records(),
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "TorusSeries":
        d = json.loads(text)
        ell = len(d["omega"])
        orders = [
            {k: tuple(v) for k, v in FourierSeries.from_records(r, ell).items()}
            for r in d["orders"]
        ]
        f = FourierSeries.from_records(d["f"], ell)
        return cls(FrequencyVector(tuple(d["omega"])), d["K"], orders, f)


def build_torus(f: FourierSeries, omega: FrequencyVector, K: int) -> TorusSeries:
    """Torus series through order ``K`` by recursion."""
    if K > budget(20):
        raise BudgetExceeded(f"order {K} exceeds recursion budget")
    h = _thirring_orders(f, omega.omega, K, _Num())
    return TorusSeries(omega, K, h[1:], f)


def default_grid(ell: int, n: int = 8) -> np.ndarray:
    g = 2 * np.pi * np.arange(n) / n + 0.1
    return np.array(list(itertools.product(g, repeat=ell)))


def torus_residual(T: TorusSeries, eps: float, grid=None, dps: int | None = None) -> float:
    """Max norm over ``grid`` of ``D^2 h + eps d_alpha f(psi + h)``.

    With ``dps`` the series and the residual are evaluated in mpmath at
    that many digits, which resolves residuals far below double precision.
    """
    grid = default_grid(T.ell) if grid is None else np.atleast_2d(grid)
    if eps == 0:
        return 0.0
    if dps is None:
        c = T.combined(eps)
        keys = np.array(list(c), dtype=float)
        vals = np.array(list(c.values()))
        d2 = -((keys @ T.omega.as_array()) ** 2)
        ph = np.exp(1j * grid @ keys.T)
        lhs = ph @ (vals * d2[:, None])
        hv = ph @ vals
        rhs = np.zeros_like(lhs)
        for mu, fm in T.f.items():
            m = np.asarray(mu, dtype=float)
            rhs += np.outer(1j * complex(fm) * np.exp(1j * (grid + hv) @ m), m)
        return float(np.max(np.abs(lhs + eps * rhs)))
    with mpmath.workdps(dps):
        e = mpmath.mpf(eps)
        orders = T.mp_orders(dps)
        c: dict = {}
        for k, hk in enumerate(orders, start=1):
            ek = e**k
            for nu, v in hk.items():
                c[nu] = _vadd(c.get(nu), tuple(ek * x for x in v))
        w = [mpmath.mpf(x) for x in T.omega.omega]
        d2 = {nu: -sum(wi * n for wi, n in zip(w, nu)) ** 2 for nu in c}
        fco = _coeffs(T.f, _Num(dps))
        worst = mpmath.mpf(0)
        for psi in grid:
            p = [mpmath.mpf(x) for x in psi]
            lhs = [mpmath.mpc(0)] * T.ell
            hv = [mpmath.mpc(0)] * T.ell
            for nu, v in c.items():
                ph = mpmath.expj(sum(n * x for n, x in zip(nu, p)))
                for i in range(T.ell):
                    lhs[i] += d2[nu] * v[i] * ph
                    hv[i] += v[i] * ph
            for mu, fm in fco.items():
                ph = mpmath.expj(sum(m * (x + y) for m, x, y in zip(mu, p, hv)))
                for i in range(T.ell):
                    lhs[i] += e * 1j * mu[i] * fm * ph
            worst = max(worst, max(abs(x) for x in lhs))
        return float(worst)


def _thirring_rhs(f: FourierSeries, eps: float):
    keys = np.array([k for k, _ in f.items()], dtype=float)
    vals = np.array([complex(v) for _, v in f.items()])
    ell = keys.shape[1]

    def rhs(t, y):
        a, A = y[:ell], y[ell:]
        grad = np.real((1j * vals * np.exp(1j * keys @ a)) @ keys)
        return np.concatenate([A, -eps * grad])

    return rhs


def verify_torus_flow(
    T: TorusSeries, eps: float, psi0, t_final: float, samples: int = 101
) -> dict:
    """Integrate the Thirring flow from a torus point and compare with the torus.

    Returns
    -------
    dict
        ``max_deviation``, ``times`` and per-sample ``deviation``.
    """
    psi0 = np.asarray(psi0, dtype=float)
    w = T.omega.as_array()
    a0 = psi0 + T.h(psi0, eps)[0]
    A0 = w + T.H(psi0, eps)[0]
    ts = np.linspace(0.0, t_final, samples)
    sol = integrate_ode(_thirring_rhs(T.f, eps), (0.0, t_final), np.concatenate([a0, A0]),
                        t_eval=ts, rtol=1e-13, atol=1e-14)
    psi = psi0[None, :] + ts[:, None] * w[None, :]
    ell = T.ell
    da = sol.y[:ell].T - (psi + T.h(psi, eps))
    dA = sol.y[ell:].T - (w[None, :] + T.H(psi, eps))
    dev = np.max(np.abs(np.hstack([da, dA])), axis=1)
    return {"max_deviation": float(np.max(dev)), "times": ts, "deviation": dev}


# ---------------------------------------------------------------------------
# Birkhoff example: H = omega0 . A + eps (A_2 + f(alpha))
# ---------------------------------------------------------------------------


@dataclass
class BirkhoffSeries:
    """Generating function data for ``H = omega0 . A + eps (A_2 + f(alpha))``.

    The map is ``A = A' + d_alpha Phi(alpha)``, ``alpha' = alpha``, and
    conjugates ``H`` to ``(omega0 + eps e_2) . A'``. The closed form is
    ``Phi_nu = -eps f_nu / (i omega . nu)`` with ``omega = (w01, w02 + eps)``.

    Attributes
    ----------
    derived : dict
        ``j -> FourierSeries`` coefficient of ``eps^j`` in the expansion of
        the closed form, ``j = 1..K``.
    printed : dict
        ``k -> FourierSeries`` coefficient of ``eps^k`` in the double series
        with ``(i nu_2)^k / (i omega0 . nu)^(k+1)`` terms, ``k = 1..K``.
    taylor : dict
        ``j -> FourierSeries`` mpmath Taylor coefficients of the closed form.
    """

    f: FourierSeries
    omega0: tuple
    K: int
    derived: dict
    printed: dict
    taylor: dict

    def phi(self, eps: float) -> FourierSeries:
        w = (self.omega0[0], self.omega0[1] + eps)
        out = {}
        for nu, fv in self.f.items():
            d = w[0] * nu[0] + w[1] * nu[1]
            if abs(d) < 1e-14:
                raise ResonantDenominator(f"omega.nu = {d:.2e} for nu={nu}")
            out[nu] = -eps * complex(fv) / (1j * d)
        return FourierSeries(out, 2)

    @staticmethod
    def u(A_prime, eps: float) -> float:
        return eps * float(A_prime[1])

    def convention_mismatch(self) -> dict:
        """Max differences between the three expansions.

        ``derived_vs_taylor`` compares like powers. ``printed_shifted``
        compares ``derived[k+1]`` with ``(-1)^(k+1) printed[k]``.
        ``printed_raw`` compares ``derived[k]`` with ``printed[k]`` as written.
        """
        dt = max(self.derived[j].max_abs_diff(self.taylor[j]) for j in self.derived)
        shifted = max(
            self.derived[k + 1].max_abs_diff(self.printed[k].scale((-1) ** (k + 1)))
            for k in range(1, self.K)
        )
        raw = max(self.derived[k].max_abs_diff(self.printed[k]) for k in range(1, self.K + 1))
        return {"derived_vs_taylor": dt, "printed_shifted": shifted, "printed_raw": raw}


def birkhoff_series(f: FourierSeries, omega0: Sequence[float], K: int) -> BirkhoffSeries:
    """Expansions of the Birkhoff-example generating function through ``eps^K``.

    Raises
    ------
    ResonantDenominator
        If ``omega0 . nu = 0`` for a harmonic of ``f``.
    """
    if f.dim != 2:
        raise ValueError("the Birkhoff example is two dimensional")
    w0 = tuple(float(x) for x in omega0)
    derived = {j: {} for j in range(1, K + 1)}
    printed = {k: {} for k in range(1, K + 1)}
    taylor = {j: {} for j in range(1, K + 1)}
    for nu, fv in f.items():
        fv = complex(fv)
        d = w0[0] * nu[0] + w0[1] * nu[1]
        if abs(d) < 1e-14:
            raise ResonantDenominator(f"omega0.nu = 0 for nu={nu}")
        for j in range(1, K + 1):
            derived[j][nu] = -fv * (-nu[1]) ** (j - 1) / (1j * d**j)
            printed[j][nu] = fv * (1j * nu[1]) ** j / (1j * d) ** (j + 1)
        with mpmath.workdps(40):
            ser = mpmath.taylor(
                lambda e: -e * fv / (1j * (w0[0] * nu[0] + (w0[1] + e) * nu[1])), 0, K
            )
        for j in range(1, K + 1):
            taylor[j][nu] = complex(ser[j])
    mk = lambda d: {j: FourierSeries(c, 2) for j, c in d.items()}  # noqa: E731
    return BirkhoffSeries(f, w0, K, mk(derived), mk(printed), mk(taylor))


def birkhoff_conjugacy_error(
    f: FourierSeries,
    omega0: Sequence[float],
    eps: float,
    alpha0=(0.1, 0.7),
    A0=(0.3, -0.2),
    t_final: float = 10.0,
    sign: float = 1.0,
    samples: int = 201,
) -> float:
    """Deviation from ``A'`` constant and ``alpha' = alpha0 + omega t``.

    ``sign = -1`` flips the generating function, reproducing the sign in
    the closed form as printed.
    """
    B = birkhoff_series(f, omega0, 1)
    grad = B.phi(eps).scale(sign).gradient()
    w = np.array([omega0[0], omega0[1] + eps])

    def rhs(t, y):
        a = y[:2]
        g = np.real((1j * np.array([complex(v) for _, v in f.items()])
                     * np.exp(1j * np.array([k for k, _ in f.items()], dtype=float) @ a))
                    @ np.array([k for k, _ in f.items()], dtype=float))
        return np.concatenate([w, -eps * g])

    ts = np.linspace(0, t_final, samples)
    sol = integrate_ode(rhs, (0, t_final), np.concatenate([alpha0, A0]), t_eval=ts,
                        rtol=1e-13, atol=1e-14)
    a, A = sol.y[:2].T, sol.y[2:].T
    Ap = A - np.real(grad(a))
    err_A = np.max(np.abs(Ap - Ap[0]))
    err_a = np.max(np.abs(a - (np.asarray(alpha0)[None, :] + ts[:, None] * w[None, :])))
    return float(max(err_A, err_a))


# ---------------------------------------------------------------------------
# Poincare obstruction scan
# ---------------------------------------------------------------------------


def poincare_obstruction_scan(
    f: FourierSeries,
    omega: Callable,
    box: Sequence[tuple],
    N: int,
    n_grid: int = 41,
) -> list[dict]:
    """Locate actions where ``omega(A) . nu = 0`` for harmonics of ``f``.

    Every coordinate line of an ``n_grid`` lattice on ``box`` is scanned for
    sign changes, refined by bisection. ``nu`` and ``-nu`` are reported once.

    Returns
    -------
    list of dict
        ``{"nu": nu, "points": [A, ...]}`` for each obstructed harmonic.

    Raises
    ------
    PreconditionViolated
        If the Jacobian of ``omega`` is singular somewhere on the lattice.
    """
    box = [tuple(map(float, b)) for b in box]
    ell = len(box)
    axes = [np.linspace(lo, hi, n_grid) for lo, hi in box]
    pts = np.array(list(itertools.product(*axes)))
    Wv = np.array([np.asarray(omega(p), dtype=float) for p in pts])
    h = 1e-6
    for p in pts[:: max(1, len(pts) // 50)]:
        J = np.empty((ell, ell))
        for j in range(ell):
            e = np.zeros(ell)
            e[j] = h
            J[:, j] = (np.asarray(omega(p + e)) - np.asarray(omega(p - e))) / (2 * h)
        if abs(np.linalg.det(J)) < 1e-10:
            raise PreconditionViolated("omega(A) is not anisochronous on the box")
    Wv = Wv.reshape((n_grid,) * ell + (ell,))
    seen = set()
    out = []
    for nu, fv in f.items():
        if harmonic_norm(nu) > N or abs(complex(fv)) == 0:
            continue
        canon = max(nu, tuple(-x for x in nu))
        if canon in seen:
            continue
        seen.add(canon)
        nv = np.asarray(canon, dtype=float)
        vals = Wv @ nv
        points = []
        for ax in range(ell):
            v = np.moveaxis(vals, ax, -1)
            for idx in itertools.product(range(n_grid), repeat=ell - 1):
                line = v[idx]
                for i in range(n_grid - 1):
                    a, b = line[i], line[i + 1]
                    if a == 0 or a * b >= 0:
                        if a == 0 and ax == 0:
                            points.append(_lattice_point(axes, ax, idx, axes[ax][i]))
                        continue
                    lo, hi = axes[ax][i], axes[ax][i + 1]
                    g = lambda s: float(np.dot(omega(_lattice_point(axes, ax, idx, s)), nv))  # noqa: E731
                    glo = g(lo)
                    for _ in range(60):
                        mid = 0.5 * (lo + hi)
                        gm = g(mid)
                        if glo * gm <= 0:
                            hi = mid
                        else:
                            lo, glo = mid, gm
                    points.append(_lattice_point(axes, ax, idx, 0.5 * (lo + hi)))
        if points:
            out.append({"nu": canon, "points": np.array(points)})
    return out


def _lattice_point(axes, ax, idx, s) -> np.ndarray:
    others = [axes[j][i] for j, i in zip([j for j in range(len(axes)) if j != ax], idx)]
    p = others[:ax] + [s] + others[ax:]
    return np.array(p, dtype=float)


# ---------------------------------------------------------------------------
# resonant Lindstedt series
# ---------------------------------------------------------------------------


@dataclass
class ResonantSeries:
    """Low-order resonant torus series.

    ``h[m]`` (fast, ``r``-vector) and ``k[m]`` (slow, ``s``-vector) are series
    on ``T^r``; ``k[m]`` contains its constant shift ``kbar[m]`` at ``nu = 0``.
    """

    r: int
    s: int
    omega: FrequencyVector
    beta0: np.ndarray
    h: list
    k: list
    kbar: list
    raw: list

    def X(self, psi, eps: float) -> np.ndarray:
        """``(h, k)`` at angles ``psi``."""
        psi = np.atleast_2d(np.asarray(psi, dtype=float))
        out = np.zeros((len(psi), self.r + self.s), dtype=complex)
        for m, Xm in enumerate(self.raw[1:], start=1):
            for nu, v in Xm.items():
                out += eps**m * np.outer(np.exp(1j * psi @ np.asarray(nu, dtype=float)), v)
        return out


def _split_f(f: FourierSeries, r: int):
    return {k: complex(v) for k, v in f.items()}


def _fbar_derivs(f: FourierSeries, r: int, beta0: np.ndarray):
    s = f.dim - r
    grad = np.zeros(s, dtype=complex)
    hess = np.zeros((s, s), dtype=complex)
    for key, v in f.items():
        if any(key[:r]):
            continue
        lam = np.asarray(key[r:], dtype=float)
        c = complex(v) * np.exp(1j * lam @ beta0)
        grad += 1j * lam * c
        hess += -np.outer(lam, lam) * c
    return grad.real, hess.real


def resonant_lindstedt(
    f: FourierSeries,
    omega: FrequencyVector,
    beta0: Sequence[float],
    order: int = 2,
) -> ResonantSeries:
    """Resonant torus series on ``(alpha', beta) in T^r x T^s`` through ``order``.

    Solves ``D^2 h = -eps d_alpha' f(psi + h, beta0 + k)`` and
    ``D^2 k = -eps d_beta f(psi + h, beta0 + k)`` with ``D = omega . d_psi``.
    The ``psi``-independent part of ``k`` at order ``m`` is fixed by the
    solvability of order ``m + 1`` using the Hessian of the fast average.

    Raises
    ------
    StationarityViolated
        If ``|grad fbar(beta0)| > 1e-10``.
    DegenerateHessian
        If ``|det hess fbar(beta0)| < 1e-8``.
    ZeroMeanObstruction
        If a fast-equation right-hand side acquires a zero mode.
    """
    r = omega.dim
    s = f.dim - r
    if s < 1:
        raise ValueError("f must depend on at least one slow angle")
    beta0 = np.asarray(beta0, dtype=float)
    grad, hess = _fbar_derivs(f, r, beta0)
    if np.max(np.abs(grad), initial=0.0) > 1e-10:
        raise StationarityViolated(f"|grad fbar(beta0)| = {np.max(np.abs(grad)):.2e}")
    if abs(np.linalg.det(hess)) < 1e-8:
        raise DegenerateHessian("Hessian of the fast average is singular at beta0")
    w = omega.as_array()
    zero = (0,) * r
    terms = []
    for key, v in f.items():
        mu, lam = key[:r], np.asarray(key[r:], dtype=float)
        terms.append((mu, np.asarray(key, dtype=float), complex(v) * np.exp(1j * lam @ beta0)))

    X: list = [None]
    E = [[{zero: 1.0 + 0j}] for _ in terms]
    g: list = [[None] for _ in terms]

    def rhs_at(m):
        out: dict = {}
        for t, (mu, vec, c) in enumerate(terms):
            for nu, e in E[t][m - 1].items():
                key = _add(nu, mu)
                out[key] = out.get(key, 0) + 1j * c * e * vec
        return out

    def push(m, Xm):
        for t, (_, vec, _) in enumerate(terms):
            gm = {nu: 1j * complex(vec @ v) for nu, v in Xm.items()}
            if len(g[t]) > m:
                g[t][m] = gm
                E[t][m] = _exp_series(g[t], m, E[t])
            else:
                g[t].append(gm)
                E[t].append(_exp_series(g[t], m, E[t]))

    kbar = [None]
    for m in range(1, order + 2):
        rhs = rhs_at(m)
        if m >= 2:
            Z = rhs.get(zero, np.zeros(r + s, dtype=complex))[r:]
            kb = -np.linalg.solve(hess, Z)
            Xp = dict(X[m - 1])
            base = Xp.get(zero, np.zeros(r + s, dtype=complex)).copy()
            base[r:] += kb
            Xp[zero] = base
            X[m - 1] = Xp
            kbar.append(np.real(kb))
            push(m - 1, Xp)
            rhs = rhs_at(m)
        if m == order + 1:
            break
        scale = max((float(np.max(np.abs(v))) for v in rhs.values()), default=1.0) or 1.0
        z = rhs.pop(zero, None)
        if z is not None and np.max(np.abs(z[:r])) > ZERO_MEAN_TOL * scale:
            raise ZeroMeanObstruction(f"order {m}: fast zero mode {np.max(np.abs(z[:r])):.3e}")
        Xm = {}
        for nu, v in rhs.items():
            d = float(w @ np.asarray(nu, dtype=float))
            if d == 0:
                raise ResonantDenominator(f"omega.nu = 0 for nu={nu}")
            Xm[nu] = v / (d * d)
        X.append(Xm)
        push(m, Xm)

    h = [None] + [FourierSeries({nu: v[:r] for nu, v in X[m].items()}, r) for m in range(1, order + 1)]
    k = [None] + [FourierSeries({nu: v[r:] for nu, v in X[m].items()}, r) for m in range(1, order + 1)]
    return ResonantSeries(r, s, omega, beta0, h, k, kbar, X)


def resonant_residual(R: ResonantSeries, f: FourierSeries, grid=None, dps: int = 30) -> dict:
    """Taylor coefficients in ``eps`` of the resonant torus equations.

    The equations are evaluated by direct substitution of the truncated
    series into ``f`` (no Fourier recursion) and differentiated in ``eps``
    with :func:`mpmath.taylor`. ``grid`` must be a uniform product grid for
    the solvability average to be exact.

    Returns
    -------
    dict
        ``order -> max over grid`` for orders ``1 .. M`` (``M`` the series
        order) and ``"solvability"``: max over components of the grid average
        of the order ``M + 1`` coefficient. It vanishes only if the constant
        shift of order ``M`` is correct.
    """
    r = R.r
    order = len(R.raw) - 1
    grid = default_grid(r, 8) if grid is None else np.atleast_2d(grid)
    fco = [(np.asarray(k, dtype=float), complex(v)) for k, v in f.items()]
    w = R.omega.as_array()
    n = r + R.s
    worst: dict = {m: 0.0 for m in range(1, order + 1)}
    mean = np.zeros(n, dtype=complex)
    with mpmath.workdps(dps):
        for psi in grid:
            modes = []
            for m, Xm in enumerate(R.raw[1:], start=1):
                for nu, v in Xm.items():
                    nv = np.asarray(nu, dtype=float)
                    modes.append((m, float(w @ nv) ** 2, mpmath.expj(float(nv @ psi)), v))
            base = np.concatenate([psi, R.beta0])
            for comp in range(n):

                def F(e, comp=comp):
                    X = [mpmath.mpc(0)] * n
                    lhs = mpmath.mpc(0)
                    for m, d2, ph, v in modes:
                        X = [x + e**m * complex(vi) * ph for x, vi in zip(X, v)]
                        lhs -= e**m * d2 * complex(v[comp]) * ph
                    for key, c in fco:
                        arg = sum(kk * (b + x) for kk, b, x in zip(key, base, X))
                        lhs += e * 1j * key[comp] * c * mpmath.exp(1j * arg)
                    return lhs

                co = mpmath.taylor(F, 0, order + 1)
                for m in range(1, order + 1):
                    worst[m] = max(worst[m], float(abs(co[m])))
                mean[comp] += complex(co[order + 1])
    worst["solvability"] = float(np.max(np.abs(mean / len(grid))))
    return worst


# ---------------------------------------------------------------------------
# scale-0 clusters and resummation
# ---------------------------------------------------------------------------


@dataclass
class ClusterMatrix:
    """Polynomial-in-``eps`` cluster matrix ``M(nu; eps) = sum_m eps^m M_m``.

    ``M_m[r, s]`` collects ``nu_out[r] nu_in[s]`` over clusters of ``m`` nodes.
    """

    nu: tuple
    k_max: int
    coeffs: dict

    def value(self, eps: float) -> np.ndarray:
        ell = len(self.nu)
        out = np.zeros((ell, ell), dtype=complex)
        for m, Mm in self.coeffs.items():
            out += eps**m * Mm
        return out

    def to_dict(self) -> dict:
        return {
            "nu": list(self.nu),
            "k_max": self.k_max,
            "coeffs": {str(m): {"re": M.real.tolist(), "im": M.imag.tolist()} for m, M in self.coeffs.items()},
        }


def _labeled_rooted_trees(m: int) -> list:
    """All labeled rooted trees on ``m`` nodes as ``(root, parent, subtrees)``."""
    out = []
    nodes = range(m)
    for root in nodes:
        others = [v for v in nodes if v != root]
        for choice in itertools.product(nodes, repeat=len(others)):
            parent = [-1] * m
            ok = True
            for v, p in zip(others, choice):
                if p == v:
                    ok = False
                    break
                parent[v] = p
            if not ok:
                continue
            sub = []
            for v in nodes:
                path, x = set(), v
                while x != -1 and x not in path:
                    path.add(x)
                    x = parent[x]
                if x != -1:
                    ok = False
                    break
            if not ok:
                continue
            below = [set() for _ in nodes]
            for v in nodes:
                x = v
                while x != -1:
                    below[x].add(v)
                    x = parent[x]
            out.append((root, parent, below))
    return out


def cluster_matrix(
    f: FourierSeries,
    omega: FrequencyVector,
    nu: Sequence[int],
    k_max: int = 2,
    max_work: int | None = None,
) -> ClusterMatrix:
    """Sum of scale-0 cluster values through ``k_max`` nodes.

    A cluster is a labeled rooted tree on ``m`` nodes with harmonics summing
    to zero; its root is the exit node and a marked entry node receives the
    external current ``nu``. Every internal line must satisfy
    ``C |omega . nu(l)| > 1``. The value is
    ``nu_out nu_in^T prod (nu_parent . nu_child)/(omega . nu(l))^2 prod (-f)``
    weighted by ``1/m!``.

    Raises
    ------
    BudgetExceeded
        If the estimated work exceeds the budget.
    """
    if omega.C is None:
        raise ValueError("cluster scales need the Diophantine constant C")
    nu = tuple(int(x) for x in nu)
    ell = omega.dim
    fco = {k: complex(v) for k, v in f.items()}
    alpha = sorted(fco)
    cap = budget(10**7) if max_work is None else max_work
    w = omega.as_array()
    coeffs = {}
    for m in range(1, k_max + 1):
        work = len(alpha) ** m * m ** (m - 1) * m * m
        if work > cap:
            raise BudgetExceeded(f"cluster enumeration of {m} nodes needs ~{work} steps")
        trees = _labeled_rooted_trees(m)
        M = np.zeros((ell, ell), dtype=complex)
        for labels in itertools.product(alpha, repeat=m):
            if any(sum(l[i] for l in labels) for i in range(ell)):
                continue
            harm = [np.asarray(l, dtype=float) for l in labels]
            fprod = 1.0 + 0j
            for l in labels:
                fprod *= -fco[l]
            for root, parent, below in trees:
                for vin in range(m):
                    val = fprod
                    for v in range(m):
                        if v == root:
                            continue
                        cur = sum(harm[x] for x in below[v])
                        if vin in below[v]:
                            cur = cur + np.asarray(nu, dtype=float)
                        d = float(w @ cur)
                        if omega.C * abs(d) <= 1.0:
                            val = 0
                            break
                        val *= float(harm[parent[v]] @ harm[v]) / (d * d)
                    if val:
                        M += val * np.outer(harm[root], harm[vin])
        coeffs[m] = M / math.factorial(m)
    return ClusterMatrix(nu, k_max, coeffs)


def smallest_divisors(omega: FrequencyVector, n: int = 20, max_norm: int = 30) -> list[tuple]:
    """The ``n`` harmonics with ``|nu| <= max_norm`` of smallest ``|omega . nu|``.

    One of each pair ``+-nu`` is kept (positive first component).
    """
    cand = []
    for a in range(0, max_norm + 1):
        for b in range(-max_norm, max_norm + 1):
            if (a == 0 and b <= 0) or abs(a) + abs(b) > max_norm:
                continue
            cand.append((abs(omega.dot((a, b))), (a, b)))
    cand.sort()
    return [v for _, v in cand[:n]]


def resummed_propagator(nu, M, omega: FrequencyVector, eps: float | None = None) -> np.ndarray:
    """``((omega . nu)^2 I - M)^-1``.

    ``M`` is a matrix or a :class:`ClusterMatrix` evaluated at ``eps``.

    Raises
    ------
    ResummationDiverges
        If ``||M||_2 >= (omega . nu)^2``.
    """
    if isinstance(M, ClusterMatrix):
        if eps is None:
            raise ValueError("eps required for a ClusterMatrix")
        M = M.value(eps)
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    d2 = omega.dot(nu) ** 2
    if np.linalg.norm(M, 2) >= d2:
        raise ResummationDiverges("cluster matrix dominates the divisor")
    return np.linalg.inv(d2 * np.eye(len(M)) - M)


def geometric_propagator(nu, M, omega: FrequencyVector, K: int) -> np.ndarray:
    """Partial sum ``sum_{k=0}^K (M/d^2)^k / d^2`` with ``d = omega . nu``."""
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    d2 = omega.dot(nu) ** 2
    T = M / d2
    term = np.eye(len(M), dtype=complex) / d2
    out = term.copy()
    for _ in range(K):
        term = T @ term
        out = out + term
    return out


# ---------------------------------------------------------------------------
# torus generating function
# ---------------------------------------------------------------------------


def torus_generating_function(T: TorusSeries, eps: float, tol: float = 1e-8, n_grid: int = 16) -> dict:
    """Generating function ``A . psi + Phi(A, psi)`` of the torus foliation.

    ``Phi = G(psi) + a . psi + h . (A - omega - D h)`` where ``grad G`` is the
    one-form ``w = -D h + sum_j h_j grad D h_j - a`` and ``a`` its average.

    Returns
    -------
    dict
        ``G`` (FourierSeries), ``a``, ``exactness`` (max curl of ``w`` on a
        grid), ``torus_error`` (max ``|A' - omega|`` on the torus, computed by
        differentiating ``Phi`` numerically) and ``a_alt`` (average of the
        one-form including ``-D h``).

    Raises
    ------
    NotClosed
        If the curl exceeds ``tol``.
    """
    ell = T.ell
    c = T.combined(eps)
    wv = T.omega.as_array()
    Dh = {nu: 1j * float(wv @ np.asarray(nu)) * np.asarray(v) for nu, v in c.items()}
    P: dict = {}
    for n1, h1 in c.items():
        for n2, d2 in Dh.items():
            key = _add(n1, n2)
            # sum_j h_j d_i Dh_j
            add = (1j * np.asarray(n2, dtype=float)) * complex(np.dot(h1, d2))
            P[key] = P[key] + add if key in P else add
    zero = (0,) * ell
    a = np.real(P.get(zero, np.zeros(ell)))
    a_alt = np.real(P.get(zero, np.zeros(ell)) - Dh.get(zero, np.zeros(ell)))
    one = {k: v.copy() for k, v in P.items()}
    for nu, v in Dh.items():
        one[nu] = one.get(nu, 0) - v
    one.pop(zero, None)
    grid = default_grid(ell, n_grid)
    keys = np.array(list(one), dtype=float) if one else np.zeros((0, ell))
    vals = np.array(list(one.values())) if one else np.zeros((0, ell))
    ph = np.exp(1j * grid @ keys.T)
    curl = 0.0
    for i in range(ell):
        for j in range(i + 1, ell):
            cij = 1j * keys[:, i] * vals[:, j] - 1j * keys[:, j] * vals[:, i]
            curl = max(curl, float(np.max(np.abs(ph @ cij), initial=0.0)))
    Gc = {}
    for nu, v in one.items():
        n = np.asarray(nu, dtype=float)
        Gc[nu] = complex(np.dot(-1j * n, v) / np.dot(n, n))
    G = FourierSeries(Gc, ell)
    err = _torus_map_error(T, eps, G, a, grid[:: max(1, len(grid) // 32)])
    if curl > tol:
        raise NotClosed(f"curl of the one-form is {curl:.2e}")
    return {"G": G, "a": a, "a_alt": a_alt, "exactness": curl, "torus_error": err}


def _torus_map_error(T: TorusSeries, eps: float, G: FourierSeries, a, pts, h: float = 1e-3) -> float:
    w = T.omega.as_array()
    ell = T.ell

    def Phi(A, psi):
        g = np.real(G(psi)) if len(G) else 0.0
        return g + a @ psi + T.h(psi, eps)[0] @ (A - w - T.H(psi, eps)[0])

    worst = 0.0
    for psi in pts:
        A = w + T.H(psi, eps)[0]
        grad = np.empty(ell)
        for j in range(ell):
            e = np.zeros(ell)
            e[j] = h
            grad[j] = (-Phi(A, psi + 2 * e) + 8 * Phi(A, psi + e)
                       - 8 * Phi(A, psi - e) + Phi(A, psi - 2 * e)) / (12 * h)
        worst = max(worst, float(np.max(np.abs(A + grad - w))))
    return worst


# ---------------------------------------------------------------------------
# Siegel bound for restricted trees
# ---------------------------------------------------------------------------


def siegel_constant(f: FourierSeries, omega: FrequencyVector, N: int) -> float:
    """``B = F N^2 2^(sum_n 8 n 2^(-n/tau))`` with ``F = C^2 max_{|nu|<=N} |f_nu|``."""
    F = omega.C**2 * max(abs(complex(v)) for k, v in f.items() if harmonic_norm(k) <= N)
    tau = omega.tau
    s = sum(8 * n * 2.0 ** (-n / tau) for n in range(1, 400))
    return F * N**2 * 2.0**s


def restricted_tree_ratios(f: FourierSeries, omega: FrequencyVector, k_max: int, N: int = 2) -> dict:
    """``k -> max |Val| k! / B^k`` over restricted trees of order ``k``."""
    alpha = [k for k in f.support() if harmonic_norm(k) <= N]
    B = siegel_constant(f, omega, N)
    out = {}
    for k in range(1, k_max + 1):
        worst = 0.0
        for tree in enumerate_trees(k, alpha):
            if not is_restricted(tree):
                continue
            v = lindstedt_tree_vector(tree, omega, f)
            worst = max(worst, float(np.max(np.abs(v))))
        out[k] = worst * math.factorial(k) / B**k
    return out
