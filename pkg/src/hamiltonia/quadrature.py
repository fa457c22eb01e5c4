"""Action-angle variables by quadrature, normal modes, free rotators,
Lax-pair lattice oracles and the Melnikov matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, linalg, optimize

from .errors import (
    CollisionDetected,
    DomainViolation,
    NotPositiveDefinite,
    PreconditionViolated,
    TailNotDecaying,
    TurningPointDegenerate,
)

__all__ = [
    "Potential1D",
    "CentralEffectivePotential",
    "turning_points",
    "period",
    "standard_solution",
    "action_of_energy",
    "energy_of_action",
    "central_frequencies",
    "central_actions",
    "normal_modes",
    "normal_mode_actions",
    "free_rotator_flow",
    "LatticeState",
    "lattice_hamiltonian",
    "lax_matrix",
    "lax_eigenvalue_drift",
    "melnikov_matrix",
    "melnikov_closed_form",
    "integrate_ode",
    "leapfrog",
]

_RTOL = 1e-13


def integrate_ode(rhs, t_span, y0, t_eval=None, rtol=1e-12, atol=1e-12, **kw):
    """DOP853 integration with tight default tolerances."""
    sol = integrate.solve_ivp(
        rhs, t_span, np.asarray(y0, dtype=float), method="DOP853",
        t_eval=t_eval, rtol=rtol, atol=atol, **kw
    )
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol


def leapfrog(grad_V, p0, q0, dt: float, n_steps: int, m: float = 1.0):
    """Velocity Verlet for ``H = p^2/2m + V(q)``; symplectic, second order.

    Returns
    -------
    (p, q) : ndarrays of shape ``(n_steps + 1, dim)``
    """
    p = np.array(p0, dtype=float, ndmin=1)
    q = np.array(q0, dtype=float, ndmin=1)
    P = np.empty((n_steps + 1, p.size))
    Q = np.empty((n_steps + 1, q.size))
    P[0], Q[0] = p, q
    g = np.asarray(grad_V(q), dtype=float)
    for k in range(1, n_steps + 1):
        p = p - 0.5 * dt * g
        q = q + dt * p / m
        g = np.asarray(grad_V(q), dtype=float)
        p = p - 0.5 * dt * g
        P[k], Q[k] = p, q
    return P, Q


# ---------------------------------------------------------------------------
# one-dimensional systems
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Potential1D:
    """Potential ``V(q)`` with derivative on an open interval.

    Parameters
    ----------
    V, dV : callable
        Potential and its derivative.
    m : float
        Mass.
    domain : (float, float)
        Open interval of definition; may be infinite.
    q_min : float, optional
        Location of the well bottom; located numerically if omitted.
    """

    V: Callable[[float], float]
    dV: Callable[[float], float]
    m: float = 1.0
    domain: tuple = (-np.inf, np.inf)
    q_min: float | None = None

    def minimum(self) -> float:
        if self.q_min is not None:
            return self.q_min
        lo, hi = self.domain
        lo = max(lo, -1e3)
        hi = min(hi, 1e3)
        res = optimize.minimize_scalar(self.V, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
        return float(res.x)

    @classmethod
    def harmonic(cls, omega: float, m: float = 1.0) -> "Potential1D":
        k = m * omega**2
        return cls(lambda q: 0.5 * k * q * q, lambda q: k * q, m, q_min=0.0)

    @classmethod
    def quartic(cls, m: float = 1.0) -> "Potential1D":
        return cls(lambda q: q**4, lambda q: 4 * q**3, m, q_min=0.0)

    @classmethod
    def pendulum(cls, g: float = 1.0, h: float = 1.0, m: float = 1.0) -> "Potential1D":
        """``V = m g (1 - cos(q/h))`` on ``(-pi h, pi h)``."""
        return cls(
            lambda q: m * g * (1.0 - math.cos(q / h)),
            lambda q: m * g * math.sin(q / h) / h,
            m,
            (-math.pi * h, math.pi * h),
            0.0,
        )


def _outer_root(fun, x0, direction, limit):
    """Bracket and solve ``fun = 0`` moving from ``x0`` (where fun < 0)."""
    step = 1e-3 * max(1.0, abs(x0))
    x = x0
    for _ in range(400):
        if math.isinf(limit):
            nxt = x + direction * step
            step *= 2
        else:
            nxt = x + 0.5 * (limit - x)
            if nxt == x:
                break
        if fun(nxt) >= 0:
            return optimize.brentq(fun, min(x, nxt), max(x, nxt), xtol=1e-15,
                                   rtol=4 * np.finfo(float).eps)
        x = nxt
    raise DomainViolation("no turning point inside the domain")


def turning_points(pot: Potential1D, E: float) -> tuple[float, float]:
    """Return ``q_-(E) < q_+(E)`` around the well bottom.

    Raises
    ------
    DomainViolation
        If ``E`` is below the well bottom or no turning point exists.
    TurningPointDegenerate
        If the force nearly vanishes at a turning point.
    """
    q0 = pot.minimum()
    if E <= pot.V(q0):
        raise DomainViolation("energy at or below the potential minimum")

    def fun(x):
        return pot.V(x) - E

    lo, hi = pot.domain
    qm = _outer_root(fun, q0, -1.0, lo)
    qp = _outer_root(fun, q0, +1.0, hi)
    scale = max(abs(E - pot.V(q0)), 1e-300) / max(qp - qm, 1e-300)
    for q in (qm, qp):
        if abs(pot.dV(q)) < 1e-7 * scale:
            raise TurningPointDegenerate(f"V'({q}) ~ 0: separatrix energy")
    return qm, qp


def _chebyshev_integral(pot: Potential1D, E: float, g: Callable, qm: float, qp: float,
                        upper: float = math.pi) -> float:
    """``int g(x, E - V(x)) dx`` over ``[q-, x(upper)]`` with ``x = c - w cos phi``.

    The substitution removes both square-root endpoint singularities.
    """
    c, w = 0.5 * (qm + qp), 0.5 * (qp - qm)

    def integrand(phi):
        x = c - w * math.cos(phi)
        kin = max(E - pot.V(x), 1e-300)
        return g(x, kin) * w * math.sin(phi)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(integrand, 0.0, upper, epsabs=1e-300, epsrel=_RTOL, limit=400)
    return val


def _time_integrand(pot):
    m = pot.m
    return lambda x, kin: 1.0 / math.sqrt(2.0 * kin / m)


def period(pot: Potential1D, E: float) -> float:
    """Period ``2 int dx / sqrt((2/m)(E - V))`` between turning points."""
    qm, qp = turning_points(pot, E)
    return 2.0 * _chebyshev_integral(pot, E, _time_integrand(pot), qm, qp)


def standard_solution(pot: Potential1D, E: float, t: float | np.ndarray):
    """Motion ``Q(t)`` with ``Q(0) = q_-(E)``, ``Qdot(0) = 0``.

    Returns
    -------
    (Q, Qdot) : tuple of floats or arrays
    """
    qm, qp = turning_points(pot, E)
    T = 2.0 * _chebyshev_integral(pot, E, _time_integrand(pot), qm, qp)
    c, w = 0.5 * (qm + qp), 0.5 * (qp - qm)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    Q = np.empty_like(ts)
    Qd = np.empty_like(ts)
    gfun = _time_integrand(pot)
    for i, ti in enumerate(ts):
        tau = ti % T
        sign = 1.0
        if tau > 0.5 * T:
            tau, sign = T - tau, -1.0
        if tau == 0.0:
            Q[i], Qd[i] = qm, 0.0
            continue
        if tau == 0.5 * T:
            Q[i], Qd[i] = qp, 0.0
            continue
        phi = optimize.brentq(
            lambda ph: _chebyshev_integral(pot, E, gfun, qm, qp, ph) - tau,
            0.0, math.pi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
        )
        x = c - w * math.cos(phi)
        Q[i] = x
        Qd[i] = sign * math.sqrt(max(2.0 * (E - pot.V(x)) / pot.m, 0.0))
    if np.ndim(t) == 0:
        return float(Q[0]), float(Qd[0])
    return Q, Qd


def action_of_energy(pot: Potential1D, E: float) -> float:
    """Action ``(1/2pi) closed-loop int p dq = (1/pi) int sqrt(2m(E-V)) dq``."""
    qm, qp = turning_points(pot, E)
    m = pot.m
    return _chebyshev_integral(pot, E, lambda x, kin: math.sqrt(2.0 * m * kin), qm, qp) / math.pi


def energy_of_action(pot: Potential1D, A: float, E_max: float | None = None) -> float:
    """Invert :func:`action_of_energy` by bracketed root finding."""
    if A <= 0:
        raise DomainViolation("action must be positive")
    e0 = pot.V(pot.minimum())
    lo = e0
    hi = e0 + 1.0 if E_max is None else E_max
    if E_max is None:
        for _ in range(200):
            if action_of_energy(pot, hi) >= A:
                break
            lo, hi = hi, e0 + 2.0 * (hi - e0)
        else:
            raise DomainViolation("action not reachable")
    floor = 1e-13 * (hi - e0)

    def resid(E):
        return action_of_energy(pot, E) - A if E - e0 > floor else -A

    return optimize.brentq(resid, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# central motion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CentralEffectivePotential:
    """Effective radial potential ``V_G(rho) = G^2/(2 m rho^2) + V(rho)``."""

    V: Callable[[float], float]
    dV: Callable[[float], float]
    G: float
    m: float = 1.0

    def VG(self, r: float) -> float:
        return self.G**2 / (2 * self.m * r * r) + self.V(r)

    def dVG(self, r: float) -> float:
        return -self.G**2 / (self.m * r**3) + self.dV(r)

    def radial(self) -> Potential1D:
        if self.G == 0:
            raise DomainViolation("central quadratures need G != 0")
        res = optimize.minimize_scalar(lambda s: self.VG(math.exp(s)), bracket=(-2.0, 0.0, 2.0),
                                       tol=1e-12)
        r0 = math.exp(res.x)
        r0 = optimize.brentq(self.dVG, r0 * 0.5, r0 * 2.0, xtol=1e-15) if self.dVG(r0 * 0.5) * self.dVG(r0 * 2.0) < 0 else r0
        return Potential1D(self.VG, self.dVG, self.m, (0.0, np.inf), r0)

    @classmethod
    def newton(cls, G: float, k: float = 1.0, m: float = 1.0) -> "CentralEffectivePotential":
        return cls(lambda r: -k * m / r, lambda r: k * m / r**2, G, m)

    @classmethod
    def harmonic(cls, G: float, Omega: float = 1.0, m: float = 1.0) -> "CentralEffectivePotential":
        return cls(lambda r: 0.5 * m * Omega**2 * r * r, lambda r: m * Omega**2 * r, G, m)


def _central(V, dV, G, m):
    return CentralEffectivePotential(V, dV, G, m).radial()


def central_frequencies(V, dV, E: float, G: float, m: float = 1.0) -> tuple[float, float]:
    """Radial frequency ``omega0 = 2pi/T`` and mean angular rate ``omega1``.

    ``omega1`` is the time average of ``G/(m rho^2)`` over a radial period.
    """
    pot = _central(V, dV, G, m)
    qm, qp = turning_points(pot, E)
    tfun = _time_integrand(pot)
    T = 2.0 * _chebyshev_integral(pot, E, tfun, qm, qp)
    ang = 2.0 * _chebyshev_integral(pot, E, lambda x, kin: G / (m * x * x) * tfun(x, kin), qm, qp)
    return 2 * math.pi / T, ang / T


def central_actions(V, dV, E: float, G: float, m: float = 1.0) -> tuple[float, float]:
    """Radial action ``(1/pi) int sqrt(2m(E - V_G))`` and ``A2 = G``."""
    pot = _central(V, dV, G, m)
    return action_of_energy(pot, E), G


# ---------------------------------------------------------------------------
# normal modes and free rotators
# ---------------------------------------------------------------------------


def normal_modes(masses: Sequence[float], stiffness) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies and orthonormal eigenvectors of ``m^-1/2 c m^-1/2``.

    Returns
    -------
    omegas : ndarray, shape (n,)
    modes : ndarray, shape (n, n)
        Column ``beta`` is the eigenvector ``v_beta``.
    """
    m = np.asarray(masses, dtype=float)
    c = np.asarray(stiffness, dtype=float)
    if not np.allclose(c, c.T, rtol=0, atol=1e-14 * np.max(np.abs(c))):
        raise ValueError("stiffness must be symmetric")
    s = 1.0 / np.sqrt(m)
    K = s[:, None] * c * s[None, :]
    w2, V = linalg.eigh(K)
    if np.min(w2) <= 1e-14 * max(1.0, np.max(np.abs(w2))):
        raise NotPositiveDefinite("stiffness matrix is not positive definite")
    return np.sqrt(w2), V


def normal_mode_actions(masses, stiffness, p, q) -> tuple[np.ndarray, np.ndarray]:
    """Actions and angles of the normal modes at the phase point ``(p, q)``."""
    m = np.asarray(masses, dtype=float)
    omegas, V = normal_modes(masses, stiffness)
    P = V.T @ (np.asarray(p) / np.sqrt(m))
    Q = V.T @ (np.asarray(q) * np.sqrt(m))
    A = (P**2 + omegas**2 * Q**2) / (2 * omegas)
    alpha = np.arctan2(omegas * Q, P)
    return A, alpha


def free_rotator_flow(J, A, alpha0, t) -> np.ndarray:
    """Angles ``alpha0 + (A/J) t`` reduced to ``[0, 2pi)``."""
    J = np.asarray(J, dtype=float)
    if np.any(J <= 0):
        raise DomainViolation("inertia moments must be positive")
    return np.mod(np.asarray(alpha0, dtype=float) + np.asarray(A, dtype=float) / J * t, 2 * np.pi)


# ---------------------------------------------------------------------------
# Lax-pair lattices
# ---------------------------------------------------------------------------


@dataclass
class LatticeState:
    """Particles on a line with Toda, Calogero or Sutherland interaction."""

    kind: str
    p: np.ndarray
    q: np.ndarray
    m: float = 1.0
    g: float = 1.0
    kappa: float = 2.0
    omega: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        if self.kind not in ("toda", "calogero", "sutherland"):
            raise ValueError(f"unknown lattice {self.kind!r}")
        if self.p.shape != self.q.shape:
            raise ValueError("p and q must have equal length")
        if self.kind != "toda" and len(self.q) > 1:
            d = np.abs(self.q[:, None] - self.q[None, :])[np.triu_indices(len(self.q), 1)]
            if np.min(d) < 1e-8:
                raise CollisionDetected("coincident particles")


def lattice_hamiltonian(state: LatticeState, p=None, q=None) -> float:
    p = state.p if p is None else p
    q = state.q if q is None else q
    H = float(np.sum(p**2)) / (2 * state.m)
    if state.kind == "toda":
        H += state.g * float(np.sum(np.exp(-state.kappa * np.diff(q))))
    else:
        i, j = np.triu_indices(len(q), 1)
        d = q[i] - q[j]
        if state.kind == "calogero":
            H += state.g * float(np.sum(1.0 / d**2)) + 0.5 * state.m * state.omega**2 * float(np.sum(q**2))
        else:
            H += state.g * float(np.sum(1.0 / np.sinh(d) ** 2))
    return H


def _lattice_rhs(state: LatticeState):
    n = len(state.q)
    m, g, kap, om = state.m, state.g, state.kappa, state.omega

    def rhs(t, y):
        p, q = y[:n], y[n:]
        force = np.zeros(n)
        if state.kind == "toda":
            e = g * kap * np.exp(-kap * np.diff(q))
            force[:-1] -= e
            force[1:] += e
        else:
            d = q[:, None] - q[None, :]
            np.fill_diagonal(d, np.inf)
            if state.kind == "calogero":
                force = np.sum(2 * g / d**3, axis=1) - m * om**2 * q
            else:
                s = np.sinh(d)
                with np.errstate(invalid="ignore"):
                    term = 2 * g * np.cosh(d) / s**3
                np.fill_diagonal(term, 0.0)
                force = np.sum(term, axis=1)
        return np.concatenate([force, p / m])

    return rhs


def lax_matrix(state: LatticeState, p=None, q=None) -> np.ndarray:
    """Hermitian Lax matrix ``M(p, q)``.

    Toda: ``M_hh = p_h``, ``M_{h,h+1} = sqrt(m g) exp(-kappa (q_{h+1} - q_h)/2)``.
    Calogero (``omega = 0``): ``M_hk = i sqrt(m g)/(q_h - q_k)``.
    Sutherland: ``M_hk = i sqrt(m g)/sinh(q_h - q_k)``.
    """
    p = state.p if p is None else p
    q = state.q if q is None else q
    n = len(q)
    s = math.sqrt(state.m * state.g)
    if state.kind == "toda":
        M = np.diag(p).astype(float)
        off = s * np.exp(-0.5 * state.kappa * np.diff(q))
        M = M + np.diag(off, 1) + np.diag(off, -1)
        return M
    if state.kind == "calogero" and state.omega != 0:
        raise PreconditionViolated("Calogero Lax pair implemented for omega = 0")
    d = q[:, None] - q[None, :]
    np.fill_diagonal(d, 1.0)
    base = 1.0 / d if state.kind == "calogero" else 1.0 / np.sinh(d)
    M = 1j * s * base
    np.fill_diagonal(M, p)
    return M


def lax_eigenvalue_drift(state: LatticeState, t_final: float = 10.0, samples: int = 201) -> dict:
    """Integrate the lattice and measure conservation of Lax eigenvalues.

    Returns
    -------
    dict
        ``drift`` (max eigenvalue change), ``entry_variation`` (max change
        of a matrix entry), ``energy_drift`` and the sample times.
    """
    n = len(state.q)
    lax_matrix(state)  # validates the omega precondition
    y0 = np.concatenate([state.p, state.q])
    ts = np.linspace(0.0, t_final, samples)
    sol = integrate_ode(_lattice_rhs(state), (0.0, t_final), y0, t_eval=ts, rtol=1e-13, atol=1e-13)
    M0 = lax_matrix(state)
    ev0 = np.linalg.eigvalsh(M0)
    H0 = lattice_hamiltonian(state)
    drift = var = edrift = 0.0
    for k in range(len(sol.t)):
        p, q = sol.y[:n, k], sol.y[n:, k]
        if state.kind != "toda" and n > 1:
            d = np.abs(q[:, None] - q[None, :])[np.triu_indices(n, 1)]
            if np.min(d) < 1e-8:
                raise CollisionDetected(f"collision near t={sol.t[k]}")
        M = lax_matrix(state, p, q)
        drift = max(drift, float(np.max(np.abs(np.linalg.eigvalsh(M) - ev0))))
        var = max(var, float(np.max(np.abs(M - M0))))
        edrift = max(edrift, abs(lattice_hamiltonian(state, p, q) - H0))
    return {"drift": drift, "entry_variation": var, "energy_drift": edrift,
            "eigenvalues": ev0.tolist()}


# ---------------------------------------------------------------------------
# Melnikov matrix
# ---------------------------------------------------------------------------


def _separatrix(g: float, branch: int):
    sg = math.sqrt(g)

    def qa(t):
        return 4.0 * math.atan(math.exp(branch * sg * t)) if branch * sg * t < 700 else 2 * math.pi

    def pa(t):
        return branch * 2.0 * sg / math.cosh(sg * t) if abs(sg * t) < 700 else 0.0

    return qa, pa


def _hessian_fd(fun, alpha, h=2e-2):
    """Second derivatives in ``alpha`` by Richardson-extrapolated differences."""
    a = np.asarray(alpha, dtype=float)
    n = len(a)

    def H(hh):
        out = np.empty((n, n))
        f0 = fun(a)
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = hh
            out[i, i] = (fun(a + ei) - 2 * f0 + fun(a - ei)) / hh**2
            for j in range(i + 1, n):
                ej = np.zeros(n)
                ej[j] = hh
                v = (fun(a + ei + ej) - fun(a + ei - ej) - fun(a - ei + ej) + fun(a - ei - ej)) / (4 * hh * hh)
                out[i, j] = out[j, i] = v
        return out

    return (4 * H(h / 2) - H(h)) / 3


def melnikov_matrix(f: Callable, A, alpha, g: float = 1.0, omega=None, branch: int = 1,
                    hessian: Callable | None = None) -> tuple[np.ndarray, float]:
    """Melnikov matrix ``D_ij = int d2 f / d alpha_i d alpha_j`` along the separatrix.

    Parameters
    ----------
    f : callable ``f(A, alpha, p, q)``
        Perturbation.
    A, alpha : array_like
        Actions and base angles.
    g : float
        Pendulum coupling; the separatrix is ``q = 4 arctan(exp(+-sqrt(g) t))``.
    omega : array_like, optional
        Rotation vector ``omega(A)``; ``alpha`` advances as ``alpha + omega t``.
        Defaults to ``(A_1, 1)``. Pass zeros for the frequency-independent part.
    hessian : callable, optional
        Analytic ``d2f/dalpha2`` with the same signature as ``f``.

    Returns
    -------
    D : ndarray
    absdet : float

    Raises
    ------
    TailNotDecaying
        If the integrand exceeds ``1e-12`` at ``|t| = 40/sqrt(g)``.
    """
    A = np.asarray(A, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    w = np.array([A[0], 1.0]) if omega is None else np.asarray(omega, dtype=float)
    qa, pa = _separatrix(g, branch)
    n = len(alpha)

    def hess(t):
        a = alpha + w * t
        if hessian is not None:
            return np.asarray(hessian(A, a, pa(t), qa(t)), dtype=float)
        return _hessian_fd(lambda b: f(A, b, pa(t), qa(t)), a)

    T = 40.0 / math.sqrt(g)
    tail = max(np.max(np.abs(hess(T))), np.max(np.abs(hess(-T))))
    if tail > 1e-12:
        raise TailNotDecaying(f"integrand {tail:.2e} at |t| = 40/sqrt(g)")
    D = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                v, _ = integrate.quad(lambda t: hess(t)[i, j], -T, T, points=[0.0],
                                      epsabs=1e-13, epsrel=1e-12, limit=400)
            D[i, j] = D[j, i] = v
    return D, abs(float(np.linalg.det(D)))


def melnikov_closed_form(alpha, g: float = 1.0, omega=(0.0, 0.0)) -> np.ndarray:
    """Closed form for ``f = (cos a1 + sin a2)(cos q - 1)``.

    Uses ``cos q_a - 1 = -2 sech^2(sqrt(g) t)`` and
    ``int sech^2(s) cos(W s) ds = pi W / sinh(pi W / 2)`` (value 2 at ``W = 0``).
    """
    sg = math.sqrt(g)

    def K(w):
        W = w / sg
        return 2.0 / sg if W == 0 else (math.pi * W / math.sinh(math.pi * W / 2)) / sg

    a1, a2 = alpha
    return np.diag([2 * math.cos(a1) * K(omega[0]), 2 * math.sin(a2) * K(omega[1])])
