"""Rigid body with a fixed point: Euler equations, Deprit chart, quadratures
for the free body and the Lagrange gyroscope.

Conventions
-----------
Rotations use the z-x-z Euler sequence ``R = Rz(phi) Rx(theta) Rz(psi)``
whose columns are the body axes in the outer frame. The Deprit chart
composes ``Rz(gamma) Rx(zeta)`` (lab to momentum frame) with
``Rz(phi) Rx(theta) Rz(psi)`` (momentum frame to body). Body components
of the angular momentum are then ``(G sin(theta) sin(psi),
G sin(theta) cos(psi), L)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .canonical import PhaseMap, symplectic_residual
from .errors import ChartSingular, DomainViolation, ForbiddenRegion
from .quadrature import integrate_ode

__all__ = [
    "InertiaTriple",
    "euler_rhs",
    "kinetic_energy",
    "momentum_squared",
    "FreeBodyRun",
    "integrate_free_body",
    "rot_x",
    "rot_z",
    "zxz_matrix",
    "zxz_angles",
    "quat_to_matrix",
    "deprit_hamiltonian",
    "omega_from_deprit",
    "deprit_from_euler",
    "euler_from_deprit",
    "deprit_map",
    "verify_deprit_canonicity",
    "psi_rate",
    "phi_rate",
    "rigid_body_periods",
    "gyroscope_hamiltonian",
    "gyroscope_gradient",
    "integrate_gyroscope",
    "euler_poisson_rhs",
]

_CHART_EPS = 1e-6


@dataclass(frozen=True)
class InertiaTriple:
    """Principal inertia moments ``I1, I2, I3 > 0``."""

    I1: float
    I2: float
    I3: float

    def __post_init__(self):
        if min(self.I1, self.I2, self.I3) <= 0:
            raise DomainViolation("inertia moments must be positive")

    @property
    def array(self) -> np.ndarray:
        return np.array([self.I1, self.I2, self.I3], dtype=float)


def _I(I) -> np.ndarray:
    return I.array if isinstance(I, InertiaTriple) else np.asarray(InertiaTriple(*I).array)


def euler_rhs(I, w) -> np.ndarray:
    """Right-hand side of the Euler equations in the body frame."""
    I1, I2, I3 = _I(I)
    w1, w2, w3 = w
    return np.array([(I2 - I3) * w2 * w3 / I1, (I3 - I1) * w3 * w1 / I2, (I1 - I2) * w1 * w2 / I3])


def kinetic_energy(I, w) -> float:
    return 0.5 * float(np.sum(_I(I) * np.asarray(w) ** 2))


def momentum_squared(I, w) -> float:
    return float(np.sum((_I(I) * np.asarray(w)) ** 2))


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def zxz_matrix(phi: float, theta: float, psi: float) -> np.ndarray:
    return rot_z(phi) @ rot_x(theta) @ rot_z(psi)


def zxz_angles(R: np.ndarray) -> tuple[float, float, float]:
    """Return ``(phi, theta, psi)`` with ``R = Rz(phi) Rx(theta) Rz(psi)``.

    Raises
    ------
    ChartSingular
        If ``sin(theta)`` is below ``1e-6``.
    """
    ct = float(np.clip(R[2, 2], -1.0, 1.0))
    st = math.hypot(R[2, 0], R[2, 1])
    if st < _CHART_EPS:
        raise ChartSingular("theta at 0 or pi")
    return math.atan2(R[0, 2], -R[1, 2]), math.atan2(st, ct), math.atan2(R[2, 0], R[2, 1])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = np.asarray(q) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _matrix_to_quat(R: np.ndarray) -> np.ndarray:
    from scipy.spatial.transform import Rotation

    x, y, z, w = Rotation.from_matrix(R).as_quat()
    return np.array([w, x, y, z])


# ---------------------------------------------------------------------------
# free body
# ---------------------------------------------------------------------------


@dataclass
class FreeBodyRun:
    """Free-body trajectory with invariant drift report."""

    t: np.ndarray
    omega: np.ndarray
    quat: np.ndarray
    K_drift: float
    G2_drift: float

    def rotation(self, k: int) -> np.ndarray:
        return quat_to_matrix(self.quat[k])


def integrate_free_body(I, w0, t_final: float, samples: int = 1001, R0=None,
                        rtol: float = 1e-13, atol: float = 1e-14) -> FreeBodyRun:
    """Integrate the Euler equations with a body-to-lab quaternion.

    Drifts are relative: ``max |K(t) - K(0)| / K(0)`` and likewise for ``G^2``.
    """
    Iv = _I(I)
    q0 = np.array([1.0, 0.0, 0.0, 0.0]) if R0 is None else _matrix_to_quat(np.asarray(R0))

    def rhs(t, y):
        w, q = y[:3], y[3:]
        qw, qx, qy, qz = q
        wx, wy, wz = w
        dq = 0.5 * np.array([
            -qx * wx - qy * wy - qz * wz,
            qw * wx + qy * wz - qz * wy,
            qw * wy - qx * wz + qz * wx,
            qw * wz + qx * wy - qy * wx,
        ])
        return np.concatenate([euler_rhs(Iv, w), dq])

    ts = np.linspace(0.0, t_final, samples)
    sol = integrate_ode(rhs, (0.0, t_final), np.concatenate([w0, q0]), t_eval=ts, rtol=rtol, atol=atol)
    W = sol.y[:3].T
    K = 0.5 * np.sum(Iv * W**2, axis=1)
    G2 = np.sum((Iv * W) ** 2, axis=1)
    kd = float(np.max(np.abs(K - K[0]))) / K[0] if K[0] > 0 else float(np.max(np.abs(K)))
    gd = float(np.max(np.abs(G2 - G2[0]))) / G2[0] if G2[0] > 0 else float(np.max(np.abs(G2)))
    return FreeBodyRun(sol.t, W, sol.y[3:].T, kd, gd)


# ---------------------------------------------------------------------------
# Deprit chart
# ---------------------------------------------------------------------------


def _S(I, psi):
    I1, I2, _ = _I(I)
    return math.sin(psi) ** 2 / I1 + math.cos(psi) ** 2 / I2


def deprit_hamiltonian(I, L: float, G: float, psi: float) -> float:
    """Kinetic energy ``(1/2)[L^2/I3 + (G^2 - L^2)(sin^2 psi/I1 + cos^2 psi/I2)]``."""
    if abs(L) > G:
        raise DomainViolation("|L| must not exceed G")
    I3 = _I(I)[2]
    return 0.5 * (L * L / I3 + (G * G - L * L) * _S(I, psi))


def omega_from_deprit(I, L: float, G: float, psi: float) -> np.ndarray:
    """Body angular velocity from ``(L, G, psi)``."""
    if abs(L) > G:
        raise DomainViolation("|L| must not exceed G")
    st = math.sqrt(max(G * G - L * L, 0.0))
    return np.array([st * math.sin(psi), st * math.cos(psi), L]) / _I(I)


def deprit_from_euler(x) -> np.ndarray:
    """Map ``(p_theta0, p_phi0, p_psi0, theta0, phi0, psi0)`` to
    ``(M3, L, G, gamma, psi, phi)``.
    """
    pth, pph, pps, th0, ph0, ps0 = (float(v) for v in x)
    if abs(math.sin(th0)) < _CHART_EPS:
        raise ChartSingular("theta0 at 0 or pi")
    R0 = zxz_matrix(ph0, th0, ps0)
    n0 = np.array([math.cos(ph0), math.sin(ph0), 0.0])
    A = np.vstack([n0, [0.0, 0.0, 1.0], R0[:, 2]])
    M = np.linalg.solve(A, [pth, pph, pps])
    G = float(np.linalg.norm(M))
    if G <= 0:
        raise ChartSingular("zero angular momentum")
    z = M / G
    if math.hypot(z[0], z[1]) < _CHART_EPS:
        raise ChartSingular("zeta at 0 or pi")
    gamma = math.atan2(z[0], -z[1])
    zeta = math.acos(max(-1.0, min(1.0, z[2])))
    Rb = (rot_z(gamma) @ rot_x(zeta)).T @ R0
    phi, theta, psi = zxz_angles(Rb)
    return np.array([pph, G * math.cos(theta), G, gamma, psi, phi])


def euler_from_deprit(y) -> np.ndarray:
    """Inverse of :func:`deprit_from_euler`."""
    M3, L, G, gamma, psi, phi = (float(v) for v in y)
    if G <= 0 or abs(L) >= G or abs(M3) >= G:
        raise ChartSingular("need |L| < G and |M3| < G")
    zeta, theta = math.acos(M3 / G), math.acos(L / G)
    Rm = rot_z(gamma) @ rot_x(zeta)
    R0 = Rm @ zxz_matrix(phi, theta, psi)
    M = G * Rm[:, 2]
    ph0, th0, ps0 = zxz_angles(R0)
    n0 = np.array([math.cos(ph0), math.sin(ph0), 0.0])
    return np.array([M @ n0, M[2], M @ R0[:, 2], th0, ph0, ps0])


def deprit_map() -> PhaseMap:
    return PhaseMap(3, deprit_from_euler, euler_from_deprit, angles_out=(3, 4, 5))


def verify_deprit_canonicity(point) -> float:
    """Symplectic residual of the Deprit map at an Euler-chart point."""
    return symplectic_residual(deprit_map(), np.asarray(point, dtype=float))


# ---------------------------------------------------------------------------
# quadratures
# ---------------------------------------------------------------------------


def _w(I, E, G, psi):
    """``psi_dot^2 = (1/I3 - S)(2E - G^2 S)``."""
    S = _S(I, psi)
    return (1.0 / _I(I)[2] - S) * (2 * E - G * G * S)


def psi_rate(I, E: float, G: float, psi: float, branch: int = 1) -> float:
    """Signed ``dpsi/dt`` from energy conservation.

    Raises
    ------
    ForbiddenRegion
        If the radicand is negative.
    """
    S = _S(I, psi)
    a = 1.0 / _I(I)[2] - S
    num = 2 * E - G * G * S
    if a == 0.0:
        return 0.0
    rad = num / a
    if rad < -1e-14 * max(1.0, abs(2 * E)):
        raise ForbiddenRegion("negative radicand")
    return branch * a * math.sqrt(max(rad, 0.0))


def phi_rate(I, G: float, psi) -> float | np.ndarray:
    """``dphi/dt = (sin^2 psi/I1 + cos^2 psi/I2) G``."""
    I1, I2, _ = _I(I)
    psi = np.asarray(psi)
    return (np.sin(psi) ** 2 / I1 + np.cos(psi) ** 2 / I2) * G


def rigid_body_periods(I, E: float, G: float, psi0: float) -> dict:
    """Periods of the ``psi`` motion and the mean ``phi`` rotation.

    Returns
    -------
    dict
        ``regime`` ("rotation" or "libration"), ``T_L``, ``delta_phi``
        (advance of phi over ``T_L``) and ``T_G = 2 pi T_L / delta_phi``.
        For rotations ``T_L`` is the time for ``psi`` to advance by ``2 pi``.
    """
    grid = np.linspace(0.0, 2 * np.pi, 2049)
    wv = np.array([_w(I, E, G, s) for s in grid])
    scale = max(np.max(np.abs(wv)), 1e-300)
    if _w(I, E, G, psi0) < -1e-12 * scale:
        raise ForbiddenRegion("psi0 lies in the forbidden region")
    opts = dict(epsabs=0.0, epsrel=1e-13, limit=400)
    if np.min(wv) > 1e-12 * scale:
        T, _ = integrate.quad(lambda s: 1.0 / math.sqrt(_w(I, E, G, s)), 0.0, 2 * np.pi, **opts)
        dphi, _ = integrate.quad(lambda s: phi_rate(I, G, s) / math.sqrt(_w(I, E, G, s)),
                                 0.0, 2 * np.pi, **opts)
        return {"regime": "rotation", "T_L": T, "delta_phi": dphi, "T_G": 2 * np.pi * T / dphi}

    def f(s):
        return _w(I, E, G, s)

    def edge(direction):
        x, step = psi0, 1e-2
        while f(x + direction * step) > 0:
            x += direction * step
            if abs(x - psi0) > 2 * np.pi:
                raise DomainViolation("libration edge not found")
        return optimize.brentq(f, min(x, x + direction * step), max(x, x + direction * step),
                               xtol=1e-15, rtol=4 * np.finfo(float).eps)

    lo, hi = edge(-1.0), edge(+1.0)
    c, r = 0.5 * (lo + hi), 0.5 * (hi - lo)

    def integrand(u, g):
        s = c - r * math.cos(u)
        return g(s) * r * math.sin(u) / math.sqrt(max(f(s), 1e-300))

    T, _ = integrate.quad(lambda u: integrand(u, lambda s: 1.0), 0.0, np.pi, **opts)
    dphi, _ = integrate.quad(lambda u: integrand(u, lambda s: phi_rate(I, G, s)), 0.0, np.pi, **opts)
    T, dphi = 2 * T, 2 * dphi
    return {"regime": "libration", "T_L": T, "delta_phi": dphi, "T_G": 2 * np.pi * T / dphi,
            "psi_range": (lo, hi)}


# ---------------------------------------------------------------------------
# Lagrange gyroscope
# ---------------------------------------------------------------------------


def _gyro_check(M3, L, G):
    if G <= 0 or abs(L) > G or abs(M3) > G:
        raise DomainViolation("need G > 0, |L| <= G, |M3| <= G")


def gyroscope_hamiltonian(I: float, I3: float, m: float, g: float, h: float,
                          M3: float, L: float, G: float, phi: float) -> float:
    """Symmetric top in gravity expressed in Deprit variables.

    ``H = L^2/(2 I3) + (G^2 - L^2)/(2 I) - m g h cos(theta0)`` with
    ``cos(theta0) = cos(theta) cos(zeta) - sin(theta) sin(zeta) cos(phi)``.
    """
    _gyro_check(M3, L, G)
    c, a = M3 / G, L / G
    ct0 = c * a - math.sqrt(max(1 - c * c, 0.0)) * math.sqrt(max(1 - a * a, 0.0)) * math.cos(phi)
    return L * L / (2 * I3) + (G * G - L * L) / (2 * I) - m * g * h * ct0


def gyroscope_gradient(I, I3, m, g, h, y) -> np.ndarray:
    """Gradient of :func:`gyroscope_hamiltonian` in ``(M3, L, G, gamma, psi, phi)``."""
    M3, L, G, _, _, phi = y
    c, a = M3 / G, L / G
    sz, st = math.sqrt(max(1 - c * c, 1e-300)), math.sqrt(max(1 - a * a, 1e-300))
    cp, sp = math.cos(phi), math.sin(phi)
    d_M3 = a / G + st * cp * c / (sz * G)
    d_L = c / G + sz * cp * a / (st * G)
    d_G = -2 * c * a / G - cp * (c * c * st / (sz * G) + a * a * sz / (st * G))
    k = m * g * h
    return np.array([
        -k * d_M3,
        L / I3 - L / I - k * d_L,
        G / I - k * d_G,
        0.0,
        0.0,
        -k * sz * st * sp,
    ])


def integrate_gyroscope(I, I3, m, g, h, y0, t_final: float, samples: int = 401):
    """Hamilton flow of the gyroscope in Deprit variables.

    Returns the ``solve_ivp`` solution; rows are ``(M3, L, G, gamma, psi, phi)``.
    """
    _gyro_check(*y0[:3])

    def rhs(t, y):
        d = gyroscope_gradient(I, I3, m, g, h, y)
        return np.concatenate([-d[3:], d[:3]])

    ts = np.linspace(0.0, t_final, samples)
    return integrate_ode(rhs, (0.0, t_final), y0, t_eval=ts, rtol=1e-13, atol=1e-13)


def euler_poisson_rhs(Iv, mgh):
    """Body-frame ``(M, Gamma)`` equations for a heavy top.

    ``Gamma`` is the lab vertical in body coordinates and the center of
    mass sits at ``h e3``.
    """
    Iv = np.asarray(Iv, dtype=float)

    def rhs(t, y):
        M, Gam = y[:3], y[3:]
        w = M / Iv
        torque = mgh * np.cross([0.0, 0.0, 1.0], Gam)
        return np.concatenate([np.cross(M, w) + torque, np.cross(Gam, w)])

    return rhs
