"""Numerical verification and construction of canonical transformations.

Phase points are stored as ``x = (p_1..p_l, q_1..q_l)``. The symplectic
matrix is ``E = [[0, I], [-I, 0]]`` and brackets follow
``{F, G} = sum_k dF/dp_k dG/dq_k - dF/dq_k dG/dp_k`` so that ``{p, q} = +1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ImplicitSolveFailed, JacobianSingular

__all__ = [
    "PhaseMap",
    "ObservableFn",
    "symplectic_matrix",
    "jacobian",
    "symplectic_residual",
    "verification_report",
    "poisson_bracket",
    "bracket_observable",
    "jacobi_residual",
    "map_from_generating_function",
    "identity_map",
    "polar_map",
    "scaling_map",
    "point_transformation",
]

FD_STEPS = (1e-5, 5e-6)


def symplectic_matrix(ell: int) -> np.ndarray:
    I = np.eye(ell)
    Z = np.zeros((ell, ell))
    return np.block([[Z, I], [-I, Z]])


@dataclass(frozen=True)
class PhaseMap:
    """Map ``(p, q) -> (p', q')`` on a ``2 ell``-dimensional phase space.

    Parameters
    ----------
    ell : int
        Degrees of freedom.
    forward : callable
        ``x -> x'`` on flat arrays of length ``2 ell``.
    inverse : callable, optional
    angles_out : sequence of int, optional
        Output indices holding angles; finite differences there are wrapped.
    """

    ell: int
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray] | None = None
    angles_out: tuple = ()

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.forward(np.asarray(x, dtype=float)), dtype=float)

    def roundtrip_error(self, x) -> float:
        if self.inverse is None:
            raise ValueError("no inverse supplied")
        x = np.asarray(x, dtype=float)
        return float(np.max(np.abs(np.asarray(self.inverse(self(x))) - x)))


def _wrap(d: np.ndarray, idx) -> np.ndarray:
    if idx:
        d = d.copy()
        i = list(idx)
        d[i] = (d[i] + np.pi) % (2 * np.pi) - np.pi
    return d


def jacobian(m: PhaseMap, x, steps: Sequence[float] = FD_STEPS) -> np.ndarray:
    """Central-difference Jacobian with one Richardson refinement."""
    x = np.asarray(x, dtype=float)
    n = len(x)

    def J(h):
        out = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            out[:, j] = _wrap(m(x + e) - m(x - e), m.angles_out) / (2 * h)
        return out

    h1, h2 = steps
    r = (h1 / h2) ** 2
    return (r * J(h2) - J(h1)) / (r - 1)


def symplectic_residual(m: PhaseMap, x, return_jacobian: bool = False):
    """Return ``max |L E L^T - E|`` at ``x``.

    Raises
    ------
    JacobianSingular
        If ``|det L| < 1e-12``.
    """
    L = jacobian(m, x)
    if abs(np.linalg.det(L)) < 1e-12:
        raise JacobianSingular("Jacobian is numerically singular")
    E = symplectic_matrix(m.ell)
    res = float(np.max(np.abs(L @ E @ L.T - E)))
    return (res, L) if return_jacobian else res


def verification_report(m: PhaseMap, points, tol: float = 1e-6) -> str:
    """JSON list of ``{point, residual, pass}`` records."""
    rows = []
    for x in points:
        r = symplectic_residual(m, x)
        rows.append({"point": [float(v) for v in x], "residual": r, "pass": bool(r <= tol)})
    return json.dumps(rows)


# ---------------------------------------------------------------------------
# observables and brackets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObservableFn:
    """Phase-space function with an optional analytic gradient.

    The fallback gradient is a five-point stencil, exact on quartics.
    """

    ell: int
    fn: Callable[[np.ndarray], float]
    grad_fn: Callable[[np.ndarray], np.ndarray] | None = None
    h: float = 1e-3

    def __call__(self, x) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad_fn is not None:
            return np.asarray(self.grad_fn(x), dtype=float)
        n = len(x)
        g = np.empty(n)
        for j in range(n):
            h = self.h * max(1.0, abs(x[j]))
            e = np.zeros(n)
            e[j] = h
            g[j] = (-self.fn(x + 2 * e) + 8 * self.fn(x + e) - 8 * self.fn(x - e) + self.fn(x - 2 * e)) / (12 * h)
        return g


def poisson_bracket(F: ObservableFn, G: ObservableFn, x) -> float:
    """``{F, G}(x)`` with the ``{p, q} = +1`` ordering."""
    l = F.ell
    gF, gG = F.grad(x), G.grad(x)
    return float(gF[:l] @ gG[l:] - gF[l:] @ gG[:l])


def bracket_observable(F: ObservableFn, G: ObservableFn) -> ObservableFn:
    """The observable ``{F, G}`` as a new :class:`ObservableFn`."""
    return ObservableFn(F.ell, lambda x: poisson_bracket(F, G, x))


def jacobi_residual(F: ObservableFn, G: ObservableFn, Q: ObservableFn, x) -> float:
    """``|{{F,G},Q} + {{G,Q},F} + {{Q,F},G}|`` at ``x``."""
    t1 = poisson_bracket(bracket_observable(F, G), Q, x)
    t2 = poisson_bracket(bracket_observable(G, Q), F, x)
    t3 = poisson_bracket(bracket_observable(Q, F), G, x)
    return abs(t1 + t2 + t3)


# ---------------------------------------------------------------------------
# generating functions
# ---------------------------------------------------------------------------

# argument order and sign rules per family
# phi:   Phi(p', q):  p = dPhi/dq,   q' =  dPhi/dp'
# gamma: Gam(q, q'):  p = dGam/dq,   p' = -dGam/dq'
# f:     F(p, q'):    q = -dF/dp,    p' = -dF/dq'
# g:     G(p, p'):    q = -dG/dp,    q' =  dG/dp'
_FAMILIES = ("phi", "gamma", "f", "g")


def _split_grad(fun, grad, a, b, ell, h=1e-3):
    """Gradient of ``fun(a, b)`` split into ``(d_a, d_b)``."""
    if grad is not None:
        ga, gb = grad(a, b)
        return np.asarray(ga, dtype=float), np.asarray(gb, dtype=float)
    z = np.concatenate([a, b])
    g = np.empty(2 * ell)
    for j in range(2 * ell):
        s = h * max(1.0, abs(z[j]))
        e = np.zeros(2 * ell)
        e[j] = s

        def f(v):
            return fun(v[:ell], v[ell:])

        g[j] = (-f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)) / (12 * s)
    return g[:ell], g[ell:]


def map_from_generating_function(
    gen: Callable,
    ell: int,
    family: str = "phi",
    grad: Callable | None = None,
    box: tuple | None = None,
    tol: float = 1e-14,
    max_iter: int = 60,
) -> PhaseMap:
    """Canonical map induced by a generating function.

    Parameters
    ----------
    gen : callable ``gen(a, b)``
        Generating function. Argument order per family: ``phi`` takes
        ``(p', q)``, ``gamma`` takes ``(q, q')``, ``f`` takes ``(p, q')`` and
        ``g`` takes ``(p, p')``.
    ell : int
    family : {"phi", "gamma", "f", "g"}
    grad : callable, optional
        ``grad(a, b) -> (d_a gen, d_b gen)``; five-point differences otherwise.
    box : (lo, hi), optional
        Bounds on the unknown new variable; leaving it raises.
    tol, max_iter : Newton controls.

    Raises
    ------
    ImplicitSolveFailed
        If Newton fails or leaves ``box``.
    """
    if family not in _FAMILIES:
        raise ValueError(f"family must be one of {_FAMILIES}")

    def G(a, b):
        return _split_grad(gen, grad, a, b, ell)

    def solve(resid, u):
        scale = max(1.0, float(np.max(np.abs(u))))
        r = resid(u)
        for _ in range(max_iter):
            if np.max(np.abs(r)) <= tol * scale:
                return u
            J = np.empty((ell, ell))
            for j in range(ell):
                h = 1e-6 * max(1.0, abs(u[j]))
                e = np.zeros(ell)
                e[j] = h
                J[:, j] = (resid(u + e) - resid(u - e)) / (2 * h)
            try:
                u = u + np.linalg.solve(J, -r)
            except np.linalg.LinAlgError as exc:
                raise ImplicitSolveFailed("singular mixed Hessian") from exc
            if box is not None and (np.any(u < box[0]) or np.any(u > box[1])):
                raise ImplicitSolveFailed("Newton iterate left the domain box")
            r = resid(u)
            if not np.all(np.isfinite(r)):
                raise ImplicitSolveFailed("non-finite residual")
        if np.max(np.abs(r)) <= 1e3 * tol * scale:
            return u
        raise ImplicitSolveFailed("Newton did not converge")

    def forward(x):
        p, q = np.array(x[:ell], dtype=float), np.array(x[ell:], dtype=float)
        if family == "phi":
            u = solve(lambda u: G(u, q)[1] - p, p.copy())
            return np.concatenate([u, G(u, q)[0]])
        if family == "gamma":
            u = solve(lambda u: G(q, u)[0] - p, q.copy())
            return np.concatenate([-G(q, u)[1], u])
        if family == "f":
            u = solve(lambda u: -G(p, u)[0] - q, q.copy())
            return np.concatenate([-G(p, u)[1], u])
        u = solve(lambda u: -G(p, u)[0] - q, p.copy())
        return np.concatenate([u, G(p, u)[1]])

    return PhaseMap(ell, forward)


# ---------------------------------------------------------------------------
# reference maps
# ---------------------------------------------------------------------------


def identity_map(ell: int) -> PhaseMap:
    return PhaseMap(ell, lambda x: np.array(x, dtype=float), lambda x: np.array(x, dtype=float))


def scaling_map(ell: int, c: float = 2.0) -> PhaseMap:
    return PhaseMap(ell, lambda x: c * np.asarray(x), lambda x: np.asarray(x) / c)


def polar_map() -> PhaseMap:
    """``(p1, p2, q1, q2) -> (p_rho, p_theta, rho, theta)``."""

    def fwd(x):
        p1, p2, q1, q2 = x
        rho = np.hypot(q1, q2)
        return np.array([(p1 * q1 + p2 * q2) / rho, q1 * p2 - q2 * p1, rho, np.arctan2(q2, q1)])

    def inv(y):
        pr, pt, rho, th = y
        c, s = np.cos(th), np.sin(th)
        return np.array([pr * c - pt * s / rho, pr * s + pt * c / rho, rho * c, rho * s])

    return PhaseMap(2, fwd, inv, angles_out=(3,))


def point_transformation(R: Callable, dR: Callable, ell: int) -> PhaseMap:
    """Lift ``q -> R(q)`` with momenta ``p' = (dR)^{-T} p``."""

    def fwd(x):
        p, q = x[:ell], x[ell:]
        return np.concatenate([np.linalg.solve(np.asarray(dR(q)).T, p), R(q)])

    return PhaseMap(ell, fwd)
