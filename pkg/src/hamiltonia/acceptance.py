"""Acceptance battery shared by the test suite and the ``suite`` subcommand.

Each check returns a :class:`CriterionResult`; none of them raise on
failure. Expected values come from closed forms, exact arithmetic or
independent integrations, never from the routine under test.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["CriterionResult", "CRITERIA", "FAST", "run_criterion", "run_suite"]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number:2d} [{tag}] {self.name} ({self.seconds:.1f} s)"

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "details": _plain(self.details),
        }


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    return x


# ---------------------------------------------------------------------------
# individual criteria
# ---------------------------------------------------------------------------


def c01_kepler_exactness() -> tuple[bool, dict]:
    from .kepler import kepler_series_recursion, kepler_series_trees, lagrange_series

    trees = all(kepler_series_recursion(k).exact_equal(kepler_series_trees(k)) for k in range(1, 9))
    lagr = all(kepler_series_recursion(k).exact_equal(lagrange_series(k)) for k in range(1, 13))
    return trees and lagr, {"trees_k1_8": trees, "lagrange_k1_12": lagr}


def c02_laplace_radius() -> tuple[bool, dict]:
    from .kepler import crude_radius_bounds, laplace_radius

    r = laplace_radius()
    b1, b2 = crude_radius_bounds()
    ok = abs(r - 0.6627) <= 5e-4 and b1 == 0.25 and abs(b2 - 0.3678) <= 1e-4
    return ok, {"radius": r, "bound_4k": b1, "bound_cayley": b2}


def c03_kepler_solver(seed: int = 0) -> tuple[bool, dict]:
    from .kepler import series_eval, solve_kepler

    rng = np.random.default_rng(seed)
    worst = 0.0
    fails = 0
    for _ in range(1000):
        e = rng.uniform(0.0, 0.6)
        lam = rng.uniform(-np.pi, np.pi)
        err = abs(series_eval(e, lam, 15) - (solve_kepler(e, lam) - lam))
        worst = max(worst, err)
        fails += err > 1e-8
    return worst <= 1e-8, {"max_error": worst, "samples_above_tol": int(fails), "seed": seed}


def c04_anomalies_fg(seed: int = 0) -> tuple[bool, dict]:
    from .kepler import anomalies, fg_leading_coefficients

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        tr = anomalies(rng.uniform(0.0, 0.99), rng.uniform(-np.pi, np.pi))
        worst = max(worst, max(tr.residuals().values()))
    gx, gxy, fx, fxy = fg_leading_coefficients()
    lin = max(abs(gx - 1.0), abs(fx - 2.0))
    quad = max(abs(gxy - 1.0), abs(fxy - 2.5))
    ok = worst <= 1e-12 and lin <= 1e-3 and quad <= 1e-2
    return ok, {"identity_residual": worst, "coefficients": [gx, gxy, fx, fxy], "seed": seed}


def c05_zero_current() -> tuple[bool, dict]:
    from .kepler import zero_current_sum

    nonzero = {k: [nu for nu, v in zero_current_sum(k).items() if v] for k in range(2, 7)}
    return not any(nonzero.values()), {"nonzero_harmonics": nonzero}


def c06_coefficient_bound() -> tuple[bool, dict]:
    from .kepler import kepler_series_recursion

    ratios = {k: kepler_series_recursion(k).l1_norm() / 4.0**k for k in range(1, 13)}
    return max(ratios.values()) <= 1.0, {"l1_over_4k": ratios}


def c07_siegel_census() -> tuple[bool, dict]:
    from .core import golden_frequency
    from .trees import siegel_scan

    r = siegel_scan(golden_frequency(), 6, 2)
    return not r["violations"], {"violations": r["violations"], "max_counts": r["max_counts"]}


def c08_lindstedt_torus() -> tuple[bool, dict]:
    from .core import golden_frequency
    from .lindstedt import build_torus, default_perturbation, torus_residual, verify_torus_flow

    T = build_torus(default_perturbation(), golden_frequency(), 8)
    res = torus_residual(T, 1e-3)
    r1 = torus_residual(T, 1e-3, dps=50)
    r2 = torus_residual(T, 2e-3, dps=50)
    ratio = r2 / r1 / 2.0**9
    dev = verify_torus_flow(T, 1e-3, (0.3, 0.5), 10.0)["max_deviation"]
    ok = res <= 1e-15 and dev <= 1e-8 and 0.75 <= ratio <= 1.25
    return ok, {"residual": res, "residual_mp": r1, "doubling_ratio_over_2^9": ratio, "flow_deviation": dev}


def c09_birkhoff() -> tuple[bool, dict]:
    from .core import GOLDEN, FourierSeries
    from .errors import ResonantDenominator
    from .lindstedt import birkhoff_conjugacy_error, default_perturbation

    f = default_perturbation()
    err = birkhoff_conjugacy_error(f, (1.0, GOLDEN), 0.05, t_final=10.0)
    raised = []
    for fx, eps in ((FourierSeries.cosine((1, -1)), 1.0 - GOLDEN), (f, -1.0 - GOLDEN)):
        try:
            birkhoff_conjugacy_error(fx, (1.0, GOLDEN), eps)
            raised.append(False)
        except ResonantDenominator:
            raised.append(True)
    ok = err <= 1e-8 and all(raised)
    return ok, {"conjugacy_error": err, "resonant_raised": raised}


def c10_resummation() -> tuple[bool, dict]:
    from .core import golden_frequency
    from .lindstedt import (
        build_torus,
        cluster_matrix,
        default_perturbation,
        geometric_propagator,
        resummed_propagator,
        smallest_divisors,
        torus_generating_function,
    )

    w = golden_frequency()
    f = default_perturbation()
    eps = 1e-2
    order1 = 0.0
    ratios = []
    for nu in smallest_divisors(w, 20, 30):
        cm = cluster_matrix(f, w, nu, 2)
        order1 = max(order1, float(np.max(np.abs(cm.coeffs[1]))))
        ratios.append(np.linalg.norm(cm.value(eps), 2) / (eps**2 * w.dot(nu) ** 2))
    divisor_spread = max(1 / w.dot(n) ** 2 for n in smallest_divisors(w, 20, 30)) / min(
        1 / w.dot(n) ** 2 for n in smallest_divisors(w, 20, 30)
    )
    spread = max(ratios) / min(ratios)
    M = cluster_matrix(f, w, (1, 0), 4).value(1e-3)
    prop = float(np.max(np.abs(resummed_propagator((1, 0), M, w) - geometric_propagator((1, 0), M, w, 10))))
    gen = torus_generating_function(build_torus(f, w, 8), 1e-3)
    ok = (
        order1 <= 1e-14
        and np.all(np.isfinite(ratios))
        and spread <= 10.0
        and prop <= 1e-15
        and gen["exactness"] <= 1e-8
    )
    return ok, {
        "order_eps_max": order1,
        "ratio_min": min(ratios),
        "ratio_max": max(ratios),
        "ratio_spread": spread,
        "inverse_divisor_spread": divisor_spread,
        "propagator_error": prop,
        "exactness": gen["exactness"],
        "torus_error": gen["torus_error"],
    }


def c11_canonicity(seed: int = 0) -> tuple[bool, dict]:
    from .canonical import (
        ObservableFn,
        identity_map,
        jacobi_residual,
        point_transformation,
        polar_map,
        scaling_map,
        symplectic_residual,
    )
    from .rigidbody import verify_deprit_canonicity

    rng = np.random.default_rng(seed)
    R = lambda q: q + 0.1 * np.sin(q)  # noqa: E731
    dR = lambda q: np.diag(1 + 0.1 * np.cos(q))  # noqa: E731
    pts = [rng.normal(size=4) for _ in range(10)]
    good = max(
        max(symplectic_residual(m, x) for x in pts)
        for m in (identity_map(2), polar_map(), point_transformation(R, dR, 2))
    )
    scaling = symplectic_residual(scaling_map(2), pts[0])
    F = ObservableFn(2, lambda x: x[0] ** 2 * x[2] + np.sin(x[3]))
    G = ObservableFn(2, lambda x: x[1] * x[2] ** 2 + x[0] * x[3])
    Q = ObservableFn(2, lambda x: np.cos(x[0]) * x[1] + x[2] * x[3])
    jac = max(jacobi_residual(F, G, Q, x) for x in pts[:3])
    dep = 0.0
    for _ in range(100):
        x = np.concatenate([rng.normal(size=3), [rng.uniform(0.3, 2.8)], rng.uniform(-3, 3, size=2)])
        dep = max(dep, verify_deprit_canonicity(x))
    ok = good <= 1e-6 and scaling > 1e-6 and jac <= 1e-8 and dep <= 1e-6
    return ok, {"accepted_max": good, "scaling_residual": scaling, "jacobi": jac, "deprit_max": dep, "seed": seed}


def _free_body_events(I, w0, t_final, psi0, direction):
    from .quadrature import integrate_ode
    from .rigidbody import euler_rhs

    Iv = np.asarray(I, dtype=float)

    def ev(t, y):
        M = Iv * y
        return M[0] * math.cos(psi0) - M[1] * math.sin(psi0)

    ev.direction = direction
    sol = integrate_ode(lambda t, y: euler_rhs(Iv, y), (0.0, t_final), w0, events=ev,
                        rtol=1e-13, atol=1e-14, dense_output=True)
    return sol


def c12_rigid_body(seed: int = 0) -> tuple[bool, dict]:
    from .rigidbody import (
        integrate_free_body,
        kinetic_energy,
        momentum_squared,
        rigid_body_periods,
        zxz_angles,
        zxz_matrix,
    )

    rng = np.random.default_rng(seed)
    drift = 0.0
    for _ in range(3):
        I = np.sort(rng.uniform(0.5, 3.0, size=3))
        r = integrate_free_body(I, rng.normal(size=3), 100.0, samples=201)
        drift = max(drift, r.K_drift, r.G2_drift)

    # symmetric top: psi advances at L (1/I3 - 1/I1)
    Is = (1.0, 1.0, 3.0)
    w0 = np.array([0.6, -0.2, 0.5])
    run = integrate_free_body(Is, w0, 10.0, samples=2001)
    M = np.asarray(Is) * run.omega
    psi = np.unwrap(np.arctan2(M[:, 0], M[:, 1]))
    L = Is[2] * w0[2]
    rate = (psi[-1] - psi[0]) / run.t[-1]
    sym = abs(rate - L * (1 / Is[2] - 1 / Is[0])) / abs(L * (1 / Is[2] - 1 / Is[0]))

    # periods vs direct integration, rotation and libration regimes
    I = (1.0, 2.0, 3.0)
    per = {}
    worst = 0.0
    for w0 in ([0.3, -0.5, 0.8], [1.0, 0.2, 0.1]):
        w0 = np.array(w0)
        E, G = kinetic_energy(I, w0), math.sqrt(momentum_squared(I, w0))
        Mb = np.asarray(I) * w0
        psi0 = math.atan2(Mb[0], Mb[1])
        P = rigid_body_periods(I, E, G, psi0)
        # crossing direction of the event function at t = 0
        Md = np.cross(Mb, w0)
        dpsi = float(np.sign(Md[0] * math.cos(psi0) - Md[1] * math.sin(psi0)))
        sol = _free_body_events(I, w0, 3 * P["T_L"], psi0, dpsi)
        t_ev = [t for t in sol.t_events[0] if t > 1e-6]
        T_num = t_ev[0]
        # phi advance over one psi period in the momentum frame
        theta = math.acos(Mb[2] / G)
        R0 = zxz_matrix(0.0, theta, psi0)
        fb = integrate_free_body(I, w0, T_num, samples=4001, R0=R0)
        phis = np.unwrap([zxz_angles(fb.rotation(k))[0] for k in range(len(fb.t))])
        dphi = phis[-1] - phis[0]
        TG_num = 2 * np.pi * T_num / dphi
        eT = abs(T_num - P["T_L"]) / P["T_L"]
        eG = abs(TG_num - P["T_G"]) / abs(P["T_G"])
        per[P["regime"]] = {"T_L": P["T_L"], "T_L_num": T_num, "T_G": P["T_G"], "T_G_num": TG_num}
        worst = max(worst, eT, eG)
    ok = drift <= 1e-10 and sym <= 1e-10 and worst <= 1e-4
    return ok, {"invariant_drift": drift, "symmetric_top_rel_error": sym, "period_rel_error": worst,
                "periods": per, "seed": seed}


def c13_lax() -> tuple[bool, dict]:
    from .quadrature import LatticeState, lax_eigenvalue_drift

    cases = {
        "toda2": LatticeState("toda", [0.3, -0.1], [0.0, 1.0]),
        "toda3": LatticeState("toda", [0.3, -0.1, 0.2], [0.0, 1.0, 2.5]),
        "calogero3": LatticeState("calogero", [0.3, -0.1, 0.2], [0.0, 1.5, 3.0]),
    }
    out = {}
    ok = True
    for name, st in cases.items():
        r = lax_eigenvalue_drift(st, 10.0)
        out[name] = {"drift": r["drift"], "entry_variation": r["entry_variation"]}
        ok &= r["drift"] <= 1e-7 and r["entry_variation"] >= 1e-2
    return ok, out


def c14_melnikov() -> tuple[bool, dict]:
    from .quadrature import melnikov_matrix

    def f(A, a, p, q):
        return (math.cos(a[0]) + math.sin(a[1])) * (math.cos(q) - 1.0)

    worst = 0.0
    for a in ([0.3, 1.1], [1.0, -0.4], [2.5, 2.0]):
        _, d = melnikov_matrix(f, [1.0, 1.0], a, g=1.0, omega=(0.0, 0.0))
        worst = max(worst, abs(d - 16 * abs(math.cos(a[0]) * math.sin(a[1]))))
    return worst <= 1e-6, {"max_abs_error": worst}


def c15_regularization() -> tuple[bool, dict]:
    from .kepler import r3bp_hamiltonian_delaunay, regular_to_delaunay, regularized_r3bp_hamiltonian

    L, lam, eps = 1.3, 0.7, 0.05

    def H(p, q):
        return regularized_r3bp_hamiltonian(L, lam, p, q, eps)

    def hess(p, q, h=1e-3):
        return np.array([
            [(H(p + h, q) - 2 * H(p, q) + H(p - h, q)) / h**2,
             (H(p + h, q + h) - H(p + h, q - h) - H(p - h, q + h) + H(p - h, q - h)) / (4 * h * h)],
            [0.0, (H(p, q + h) - 2 * H(p, q) + H(p, q - h)) / h**2],
        ])

    d = 1e-7
    offsets = [(d, 0.0), (0.0, d), (-d, d), (d, -d)]
    val = max(abs(H(a, b) - H(0.0, 0.0)) for a, b in offsets)
    sec = max(float(np.max(np.abs(hess(a, b) - hess(0.0, 0.0)))) for a, b in offsets)
    comp = 0.0
    G = 0.1
    for gam in np.linspace(0.0, 2 * np.pi, 7):
        p, q = math.sqrt(2 * G) * math.cos(gam), math.sqrt(2 * G) * math.sin(gam)
        comp = max(comp, abs(regularized_r3bp_hamiltonian(L, lam, p, q, eps)
                             - r3bp_hamiltonian_delaunay(*regular_to_delaunay(L, lam, p, q), eps)))
    ok = val <= 1e-6 and sec <= 1e-6 and comp <= 1e-10
    return ok, {"value_jump": val, "second_difference_jump": sec, "composition_error": comp}


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("Kepler series exactness", c01_kepler_exactness),
    2: ("Laplace radius", c02_laplace_radius),
    3: ("Kepler solver cross-check", c03_kepler_solver),
    4: ("anomaly identities and f/g coefficients", c04_anomalies_fg),
    5: ("zero-current cancellation", c05_zero_current),
    6: ("coefficient bound 4^k", c06_coefficient_bound),
    7: ("Siegel census", c07_siegel_census),
    8: ("Lindstedt torus", c08_lindstedt_torus),
    9: ("Birkhoff conjugacy", c09_birkhoff),
    10: ("scale-0 resummation and generating function", c10_resummation),
    11: ("canonicity battery", c11_canonicity),
    12: ("rigid body", c12_rigid_body),
    13: ("Lax conservation", c13_lax),
    14: ("Melnikov determinant", c14_melnikov),
    15: ("regularization", c15_regularization),
}

# criteria cheap enough for the fast suite
FAST = tuple(n for n in CRITERIA if n != 7)


def run_criterion(n: int) -> CriterionResult:
    name, fn = CRITERIA[n]
    t0 = time.perf_counter()
    try:
        ok, det = fn()
    except Exception as exc:  # reported as a failure, not raised
        ok, det = False, {"error": f"{type(exc).__name__}: {exc}"}
    return CriterionResult(n, name, bool(ok), det, time.perf_counter() - t0)


def run_suite(name: str = "full", echo: Callable[[str], None] | None = None) -> list[CriterionResult]:
    if name not in ("fast", "full"):
        raise ValueError("suite must be 'fast' or 'full'")
    nums = FAST if name == "fast" else tuple(CRITERIA)
    out = []
    for n in nums:
        r = run_criterion(n)
        if echo:
            echo(r.line())
        out.append(r)
    return out
