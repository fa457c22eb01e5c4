"""Command-line front end.

Every subcommand writes a JSON report (and a CSV table where natural) into
the output directory and prints the report path. Exit status is 0 on
success, 1 when a verification fails and 2 on usage errors.

A flat ``key = value`` config file may supply any option; command-line
flags take precedence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class Result:
    """Report of one subcommand run."""

    def __init__(self, report: dict, ok: bool = True, table: tuple | None = None):
        self.report = report
        self.ok = bool(ok)
        self.table = table  # (header, rows)


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def _floats(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def load_config(path: str) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line without '=': {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


# ---------------------------------------------------------------------------
# kepler
# ---------------------------------------------------------------------------


def _kepler_solve(a) -> Result:
    from .kepler import solve_kepler

    xi = solve_kepler(a.e, a.lam)
    res = abs(xi - a.e * math.sin(xi) - a.lam)
    return Result({"e": a.e, "lam": a.lam, "xi": xi, "residual": res}, res <= 1e-12)


def _kepler_series(a) -> Result:
    from .kepler import kepler_series_recursion, kepler_series_trees, lagrange_series

    coeffs, ok, checks = {}, True, {}
    for k in range(1, a.order + 1):
        s = kepler_series_recursion(k)
        coeffs[k] = {str(nu[0]): str(v) for nu, v in s.items()}
        lag = s.exact_equal(lagrange_series(k))
        checks[k] = {"lagrange": lag}
        ok &= lag
        if a.check_trees:
            tr = s.exact_equal(kepler_series_trees(k))
            checks[k]["trees"] = tr
            ok &= tr
    return Result({"order": a.order, "coefficients": coeffs, "checks": checks}, ok)


def _kepler_radius(a) -> Result:
    from .kepler import crude_radius_bounds, laplace_probes, laplace_radius

    r = laplace_radius()
    return Result({"radius": r, "probes": laplace_probes(), "crude_bounds": crude_radius_bounds()},
                  abs(r - 0.6627) <= 5e-4)


def _kepler_anomalies(a) -> Result:
    from .kepler import anomalies

    rng = np.random.default_rng(a.seed)
    rows, worst = [], 0.0
    pts = [(a.e, a.lam)] if a.samples == 0 else [
        (rng.uniform(0, 0.99), rng.uniform(-np.pi, np.pi)) for _ in range(a.samples)]
    for e, lam in pts:
        tr = anomalies(e, lam)
        r = max(tr.residuals().values())
        worst = max(worst, r)
        rows.append([e, lam, tr.xi, tr.theta, tr.rho_over_a, r])
    return Result({"samples": len(rows), "max_residual": worst, "first": rows[0]}, worst <= 1e-12,
                  (["e", "lam", "xi", "theta", "rho_over_a", "residual"], rows))


def _kepler_fg(a) -> Result:
    from .kepler import fg_leading_coefficients

    gx, gxy, fx, fxy = fg_leading_coefficients(a.fit_orders)
    ok = abs(gx - 1) <= 1e-3 and abs(fx - 2) <= 1e-3 and abs(gxy - 1) <= 1e-2 and abs(fxy - 2.5) <= 1e-2
    return Result({"g_x": gx, "g_xy": gxy, "f_x": fx, "f_xy": fxy}, ok)


def _kepler_r3bp(a) -> Result:
    from .kepler import r3bp_hamiltonian_delaunay, regularized_r3bp_hamiltonian
    from .kepler import regular_to_delaunay

    h = regularized_r3bp_hamiltonian(a.L, a.lam, a.p, a.q, a.eps)
    hp = regularized_r3bp_hamiltonian(a.L, a.lam, a.p, a.q, a.eps, form="printed")
    ref = r3bp_hamiltonian_delaunay(*regular_to_delaunay(a.L, a.lam, a.p, a.q), a.eps)
    return Result({"derived": h, "printed": hp, "delaunay": ref, "composition_error": abs(h - ref)},
                  abs(h - ref) <= 1e-10)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


def _potential(name: str):
    from .quadrature import Potential1D

    table = {"harmonic": Potential1D.harmonic, "quartic": Potential1D.quartic,
             "pendulum": Potential1D.pendulum}
    if name not in table:
        raise SystemExit(f"unknown potential {name!r}")
    return table[name]()


def _quad_period(a) -> Result:
    from .quadrature import period

    T = period(_potential(a.potential), a.E)
    return Result({"potential": a.potential, "E": a.E, "period": T}, math.isfinite(T))


def _quad_action(a) -> Result:
    from .quadrature import action_of_energy, energy_of_action

    pot = _potential(a.potential)
    A = action_of_energy(pot, a.E)
    E = energy_of_action(pot, A)
    return Result({"potential": a.potential, "E": a.E, "action": A, "roundtrip_error": abs(E - a.E)},
                  abs(E - a.E) <= 1e-9 * max(1, abs(a.E)))


def _quad_central(a) -> Result:
    from .quadrature import central_actions, central_frequencies

    if a.potential == "newton":
        V, dV = (lambda r: -1 / r), (lambda r: 1 / r**2)
    elif a.potential == "harmonic":
        V, dV = (lambda r: 0.5 * r * r), (lambda r: r)
    else:
        raise SystemExit(f"unknown central potential {a.potential!r}")
    w0, w1 = central_frequencies(V, dV, a.E, a.G)
    A = central_actions(V, dV, a.E, a.G)
    return Result({"omega_radial": w0, "omega_angular": w1, "ratio": w1 / w0, "actions": A})


def _quad_modes(a) -> Result:
    from .quadrature import normal_modes

    m = _floats(a.masses)
    n = len(m)
    K = np.zeros((n, n))
    for i in range(n):
        K[i, i] = 2.0
        if i + 1 < n:
            K[i, i + 1] = K[i + 1, i] = -1.0
    w, vecs = normal_modes(m, K)
    return Result({"masses": m, "frequencies": w, "modes": vecs})


def _quad_lax(a) -> Result:
    from .quadrature import LatticeState, lax_eigenvalue_drift

    rng = np.random.default_rng(a.seed)
    q = np.arange(a.n) * 1.5
    p = rng.uniform(-0.3, 0.3, size=a.n)
    r = lax_eigenvalue_drift(LatticeState(a.kind, p, q), a.t)
    return Result({"kind": a.kind, "n": a.n, "seed": a.seed, **r},
                  r["drift"] <= 1e-7 and r["entry_variation"] >= 1e-2)


def _quad_melnikov(a) -> Result:
    from .quadrature import melnikov_matrix

    def f(A, al, p, q):
        return (math.cos(al[0]) + math.sin(al[1])) * (math.cos(q) - 1.0)

    D, d = melnikov_matrix(f, [1.0, 1.0], [a.alpha1, a.alpha2], g=a.g, omega=(0.0, 0.0))
    # pendulum separatrix with g = 1 gives 16 |cos a1 sin a2|
    ref = 16 * abs(math.cos(a.alpha1) * math.sin(a.alpha2)) if a.g == 1.0 else None
    ok = ref is None or abs(d - ref) <= 1e-6
    return Result({"D": D, "abs_det": d, "closed_form": ref}, ok)


# ---------------------------------------------------------------------------
# canonical
# ---------------------------------------------------------------------------


def _canon_check(a) -> Result:
    from .canonical import identity_map, point_transformation, polar_map, scaling_map, symplectic_residual

    maps = {
        "identity": identity_map(2),
        "polar": polar_map(),
        "scaling": scaling_map(2),
        "point": point_transformation(lambda q: q + 0.1 * np.sin(q),
                                      lambda q: np.diag(1 + 0.1 * np.cos(q)), 2),
    }
    if a.map not in maps:
        raise SystemExit(f"unknown map {a.map!r}")
    rng = np.random.default_rng(a.seed)
    rows = []
    for _ in range(a.samples):
        x = rng.normal(size=4)
        rows.append([*x, symplectic_residual(maps[a.map], x)])
    worst = max(r[-1] for r in rows)
    return Result({"map": a.map, "seed": a.seed, "max_residual": worst, "tol": a.tol}, worst <= a.tol,
                  (["p1", "p2", "q1", "q2", "residual"], rows))


def _canon_bracket(a) -> Result:
    from .canonical import ObservableFn, jacobi_residual, poisson_bracket

    x = np.array(_floats(a.point))
    p = ObservableFn(1, lambda z: z[0])
    q = ObservableFn(1, lambda z: z[1])
    F = ObservableFn(1, lambda z: z[0] ** 2 * z[1])
    G = ObservableFn(1, lambda z: z[0] * z[1] ** 2)
    Q = ObservableFn(1, lambda z: np.sin(z[0]) + z[1])
    pq = poisson_bracket(p, q, x)
    jac = jacobi_residual(F, G, Q, x)
    return Result({"point": x, "p_q": pq, "jacobi": jac}, abs(pq - 1) <= 1e-10 and jac <= 1e-8)


_GENERATORS = {
    "phi": lambda a, b: a @ (b + 0.1 * np.sin(b)),
    "gamma": lambda a, b: a @ b + 0.1 * np.sum(np.cos(a + b)),
    "f": lambda a, b: -a @ b - 0.1 * np.sum(np.sin(a) * b**2),
    "g": lambda a, b: -a @ b + 0.05 * np.sum(a**2 * b),
}


def _canon_generate(a) -> Result:
    from .canonical import map_from_generating_function, symplectic_residual

    m = map_from_generating_function(_GENERATORS[a.family], 2, a.family)
    rng = np.random.default_rng(a.seed)
    worst = max(symplectic_residual(m, 0.5 * rng.normal(size=4)) for _ in range(a.samples))
    return Result({"family": a.family, "seed": a.seed, "max_residual": worst}, worst <= 1e-6)


# ---------------------------------------------------------------------------
# rigid body
# ---------------------------------------------------------------------------


def _rb_euler(a) -> Result:
    from .rigidbody import integrate_free_body

    r = integrate_free_body(_floats(a.inertia), np.array(_floats(a.omega)), a.t, samples=a.samples)
    rows = [[t, *w] for t, w in zip(r.t, r.omega)]
    return Result({"K_drift": r.K_drift, "G2_drift": r.G2_drift},
                  max(r.K_drift, r.G2_drift) <= 1e-10, (["t", "w1", "w2", "w3"], rows))


def _rb_deprit(a) -> Result:
    from .rigidbody import verify_deprit_canonicity

    rng = np.random.default_rng(a.seed)
    rows = []
    for _ in range(a.samples):
        x = np.concatenate([rng.normal(size=3), [rng.uniform(0.3, 2.8)], rng.uniform(-3, 3, size=2)])
        rows.append([*x, verify_deprit_canonicity(x)])
    worst = max(r[-1] for r in rows)
    return Result({"samples": a.samples, "seed": a.seed, "max_residual": worst}, worst <= 1e-6,
                  (["p_phi", "p_psi", "p_theta", "theta", "phi", "psi", "residual"], rows))


def _rb_quadratures(a) -> Result:
    from .rigidbody import kinetic_energy, momentum_squared, rigid_body_periods

    I = _floats(a.inertia)
    w = np.array(_floats(a.omega))
    E, G = kinetic_energy(I, w), math.sqrt(momentum_squared(I, w))
    M = np.asarray(I) * w
    P = rigid_body_periods(I, E, G, math.atan2(M[0], M[1]))
    return Result({"E": E, "G": G, **P})


def _rb_gyroscope(a) -> Result:
    from .rigidbody import gyroscope_hamiltonian, integrate_gyroscope

    y0 = np.array(_floats(a.state))
    sol = integrate_gyroscope(a.I, a.I3, a.m, a.grav, a.h, y0, a.t)
    H = [gyroscope_hamiltonian(a.I, a.I3, a.m, a.grav, a.h, *sol.y[:3, k], sol.y[5, k])
         for k in range(sol.y.shape[1])]
    drift = max(abs(v - H[0]) for v in H)
    rows = [[t, *sol.y[:, k]] for k, t in enumerate(sol.t)]
    return Result({"energy_drift": drift}, drift <= 1e-9,
                  (["t", "M3", "L", "G", "gamma", "psi", "phi"], rows))


# ---------------------------------------------------------------------------
# lindstedt
# ---------------------------------------------------------------------------


def _omega():
    from .core import golden_frequency

    return golden_frequency()


def _lind_torus(a) -> Result:
    from .lindstedt import build_torus, default_perturbation, torus_residual, verify_torus_flow

    T = build_torus(default_perturbation(), _omega(), a.K)
    res = torus_residual(T, a.eps)
    rep = {"K": a.K, "eps": a.eps, "residual": res, "series": json.loads(T.to_json())}
    ok = True
    if a.verify_flow:
        dev = verify_torus_flow(T, a.eps, (0.3, 0.5), a.t)["max_deviation"]
        rep["flow_deviation"] = dev
        ok = dev <= 1e-8
    return Result(rep, ok, (["eps", "K", "residual"], [[a.eps, a.K, res]]))


def _lind_birkhoff(a) -> Result:
    from .core import GOLDEN
    from .lindstedt import birkhoff_conjugacy_error, birkhoff_series, default_perturbation

    f = default_perturbation()
    B = birkhoff_series(f, (1.0, GOLDEN), a.K)
    err = birkhoff_conjugacy_error(f, (1.0, GOLDEN), a.eps, t_final=a.t)
    mm = B.convention_mismatch()
    return Result({"eps": a.eps, "conjugacy_error": err, **mm},
                  err <= 1e-8 and mm["derived_vs_taylor"] <= 1e-12 and mm["printed_shifted"] <= 1e-12)


def _lind_resonant(a) -> Result:
    from .core import FourierSeries, FrequencyVector
    from .lindstedt import resonant_lindstedt, resonant_residual

    f = FourierSeries.cosine((0, 1)) + FourierSeries.cosine((1, 1))
    R = resonant_lindstedt(f, FrequencyVector((1.0,)), [math.pi], order=2)
    res = resonant_residual(R, f)
    rep = {"h1": R.h[1].to_records(), "k1": R.k[1].to_records(), "h2": R.h[2].to_records(),
           "k2": R.k[2].to_records(), "kbar": R.kbar[1:], "residual": res}
    return Result(rep, max(res.values()) <= 1e-12)


def _lind_obstruction(a) -> Result:
    from .core import FourierSeries
    from .lindstedt import poincare_obstruction_scan

    f = FourierSeries.cosine(_ints(a.nu))
    hits = poincare_obstruction_scan(f, lambda A: np.asarray(A, dtype=float),
                                     [(0.5, 1.5), (0.5, 1.5)], a.N)
    return Result({"nu": _ints(a.nu), "hits": [{"nu": h["nu"], "points": h["points"]} for h in hits]})


def _lind_resum(a) -> Result:
    from .lindstedt import cluster_matrix, default_perturbation, geometric_propagator, resummed_propagator

    w = _omega()
    nu = tuple(_ints(a.nu))
    C = cluster_matrix(default_perturbation(), w, nu, a.k_max)
    M = C.value(a.eps)
    R = resummed_propagator(nu, M, w)
    S = geometric_propagator(nu, M, w, 10)
    err = float(np.max(np.abs(R - S)))
    return Result({"cluster": C.to_dict(), "M": M, "propagator": R, "geometric_error": err},
                  float(np.max(np.abs(C.coeffs[1]))) <= 1e-14)


def _lind_genfun(a) -> Result:
    from .lindstedt import build_torus, default_perturbation, torus_generating_function

    T = build_torus(default_perturbation(), _omega(), a.K)
    g = torus_generating_function(T, a.eps)
    return Result({"a": g["a"], "exactness": g["exactness"], "torus_error": g["torus_error"],
                   "G": g["G"].to_records()}, g["exactness"] <= 1e-8)


# ---------------------------------------------------------------------------
# trees and suite
# ---------------------------------------------------------------------------


def _trees_enumerate(a) -> Result:
    from .trees import enumerate_trees

    alphabet = [tuple(_ints(s)) for s in a.alphabet.split(";")]
    trees = [t.to_dict() for t in enumerate_trees(a.order, alphabet)]
    return Result({"order": a.order, "count": len(trees), "trees": trees})


def _trees_census(a) -> Result:
    from .trees import siegel_scan

    r = siegel_scan(_omega(), a.k_max, a.N)
    return Result(r, not r["violations"])


def _suite(a) -> Result:
    from .acceptance import run_suite

    res = run_suite(a.name, echo=print)
    rep = {"suite": a.name, "passed": sum(r.passed for r in res), "total": len(res),
           "criteria": [r.to_dict() for r in res]}
    return Result(rep, all(r.passed for r in res))


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add(sub, name: str, fn: Callable, opts: list) -> argparse.ArgumentParser:
    p = sub.add_parser(name)
    for flags, kw in opts:
        p.add_argument(*flags, **kw)
    p.set_defaults(func=fn, _name=name)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamiltonia", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="flat key = value file")
    parser.add_argument("--out-dir", default="hamiltonia-out", help="artifact directory")
    parser.add_argument("--seed", type=int, default=0)
    groups = parser.add_subparsers(dest="group", required=True)

    F, I, S = float, int, str
    kep = groups.add_parser("kepler").add_subparsers(dest="cmd", required=True)
    _add(kep, "solve", _kepler_solve, [(("--e",), dict(type=F, default=0.3)),
                                       (("--lam",), dict(type=F, default=1.0))])
    _add(kep, "series", _kepler_series, [(("--order",), dict(type=I, default=6)),
                                         (("--check-trees",), dict(action="store_true"))])
    _add(kep, "radius", _kepler_radius, [])
    _add(kep, "anomalies", _kepler_anomalies, [(("--e",), dict(type=F, default=0.1)),
                                               (("--lam",), dict(type=F, default=1.0)),
                                               (("--samples",), dict(type=I, default=0))])
    _add(kep, "fg", _kepler_fg, [(("--fit-orders",), dict(type=I, default=9))])
    _add(kep, "r3bp", _kepler_r3bp, [(("--L",), dict(type=F, default=1.3)),
                                     (("--lam",), dict(type=F, default=0.7)),
                                     (("--p",), dict(type=F, default=0.2)),
                                     (("--q",), dict(type=F, default=-0.1)),
                                     (("--eps",), dict(type=F, default=0.05))])

    quad = groups.add_parser("quadrature").add_subparsers(dest="cmd", required=True)
    pot = (("--potential",), dict(default="quartic"))
    _add(quad, "period", _quad_period, [pot, (("--E",), dict(type=F, default=1.0))])
    _add(quad, "action", _quad_action, [pot, (("--E",), dict(type=F, default=1.0))])
    _add(quad, "central", _quad_central, [(("--potential",), dict(default="newton")),
                                          (("--E",), dict(type=F, default=-0.5)),
                                          (("--G",), dict(type=F, default=0.8))])
    _add(quad, "modes", _quad_modes, [(("--masses",), dict(default="1,2"))])
    _add(quad, "lax", _quad_lax, [(("--kind",), dict(default="toda")),
                                  (("--n",), dict(type=I, default=3)),
                                  (("--t",), dict(type=F, default=10.0))])
    _add(quad, "melnikov", _quad_melnikov, [(("--alpha1",), dict(type=F, default=0.3)),
                                            (("--alpha2",), dict(type=F, default=1.1)),
                                            (("--g",), dict(type=F, default=1.0))])

    can = groups.add_parser("canonical").add_subparsers(dest="cmd", required=True)
    _add(can, "check", _canon_check, [(("--map",), dict(default="polar")),
                                      (("--samples",), dict(type=I, default=10)),
                                      (("--tol",), dict(type=F, default=1e-6))])
    _add(can, "bracket", _canon_bracket, [(("--point",), dict(default="1.0,2.0"))])
    _add(can, "generate", _canon_generate, [(("--family",), dict(default="phi", choices=list(_GENERATORS))),
                                            (("--samples",), dict(type=I, default=10))])

    rb = groups.add_parser("rigidbody").add_subparsers(dest="cmd", required=True)
    _add(rb, "euler", _rb_euler, [(("--inertia",), dict(default="1,2,3")),
                                  (("--omega",), dict(default="0.3,-0.5,0.8")),
                                  (("--t",), dict(type=F, default=100.0)),
                                  (("--samples",), dict(type=I, default=201))])
    _add(rb, "deprit-check", _rb_deprit, [(("--samples",), dict(type=I, default=100))])
    _add(rb, "quadratures", _rb_quadratures, [(("--inertia",), dict(default="1,2,3")),
                                              (("--omega",), dict(default="0.3,-0.5,0.8"))])
    _add(rb, "gyroscope", _rb_gyroscope, [(("--I",), dict(type=F, default=1.0)),
                                          (("--I3",), dict(type=F, default=2.0)),
                                          (("--m",), dict(type=F, default=1.0)),
                                          (("--grav",), dict(type=F, default=1.0)),
                                          (("--h",), dict(type=F, default=0.7)),
                                          (("--state",), dict(default="0.5,0.8,1.3,0.2,0.4,1.1")),
                                          (("--t",), dict(type=F, default=20.0))])

    lin = groups.add_parser("lindstedt").add_subparsers(dest="cmd", required=True)
    _add(lin, "torus", _lind_torus, [(("--K",), dict(type=I, default=8)),
                                     (("--eps",), dict(type=F, default=1e-3)),
                                     (("--verify-flow",), dict(action="store_true")),
                                     (("--t",), dict(type=F, default=10.0))])
    _add(lin, "birkhoff", _lind_birkhoff, [(("--K",), dict(type=I, default=6)),
                                           (("--eps",), dict(type=F, default=0.05)),
                                           (("--t",), dict(type=F, default=10.0))])
    _add(lin, "resonant", _lind_resonant, [])
    _add(lin, "obstruction", _lind_obstruction, [(("--nu",), dict(default="1,-1")),
                                                 (("--N",), dict(type=I, default=2))])
    _add(lin, "resum", _lind_resum, [(("--nu",), dict(default="1,0")),
                                     (("--k-max",), dict(type=I, default=2)),
                                     (("--eps",), dict(type=F, default=1e-3))])
    _add(lin, "genfun", _lind_genfun, [(("--K",), dict(type=I, default=8)),
                                       (("--eps",), dict(type=F, default=1e-3))])

    tr = groups.add_parser("trees").add_subparsers(dest="cmd", required=True)
    _add(tr, "enumerate", _trees_enumerate, [(("--order",), dict(type=I, default=3)),
                                             (("--alphabet",), dict(default="1;-1"))])
    _add(tr, "census", _trees_census, [(("--k-max",), dict(type=I, default=4)),
                                       (("--N",), dict(type=I, default=2))])

    su = groups.add_parser("suite")
    su.add_argument("name", help="fast or full")
    su.add_argument("--out", help="summary JSON path")
    su.set_defaults(func=_suite, _name="suite", cmd=None)
    return parser


def _subparser(parser: argparse.ArgumentParser, argv: list[str]):
    """The innermost parser selected by ``argv``."""
    p = parser
    for tok in argv:
        acts = [a for a in p._actions if isinstance(a, argparse._SubParsersAction)]
        if acts and tok in acts[0].choices:
            p = acts[0].choices[tok]
    return p


def _apply_config(parser, sub, argv, cfg: dict) -> None:
    """Install config values as defaults so explicit flags still win."""
    for target in (parser, sub):
        for act in target._actions:
            if act.dest in cfg:
                raw = cfg[act.dest]
                if isinstance(act, argparse._StoreTrueAction):
                    val = raw.lower() in ("1", "true", "yes", "on")
                elif act.type is not None:
                    val = act.type(raw)
                else:
                    val = raw
                target.set_defaults(**{act.dest: val})


def run(argv: list[str] | None = None) -> int:
    """Execute one subcommand and return its exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        pre, _ = argparse.ArgumentParser(add_help=False).parse_known_args(argv)
    except SystemExit:
        return EXIT_USAGE
    cfg_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            cfg_path = argv[i + 1]
        elif tok.startswith("--config="):
            cfg_path = tok.split("=", 1)[1]
    try:
        if cfg_path:
            _apply_config(parser, _subparser(parser, argv), argv, load_config(cfg_path))
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.group == "suite" and args.name not in ("fast", "full"):
        _subparser(parser, ["suite"]).print_help(sys.stderr)
        print(f"error: unknown suite {args.name!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = args.func(args)
    except SystemExit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # library errors surface as verification failures
        result = Result({"error": f"{type(exc).__name__}: {exc}"}, ok=False)
    _write(args, result)
    return EXIT_OK if result.ok else EXIT_FAIL


def _write(args, result: Result) -> None:
    stem = args.group if args.cmd is None else f"{args.group}-{args.cmd}"
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "_name")}
    doc = {"command": stem, "params": _plain(params), "seed": args.seed, "ok": result.ok,
           "report": _plain(result.report)}
    text = json.dumps(doc, sort_keys=True, indent=1)
    if args.group == "suite" and getattr(args, "out", None):
        path = Path(args.out)
        path.parent.mkdir(parents=True, exist_ok=True)
    else:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{stem}.json"
    path.write_text(text + "\n")
    if result.table is not None:
        header, rows = result.table
        cpath = path.with_suffix(".csv")
        with cpath.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    print(json.dumps({"command": stem, "ok": result.ok, "report": str(path)}))


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
