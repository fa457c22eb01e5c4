"""Fourier algebra on the torus, frequency vectors and exact scalars.

The containers here are immutable; every operation returns a new object.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DiophantineViolation, TruncationExceeded

__all__ = [
    "GaussianRational",
    "ScalarTower",
    "HarmonicVector",
    "harmonic_norm",
    "FourierSeries",
    "fourier_eval",
    "FrequencyVector",
    "small_divisor",
    "golden_frequency",
    "GOLDEN",
    "DEFAULT_RTOL",
]

DEFAULT_RTOL = 1e-10
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

HarmonicVector = tuple


def harmonic_norm(nu: Sequence[int]) -> int:
    """Return the l1 norm ``sum(|nu_i|)`` of an integer vector."""
    return int(sum(abs(int(x)) for x in nu))


# ---------------------------------------------------------------------------
# exact scalars
# ---------------------------------------------------------------------------


class GaussianRational:
    """Exact complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _coerce(x) -> "GaussianRational":
        if isinstance(x, GaussianRational):
            return x
        if isinstance(x, (int, Fraction)):
            return GaussianRational(x, 0)
        raise TypeError(f"cannot mix GaussianRational with {type(x).__name__}")

    def __add__(self, other):
        o = self._coerce(other)
        return GaussianRational(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return GaussianRational(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other):
        o = self._coerce(other)
        return GaussianRational(
            self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        den = o.re * o.re + o.im * o.im
        if den == 0:
            raise ZeroDivisionError("GaussianRational division by zero")
        num = self * o.conjugate()
        return GaussianRational(num.re / den, num.im / den)

    def __pow__(self, n: int):
        if n < 0:
            return GaussianRational(1) / (self ** (-n))
        out = GaussianRational(1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __eq__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def abs_exact(self):
        """Exact modulus when one part vanishes, else ``None``."""
        if self.im == 0:
            return abs(self.re)
        if self.re == 0:
            return abs(self.im)
        return None

    def __abs__(self):
        a = self.abs_exact()
        return float(a) if a is not None else abs(complex(self))

    def __repr__(self):
        return f"GaussianRational({self.re}, {self.im})"

    @classmethod
    def i(cls) -> "GaussianRational":
        return cls(0, 1)


@dataclass(frozen=True)
class ScalarTower:
    """A tagged scalar: ``exact-rational`` or ``float64``.

    Float comparisons always go through :meth:`close` with an explicit
    tolerance; exact values compare by equality.
    """

    tag: str
    value: object

    def __post_init__(self):
        if self.tag not in ("exact-rational", "float64"):
            raise ValueError(f"unknown scalar tag {self.tag!r}")

    @classmethod
    def exact(cls, x) -> "ScalarTower":
        if isinstance(x, GaussianRational):
            return cls("exact-rational", x)
        return cls("exact-rational", GaussianRational(Fraction(x)))

    @classmethod
    def float64(cls, x) -> "ScalarTower":
        return cls("float64", complex(x))

    def close(self, other: "ScalarTower", tol: float = DEFAULT_RTOL) -> bool:
        if self.tag == other.tag == "exact-rational":
            return self.value == other.value
        a, b = complex(self.value), complex(other.value)
        return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


# ---------------------------------------------------------------------------
# Fourier series
# ---------------------------------------------------------------------------


def _is_zero(c) -> bool:
    if isinstance(c, np.ndarray):
        return not np.any(c)
    return not c


def _as_key(nu: Iterable[int]) -> tuple:
    return tuple(int(x) for x in nu)


class FourierSeries:
    """Finite Fourier series on the ``dim``-torus.

    Parameters
    ----------
    coeffs : mapping
        ``nu -> coefficient``. Coefficients may be complex scalars,
        :class:`GaussianRational` values or complex numpy vectors.
        Zero coefficients are dropped.
    dim : int
        Torus dimension.
    degree : int, optional
        Declared truncation degree. Defaults to the largest l1 norm in
        the support. Coefficients beyond it raise
        :class:`TruncationExceeded`.
    real : bool
        Flag asserting ``c(-nu) == conj(c(nu))``. Checked on construction.
    """

    __slots__ = ("_c", "dim", "degree", "real")

    def __init__(
        self,
        coeffs: Mapping | None = None,
        dim: int = 1,
        degree: int | None = None,
        real: bool = False,
    ):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        c = {}
        for k, v in (coeffs or {}).items():
            key = _as_key(k if isinstance(k, Iterable) else (k,))
            if len(key) != dim:
                raise ValueError(f"harmonic {key} has wrong dimension")
            if isinstance(v, (list, tuple)):
                v = np.asarray(v, dtype=complex)
            if isinstance(v, np.ndarray):
                v = v.copy()
                v.setflags(write=False)
            if not _is_zero(v):
                c[key] = v
        top = max((harmonic_norm(k) for k in c), default=0)
        if degree is None:
            degree = top
        elif top > degree:
            raise TruncationExceeded(
                f"support reaches |nu|={top} beyond declared degree {degree}"
            )
        self._c = c
        self.dim = int(dim)
        self.degree = int(degree)
        self.real = bool(real)
        if real and not self.is_conjugate_symmetric():
            raise ValueError("series flagged real violates c(-nu)=conj(c(nu))")

    # -- access ------------------------------------------------------------
    def __getitem__(self, nu) -> object:
        key = _as_key(nu if isinstance(nu, Iterable) else (nu,))
        return self._c.get(key, 0)

    def coeff(self, nu) -> object:
        return self[nu]

    def items(self):
        return sorted(self._c.items())

    def support(self) -> list[tuple]:
        return sorted(self._c)

    def __len__(self):
        return len(self._c)

    def __iter__(self):
        return iter(sorted(self._c))

    @property
    def is_vector(self) -> bool:
        return any(isinstance(v, np.ndarray) for v in self._c.values())

    def is_conjugate_symmetric(self, tol: float = 0.0) -> bool:
        for k, v in self._c.items():
            mk = tuple(-x for x in k)
            w = self._c.get(mk, 0)
            if isinstance(v, GaussianRational):
                wv = w if isinstance(w, GaussianRational) else GaussianRational(0)
                if wv != v.conjugate():
                    return False
                continue
            diff = np.abs(np.asarray(w) - np.conj(np.asarray(v)))
            if np.max(diff) > tol * max(1.0, float(np.max(np.abs(v)))):
                return False
        return True

    # -- arithmetic --------------------------------------------------------
    def _check_dim(self, other: "FourierSeries"):
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")

    def __add__(self, other: "FourierSeries") -> "FourierSeries":
        self._check_dim(other)
        out = dict(self._c)
        for k, v in other._c.items():
            out[k] = out[k] + v if k in out else v
        return FourierSeries(
            out, self.dim, max(self.degree, other.degree), self.real and other.real
        )

    def __neg__(self) -> "FourierSeries":
        return FourierSeries(
            {k: -v for k, v in self._c.items()}, self.dim, self.degree, self.real
        )

    def __sub__(self, other: "FourierSeries") -> "FourierSeries":
        return self + (-other)

    def scale(self, a) -> "FourierSeries":
        real = self.real and not isinstance(a, complex)
        return FourierSeries(
            {k: v * a for k, v in self._c.items()}, self.dim, self.degree, real
        )

    def multiply(self, other: "FourierSeries", limit: int | None = None) -> "FourierSeries":
        """Convolution product.

        Raises :class:`TruncationExceeded` if the product degree exceeds
        ``limit`` (when given).
        """
        self._check_dim(other)
        deg = self.degree + other.degree
        if limit is not None and deg > limit:
            raise TruncationExceeded(f"product degree {deg} exceeds limit {limit}")
        out: dict = {}
        for k1, v1 in self._c.items():
            for k2, v2 in other._c.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                p = v1 * v2
                out[k] = out[k] + p if k in out else p
        return FourierSeries(out, self.dim, deg, self.real and other.real)

    def derivative(self, direction: Sequence[float]) -> "FourierSeries":
        """Directional derivative ``(w . d/dpsi)`` of the series."""
        w = np.asarray(direction, dtype=float)
        return FourierSeries(
            {k: v * (1j * float(np.dot(w, k))) for k, v in self._c.items()},
            self.dim,
            self.degree,
            self.real,
        )

    def gradient(self) -> "FourierSeries":
        """Vector-valued series of ``d/dpsi`` of a scalar series."""
        return FourierSeries(
            {k: 1j * np.asarray(k, dtype=float) * complex(v) for k, v in self._c.items()},
            self.dim,
            self.degree,
            self.real,
        )

    def component(self, u: Sequence[float]) -> "FourierSeries":
        """Scalar series ``u . c(nu)`` of a vector-valued series."""
        u = np.asarray(u)
        return FourierSeries(
            {k: complex(np.dot(u, v)) for k, v in self._c.items()}, self.dim, self.degree
        )

    def to_complex(self) -> "FourierSeries":
        """Convert exact coefficients to floating point."""
        return FourierSeries(
            {
                k: (np.asarray(v, dtype=complex) if isinstance(v, np.ndarray) else complex(v))
                for k, v in self._c.items()
            },
            self.dim,
            self.degree,
            self.real,
        )

    def l1_norm(self) -> float:
        return float(sum(np.sum(np.abs(np.asarray(complex(v) if isinstance(v, GaussianRational) else v))) for v in self._c.values()))

    def exact_equal(self, other: "FourierSeries") -> bool:
        """Exact coefficientwise equality (intended for rational series)."""
        if self.dim != other.dim or set(self._c) != set(other._c):
            return False
        return all(self._c[k] == other._c[k] for k in self._c)

    def max_abs_diff(self, other: "FourierSeries") -> float:
        keys = set(self._c) | set(other._c)
        out = 0.0
        for k in keys:
            a = self._c.get(k, 0)
            b = other._c.get(k, 0)
            a = complex(a) if isinstance(a, GaussianRational) else a
            b = complex(b) if isinstance(b, GaussianRational) else b
            out = max(out, float(np.max(np.abs(np.asarray(a) - np.asarray(b)))))
        return out

    # -- evaluation --------------------------------------------------------
    def __call__(self, angles) -> complex | np.ndarray:
        return fourier_eval(self, angles)

    # -- serialization -----------------------------------------------------
    def to_records(self) -> list[dict]:
        recs = []
        for k, v in self.items():
            if isinstance(v, np.ndarray):
                re, im = v.real.tolist(), v.imag.tolist()
            else:
                z = complex(v)
                re, im = z.real, z.imag
            recs.append({"nu": list(k), "re": re, "im": im})
        return recs

    def to_json(self) -> str:
        return json.dumps(self.to_records(), sort_keys=True)

    @classmethod
    def from_records(cls, records: list[dict], dim: int | None = None, real: bool = False) -> "FourierSeries":
        c = {}
        for r in records:
            re, im = r["re"], r["im"]
            if isinstance(re, list):
                v = np.asarray(re, dtype=float) + 1j * np.asarray(im, dtype=float)
            else:
                v = complex(re, im)
            c[tuple(r["nu"])] = v
        if dim is None:
            dim = len(records[0]["nu"]) if records else 1
        return cls(c, dim, real=real)

    @classmethod
    def from_json(cls, text: str, dim: int | None = None) -> "FourierSeries":
        return cls.from_records(json.loads(text), dim)

    @classmethod
    def cosine(cls, nu: Sequence[int], amplitude: float = 1.0) -> "FourierSeries":
        """The real series ``amplitude * cos(nu . alpha)``."""
        nu = _as_key(nu)
        mnu = tuple(-x for x in nu)
        return cls({nu: 0.5 * amplitude, mnu: 0.5 * amplitude}, len(nu), real=True)

    def __repr__(self):
        return f"FourierSeries(dim={self.dim}, degree={self.degree}, terms={len(self)})"


def fourier_eval(series: FourierSeries, angles) -> complex | float | np.ndarray:
    """Evaluate ``sum_nu c(nu) exp(i nu . angles)``.

    Parameters
    ----------
    series : FourierSeries
    angles : array_like, shape (dim,) or (..., dim)

    Returns
    -------
    complex, float or ndarray
        Real part only if the series is flagged real (the imaginary
        residue is checked against ``1e-12 * sum|c|``).
    """
    a = np.asarray(angles, dtype=float)
    if a.ndim == 0:
        a = a[None]
    if a.shape[-1] != series.dim:
        raise ValueError("angle vector has wrong dimension")
    batch = a.shape[:-1]
    vec = series.is_vector
    items = series.items()
    if not items:
        if vec:
            return np.zeros(batch + (series.dim,))
        return np.zeros(batch) if batch else (0.0 if series.real else 0j)
    keys = np.array([k for k, _ in items], dtype=float)
    vals = [complex(v) if isinstance(v, GaussianRational) else v for _, v in items]
    vals = np.asarray(vals, dtype=complex)
    phase = np.exp(1j * (a @ keys.T))
    out = phase @ vals
    if series.real:
        scale = float(np.sum(np.abs(vals))) or 1.0
        if np.max(np.abs(np.imag(out)), initial=0.0) > 1e-12 * scale:
            raise ValueError("real-flagged series evaluated to a complex value")
        out = np.real(out)
    if not batch and np.ndim(out) == 0:
        return out.item()
    return out


# ---------------------------------------------------------------------------
# frequencies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FrequencyVector:
    """Frequency vector with optional Diophantine constants ``(C, tau)``."""

    omega: tuple
    C: float | None = None
    tau: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(x) for x in self.omega))
        if (self.C is None) != (self.tau is None):
            raise ValueError("C and tau must be given together")
        if self.C is not None and (self.C <= 0 or self.tau <= 0):
            raise ValueError("Diophantine constants must be positive")

    @property
    def dim(self) -> int:
        return len(self.omega)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.omega)

    def dot(self, nu: Sequence[int]) -> float:
        s = 0.0
        for w, n in zip(self.omega, nu):
            s += w * int(n)
        return s

    def divisor(self, nu: Sequence[int]) -> float:
        return small_divisor(self, nu)

    def scale(self, nu: Sequence[int]) -> int:
        """Dyadic scale ``n`` with ``2^-n < C|w.nu| <= 2^(-n+1)``; 0 if ``C|w.nu| > 1``."""
        if self.C is None:
            raise ValueError("scale requires Diophantine constants")
        x = self.C * abs(self.dot(nu))
        if x > 1.0:
            return 0
        n = 1
        while x <= 2.0 ** (-n):
            n += 1
        return n


def small_divisor(omega: FrequencyVector, nu: Sequence[int]) -> float:
    """Return ``omega . nu`` and check the Diophantine bound if present.

    Raises
    ------
    ValueError
        If ``nu`` is the zero vector.
    DiophantineViolation
        If ``|omega . nu| < 1 / (C |nu|^tau)``.
    """
    if len(nu) != omega.dim:
        raise ValueError("harmonic has wrong dimension")
    norm = harmonic_norm(nu)
    if norm == 0:
        raise ValueError("small divisor undefined for nu = 0")
    d = omega.dot(nu)
    if omega.C is not None and abs(d) * omega.C * norm**omega.tau < 1.0:
        raise DiophantineViolation(
            f"|omega.nu| = {abs(d):.3e} below 1/(C|nu|^tau) for nu={tuple(nu)}"
        )
    return d


def golden_frequency(ell: int = 2) -> FrequencyVector:
    """Return ``omega = (1, golden ratio)`` with ``C = sqrt(5)``, ``tau = 1``."""
    if ell != 2:
        raise ValueError("golden_frequency is defined for ell = 2 only")
    return FrequencyVector((1.0, GOLDEN), C=math.sqrt(5.0), tau=1.0)


def diophantine_scan(omega: FrequencyVector, max_norm: int) -> float:
    """Minimum of ``C |omega.nu| |nu|^tau`` over ``0 < |nu| <= max_norm`` (ell = 2).

    For each second component only the nearest integer first component
    matters, since every other choice gives ``|omega.nu| >= 1/2``.
    """
    if omega.dim != 2:
        raise ValueError("scan implemented for ell = 2")
    w1, w2 = omega.omega
    b = np.arange(-max_norm, max_norm + 1, dtype=float)
    best = np.inf
    for shift in (-1.0, 0.0, 1.0):
        a = np.round(-b * w2 / w1) + shift
        norm = np.abs(a) + np.abs(b)
        ok = (norm > 0) & (norm <= max_norm)
        val = omega.C * np.abs(a * w1 + b * w2) * norm**omega.tau
        if np.any(ok):
            best = min(best, float(np.min(val[ok])))
    return best
