"""Riemann-sphere arithmetic and rational maps.

Points live in one of two charts: the finite chart ``z`` and the reciprocal
chart ``w = 1/z``.  A point is canonical when ``|value| <= 2`` in its chart,
so every coordinate handled by the iteration code stays bounded and the
point at infinity is simply ``w = 0``.

Derivatives of rational maps are measured in the chordal metric

    d(z, w) = |z - w| / (sqrt(1 + |z|^2) sqrt(1 + |w|^2))

which has diameter 1.  For a local expression ``v = N(u) / D(u)`` the
spherical derivative is ``|N'D - ND'| (1 + |u|^2) / (|N|^2 + |D|^2)``;
the formula is the same whichever chart the image is written in, which is
what makes the chart bookkeeping cheap.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import IndeterminateForm, InvalidMap, RootFindingFailure

CHART_SWITCH = 2.0


class Chart(Enum):
    FINITE = "finite"
    RECIPROCAL = "reciprocal"


@dataclass(frozen=True)
class SpherePoint:
    value: complex
    chart: Chart = Chart.FINITE

    @classmethod
    def from_complex(cls, z) -> "SpherePoint":
        if isinstance(z, SpherePoint):
            return z
        z = complex(z)
        if cmath.isinf(z):
            return cls(0j, Chart.RECIPROCAL)
        if abs(z) > CHART_SWITCH:
            return cls(1.0 / z, Chart.RECIPROCAL)
        return cls(z, Chart.FINITE)

    @classmethod
    def infinity(cls) -> "SpherePoint":
        return cls(0j, Chart.RECIPROCAL)

    @property
    def is_reciprocal(self) -> bool:
        return self.chart is Chart.RECIPROCAL

    @property
    def is_infinity(self) -> bool:
        return self.chart is Chart.RECIPROCAL and self.value == 0

    def canonical(self) -> "SpherePoint":
        if abs(self.value) <= CHART_SWITCH:
            return self
        other = Chart.FINITE if self.is_reciprocal else Chart.RECIPROCAL
        return SpherePoint(1.0 / self.value, other)

    def recharted(self) -> "SpherePoint":
        """The same point written in the other chart (``0`` maps to infinity)."""
        other = Chart.FINITE if self.is_reciprocal else Chart.RECIPROCAL
        if self.value == 0:
            return SpherePoint(complex(math.inf, 0.0), other)
        return SpherePoint(1.0 / self.value, other)

    def to_complex(self) -> complex:
        if not self.is_reciprocal:
            return complex(self.value)
        if self.value == 0:
            return complex(math.inf, 0.0)
        return 1.0 / self.value

    def as_tuple(self) -> tuple[complex, bool]:
        return complex(self.value), self.is_reciprocal

    def __repr__(self) -> str:
        if self.is_infinity:
            return "SpherePoint(inf)"
        return f"SpherePoint({self.to_complex():.12g})"


def _coerce(z) -> SpherePoint:
    return z if isinstance(z, SpherePoint) else SpherePoint.from_complex(z)


def chordal_uv(u1: complex, r1: bool, u2: complex, r2: bool) -> float:
    """Chordal distance between two chart coordinates."""
    if r1 == r2:
        num = abs(u1 - u2)
    else:
        num = abs(1.0 - u1 * u2)
    return num / math.sqrt((1.0 + abs(u1) ** 2) * (1.0 + abs(u2) ** 2))


def _canon(z) -> SpherePoint:
    z = _coerce(z)
    if not math.isfinite(abs(z.value)):
        return SpherePoint.from_complex(z.to_complex())
    return z.canonical()


def chordal_distance(z, w) -> float:
    """Chordal distance on the unit-diameter sphere, in ``[0, 1]``."""
    z, w = _canon(z), _canon(w)
    return min(1.0, chordal_uv(z.value, z.is_reciprocal, w.value, w.is_reciprocal))


def _horner2(coeffs: Sequence[complex], u: complex) -> tuple[complex, complex]:
    """Value and derivative of a polynomial given highest power first."""
    v = coeffs[0]
    dv = 0j
    for c in coeffs[1:]:
        dv = dv * u + v
        v = v * u + c
    return v, dv


def _trim(c: np.ndarray, rel: float = 0.0) -> np.ndarray:
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return np.zeros(1, dtype=complex)
    scale = np.max(np.abs(c)) if c.size else 0.0
    k = c.size
    while k > 1 and abs(c[k - 1]) <= rel * scale:
        k -= 1
    return c[:k]


def _degree(c: np.ndarray, rel: float = 0.0) -> int:
    c = _trim(c, rel)
    if c.size == 1 and c[0] == 0:
        return -1
    return c.size - 1


@dataclass(frozen=True)
class RationalMapCoeffs:
    """``f = p / q`` with coefficient vectors in ascending powers of ``z``.

    Both vectors are padded to length ``degree + 1``.  Construction checks
    that ``max(deg p, deg q) = degree >= 2`` and that ``p`` and ``q`` have no
    common root up to ``resultant_tol`` (relative).
    """

    p_coeffs: tuple
    q_coeffs: tuple
    degree: int = -1
    resultant_tol: float = 1e-9
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def __post_init__(self):
        p = _trim(np.asarray(self.p_coeffs, dtype=complex))
        q = _trim(np.asarray(self.q_coeffs, dtype=complex))
        dp, dq = _degree(p), _degree(q)
        if dq < 0:
            raise InvalidMap("denominator is identically zero")
        d = max(dp, dq)
        if self.degree not in (-1, d):
            raise InvalidMap(f"declared degree {self.degree} but max(deg p, deg q) = {d}")
        if d < 2:
            raise InvalidMap(f"degree must be at least 2, got {d}")
        p = np.concatenate([p, np.zeros(d + 1 - p.size, dtype=complex)])
        q = np.concatenate([q, np.zeros(d + 1 - q.size, dtype=complex)])
        object.__setattr__(self, "p_coeffs", tuple(complex(x) for x in p))
        object.__setattr__(self, "q_coeffs", tuple(complex(x) for x in q))
        object.__setattr__(self, "degree", d)
        self._check_coprime(p, q, dp, dq)
        # descending coefficients for the finite chart; ascending ones are the
        # descending coefficients of w^d p(1/w), i.e. the reciprocal chart
        pl, ql = [complex(x) for x in p], [complex(x) for x in q]
        self._cache["fin"] = (tuple(pl[::-1]), tuple(ql[::-1]))
        self._cache["rec"] = (tuple(pl), tuple(ql))

    def _check_coprime(self, p, q, dp, dq):
        small, other = (p, q) if 0 <= dp <= dq else (q, p)
        ds = _degree(small)
        if ds < 1:
            return
        lead = _trim(small)
        try:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                roots = np.roots((lead / np.max(np.abs(lead)))[::-1])
        except np.linalg.LinAlgError:
            raise InvalidMap("coefficients are too badly scaled to locate roots") from None
        for r in roots:
            # large roots are tested in the reciprocal chart to avoid overflow
            coeffs, x = (other, r) if abs(r) <= 1 else (other[::-1], 1 / r)
            with np.errstate(over="ignore", invalid="ignore"):
                scale = float(np.sum(np.abs(coeffs) * np.abs(x) ** np.arange(coeffs.size)))
                val = abs(P.polyval(x, coeffs))
            if val <= self.resultant_tol * max(scale, 1e-300):
                raise InvalidMap(f"numerator and denominator share a root near {r:.6g}")

    @classmethod
    def polynomial(cls, coeffs) -> "RationalMapCoeffs":
        return cls(tuple(coeffs), (1.0,))

    # -- local evaluation -------------------------------------------------
    def parts(self, u: complex, rec: bool) -> tuple[complex, complex, complex, complex]:
        """``N, N', D, D'`` of the local expression at chart coordinate ``u``."""
        pc, qc = self._cache["rec" if rec else "fin"]
        N, dN = _horner2(pc, u)
        D, dD = _horner2(qc, u)
        return N, dN, D, dD

    def step(self, u: complex, rec: bool) -> tuple[complex, bool, float]:
        """Image coordinate, image chart and spherical derivative at ``(u, rec)``.

        The image keeps the chart of the input when its coordinate stays
        within the canonical bound, which gives the ``[1/2, 2]`` hysteresis.
        """
        pc, qc = self._cache["rec" if rec else "fin"]
        N, dN = _horner2(pc, u)
        D, dD = _horner2(qc, u)
        aN, aD = abs(N), abs(D)
        den = aN * aN + aD * aD
        if den == 0.0:
            raise IndeterminateForm(f"p and q vanish together at chart coordinate {u!r}")
        sph = abs(dN * D - N * dD) * (1.0 + abs(u) ** 2) / den
        if rec:
            if aD <= CHART_SWITCH * aN:
                return D / N, True, sph
            return N / D, False, sph
        if aN <= CHART_SWITCH * aD:
            return N / D, False, sph
        return D / N, True, sph

    def local_derivative(self, u: complex, rec: bool) -> tuple[complex, bool, complex]:
        """Image coordinate, chart and complex derivative of the local expression."""
        N, dN, D, dD = self.parts(u, rec)
        aN, aD = abs(N), abs(D)
        if aN == 0 and aD == 0:
            raise IndeterminateForm(f"p and q vanish together at chart coordinate {u!r}")
        W = dN * D - N * dD
        to_rec = (aD <= CHART_SWITCH * aN) if rec else (aN > CHART_SWITCH * aD)
        if to_rec:
            return D / N, True, -W / (N * N)
        return N / D, False, W / (D * D)

    def finite_derivative(self, z: complex) -> complex:
        """Euclidean derivative ``f'(z)`` in the finite chart."""
        N, dN, D, dD = self.parts(z, False)
        return (dN * D - N * dD) / (D * D)

    def finite_value(self, z: complex) -> complex:
        N, _, D, _ = self.parts(z, False)
        return N / D

    def __call__(self, z) -> SpherePoint:
        return evaluate(self, z)


def evaluate(f: RationalMapCoeffs, z, tol: float = 1e-14) -> SpherePoint:
    """``f(z)`` as a canonical sphere point."""
    z = _coerce(z).canonical()
    u, rec = z.as_tuple()
    N, _, D, _ = f.parts(u, rec)
    pc, qc = f._cache["rec" if rec else "fin"]
    scale = sum(abs(c) for c in pc + qc) * max(1.0, abs(u)) ** f.degree
    if abs(N) + abs(D) <= tol * scale:
        raise IndeterminateForm(f"p and q both vanish at {z!r}")
    v, vrec, _ = f.step(u, rec)
    return SpherePoint(v, Chart.RECIPROCAL if vrec else Chart.FINITE)


def spherical_derivative(f: RationalMapCoeffs, z) -> float:
    """``|f'(z)| (1 + |z|^2) / (1 + |f(z)|^2)``, via the reciprocal chart near infinity."""
    z = _coerce(z).canonical()
    evaluate(f, z)
    return f.step(z.value, z.is_reciprocal)[2]


def spherical_derivative_grid(f: RationalMapCoeffs, u: np.ndarray, rec: bool) -> np.ndarray:
    """Vectorised spherical derivative over chart coordinates ``u``."""
    pc, qc = f._cache["rec" if rec else "fin"]
    pc, qc = np.asarray(pc), np.asarray(qc)
    N, D = np.polyval(pc, u), np.polyval(qc, u)
    dN, dD = np.polyval(np.polyder(pc), u), np.polyval(np.polyder(qc), u)
    return np.abs(dN * D - N * dD) * (1.0 + np.abs(u) ** 2) / (np.abs(N) ** 2 + np.abs(D) ** 2)


@dataclass
class OrbitRecord:
    points: list
    log_deriv: list

    @property
    def deriv_products(self) -> list:
        return [math.exp(x) if x > -math.inf else 0.0 for x in self.log_deriv]

    def __len__(self) -> int:
        return len(self.points)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def orbit_with_derivative(f: RationalMapCoeffs, z, n: int) -> OrbitRecord:
    """Orbit ``z, f(z), ..., f^n(z)`` with running log spherical derivative.

    ``log_deriv[j] = log |Df^j(z)|``; a zero derivative gives ``-inf``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    z = _coerce(z).canonical()
    u, rec = z.as_tuple()
    points = [z]
    logs = [0.0]
    acc = 0.0
    for _ in range(n):
        u, rec, sph = f.step(u, rec)
        acc += _log(sph)
        points.append(SpherePoint(u, Chart.RECIPROCAL if rec else Chart.FINITE))
        logs.append(acc)
    return OrbitRecord(points, logs)


@dataclass(frozen=True)
class CriticalPoint:
    point: SpherePoint
    multiplicity: int
    in_julia: bool = False


@dataclass(frozen=True)
class CriticalSet:
    points: tuple

    @property
    def julia_flags(self) -> list[bool]:
        return [c.in_julia for c in self.points]

    @property
    def jrit(self) -> list[CriticalPoint]:
        return [c for c in self.points if c.in_julia]

    def hurwitz_sum(self) -> int:
        return sum(c.multiplicity - 1 for c in self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


def wronskian(f: RationalMapCoeffs) -> np.ndarray:
    """Ascending coefficients of ``p'q - pq'`` truncated at the formal degree ``2d - 2``."""
    p, q = np.asarray(f.p_coeffs), np.asarray(f.q_coeffs)
    w = P.polysub(P.polymul(P.polyder(p), q), P.polymul(p, P.polyder(q)))
    w = np.concatenate([w, np.zeros(2 * f.degree, dtype=complex)])[: 2 * f.degree - 1]
    return w


def critical_points(
    f: RationalMapCoeffs,
    julia_flags: Sequence[bool] | None = None,
    cluster_radius: float = 1e-6,
    residual_tol: float = 1e-12,
) -> CriticalSet:
    """Critical points with local degrees, including infinity when critical.

    Finite critical points are the roots of the Wronskian ``p'q - pq'``
    (companion matrix roots, Newton-polished); a root cluster of size ``m``
    is one critical point of local degree ``m + 1``.  Infinity is critical
    of local degree ``k + 1`` when the Wronskian falls ``k`` short of its
    formal degree ``2d - 2``.
    """
    d = f.degree
    w = wronskian(f)
    deg = _degree(w, rel=1e-13)
    w = _trim(w, rel=1e-13)
    roots = np.roots(w[::-1]) if deg >= 1 else np.array([], dtype=complex)
    dw = P.polyder(w) if deg >= 1 else np.zeros(1)
    # cluster
    remaining = list(roots)
    clusters: list[list[complex]] = []
    while remaining:
        r = remaining.pop(0)
        group = [r]
        rest = []
        for s in remaining:
            (group if abs(s - r) <= cluster_radius * max(1.0, abs(r)) else rest).append(s)
        remaining = rest
        clusters.append(group)
    found = []
    for group in clusters:
        z = complex(np.mean(group))
        m = len(group)
        scale = float(np.sum(np.abs(w) * max(1.0, abs(z)) ** np.arange(w.size)))
        if m == 1:
            for _ in range(20):
                dv = P.polyval(z, dw)
                if dv == 0:
                    break
                step = P.polyval(z, w) / dv
                z -= step
                if abs(step) <= 1e-16 * max(1.0, abs(z)):
                    break
            if abs(P.polyval(z, w)) > residual_tol * scale:
                raise RootFindingFailure(f"critical point near {z:.6g} did not converge")
        elif abs(P.polyval(z, w)) > 1e-6 * scale:
            raise RootFindingFailure(f"multiple critical point near {z:.6g} did not converge")
        found.append((SpherePoint.from_complex(z), m + 1))
    k_inf = (2 * d - 2) - max(deg, 0)
    if k_inf > 0:
        found.append((SpherePoint.infinity(), k_inf + 1))
    flags = list(julia_flags) if julia_flags is not None else [False] * len(found)
    if len(flags) != len(found):
        raise ValueError(f"{len(flags)} julia flags for {len(found)} critical points")
    cs = CriticalSet(tuple(CriticalPoint(pt, mult, bool(fl)) for (pt, mult), fl in zip(found, flags)))
    if cs.hurwitz_sum() != 2 * d - 2:
        raise RootFindingFailure(f"Riemann-Hurwitz count {cs.hurwitz_sum()} != {2 * d - 2}")
    return cs


def mobius_conjugate(f: RationalMapCoeffs, m: tuple) -> RationalMapCoeffs:
    """``M o f o M^{-1}`` for ``M(z) = (a z + b) / (c z + e)`` given as ``(a, b, c, e)``."""
    a, b, c, e = (complex(x) for x in m)
    det = a * e - b * c
    if det == 0:
        raise InvalidMap("singular Mobius transformation")
    # M^{-1}(z) = (e z - b) / (-c z + a)
    inv_num = np.array([-b, e])
    inv_den = np.array([a, -c])
    d = f.degree
    Pz = np.zeros(1, dtype=complex)
    Qz = np.zeros(1, dtype=complex)
    for i in range(d + 1):
        term = P.polymul(P.polypow(inv_num, i), P.polypow(inv_den, d - i))
        Pz = P.polyadd(Pz, f.p_coeffs[i] * term)
        Qz = P.polyadd(Qz, f.q_coeffs[i] * term)
    num = P.polyadd(a * Pz, b * Qz)
    den = P.polyadd(c * Pz, e * Qz)
    return RationalMapCoeffs(tuple(num), tuple(den))


def mobius_apply(m: tuple, z) -> SpherePoint:
    a, b, c, e = (complex(x) for x in m)
    z = _coerce(z).canonical()
    u, rec = z.as_tuple()
    # homogeneous coordinates [z : 1] or [1 : w]
    x, y = (1.0, u) if rec else (u, 1.0)
    num, den = a * x + b * y, c * x + e * y
    if abs(num) <= CHART_SWITCH * abs(den):
        return SpherePoint(num / den, Chart.FINITE)
    return SpherePoint(den / num, Chart.RECIPROCAL)


def to_cartesian(u: complex, rec: bool) -> tuple[float, float, float]:
    """Point on the unit sphere; chordal distance is half the euclidean distance."""
    s = 1.0 + abs(u) ** 2
    if rec:
        u = u.conjugate()
        return 2 * u.real / s, 2 * u.imag / s, (1.0 - abs(u) ** 2) / s
    return 2 * u.real / s, 2 * u.imag / s, (abs(u) ** 2 - 1.0) / s
