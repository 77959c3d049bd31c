"""One-parameter analytic families with marked critical points.

A family stores each coefficient of ``p`` and ``q`` as a polynomial in the
parameter ``a``, which makes ``d/da f_a`` exact.  Critical points are
supplied as explicit tracks ``a -> c_l(a)``; the family never solves for
critical-point motion.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConfigError, DerivativeVanished, PreconditionError
from .sphere import Chart, RationalMapCoeffs, SpherePoint, wronskian


def _polyval(c: Sequence[complex], a: complex) -> complex:
    v = 0j
    for x in reversed(c):
        v = v * a + x
    return v


def _polyder_val(c: Sequence[complex], a: complex) -> complex:
    v = 0j
    for i in range(len(c) - 1, 0, -1):
        v = v * a + i * c[i]
    return v


@dataclass(frozen=True)
class ParameterSquare:
    center: complex
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise PreconditionError(f"parameter square side must be positive, got {self.side}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "side", float(self.side))

    @property
    def area(self) -> float:
        return self.side * self.side

    def point(self, x: float, y: float) -> complex:
        """Parameter at relative coordinates ``x, y`` in ``[0, 1]``."""
        return self.center + self.side * complex(x - 0.5, y - 0.5)

    def samples(self) -> list[complex]:
        """Four corners and the centre."""
        return [self.point(0, 0), self.point(1, 0), self.point(0, 1), self.point(1, 1), self.center]

    def contains(self, a: complex) -> bool:
        h = self.side / 2
        return abs(a.real - self.center.real) <= h and abs(a.imag - self.center.imag) <= h


@dataclass(frozen=True)
class CriticalTrack:
    """``c_l(a)`` as a polynomial in ``a`` (ascending); ``None`` marks infinity."""

    coeffs: tuple | None
    degree: int
    in_julia: bool = False

    def at(self, a: complex) -> SpherePoint:
        if self.coeffs is None:
            return SpherePoint.infinity()
        return SpherePoint.from_complex(_polyval(self.coeffs, a))

    def velocity(self, a: complex) -> complex:
        if self.coeffs is None:
            return 0j
        return _polyder_val(self.coeffs, a)


@dataclass(frozen=True)
class MarkedFamily:
    """``f_a = p_a / q_a`` with ``p_poly[i]`` the ``a``-polynomial multiplying ``z**i``."""

    name: str
    p_poly: tuple
    q_poly: tuple
    tracks: tuple
    param_domain: ParameterSquare | None = None
    _maps: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    def map_at(self, a: complex) -> RationalMapCoeffs:
        a = complex(a)
        f = self._maps.get(a)
        if f is None:
            p = tuple(_polyval(c, a) for c in self.p_poly)
            q = tuple(_polyval(c, a) for c in self.q_poly)
            f = RationalMapCoeffs(p, q)
            if len(self._maps) > 4096:
                self._maps.clear()
            self._maps[a] = f
        return f

    def param_partial(self, a: complex, z: complex) -> complex:
        """``d/da f_a(z)`` at a finite point ``z``."""
        p = sum(_polyval(c, a) * z**i for i, c in enumerate(self.p_poly))
        q = sum(_polyval(c, a) * z**i for i, c in enumerate(self.q_poly))
        dp = sum(_polyder_val(c, a) * z**i for i, c in enumerate(self.p_poly))
        dq = sum(_polyder_val(c, a) * z**i for i, c in enumerate(self.q_poly))
        return (dp * q - p * dq) / (q * q)

    def critical_point(self, a: complex, l: int) -> SpherePoint:
        self._check_index(l)
        return self.tracks[l].at(a)

    def _check_index(self, l: int):
        if not 0 <= l < len(self.tracks):
            raise IndexError(f"critical index {l} out of range for {len(self.tracks)} tracks")

    @property
    def jrit_indices(self) -> list[int]:
        return [i for i, t in enumerate(self.tracks) if t.in_julia]

    @property
    def hat_d(self) -> int:
        degs = [self.tracks[i].degree for i in self.jrit_indices]
        return max(degs) if degs else max(t.degree for t in self.tracks)

    def jrit_points(self, a: complex) -> list[tuple[complex, bool]]:
        """Chart coordinates of the marked Julia critical points ``Jrit_a``."""
        return [self.tracks[i].at(a).as_tuple() for i in self.jrit_indices]

    def with_julia_flags(self, flags: Sequence[bool]) -> "MarkedFamily":
        if len(flags) != len(self.tracks):
            raise ValueError("one flag per critical track required")
        tracks = tuple(CriticalTrack(t.coeffs, t.degree, bool(fl)) for t, fl in zip(self.tracks, flags))
        return MarkedFamily(self.name, self.p_poly, self.q_poly, tracks, self.param_domain)

    def with_domain(self, square: ParameterSquare) -> "MarkedFamily":
        return MarkedFamily(self.name, self.p_poly, self.q_poly, self.tracks, square)

    def check_tracks(self, a: complex, tol: float = 1e-9) -> None:
        """Verify each track is a critical point of ``f_a`` of its declared degree.

        Finite tracks: the Wronskian and its derivatives up to order
        ``d_l - 2`` vanish, the next one does not.  Infinity: the Wronskian
        degree deficiency equals ``d_l - 1``.
        """
        f = self.map_at(a)
        w = wronskian(f)
        scale = float(np.max(np.abs(w))) or 1.0
        for l, t in enumerate(self.tracks):
            if t.coeffs is None:
                top = np.nonzero(np.abs(w) > 1e-12 * scale)[0]
                deg = int(top[-1]) if top.size else -1
                deficit = 2 * f.degree - 2 - deg
                if deficit != t.degree - 1:
                    raise PreconditionError(f"track {l}: infinity has local degree {deficit + 1}, expected {t.degree}")
                continue
            c = _polyval(t.coeffs, a)
            ws = w
            for k in range(t.degree):
                v = abs(P.polyval(c, ws)) / (scale * max(1.0, abs(c)) ** len(w))
                if k < t.degree - 1 and v > tol:
                    raise PreconditionError(f"track {l}: Wronskian derivative {k} = {v:.3g} at c = {c:.6g}")
                if k == t.degree - 1 and v <= tol:
                    raise PreconditionError(f"track {l}: local degree exceeds {t.degree} at c = {c:.6g}")
                ws = P.polyder(ws)


def quadratic() -> MarkedFamily:
    """``z**2 + a`` with critical points 0 (tracked) and infinity."""
    return MarkedFamily(
        "quadratic",
        ((0.0, 1.0), (0.0,), (1.0,)),
        ((1.0,), (0.0,), (0.0,)),
        (CriticalTrack((0.0,), 2, True), CriticalTrack(None, 2, False)),
    )


def unicritical(d: int) -> MarkedFamily:
    if d < 2:
        raise ValueError("unicritical degree must be >= 2")
    p = [(0.0,)] * (d + 1)
    p[0] = (0.0, 1.0)
    p[d] = (1.0,)
    q = [(0.0,)] * (d + 1)
    q[0] = (1.0,)
    return MarkedFamily(
        f"unicritical:{d}", tuple(p), tuple(q),
        (CriticalTrack((0.0,), d, True), CriticalTrack(None, d, False)),
    )


def _complex_list(text: str, where: str) -> tuple:
    try:
        return tuple(complex(x.strip().replace(" ", "")) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse complex list {text!r}") from exc


def load_custom_family(path) -> MarkedFamily:
    """Read a family file.

    Format (INI)::

        [family]
        name = my-family
        # p<i> / q<i>: polynomial in a multiplying z**i, ascending powers of a
        p0 = 0, 1
        p2 = 1
        q0 = 1

        [critical.0]
        point = 0          # polynomial in a, or "inf"
        degree = 2
        julia = true
    """
    path = Path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(path.read_text(), source=str(path))
    except (configparser.Error, OSError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "family" not in cp:
        raise ConfigError(f"{path}: missing [family] section")
    sec = cp["family"]
    pk = {int(k[1:]): _complex_list(v, f"{path} [family] {k}") for k, v in sec.items() if k[0] == "p" and k[1:].isdigit()}
    qk = {int(k[1:]): _complex_list(v, f"{path} [family] {k}") for k, v in sec.items() if k[0] == "q" and k[1:].isdigit()}
    if not qk:
        raise ConfigError(f"{path}: no denominator coefficients q<i>")
    d = max(list(pk) + list(qk))
    p_poly = tuple(pk.get(i, (0.0,)) for i in range(d + 1))
    q_poly = tuple(qk.get(i, (0.0,)) for i in range(d + 1))
    tracks = []
    for name in sorted(s for s in cp.sections() if s.startswith("critical.")):
        s = cp[name]
        pt = s.get("point", "").strip()
        coeffs = None if pt.lower() in ("inf", "infinity") else _complex_list(pt, f"{path} [{name}] point")
        try:
            deg = int(s.get("degree", "2"))
        except ValueError as exc:
            raise ConfigError(f"{path} [{name}] degree: not an integer") from exc
        tracks.append(CriticalTrack(coeffs, deg, s.getboolean("julia", fallback=False)))
    if not tracks:
        raise ConfigError(f"{path}: at least one [critical.N] section is required")
    return MarkedFamily(sec.get("name", path.stem), p_poly, q_poly, tuple(tracks))


def family_from_id(family_id: str) -> MarkedFamily:
    """``"quadratic"``, ``"unicritical:<d>"`` or ``"custom:<file>"``."""
    if family_id == "quadratic":
        return quadratic()
    if family_id.startswith("unicritical:"):
        try:
            return unicritical(int(family_id.split(":", 1)[1]))
        except ValueError as exc:
            raise ConfigError(f"bad unicritical degree in {family_id!r}") from exc
    if family_id.startswith("custom:"):
        return load_custom_family(family_id.split(":", 1)[1])
    raise ConfigError(f"unknown family id {family_id!r}")


# -- critical orbits ---------------------------------------------------------

def xi(fam: MarkedFamily, a: complex, l: int, n: int) -> SpherePoint:
    """``f_a^n(c_l(a))``."""
    fam._check_index(l)
    if n < 0:
        raise ValueError("n must be non-negative")
    f = fam.map_at(a)
    u, rec = fam.tracks[l].at(a).as_tuple()
    for _ in range(n):
        u, rec, _ = f.step(u, rec)
    return SpherePoint(u, Chart.RECIPROCAL if rec else Chart.FINITE)


def xi_orbit(fam: MarkedFamily, a: complex, l: int, n: int) -> list[tuple[complex, bool, float]]:
    """Chart coordinates ``(u, rec, sph)`` for ``k = 0..n``; ``sph`` is the spherical derivative at step ``k``."""
    fam._check_index(l)
    f = fam.map_at(a)
    u, rec = fam.tracks[l].at(a).as_tuple()
    out = []
    for _ in range(n):
        nu, nrec, sph = f.step(u, rec)
        out.append((u, rec, sph))
        u, rec = nu, nrec
    out.append((u, rec, f.step(u, rec)[2]))
    return out


@dataclass(frozen=True)
class SensitivityState:
    xi: SpherePoint
    dxi_da: complex


def xi_with_sensitivity(fam: MarkedFamily, a: complex, l: int, n: int) -> list[SensitivityState]:
    """``(xi_k, d xi_k / da)`` for ``k = 0..n`` by forward-mode propagation.

    ``dxi <- f_a'(xi) dxi + (d/da f_a)(xi)`` in the finite chart, seeded with
    the track velocity.  Once the orbit reaches infinity the finite-chart
    derivative is undefined and reported as ``nan``.
    """
    fam._check_index(l)
    f = fam.map_at(a)
    pt = fam.tracks[l].at(a)
    u, rec = pt.as_tuple()
    dz = fam.tracks[l].velocity(a) if not pt.is_infinity else complex(math.nan, math.nan)
    out = [SensitivityState(pt, dz)]
    for _ in range(n):
        z = SpherePoint(u, Chart.RECIPROCAL if rec else Chart.FINITE).to_complex()
        if math.isfinite(abs(z)) and f.parts(z, False)[2] != 0:
            dz = f.finite_derivative(z) * dz + fam.param_partial(a, z)
        else:
            dz = complex(math.nan, math.nan)
        u, rec, _ = f.step(u, rec)
        out.append(SensitivityState(SpherePoint(u, Chart.RECIPROCAL if rec else Chart.FINITE), dz))
    return out


def transversality_sequence(fam: MarkedFamily, a: complex, l: int, n: int, spherical: bool = False) -> list[tuple[int, complex]]:
    """Ratios ``xi'_k / Df_a^{k-1}(v_l(a))`` for ``k = 1..n``.

    The euclidean denominator is the finite-chart product of ``f_a'`` along
    ``xi_1 .. xi_{k-1}``.  With ``spherical=True`` the denominator is the
    spherical derivative product instead (a positive real).
    """
    states = xi_with_sensitivity(fam, a, l, n)
    f = fam.map_at(a)
    out = []
    log_den = 0.0
    den = 1.0 + 0j
    for k in range(1, n + 1):
        if k >= 2:
            z = states[k - 1].xi
            if spherical:
                fac = f.step(z.value, z.is_reciprocal)[2]
            else:
                fac = f.finite_derivative(z.to_complex())
            if fac == 0 or not math.isfinite(abs(fac)):
                raise DerivativeVanished(f"derivative vanishes along the critical-value orbit at step {k - 1}")
            log_den += math.log(abs(fac))
            den *= fac
            if log_den < -690.0:
                raise DerivativeVanished(f"derivative product underflows at step {k - 1}")
            if log_den > 690.0:
                break
        out.append((k, states[k].dxi_da / den))
    return out


def transversality_ratio(fam: MarkedFamily, a: complex, l: int, n: int, spherical: bool = False) -> complex:
    seq = transversality_sequence(fam, a, l, n, spherical)
    if seq[-1][0] != n:
        raise DerivativeVanished(f"denominator left double range before n = {n}")
    return seq[-1][1]


def estimate_levin_limit(fam: MarkedFamily, a: complex, l: int, n_max: int = 2000) -> tuple[int, complex]:
    """Ratio at the largest ``n`` whose denominator stays below ``1e300``."""
    seq = transversality_sequence(fam, a, l, n_max)
    return seq[-1]
