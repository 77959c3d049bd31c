"""Finite-horizon checks: Collet-Eckmann growth, slow recurrence, the basic
assumption and the membership sets used by the exclusion engine.

Every exponential inequality is compared in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import PreconditionError
from .family import MarkedFamily, xi_orbit
from .sphere import CriticalPoint, CriticalSet, RationalMapCoeffs, SpherePoint, _coerce, chordal_uv


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class CEParams:
    C0: float = 0.5
    gamma0: float = 1.3

    def __post_init__(self):
        if not (self.C0 > 0 and self.gamma0 > 0):
            raise PreconditionError("C0 and gamma0 must be positive")


@dataclass(frozen=True)
class RecurrenceParams:
    alpha: float = 1e-5
    K: float = 0.1

    def __post_init__(self):
        if not (self.alpha > 0 and self.K > 0):
            raise PreconditionError("alpha and K must be positive")


@dataclass(frozen=True)
class ExponentLadder:
    """Exponents derived from ``gamma0``, ``gammaH`` and the slack ``tau``.

    ``gammaL = min(gamma0, gammaH) (1 - tau) / 6``, ``gammaI = 2 gammaL``,
    ``gammaB = 4.5 gammaL``.  Construction rejects ``alpha`` with
    ``alpha * hat_d / gammaI > 1/100``.
    """

    gamma0: float
    gammaH: float
    tau: float
    alpha: float
    hat_d: int = 2
    gammaL: float = field(init=False)
    gammaI: float = field(init=False)
    gammaB: float = field(init=False)

    def __post_init__(self):
        if not 0 < self.tau < 1:
            raise PreconditionError(f"tau must lie in (0, 1), got {self.tau}")
        if not (self.gamma0 > 0 and self.gammaH > 0 and self.alpha > 0):
            raise PreconditionError("gamma0, gammaH and alpha must be positive")
        if self.hat_d < 2:
            raise PreconditionError("hat_d must be at least 2")
        gL = min(self.gamma0, self.gammaH) * (1 - self.tau) / 6
        object.__setattr__(self, "gammaL", gL)
        object.__setattr__(self, "gammaI", 2 * gL)
        object.__setattr__(self, "gammaB", 4.5 * gL)
        if self.alpha * self.hat_d / self.gammaI > 0.01 * (1 + 1e-12):
            raise PreconditionError(
                f"alpha = {self.alpha} too large: alpha * hat_d / gammaI = "
                f"{self.alpha * self.hat_d / self.gammaI:.4g} > 0.01"
            )

    @property
    def max_alpha(self) -> float:
        return self.gammaI / (100 * self.hat_d)

    def window_ok(self, iota: float) -> bool:
        return 32 * self.hat_d**2 * self.alpha / self.gammaI <= iota / 2 * (1 + 1e-12)

    def aux_horizon(self, n: int) -> int:
        """Horizon ``floor(2 hat_d alpha n / gammaI)`` for the other critical indices."""
        return int(math.floor(2 * self.hat_d * self.alpha * n / self.gammaI + 1e-12))

    def with_gammaH(self, gammaH: float) -> "ExponentLadder":
        return ExponentLadder(self.gamma0, gammaH, self.tau, self.alpha, self.hat_d)


@dataclass
class HorizonReport:
    horizon: int
    per_step: list
    witness: int | None = None
    exponent: float | None = None

    @property
    def passed(self) -> bool:
        return self.witness is None

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "verdict": self.verdict,
            "witness": self.witness,
            "exponent": self.exponent,
            "per_step": [[n, v] for n, v in self.per_step],
        }


def ce_margin(f: RationalMapCoeffs, c: CriticalPoint, N: int, params: CEParams | None = None) -> HorizonReport:
    """Growth of ``|Df^n(f(c))|`` for ``n <= N``.

    ``per_step`` holds ``(n, log(D_n) / n)``; ``exponent`` is its minimum over
    ``[N/2, N]``.  The verdict checks ``log D_n >= log C0 + gamma0 n`` for all
    ``0 <= n <= N``.
    """
    if not c.in_julia:
        raise PreconditionError(f"critical point {c.point!r} is not flagged as a Julia critical point")
    if N < 1:
        raise ValueError("N must be at least 1")
    params = params or CEParams()
    u, rec = f.step(*c.point.canonical().as_tuple())[:2]
    logC = math.log(params.C0)
    acc = 0.0
    witness = None if logC <= 0 else 0
    per_step = []
    for n in range(1, N + 1):
        u, rec, sph = f.step(u, rec)
        acc += _log(sph)
        per_step.append((n, acc / n))
        if witness is None and acc < logC + params.gamma0 * n:
            witness = n
    lo = max(1, N // 2)
    exponent = min(v for n, v in per_step if n >= lo)
    return HorizonReport(N, per_step, witness, exponent)


def _jrit_coords(jrit) -> list[tuple[complex, bool]]:
    if isinstance(jrit, CriticalSet):
        jrit = [c.point for c in jrit.jrit]
    out = []
    for p in jrit:
        if isinstance(p, CriticalPoint):
            p = p.point
        out.append(_coerce(p).canonical().as_tuple())
    return out


def dist_to_set(u: complex, rec: bool, pts: Sequence[tuple[complex, bool]]) -> float:
    if not pts:
        return math.inf
    return min(chordal_uv(u, rec, v, r) for v, r in pts)


def slow_recurrence_check(
    f: RationalMapCoeffs, z, N: int, alpha: float, jrit, K: float = 0.0
) -> tuple[float, HorizonReport]:
    """``K_min = min_{1 <= n <= N} dist(f^n(z), Jrit) e^{alpha n}``.

    An empty ``jrit`` gives ``K_min = inf`` and a vacuous pass.
    """
    pts = _jrit_coords(jrit)
    u, rec = _coerce(z).canonical().as_tuple()
    per_step = []
    kmin = math.inf
    witness = None
    for n in range(1, N + 1):
        u, rec, _ = f.step(u, rec)
        if not pts:
            continue
        d = dist_to_set(u, rec, pts)
        val = d * math.exp(alpha * n)
        per_step.append((n, val))
        if val < kmin:
            kmin = val
        if witness is None and val < K:
            witness = n
        if d == 0 and witness is None:
            witness = n
    return kmin, HorizonReport(N, per_step, witness)


def basic_assumption_check(fam: MarkedFamily, a: complex, l: int, n: int, params: RecurrenceParams) -> HorizonReport:
    """``dist(xi_k, Jrit_a) >= K e^{-2 alpha k}`` for ``1 <= k <= n``."""
    return _distance_check(fam, a, l, range(1, n + 1), params.K, params.alpha, n)


def _distance_check(fam, a, l, ks: Iterable[int], K: float, alpha: float, horizon: int) -> HorizonReport:
    ks = list(ks)
    pts = fam.jrit_points(a)
    logK = _log(K)
    per_step = []
    witness = None
    if not ks or not pts:
        return HorizonReport(horizon, per_step, None)
    orbit = xi_orbit(fam, a, l, ks[-1])
    for k in ks:
        u, rec, _ = orbit[k]
        ld = _log(dist_to_set(u, rec, pts))
        margin = ld - (logK - 2 * alpha * k)
        per_step.append((k, margin))
        if witness is None and ld < logK - 2 * alpha * k:
            witness = k
    return HorizonReport(horizon, per_step, witness)


def _growth_ok(fam, a, l, kmax: int, C0: float, gamma: float) -> bool:
    """``|Df_a^k(v_l(a))| >= C0 e^{gamma k}`` for ``0 <= k <= kmax`` (spherical)."""
    if kmax < 0:
        return True
    logC = math.log(C0)
    if logC > 0:
        return False
    orbit = xi_orbit(fam, a, l, kmax + 1)
    acc = 0.0
    for k in range(1, kmax + 1):
        acc += _log(orbit[k][2])
        if acc < logC + gamma * k:
            return False
    return True


def membership_E(
    fam: MarkedFamily, a: complex, l: int, n: int, gamma: float, ladder: ExponentLadder, C0: float = 0.5
) -> bool:
    """Growth along ``v_l`` up to ``n - 1``, and along the other Julia
    critical values up to the auxiliary horizon."""
    if not _growth_ok(fam, a, l, n - 1, C0, gamma):
        return False
    aux = ladder.aux_horizon(n)
    return all(_growth_ok(fam, a, j, aux, C0, gamma) for j in fam.jrit_indices if j != l)


def membership_B(fam: MarkedFamily, a: complex, l: int, n: int, params: RecurrenceParams, ladder: ExponentLadder) -> bool:
    """Recurrence bound along ``xi_l`` for ``1 <= k <= n - 1`` and along the
    other Julia critical points up to the auxiliary horizon."""
    if not _distance_check(fam, a, l, range(1, n), params.K, params.alpha, n).passed:
        return False
    aux = ladder.aux_horizon(n)
    for j in fam.jrit_indices:
        if j != l and not _distance_check(fam, a, j, range(1, aux + 1), params.K, params.alpha, aux).passed:
            return False
    return True
