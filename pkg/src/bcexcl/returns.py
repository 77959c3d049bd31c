"""Critical neighbourhoods, returns and bound periods."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .conditions import RecurrenceParams, dist_to_set
from .errors import DomainError, HorizonSaturated, PreconditionError
from .family import MarkedFamily, ParameterSquare, xi_orbit
from .sphere import spherical_derivative_grid, to_cartesian


@dataclass(frozen=True)
class NeighborhoodConfig:
    """Disks ``U = D(c, delta)``, ``U' = D(c, delta')`` and ``U2 = D(c, delta**2)``
    with ``delta = e^-Delta``; ``S = epsilon1 * delta`` is the escape scale."""

    Delta: float
    DeltaPrime: float
    epsilon1: float = 0.1

    def __post_init__(self):
        if not 0 < self.DeltaPrime < self.Delta:
            raise PreconditionError(f"need 0 < DeltaPrime < Delta, got {self.DeltaPrime}, {self.Delta}")
        if not 0 < self.epsilon1 < 1:
            raise PreconditionError(f"epsilon1 must lie in (0, 1), got {self.epsilon1}")

    @property
    def delta(self) -> float:
        return math.exp(-self.Delta)

    @property
    def deltaPrime(self) -> float:
        return math.exp(-self.DeltaPrime)

    @property
    def delta2(self) -> float:
        return math.exp(-2 * self.Delta)

    @property
    def S(self) -> float:
        return self.epsilon1 * self.delta

    def check_square(self, fam: MarkedFamily, square: ParameterSquare, ratio: float = 100.0) -> float:
        """Ratio of ``diam U`` to the sampled diameter of the critical tracks over the square."""
        worst = 0.0
        for l in fam.jrit_indices:
            pts = [fam.tracks[l].at(a) for a in square.samples()]
            cs = [to_cartesian(*p.as_tuple()) for p in pts]
            worst = max(worst, max(math.dist(x, y) / 2 for x in cs for y in cs))
        r = math.inf if worst == 0 else 2 * self.delta / worst
        if r < ratio:
            raise PreconditionError(f"critical points move too much over the square: diam U / diam c(Q) = {r:.3g}")
        return r


class Containment(Enum):
    OUTSIDE = "outside"
    IN_U_PRIME = "in_u_prime"
    IN_U = "in_u"
    IN_U2 = "in_u2"


def classify_distance(dist: float, cfg: NeighborhoodConfig) -> Containment:
    if dist < cfg.delta2:
        return Containment.IN_U2
    if dist < cfg.delta:
        return Containment.IN_U
    if dist < cfg.deltaPrime:
        return Containment.IN_U_PRIME
    return Containment.OUTSIDE


def nearest_critical(fam: MarkedFamily, a: complex, u: complex, rec: bool) -> tuple[int, float]:
    """Index and chordal distance of the closest marked Julia critical point."""
    best, bd = -1, math.inf
    for j in fam.jrit_indices:
        d = dist_to_set(u, rec, [fam.tracks[j].at(a).as_tuple()])
        if d < bd:
            best, bd = j, d
    return best, bd


def classify_point_step(fam: MarkedFamily, a: complex, l: int, n: int, cfg: NeighborhoodConfig) -> Containment:
    u, rec, _ = xi_orbit(fam, a, l, n)[n]
    return classify_distance(nearest_critical(fam, a, u, rec)[1], cfg)


def return_depth(dist: float) -> float:
    return math.inf if dist <= 0 else -math.log(dist)


class ReturnKind(Enum):
    ESSENTIAL = "essential"
    INESSENTIAL = "inessential"
    PSEUDO = "pseudo"
    BOUND = "bound"


@dataclass(frozen=True)
class ReturnEvent:
    element_id: str
    l: int
    nu: int
    k: int
    r: float
    kind: ReturnKind
    p: int
    L: int

    CSV_HEADER = ("element_id", "l", "nu", "k", "r", "kind", "p", "L")

    def csv_row(self) -> list[str]:
        return [self.element_id or "root", str(self.l), str(self.nu), str(self.k), f"{self.r:.12g}", self.kind.value, str(self.p), str(self.L)]


# -- bound periods -----------------------------------------------------------

def _cart(orbit) -> np.ndarray:
    return np.array([to_cartesian(u, rec) for u, rec, _ in orbit])


def _tube_length(follow: np.ndarray, crit: np.ndarray, crit_dist: np.ndarray, alpha: float, horizon: int) -> int:
    """Largest ``p <= horizon`` with ``d(follow_j, crit_j) <= e^{-alpha j} crit_dist_j`` for ``0 < j <= p``.

    Arrays are indexed by ``j`` (entry 0 unused).
    """
    j = np.arange(1, horizon + 1)
    gap = np.linalg.norm(follow[1: horizon + 1] - crit[1: horizon + 1], axis=1) / 2
    ok = gap <= np.exp(-alpha * j) * crit_dist[1: horizon + 1]
    bad = np.nonzero(~ok)[0]
    return int(bad[0]) if bad.size else horizon


def _critical_tube(fam: MarkedFamily, b: complex, k: int, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    orbit = xi_orbit(fam, b, k, horizon)
    pts = fam.jrit_points(b)
    dist = np.array([dist_to_set(u, rec, pts) for u, rec, _ in orbit])
    return _cart(orbit), dist


def critical_tube_lists(fam: MarkedFamily, b: complex, k: int, horizon: int) -> tuple[list, list]:
    c, d = _critical_tube(fam, b, k, horizon)
    return [tuple(x) for x in c], d.tolist()


def bound_period_point(fam: MarkedFamily, a: complex, l: int, nu: int, k: int, params: RecurrenceParams, horizon: int) -> int:
    """Bound period of the return ``xi_{nu,l}(a)`` to the critical point ``c_k(a)``.

    Raises HorizonSaturated (with ``lower_bound = horizon``) when the
    shadowing still holds at ``j = horizon``.
    """
    follow = _cart(xi_orbit(fam, a, l, nu + horizon)[nu:])
    crit, dist = _critical_tube(fam, a, k, horizon)
    p = _tube_length(follow, crit, dist, params.alpha, horizon)
    if p >= horizon:
        raise HorizonSaturated(f"bound period reaches the horizon {horizon}", horizon)
    return p


def bound_period_from_states(
    fam: MarkedFamily,
    states: Sequence[tuple[complex, complex, bool]],
    k: int,
    alpha: float,
    horizon: int,
    tube: Callable[[complex], tuple[np.ndarray, np.ndarray]] | None = None,
) -> int:
    """Shared bound period of image points ``(a, u, rec)`` (point ``u`` iterated by ``f_a``)
    against the critical orbits ``xi_{j,k}(b)`` of every sampled ``b``.

    ``tube(b)`` may supply cached tubes (as from ``critical_tube_lists``) of
    length at least ``horizon``.
    """
    params = []
    for a, _, _ in states:
        if a not in params:
            params.append(a)
    if tube is None:
        tube = lambda b: critical_tube_lists(fam, b, k, horizon)  # noqa: E731
    tubes = [tube(b) for b in params]
    shrink = [math.exp(-alpha * j) for j in range(horizon + 1)]
    best = horizon
    for a, u, rec in states:
        f = fam.map_at(a)
        # only steps up to the current best can lower it
        for j in range(1, best + 1):
            u, rec, _ = f.step(u, rec)
            x = to_cartesian(u, rec)
            if any(math.dist(x, c[j]) / 2 > shrink[j] * d[j] for c, d in tubes):
                best = j - 1
                break
        if best == 0:
            return 0
    if best >= horizon:
        raise HorizonSaturated(f"element bound period reaches the horizon {horizon}", horizon)
    return best


def bound_period_element(
    fam: MarkedFamily,
    params_sample: Sequence[complex],
    l: int,
    n: int,
    k: int,
    params: RecurrenceParams,
    horizon: int,
    z_mode: str = "paired",
) -> int:
    """Element bound period from parameter samples.

    ``paired`` (default) follows each sample's own image ``xi_{n,l}(a)``
    under ``f_a``, so the check runs over all ordered pairs ``(a, b)``.
    ``all`` also follows every image sample under every sampled map.
    """
    params_sample = list(params_sample)
    starts = {a: xi_orbit(fam, a, l, n)[n][:2] for a in params_sample}
    if z_mode == "paired":
        states = [(a, *starts[a]) for a in params_sample]
    elif z_mode == "all":
        states = [(a, *starts[z]) for a in params_sample for z in params_sample]
    else:
        raise ValueError(f"unknown z_mode {z_mode!r}")
    return bound_period_from_states(fam, states, k, params.alpha, horizon)


# -- partition rule ----------------------------------------------------------

def partition_bound(dist: float) -> float:
    """``dist / (log dist)**2``, the largest allowed image diameter near the critical set."""
    if dist <= 0:
        return 0.0
    if dist >= 1:
        raise DomainError(f"distance {dist} outside (0, 1)")
    return dist / math.log(dist) ** 2


def essential_test(diam: float, dist: float) -> bool:
    """Essential iff ``diam >= partition_bound(dist) / 3``."""
    if not 0 < dist < 1:
        raise DomainError(f"distance {dist} outside (0, 1)")
    return diam >= partition_bound(dist) / 3


def bound_length_bracket(r: float, d_i: int, gamma: float, Gamma: float) -> tuple[float, float]:
    if not (gamma > 0 and Gamma > 0):
        raise PreconditionError("gamma and Gamma must be positive")
    return d_i * r / (2 * Gamma), 2 * d_i * r / gamma


# -- sup of the spherical derivative ----------------------------------------

@dataclass
class GammaSup:
    """Sampled sup of the log spherical derivative, with a runtime exceedance counter."""

    Gamma: float
    exceedances: int = 0
    worst_seen: float = -math.inf

    def observe(self, log_deriv: float) -> bool:
        if log_deriv > self.worst_seen:
            self.worst_seen = log_deriv
        if log_deriv > self.Gamma:
            self.exceedances += 1
            return False
        return True

    def to_dict(self) -> dict:
        return {"Gamma": self.Gamma, "exceedances": self.exceedances, "worst_seen": self.worst_seen}


def estimate_gamma(fam: MarkedFamily, square: ParameterSquare, grid: int = 256, param_grid: int = 3) -> GammaSup:
    """Max of ``log |Df_a|`` (spherical) over a ``grid x grid`` lattice on each
    chart disk ``|u| <= 2`` and a ``param_grid**2`` lattice of parameters."""
    t = np.linspace(-2.0, 2.0, grid)
    U = (t[None, :] + 1j * t[:, None]).ravel()
    U = U[np.abs(U) <= 2.0]
    best = -math.inf
    for i in range(param_grid):
        for j in range(param_grid):
            x = i / (param_grid - 1) if param_grid > 1 else 0.5
            y = j / (param_grid - 1) if param_grid > 1 else 0.5
            f = fam.map_at(square.point(x, y))
            for rec in (False, True):
                with np.errstate(divide="ignore", invalid="ignore"):
                    v = spherical_derivative_grid(f, U, rec)
                v = v[np.isfinite(v)]
                if v.size:
                    best = max(best, float(np.log(np.max(v))))
    return GammaSup(best)
