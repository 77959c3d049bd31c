"""Attracting cycles and finite-horizon hyperbolicity."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import multiprocessing
import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .errors import NumericFailure, PreconditionError
from .family import MarkedFamily
from .sphere import Chart, RationalMapCoeffs, SpherePoint, _coerce, chordal_uv

ATTRACTING_MARGIN = 1e-6


@dataclass(frozen=True)
class CycleRecord:
    period: int
    representative: SpherePoint
    multiplier: complex
    points: tuple = ()
    basin_hits: tuple = ()

    def to_dict(self) -> dict:
        z = self.representative.to_complex()
        return {
            "period": self.period,
            "representative": [z.real, z.imag] if math.isfinite(abs(z)) else "inf",
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "basin_hits": list(self.basin_hits),
        }


def cycle_multiplier(f: RationalMapCoeffs, u: complex, rec: bool, period: int) -> complex:
    """Product of local derivatives around the cycle through ``(u, rec)``.

    Chart changes along the way cancel because the cycle closes in the
    starting chart; a final correction handles a cycle that returns in the
    other chart.
    """
    m = 1 + 0j
    u0, rec0 = u, rec
    for _ in range(period):
        u, rec, d = f.local_derivative(u, rec)
        m *= d
    if rec != rec0:
        # d(1/x)/dx at the closing point, to return to the starting chart
        m *= -1.0 / (u * u)
    return m


def _refine_cycle(f: RationalMapCoeffs, u: complex, rec: bool, period: int, iters: int = 60):
    """Newton on ``f^period(x) - x`` in the chart of the starting point."""
    for _ in range(iters):
        v, vr, m = u, rec, 1 + 0j
        for _ in range(period):
            v, vr, d = f.local_derivative(v, vr)
            m *= d
        if vr != rec:
            if v == 0:
                break
            m *= -1.0 / (v * v)
            v = 1.0 / v
        g = v - u
        if abs(g) < 1e-15 * max(1.0, abs(u)):
            break
        if m == 1:
            break
        step = g / (m - 1)
        if not math.isfinite(abs(step)):
            raise NumericFailure("non-finite Newton step while refining a cycle")
        u = u - step
    return u, rec


def _close(u1, r1, u2, r2, tol) -> bool:
    return chordal_uv(u1, r1, u2, r2) <= tol


def detect_cycle(
    f: RationalMapCoeffs, start, horizon: int, max_period: int, check_every: int = 50
) -> CycleRecord | None:
    """Iterate from ``start`` and look for a periodic pattern of period ``<= max_period``.

    Every ``check_every`` steps the last point is compared with the previous
    ``max_period`` points; a candidate is refined by Newton's method and
    accepted only if it is attracting.
    """
    u, rec = _coerce(start).canonical().as_tuple()
    hist: list[tuple[complex, bool]] = []
    for n in range(1, horizon + 1):
        u, rec, _ = f.step(u, rec)
        if not math.isfinite(abs(u)):
            raise NumericFailure(f"non-finite orbit point at step {n}")
        hist.append((u, rec))
        if len(hist) > max_period + 1:
            hist.pop(0)
        if n % check_every and n != horizon:
            continue
        for per in range(1, min(max_period, len(hist) - 1) + 1):
            pu, pr = hist[-1 - per]
            if not _close(u, rec, pu, pr, 1e-6):
                continue
            cu, cr = _refine_cycle(f, u, rec, per)
            # confirm the refined point is periodic with this minimal period
            v, vr = cu, cr
            ok = True
            for k in range(1, per + 1):
                v, vr, _ = f.step(v, vr)
                if k < per and _close(v, vr, cu, cr, 1e-10):
                    ok = False
                    break
            if not ok or not _close(v, vr, cu, cr, 1e-10):
                continue
            m = cycle_multiplier(f, cu, cr, per)
            if abs(m) <= 1 - ATTRACTING_MARGIN:
                pts = [(cu, cr)]
                for _ in range(per - 1):
                    a, b, _ = f.step(*pts[-1])
                    pts.append((a, b))
                rep = min(pts, key=lambda p: (p[1], abs(p[0])))
                return CycleRecord(
                    per,
                    SpherePoint(rep[0], Chart.RECIPROCAL if rep[1] else Chart.FINITE),
                    m,
                    tuple(SpherePoint(a, Chart.RECIPROCAL if b else Chart.FINITE) for a, b in pts),
                )
            break
    return None


def _same_cycle(c1: CycleRecord, c2: CycleRecord, tol: float = 1e-8) -> bool:
    if c1.period != c2.period:
        return False
    u, r = c1.representative.as_tuple()
    return any(_close(u, r, *p.as_tuple(), tol) for p in c2.points)


def find_attracting_cycles(f: RationalMapCoeffs, max_period: int, seeds: Sequence, horizon: int = 2000) -> list[CycleRecord]:
    if max_period < 1:
        raise PreconditionError("max_period must be at least 1")
    found: list[CycleRecord] = []
    for s in seeds:
        c = detect_cycle(f, s, horizon, max_period)
        if c is not None and not any(_same_cycle(c, g) for g in found):
            found.append(c)
    return found


class Verdict(Enum):
    HYPERBOLIC = "hyperbolic"
    UNDETERMINED = "undetermined"
    NUMERIC_FAILURE = "numeric_failure"


@dataclass
class HyperbolicityVerdict:
    status: Verdict
    horizon: int
    cycles: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def classify_parameter(fam: MarkedFamily, a: complex, horizon: int = 2000, max_period: int = 64) -> HyperbolicityVerdict:
    """Hyperbolic iff every marked critical orbit locks onto an attracting cycle."""
    try:
        f = fam.map_at(a)
        cycles: list[CycleRecord] = []
        diag = {}
        for l, t in enumerate(fam.tracks):
            c = detect_cycle(f, t.at(a), horizon, max_period)
            if c is None:
                diag[l] = "no attracting cycle within horizon"
                return HyperbolicityVerdict(Verdict.UNDETERMINED, horizon, cycles, diag)
            for i, g in enumerate(cycles):
                if _same_cycle(c, g):
                    cycles[i] = CycleRecord(g.period, g.representative, g.multiplier, g.points, g.basin_hits + (l,))
                    break
            else:
                cycles.append(CycleRecord(c.period, c.representative, c.multiplier, c.points, (l,)))
            diag[l] = f"period {c.period}, |multiplier| = {abs(c.multiplier):.6g}"
        return HyperbolicityVerdict(Verdict.HYPERBOLIC, horizon, cycles, diag)
    except (NumericFailure, ZeroDivisionError, OverflowError) as exc:
        return HyperbolicityVerdict(Verdict.NUMERIC_FAILURE, horizon, [], {"error": str(exc)})


@dataclass(frozen=True)
class DensityRow:
    radius: float
    n_samples: int
    n_hyperbolic: int
    n_undetermined: int
    wilson_lo: float
    wilson_hi: float

    @property
    def hyperbolic_fraction(self) -> float:
        return self.n_hyperbolic / self.n_samples

    @property
    def undetermined_fraction(self) -> float:
        return self.n_undetermined / self.n_samples


def density_samples(a0: complex, radius: float, n: int, seed: int, index: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    xy = rng.uniform(-0.5, 0.5, size=(n, 2)) * radius
    return a0 + xy[:, 0] + 1j * xy[:, 1]


def _classify_batch(args) -> list[str]:
    fam, params, horizon, max_period = args
    return [classify_parameter(fam, complex(a), horizon, max_period).status.value for a in params]


def density_scan(
    fam: MarkedFamily,
    a0: complex,
    radii: Sequence[float],
    samples_per_square: int,
    horizon: int = 2000,
    seed: int = 0,
    workers: int = 1,
    max_period: int = 64,
) -> list[DensityRow]:
    """Hyperbolic fractions in squares of side ``radius`` centred at ``a0``."""
    radii = list(radii)
    if samples_per_square < 100:
        raise PreconditionError("samples_per_square must be at least 100")
    if any(r <= 0 for r in radii) or any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])):
        raise PreconditionError("radii must be positive and strictly decreasing")
    rows = []
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(max_workers=workers, mp_context=multiprocessing.get_context("fork"))
    try:
        for i, r in enumerate(radii):
            params = density_samples(complex(a0), r, samples_per_square, seed, i)
            chunks = [(fam, params[j: j + 50], horizon, max_period) for j in range(0, len(params), 50)]
            if pool is not None:
                results = [s for c in pool.map(_classify_batch, chunks) for s in c]
            else:
                results = [s for c in chunks for s in _classify_batch(c)]
            nh = sum(s == Verdict.HYPERBOLIC.value for s in results)
            nu = len(results) - nh
            lo, hi = proportion_confint(nh, len(results), alpha=0.05, method="wilson")
            rows.append(DensityRow(r, len(results), nh, nu, float(lo), float(hi)))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows
