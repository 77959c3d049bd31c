"""Summaries of an engine run for ``report.json``."""

from __future__ import annotations

import math
from collections import Counter
from statistics import median

from .engine import (
    ACTIVE,
    ESCAPED,
    EXCLUDED,
    MASS_BUCKETS,
    RESOLUTION,
    EngineResult,
    deletion_fraction_check,
    dyadic_pair,
    escape_tail,
)
from .errors import InsufficientData
from .family import MarkedFamily
from .returns import ReturnKind, bound_length_bracket

SAMPLE_DESIGN = (
    "Element images are represented by five parameter samples (four corners and the centre), "
    "each following its own critical orbit; image diameters are the sampled diameter inflated by "
    "the configured factor, and element bound periods are the minimum over sampled (a, b) pairs. "
    "Suprema over whole elements are therefore estimates, not enclosures."
)


def mass_dict(units: int, unit_exp: int) -> dict:
    m, e = dyadic_pair(units, unit_exp)
    return {"mantissa": m, "exponent": e}


def conservation_summary(result: EngineResult) -> dict:
    """Exact integer check of the ledger identity at every recorded step."""
    bad = [row[0] for row in result.ledger_rows if sum(row[1:5]) != result.total_units]
    resum = result.resum()
    final = result.final_masses()
    return {
        "steps": len(result.ledger_rows),
        "violating_steps": bad,
        "exact": not bad and resum == final,
        "resum_matches_ledger": resum == final,
    }


def deletion_summary(result: EngineResult, nu_min: int = 50) -> dict:
    rows = deletion_fraction_check(result.deletions, result.config.recurrence.alpha, nu_min)
    viol = [r for r in rows if r["violation"]]
    return {
        "nu_min": nu_min,
        "checked": len(rows),
        "violations": len(viol),
        "worst_observed": max((r["observed"] for r in rows), default=None),
        "first_violations": viol[:20],
    }


def _tail_reading(escapes, hat_d: int, h_of, name: str) -> dict:
    """Tail past ``t = 2 h r0`` with ``h`` given per record by ``h_of(r0)``."""
    recs = [x for x in escapes if not math.isnan(x.r0)]
    out: dict = {"reading": name, "records_with_r0": len(recs)}
    if not recs:
        out.update(tail_mass=0.0, tail_events=0, fitted_rate=None, reference_rate=None, rate_ok=True,
                   note="no escape follows an essential return")
        return out
    hs = [h_of(x.r0) for x in recs]
    h_ref = median(hs)
    total_w = sum(x.units for x in escapes)
    tail = [(x.t, x.units) for x, h in zip(recs, hs) if x.t > 2 * h * x.r0]
    n_tail = sum(1 for x, h in zip(recs, hs) if x.t > 2 * h * x.r0 and not x.censored)
    ref = 1.0 / (3 * h_ref)
    out.update(h=h_ref, threshold_t=2 * h_ref * median(x.r0 for x in recs), reference_rate=ref,
               tail_events=n_tail, tail_mass=sum(w for _, w in tail) / total_w if total_w else 0.0)
    if not tail:
        out.update(fitted_rate=None, rate_ok=True,
                   note="no escape mass beyond 2 h r0; the tail bound holds with zero mass")
        return out
    try:
        fit = escape_tail(tail, h_ref, min_events=2)
    except InsufficientData as exc:
        out.update(fitted_rate=None, rate_ok=None, note=str(exc))
        return out
    out.update(fitted_rate=fit.fitted_rate, note=fit.note,
               rate_ok=None if fit.fitted_rate is None else fit.fitted_rate >= 0.5 * ref)
    return out


def escape_summary(result: EngineResult, hat_d: int, gammaI: float, min_events: int = 100) -> dict:
    """Escape-time statistics under both readings of ``h``.

    ``h = 8 hat_d^2 / gammaI`` is the primary reading; ``h = 8 hat_d^2 / r0``
    (so that ``2 h r0`` is constant) is reported alongside.
    """
    esc = result.escapes
    n_events = sum(not x.censored for x in esc)
    out: dict = {
        "events": n_events,
        "censored": sum(x.censored for x in esc),
        "min_events": min_events,
        "enough_events": n_events >= min_events,
        "time_histogram": sorted(Counter(x.t for x in esc if not x.censored).items()),
    }
    h_const = 8 * hat_d**2 / gammaI
    out["gammaI_reading"] = _tail_reading(esc, hat_d, lambda r0: h_const, "h = 8 hat_d^2 / gammaI")
    out["r_reading"] = _tail_reading(
        esc, hat_d, lambda r0: 8 * hat_d**2 / r0 if r0 > 0 else math.inf, "h = 8 hat_d^2 / r0")
    try:
        full = escape_tail(esc, h_const)
        out["full_fit"] = full.to_dict()
    except InsufficientData as exc:
        out["full_fit"] = {"note": str(exc)}
    prim = out["gammaI_reading"]
    out["criterion_ok"] = bool(out["enough_events"] and prim.get("rate_ok"))
    return out


def bracket_summary(result: EngineResult, fam: MarkedFamily, gamma: float) -> dict:
    """Share of harvested returns whose bound period lies in the length bracket (with slack 2)."""
    Gamma = result.gamma.Gamma
    inside = total = 0
    misses = []
    for ev in result.events:
        if ev.kind is ReturnKind.BOUND or not math.isfinite(ev.r):
            continue
        lo, hi = bound_length_bracket(ev.r, fam.tracks[ev.k].degree, gamma, Gamma)
        total += 1
        if lo - 2 <= ev.p <= hi + 2:
            inside += 1
        elif len(misses) < 20:
            misses.append({"element_id": ev.element_id, "nu": ev.nu, "r": ev.r, "p": ev.p, "bracket": [lo, hi]})
    return {
        "returns": total,
        "inside": inside,
        "fraction": inside / total if total else None,
        "gamma": gamma,
        "Gamma": Gamma,
        "saturated_returns": result.saturations,
        "first_misses": misses,
    }


def engine_report(result: EngineResult, fam: MarkedFamily) -> dict:
    cfg = result.config
    ladder = cfg.ladder
    final = result.final_masses()
    kinds = Counter(ev.kind.value for ev in result.events)
    n_returns = sum(v for k, v in kinds.items() if k != ReturnKind.BOUND.value)
    return {
        "total_mass": mass_dict(result.total_units, result.unit_exp),
        "area": cfg.epsilon**2,
        "final_mass": {b: mass_dict(final[b], result.unit_exp) for b in MASS_BUCKETS},
        "final_fraction": {b: final[b] / result.total_units for b in MASS_BUCKETS},
        "elements": {b: sum(1 for e in result.leaves if e.status == b) for b in (ACTIVE, ESCAPED, EXCLUDED, RESOLUTION)},
        "conservation": conservation_summary(result),
        "events": dict(sorted(kinds.items())),
        "deletion_check": deletion_summary(result),
        "escape_tail": escape_summary(result, ladder.hat_d, ladder.gammaI),
        "bound_bracket": bracket_summary(result, fam, ladder.gammaI),
        "gamma_sup": result.gamma.to_dict(),
        "saturations": result.saturations,
        "saturation_share": result.saturations / n_returns if n_returns else 0.0,
        "parked_mass": mass_dict(result.parked_units(), result.unit_exp),
        "ladder": {"gammaL": ladder.gammaL, "gammaI": ladder.gammaI, "gammaB": ladder.gammaB,
                   "alpha": ladder.alpha, "hat_d": ladder.hat_d},
        "sample_design": SAMPLE_DESIGN,
    }
