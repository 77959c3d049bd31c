"""Empirical probes for the quantitative distortion and expansion estimates.

Each probe returns a ProbeResult.  Randomised probes draw every sample from
its own ``SeedSequence(seed, spawn_key=(i,))`` stream, so a counterexample
is identified by ``(seed, i)`` and can be replayed on its own.

Euclidean derivatives (finite chart) are used where the estimate compares
derivative ratios along nearby orbits; growth estimates use the spherical
metric.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .conditions import ExponentLadder, RecurrenceParams, _jrit_coords, dist_to_set, membership_B, membership_E
from .engine import is_partition_element
from .errors import (
    BranchExhaustion,
    EnvelopeViolated,
    HypothesesFailed,
    InsufficientData,
    NumericFailure,
    PreconditionError,
)
from .family import MarkedFamily, ParameterSquare, xi_orbit
from .returns import NeighborhoodConfig
from .sphere import Chart, RationalMapCoeffs, SpherePoint, _coerce, chordal_uv

LEMMA_IDS = ("distortion", "mane", "weak-param", "mdl", "repulsion", "growth", "bound-distortion", "ce2")


@dataclass
class ProbeResult:
    lemma_id: str
    samples: int
    worst_ratio: float
    bound: float
    pass_fraction: float
    counterexamples: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.pass_fraction <= 1.0:
            raise ValueError("pass_fraction must lie in [0, 1]")

    @property
    def passed(self) -> bool:
        return self.pass_fraction == 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _finite(x: float, what: str) -> float:
    if not math.isfinite(x):
        raise NumericFailure(f"non-finite intermediate in {what}")
    return x


def _point(u: complex, rec: bool) -> SpherePoint:
    return SpherePoint(u, Chart.RECIPROCAL if rec else Chart.FINITE)


# -- pointwise distortion ----------------------------------------------------

def distortion_terms(f: RationalMapCoeffs, z: complex, w: complex, n: int, jrit, envelope: float = 0.5) -> tuple[float, float]:
    """``|Df^n(z) / Df^n(w) - 1|`` and ``sum_j |f^j z - f^j w| / dist(f^j w, Jrit)``.

    EnvelopeViolated when some ``|f^j z - f^j w|`` exceeds ``envelope``
    times the distance of ``f^j w`` to the critical set.
    """
    pts = _jrit_coords(jrit)
    log_ratio = 0j
    s = 0.0
    for j in range(n):
        dw = dist_to_set(*_coerce(w).canonical().as_tuple(), pts) if pts else 1.0
        gap = abs(z - w)
        if gap > envelope * dw:
            raise EnvelopeViolated(f"orbits separate at step {j}: {gap:.3g} > {envelope} * {dw:.3g}")
        s += gap / dw if dw > 0 else math.inf
        dz, dwv = f.finite_derivative(z), f.finite_derivative(w)
        if dz == 0 or dwv == 0:
            raise EnvelopeViolated(f"orbit hits a critical point at step {j}")
        log_ratio += complex(math.log(abs(dz / dwv)), math.atan2((dz / dwv).imag, (dz / dwv).real))
        z, w = f.finite_value(z), f.finite_value(w)
        if not (math.isfinite(abs(z)) and math.isfinite(abs(w))):
            raise EnvelopeViolated(f"orbit leaves the finite chart at step {j}")
    lhs = abs(np.expm1(log_ratio))
    return _finite(float(lhs), "distortion"), _finite(s, "distortion")


def pointwise_distortion_probe(f: RationalMapCoeffs, z: complex, w: complex, n: int, jrit, C: float = 1.5) -> ProbeResult:
    lhs, s = distortion_terms(f, complex(z), complex(w), n, jrit)
    rhs = math.expm1(C * s)
    return ProbeResult("distortion", 1, lhs, rhs, 1.0 if lhs <= rhs else 0.0, details={"C": C, "sum": s})


def _distortion_sample(f, jrit, seeds_pool, seed, i, n_max, rel_gap):
    rng = _rng(seed, i)
    z = complex(seeds_pool[int(rng.integers(len(seeds_pool)))])
    theta = rng.uniform(0, 2 * math.pi)
    w = z + rel_gap * rng.uniform(0.1, 1.0) * max(1.0, abs(z)) * complex(math.cos(theta), math.sin(theta))
    n = int(rng.integers(1, n_max + 1))
    return z, w, n


def distortion_batch(
    f: RationalMapCoeffs,
    jrit,
    pairs: int = 1000,
    n_max: int = 20,
    seed: int = 0,
    rel_gap: float = 1e-9,
    safety: float = 1.5,
) -> ProbeResult:
    """Fit ``C`` on the even-indexed samples, validate on the odd ones."""
    pool = julia_seeds(f, 256, seed)
    pool = [p.to_complex() for p in pool if not p.is_reciprocal]
    if not pool:
        raise InsufficientData("no finite Julia seeds")
    rows = []
    for i in range(pairs):
        z, w, n = _distortion_sample(f, jrit, pool, seed, i, n_max, rel_gap)
        try:
            lhs, s = distortion_terms(f, z, w, n, jrit)
        except EnvelopeViolated:
            continue
        rows.append((i, lhs, s))
    calib = [r for r in rows if r[0] % 2 == 0]
    valid = [r for r in rows if r[0] % 2 == 1]
    if not calib or not valid:
        raise InsufficientData("not enough admissible pairs")
    need = [math.log1p(lhs) / s for _, lhs, s in calib if s > 0 and lhs > 0]
    C = safety * max(need) if need else safety
    fails = [(i, lhs, s) for i, lhs, s in valid if lhs > math.expm1(C * s)]
    worst = max((lhs / math.expm1(C * s) for _, lhs, s in valid if s > 0), default=0.0)
    return ProbeResult(
        "distortion", len(valid), worst, 1.0, 1 - len(fails) / len(valid),
        [{"seed": seed, "index": i, "value": lhs} for i, lhs, _ in fails],
        {"C": C, "calibration": len(calib), "n_max": n_max, "rel_gap": rel_gap},
    )


def replay_distortion(f: RationalMapCoeffs, jrit, seed: int, index: int, n_max: int = 20, rel_gap: float = 1e-9) -> float:
    pool = [p.to_complex() for p in julia_seeds(f, 256, seed) if not p.is_reciprocal]
    z, w, n = _distortion_sample(f, jrit, pool, seed, index, n_max, rel_gap)
    return distortion_terms(f, z, w, n, jrit)[0]


# -- Julia seeds and expansion ---------------------------------------------------

def _preimages(f: RationalMapCoeffs, target: complex) -> np.ndarray:
    p, q = np.asarray(f.p_coeffs), np.asarray(f.q_coeffs)
    poly = p - target * q
    k = len(poly) - 1
    while k > 0 and poly[k] == 0:
        k -= 1
    if k < 1:
        return np.array([], dtype=complex)
    return np.roots(poly[: k + 1][::-1])


def repelling_fixed_point(f: RationalMapCoeffs) -> complex:
    p, q = np.asarray(f.p_coeffs), np.asarray(f.q_coeffs)
    z_q = np.concatenate([[0], q])
    fix = np.concatenate([p, [0]]) - z_q
    k = len(fix) - 1
    while k > 0 and fix[k] == 0:
        k -= 1
    roots = np.roots(fix[: k + 1][::-1])
    best = max(roots, key=lambda r: abs(f.finite_derivative(complex(r))))
    if abs(f.finite_derivative(complex(best))) <= 1:
        raise InsufficientData("no repelling finite fixed point")
    return complex(best)


def julia_seeds(f: RationalMapCoeffs, count: int, seed: int = 0, depth: int = 24) -> list[SpherePoint]:
    """Points near the Julia set by random backward iteration from a repelling fixed point."""
    z0 = repelling_fixed_point(f)
    out = []
    for i in range(count):
        rng = _rng(seed, 10_000 + i)
        z = z0
        for _ in range(depth):
            pre = _preimages(f, z)
            if pre.size == 0:
                break
            z = complex(pre[int(rng.integers(pre.size))])
        out.append(SpherePoint.from_complex(z))
    return out


@dataclass
class ManeEstimate:
    C_M: float
    lambda_M: float
    C_delta: float
    gamma_outside: float
    C_hit: float | None
    gamma_H: float | None
    samples: int
    validation_pass: float

    def to_dict(self) -> dict:
        return asdict(self)


def _infimum_line(points: Sequence[tuple[int, float]]) -> tuple[float, float]:
    """Slope from a least-squares fit of the per-``n`` minimum, intercept lowered to touch every point."""
    by_n: dict[int, float] = {}
    for n, y in points:
        by_n[n] = min(by_n.get(n, math.inf), y)
    ns = np.array(sorted(by_n), dtype=float)
    ys = np.array([by_n[int(n)] for n in ns])
    if ns.size < 2:
        raise InsufficientData("need at least two horizons for a fit")
    slope = float(np.polyfit(ns, ys, 1)[0])
    intercept = min(y - slope * n for n, y in points)
    return slope, intercept


def mane_probe(
    f: RationalMapCoeffs,
    jrit,
    delta: float,
    horizon: int,
    seeds: Sequence | None = None,
    n_seeds: int = 200,
    seed: int = 0,
) -> ManeEstimate:
    """Infimum-line fits of ``log |Df^n(z)|`` (spherical) over orbits that avoid ``D(Jrit, delta)``.

    The hit case collects the first time an orbit enters that neighbourhood.
    Even-indexed seeds calibrate, odd-indexed seeds validate.
    """
    if horizon < 2:
        raise InsufficientData("horizon must be at least 2")
    if seeds is None:
        seeds = julia_seeds(f, n_seeds, seed)
    pts = _jrit_coords(jrit)
    free, hits = [], []
    for i, s in enumerate(seeds):
        u, rec = _coerce(s).canonical().as_tuple()
        acc = 0.0
        for n in range(1, horizon + 1):
            u, rec, sph = f.step(u, rec)
            if sph <= 0:
                break
            acc += math.log(sph)
            if pts and dist_to_set(u, rec, pts) < delta:
                hits.append((i, n, acc))
                break
            free.append((i, n, acc))
    calib = [(n, y) for i, n, y in free if i % 2 == 0]
    valid = [(n, y) for i, n, y in free if i % 2 == 1]
    if len({n for n, _ in calib}) < 2:
        raise InsufficientData("too few admissible orbit segments")
    slope, intercept = _infimum_line(calib)
    ok = sum(y >= intercept + slope * n - 1e-9 for n, y in valid)
    vp = ok / len(valid) if valid else 1.0
    C_hit = gamma_H = None
    if len({n for _, n, _ in hits}) >= 2:
        gamma_H, c = _infimum_line([(n, y) for _, n, y in hits])
        C_hit = math.exp(c)
    return ManeEstimate(
        math.exp(intercept), math.exp(slope), math.exp(intercept), slope, C_hit, gamma_H, len(free), vp
    )


# -- weak parameter dependence ------------------------------------------------------

def _euclid_orbit(fam: MarkedFamily, a: complex, l: int, n: int) -> tuple[list, list]:
    """Finite-chart orbit ``xi_0..xi_n`` and ``f_a'`` along it."""
    f = fam.map_at(a)
    z = fam.tracks[l].at(a).to_complex()
    zs, ds = [z], []
    for _ in range(n):
        ds.append(f.finite_derivative(z))
        z = f.finite_value(z)
        zs.append(z)
    ds.append(f.finite_derivative(z))
    return zs, ds


def weak_param_probe(
    fam: MarkedFamily,
    a: complex,
    b: complex,
    l: int,
    window: tuple[int, int],
    Q: float = 1.05,
    S: float = 0.05,
    gamma1: float = 0.0,
) -> ProbeResult:
    """Q-certificate for the two parameter-stretching estimates on ``window``.

    Hypotheses: (i) ``|Df_a^{n-1}(v_l(a))| >= e^{gamma1 (n-1)}`` and
    (ii) ``|xi_n(a) - xi_n(b)| <= S`` throughout the window.
    """
    n0, n1 = window
    if not 1 <= n0 <= n1:
        raise ValueError("window must satisfy 1 <= n0 <= n1")
    za, da = _euclid_orbit(fam, a, l, n1)
    zb, _ = _euclid_orbit(fam, b, l, n1)
    gap = abs(a - b)
    if gap == 0:
        return ProbeResult("weak-param", n1 - n0 + 1, 1.0, Q, 1.0, details={"certificate": 1.0})
    # log |Df_a^{k}(v_l(a))|, derivative along xi_1 .. xi_k
    logD = [0.0]
    for k in range(1, n1 + 1):
        logD.append(logD[-1] + (math.log(abs(da[k])) if da[k] != 0 else -math.inf))
    for n in range(n0, n1 + 1):
        if logD[n - 1] < gamma1 * (n - 1):
            raise HypothesesFailed(f"growth hypothesis fails at n = {n}", "i")
        if abs(za[n] - zb[n]) > S:
            raise HypothesesFailed(f"separation exceeds S = {S} at n = {n}", "ii")
    worst = 1.0
    checks = passed = 0
    for n in range(max(n0, 2), n1 + 1):
        sep = abs(za[n] - zb[n])
        # first estimate: sep >= Q^{-(n-1)} |Df^{n-1}| |a - b|
        need = (logD[n - 1] + math.log(gap) - (math.log(sep) if sep > 0 else -math.inf)) / (n - 1)
        worst = max(worst, math.exp(max(0.0, need)))
        checks += 1
        passed += need <= math.log(Q) + 1e-12
        # second estimate: sep ~ |Df^j(xi_{n-j})| |xi_{n-j}(a) - xi_{n-j}(b)| within Q^j
        for j in range(1, n - n0 + 1):
            prev = abs(za[n - j] - zb[n - j])
            if prev == 0 or sep == 0:
                continue
            lr = math.log(sep) - (logD[n - 1] - logD[n - j - 1] + math.log(prev))
            worst = max(worst, math.exp(abs(lr) / j))
            checks += 1
            passed += abs(lr) <= j * math.log(Q) + 1e-12
    if not math.isfinite(worst):
        raise NumericFailure("non-finite Q-certificate")
    return ProbeResult("weak-param", checks, worst, Q, passed / checks if checks else 1.0,
                       details={"certificate": worst, "window": [n0, n1]})


# -- main distortion lemma ---------------------------------------------------------

def _log_deriv_seq(fam: MarkedFamily, a: complex, l: int, n: int) -> list[complex]:
    """Complex ``log Df_a^k(v_l(a))`` (euclidean), ``k = 0..n``, unwrapped continuously."""
    _, ds = _euclid_orbit(fam, a, l, n + 1)
    out = [0j]
    for k in range(1, n + 1):
        d = ds[k]
        if d == 0:
            raise PreconditionError(f"critical value orbit hits a critical point at step {k}")
        out.append(out[-1] + complex(math.log(abs(d)), math.atan2(d.imag, d.real)))
    return out


def _require_membership(fam, params, l, nu, ladder, rec, C0):
    for a in params:
        if not membership_E(fam, a, l, nu, ladder.gammaI, ladder, C0):
            raise PreconditionError(f"E membership fails at a = {a:.12g}, n = {nu}")
        if not membership_B(fam, a, l, nu, rec, ladder):
            raise PreconditionError(f"B membership fails at a = {a:.12g}, n = {nu}")


def mdl_probe(
    fam: MarkedFamily,
    A: ParameterSquare | Sequence[complex],
    l: int,
    nu: int,
    nu2: int,
    eps_prime: float = 0.1,
    ladder: ExponentLadder | None = None,
    recurrence: RecurrenceParams | None = None,
    nbhd: NeighborhoodConfig | None = None,
    C0: float = 0.5,
) -> ProbeResult:
    """``max |Df_a^n(v_l(a)) / Df_b^n(v_l(b)) - 1|`` over sampled pairs and ``n`` in ``[nu, nu2]``."""
    params = A.samples() if isinstance(A, ParameterSquare) else list(A)
    if ladder is not None and recurrence is not None:
        _require_membership(fam, params, l, nu, ladder, recurrence, C0)
    if nbhd is not None and isinstance(A, ParameterSquare) and not is_partition_element(fam, A, nu2, l, nbhd):
        raise PreconditionError(f"the square is not a partition element up to n = {nu2}")
    logs = {a: _log_deriv_seq(fam, a, l, nu2) for a in params}
    worst = 0.0
    for i, a in enumerate(params):
        for b in params[i + 1:]:
            for n in range(nu, nu2 + 1):
                x = logs[a][n] - logs[b][n]
                worst = max(worst, float(abs(np.expm1(x))), float(abs(np.expm1(-x))))
    _finite(worst, "mdl")
    return ProbeResult("mdl", len(params), worst, eps_prime, 1.0 if worst <= eps_prime else 0.0,
                       details={"window": [nu, nu2]})


# -- repulsion and growth -----------------------------------------------------------

def repulsion_check(xi_fn: Callable[[complex, int], complex], pairs: Sequence[tuple[complex, complex]], nu: int, nu2: int) -> ProbeResult:
    ratios = []
    for a, b in pairs:
        before = abs(xi_fn(a, nu) - xi_fn(b, nu))
        after = abs(xi_fn(a, nu2) - xi_fn(b, nu2))
        ratios.append(math.inf if before == 0 and after > 0 else (after / before if before else 2.0))
    ok = sum(r >= 2.0 for r in ratios)
    worst = min(ratios) if ratios else math.inf
    return ProbeResult("repulsion", len(ratios), worst, 2.0, ok / len(ratios) if ratios else 1.0)


def repulsion_probe(fam: MarkedFamily, A, l: int, nu: int, nu2: int) -> ProbeResult:
    """``|xi_nu2(a) - xi_nu2(b)| >= 2 |xi_nu(a) - xi_nu(b)|`` on sampled pairs (chordal)."""
    params = A.samples() if isinstance(A, ParameterSquare) else list(A)
    orbits = {a: xi_orbit(fam, a, l, nu2) for a in params}

    def xi_fn(a, n):
        u, rec, _ = orbits[a][n]
        return _point(u, rec)

    ratios = []
    for i, a in enumerate(params):
        for b in params[i + 1:]:
            before = chordal_uv(*xi_fn(a, nu).as_tuple(), *xi_fn(b, nu).as_tuple())
            after = chordal_uv(*xi_fn(a, nu2).as_tuple(), *xi_fn(b, nu2).as_tuple())
            ratios.append(after / before if before > 0 else (math.inf if after > 0 else 2.0))
    if not ratios:
        return ProbeResult("repulsion", 0, 2.0, 2.0, 1.0)
    ok = sum(r >= 2.0 for r in ratios)
    return ProbeResult("repulsion", len(ratios), min(ratios), 2.0, ok / len(ratios))


def growth_after_return_probe(
    fam: MarkedFamily,
    a: complex,
    l: int,
    nu: int,
    nu2: int,
    ladder: ExponentLadder,
    gamma: float | None = None,
    recurrence: RecurrenceParams | None = None,
    C0: float = 0.5,
) -> ProbeResult:
    """Per-``n`` exponent ``(1/n) log D_n`` for ``1 <= n <= nu2 - 1`` against ``0.9 min(gamma, gammaH)``."""
    gamma = ladder.gammaI if gamma is None else gamma
    if recurrence is not None:
        _require_membership(fam, [a], l, nu, ladder, recurrence, C0)
    bound = 0.9 * min(gamma, ladder.gammaH)
    orbit = xi_orbit(fam, a, l, max(nu2, 1))
    acc = 0.0
    worst = math.inf
    ok = total = 0
    for n in range(1, max(nu2, 2)):
        s = orbit[n][2]
        acc += math.log(s) if s > 0 else -math.inf
        e = acc / n
        worst = min(worst, e)
        total += 1
        ok += e >= bound
    return ProbeResult("growth", total, worst, bound, ok / total if total else 1.0)


def bound_expansion(fam: MarkedFamily, a: complex, l: int, nu: int, p: int) -> float:
    """``log |Df_a^{p+1}(xi_{nu,l}(a))|`` (spherical)."""
    orbit = xi_orbit(fam, a, l, nu + p + 1)
    return sum(math.log(orbit[k][2]) if orbit[k][2] > 0 else -math.inf for k in range(nu, nu + p + 1))


def bound_distortion_probe(fam: MarkedFamily, a: complex, l: int, nu: int, i: int, p: int, eps_prime: float = 0.1) -> ProbeResult:
    """``max_{j <= p} |Df^j(xi_{nu+1,l}) / Df^j(xi_{1,i}) - 1|`` (euclidean)."""
    if p <= 0:
        return ProbeResult("bound-distortion", 0, 0.0, eps_prime, 1.0)
    _, dl = _euclid_orbit(fam, a, l, nu + 1 + p)
    _, di = _euclid_orbit(fam, a, i, 1 + p)
    x = 0j
    worst = 0.0
    per_j = []
    for j in range(1, p + 1):
        r = dl[nu + j] / di[j]
        x += complex(math.log(abs(r)), math.atan2(r.imag, r.real))
        v = float(abs(np.expm1(x)))
        per_j.append(v)
        worst = max(worst, v)
    _finite(worst, "bound distortion")
    return ProbeResult("bound-distortion", p, worst, eps_prime, 1.0 if worst <= eps_prime else 0.0,
                       details={"per_j": per_j})


# -- second Collet-Eckmann condition ------------------------------------------------

def second_ce_probe(f: RationalMapCoeffs, c, n_max: int, branches: int, seed: int = 0) -> ProbeResult:
    """Worst ``(1/n) log |Df^n(w)|`` over random backward branches ``w`` of ``c``."""
    if branches <= 0:
        raise InsufficientData("at least one branch is required")
    c = _coerce(c).to_complex()
    worst = math.inf
    worst_idx = None
    per_depth = [math.inf] * (n_max + 1)
    for b in range(branches):
        rng = _rng(seed, b)
        target = c
        acc = 0.0
        for n in range(1, n_max + 1):
            pre = _preimages(f, target)
            if pre.size == 0:
                raise BranchExhaustion(f"no preimage found at depth {n}")
            w = complex(pre[int(rng.integers(pre.size))])
            sph = f.step(*SpherePoint.from_complex(w).as_tuple())[2]
            acc += math.log(sph) if sph > 0 else -math.inf
            e = acc / n
            per_depth[n] = min(per_depth[n], e)
            if e < worst:
                worst, worst_idx = e, b
            target = w
    return ProbeResult("ce2", branches, worst, 0.0, 1.0 if worst > 0 else 0.0,
                       [] if worst > 0 else [{"seed": seed, "index": worst_idx, "value": worst}],
                       {"per_depth": per_depth[1:], "n_max": n_max})


def replay_second_ce(f: RationalMapCoeffs, c, n_max: int, seed: int, index: int) -> float:
    rng = _rng(seed, index)
    target = _coerce(c).to_complex()
    acc, worst = 0.0, math.inf
    for n in range(1, n_max + 1):
        pre = _preimages(f, target)
        w = complex(pre[int(rng.integers(pre.size))])
        sph = f.step(*SpherePoint.from_complex(w).as_tuple())[2]
        acc += math.log(sph) if sph > 0 else -math.inf
        worst = min(worst, acc / n)
        target = w
    return worst
