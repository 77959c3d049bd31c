"""Dyadic partition-and-exclusion over a parameter square.

Every element is a dyadic subsquare of ``Q``.  Its critical-value images are
represented by five parameter samples (corners and centre).  At each time
step the engine advances the samples, classifies the image against the
critical neighbourhoods and then either records a return, refines, excludes
or marks an escape.

Masses are integers counting units of ``4**-max_depth * m(Q)``, so the
ledger identity ``active + escaped + excluded + resolution = total`` is
exact.  Runs are deterministic: the serial phase proceeds until the number
of active elements reaches ``split_threshold`` and the remaining subtrees
are then advanced independently (in a process pool when ``workers > 1``)
and merged in canonical order.
"""

from __future__ import annotations

import copy
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .conditions import ExponentLadder, RecurrenceParams
from .errors import DepthLimit, HorizonSaturated, InsufficientData, PreconditionError, StartupFailure
from .family import MarkedFamily, ParameterSquare
from .returns import (
    GammaSup,
    NeighborhoodConfig,
    ReturnEvent,
    ReturnKind,
    bound_period_from_states,
    critical_tube_lists,
    estimate_gamma,
    partition_bound,
)
from .sphere import to_cartesian

ACTIVE = "active"
ESCAPED = "escaped"
EXCLUDED = "excluded"
RESOLUTION = "resolution_excluded"
MASS_BUCKETS = (ACTIVE, ESCAPED, EXCLUDED, RESOLUTION)

# corner offsets, then the centre
_SAMPLE_OFFSETS = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5))


def dyadic_pair(units: int, unit_exp: int) -> tuple[int, int]:
    """``units * 2**unit_exp`` as ``(mantissa, exponent)`` with odd mantissa."""
    if units == 0:
        return 0, 0
    e = unit_exp
    while units % 2 == 0:
        units //= 2
        e += 1
    return units, e


@dataclass(frozen=True)
class DyadicSquare:
    depth: int
    ix: int
    iy: int
    path: str = ""

    def children(self, max_depth: int | None = None) -> list["DyadicSquare"]:
        if max_depth is not None and self.depth + 1 > max_depth:
            raise DepthLimit(f"refining {self.element_id} would exceed depth {max_depth}")
        d = self.depth + 1
        x, y = 2 * self.ix, 2 * self.iy
        return [
            DyadicSquare(d, x, y, self.path + "0"),
            DyadicSquare(d, x + 1, y, self.path + "1"),
            DyadicSquare(d, x, y + 1, self.path + "2"),
            DyadicSquare(d, x + 1, y + 1, self.path + "3"),
        ]

    @property
    def element_id(self) -> str:
        return "Q" + self.path

    def mass_units(self, max_depth: int) -> int:
        return 4 ** (max_depth - self.depth)

    def param(self, Q: ParameterSquare, fx: float, fy: float) -> complex:
        # power-of-two scaling keeps shared corners bit-identical across depths
        s = 2.0 ** -self.depth
        return Q.point((self.ix + fx) * s, (self.iy + fy) * s)

    def sample_params(self, Q: ParameterSquare) -> list[complex]:
        return [self.param(Q, fx, fy) for fx, fy in _SAMPLE_OFFSETS]


def refine(sq: DyadicSquare, max_depth: int = 40) -> list[DyadicSquare]:
    """Exact quadrisection; DepthLimit beyond ``max_depth``."""
    return sq.children(max_depth)


@dataclass
class EngineConfig:
    a0: complex
    epsilon: float
    horizon: int
    nbhd: NeighborhoodConfig
    recurrence: RecurrenceParams
    ladder: ExponentLadder
    C0: float = 0.5
    max_depth: int = 40
    inflate: float = 1.2
    exclusion_mode: str = "any"
    bound_horizon: int = 200
    split_threshold: int = 64
    gamma_grid: int = 256
    workers: int = 1
    iota: float = 0.1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise PreconditionError("epsilon must be positive")
        if self.horizon < 0:
            raise PreconditionError("horizon must be non-negative")
        if self.exclusion_mode not in ("any", "all"):
            raise PreconditionError(f"exclusion_mode must be 'any' or 'all', got {self.exclusion_mode!r}")
        if not 1 <= self.max_depth <= 60:
            raise PreconditionError("max_depth must lie in [1, 60]")
        if not self.ladder.window_ok(self.iota):
            raise PreconditionError(
                f"alpha = {self.ladder.alpha} violates 32 hat_d^2 alpha / gammaI <= iota / 2 with iota = {self.iota}"
            )

    @property
    def square(self) -> ParameterSquare:
        return ParameterSquare(self.a0, self.epsilon)


@dataclass
class _Sample:
    a: complex
    crit: list  # Jrit coordinates at this parameter
    u: list
    rec: list
    worst: list  # history minimum of the basic-assumption log margin
    worst_k: list
    worst_dist: list
    t: list  # time each orbit has been advanced to; None once no holder tracks it


@dataclass
class Element:
    square: DyadicSquare
    samples: list
    bound_until: list
    free_since: list
    escaped_at: list
    last_essential: list
    first_r: list
    status: str = ACTIVE
    status_time: int = -1
    witness: dict | None = None

    @property
    def element_id(self) -> str:
        return self.square.element_id

    def to_dict(self, max_depth: int) -> dict:
        return {
            "id": self.element_id,
            "depth": self.square.depth,
            "ix": self.square.ix,
            "iy": self.square.iy,
            "mass": list(dyadic_pair(self.square.mass_units(max_depth), -2 * max_depth)),
            "status": self.status,
            "status_time": self.status_time,
            "witness": self.witness,
            "bound_until": list(self.bound_until),
            "escaped_at": list(self.escaped_at),
        }


@dataclass(frozen=True)
class DeletionEvent:
    nu: int
    element_id: str
    deleted: int
    before: int

    @property
    def fraction(self) -> float:
        return self.deleted / self.before


@dataclass(frozen=True)
class EscapeRecord:
    element_id: str
    l: int
    time: int
    t: int
    r0: float
    units: int
    censored: bool = False


@dataclass
class _Partial:
    """What one subtree run contributes to the merged result."""

    transitions: list = field(default_factory=list)  # (n, bucket, units)
    count_delta: list = field(default_factory=list)  # (n, change in number of active elements)
    events: list = field(default_factory=list)
    deletions: list = field(default_factory=list)
    escapes: list = field(default_factory=list)
    leaves: list = field(default_factory=list)
    gamma_exceed: int = 0
    gamma_worst: float = -math.inf
    saturations: int = 0


class _Runner:
    def __init__(self, fam: MarkedFamily, cfg: EngineConfig, Gamma: float):
        self.fam = fam
        self.cfg = cfg
        self.Q = cfg.square
        self.tracked = fam.jrit_indices
        self.logK = math.log(cfg.recurrence.K)
        self.alpha = cfg.recurrence.alpha
        self.Gamma = Gamma
        self.out = _Partial()
        self._tubes: dict = {}

    # -- samples ------------------------------------------------------------
    def new_sample(self, a: complex, n: int, alive: Sequence[bool]) -> _Sample:
        fam = self.fam
        f = fam.map_at(a)
        crit = fam.jrit_points(a)
        T = len(self.tracked)
        s = _Sample(a, crit, [0j] * T, [False] * T, [math.inf] * T, [0] * T, [math.inf] * T,
                    [n if x else None for x in alive])
        for ti, l in enumerate(self.tracked):
            if not alive[ti]:
                continue
            u, rec = fam.tracks[l].at(a).as_tuple()
            for k in range(1, n + 1):
                u, rec, sph = f.step(u, rec)
                self._observe(sph)
                self._ba(s, ti, k, u, rec)
            s.u[ti], s.rec[ti] = u, rec
        return s

    def _observe(self, sph: float):
        if sph > 0:
            lg = math.log(sph)
            if lg > self.out.gamma_worst:
                self.out.gamma_worst = lg
            if lg > self.Gamma:
                self.out.gamma_exceed += 1

    def _ba(self, s: _Sample, ti: int, k: int, u: complex, rec: bool):
        d = _dist_to(u, rec, s.crit)
        margin = (math.log(d) if d > 0 else -math.inf) - (self.logK - 2 * self.alpha * k)
        if margin < s.worst[ti]:
            s.worst[ti], s.worst_k[ti], s.worst_dist[ti] = margin, k, d

    def advance(self, e: Element, n: int):
        # siblings share corner samples, so each sample steps once per time
        for s in e.samples:
            f = self.fam.map_at(s.a)
            for ti in range(len(self.tracked)):
                if e.escaped_at[ti] is not None or s.t[ti] >= n:
                    continue
                u, rec, sph = f.step(s.u[ti], s.rec[ti])
                s.u[ti], s.rec[ti], s.t[ti] = u, rec, n
                self._observe(sph)
                self._ba(s, ti, n, u, rec)

    def children(self, e: Element, n: int) -> list[Element]:
        alive = [x is None for x in e.escaped_at]
        known = {s.a: s for s in e.samples}
        kids = []
        for sq in e.square.children():
            samples = []
            for a in sq.sample_params(self.Q):
                s = known.get(a)
                if s is None:
                    s = known[a] = self.new_sample(a, n, alive)
                samples.append(s)
            kids.append(Element(
                sq, samples, list(e.bound_until), list(e.free_since), list(e.escaped_at),
                list(e.last_essential), list(e.first_r),
            ))
        self.out.count_delta.append((n, 3))
        return kids

    # -- geometry -----------------------------------------------------------
    def geometry(self, e: Element, ti: int) -> tuple[float, int, float]:
        """Inflated image diameter, nearest Julia critical index and distance."""
        pts = [to_cartesian(s.u[ti], s.rec[ti]) for s in e.samples]
        diam = 0.0
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                diam = max(diam, math.dist(pts[i], pts[j]) / 2)
        best_k, best_d = -1, math.inf
        for s in e.samples:
            for idx, c in zip(self.tracked, s.crit):
                d = _dist_to(s.u[ti], s.rec[ti], [c])
                if d < best_d:
                    best_k, best_d = idx, d
        return diam * self.cfg.inflate, best_k, best_d

    # -- status changes -----------------------------------------------------
    def _retire(self, e: Element, status: str, n: int, witness=None):
        e.status, e.status_time, e.witness = status, n, witness
        self.out.transitions.append((n, status, e.square.mass_units(self.cfg.max_depth)))
        self.out.count_delta.append((n, -1))

    def _violation(self, e: Element, ti: int):
        bad = [s for s in e.samples if s.worst[ti] < 0]
        if not bad or (self.cfg.exclusion_mode == "all" and len(bad) < len(e.samples)):
            return None
        s = min(bad, key=lambda x: (x.worst[ti], x.worst_k[ti]))
        return {"l": self.tracked[ti], "k": s.worst_k[ti], "a": [s.a.real, s.a.imag], "dist": s.worst_dist[ti]}

    def _bound_period(self, e: Element, ti: int, n: int, k: int) -> int:
        h = min(self.cfg.bound_horizon, self.cfg.horizon - n)
        if h <= 0:
            return 0
        states = [(s.a, s.u[ti], s.rec[ti]) for s in e.samples]
        try:
            return bound_period_from_states(self.fam, states, k, self.alpha, h, lambda b: self._tube(b, k))
        except HorizonSaturated as exc:
            self.out.saturations += 1
            return exc.lower_bound

    def _tube(self, b: complex, k: int):
        key = (b, k)
        t = self._tubes.get(key)
        if t is None:
            t = self._tubes[key] = critical_tube_lists(self.fam, b, k, self.cfg.bound_horizon)
        return t

    def _event(self, e: Element, ti: int, n: int, k: int, dist: float, kind: ReturnKind, p: int):
        r = -math.log(dist) if dist > 0 else math.inf
        L = n - e.free_since[ti] if kind is not ReturnKind.BOUND else 0
        self.out.events.append(ReturnEvent(e.element_id, self.tracked[ti], n, k, r, kind, p, L))
        if kind is not ReturnKind.BOUND:
            e.bound_until[ti] = n + p
            e.free_since[ti] = n + p
        if kind is ReturnKind.ESSENTIAL:
            e.last_essential[ti] = n
            if e.first_r[ti] is None:
                e.first_r[ti] = r

    def _escape(self, e: Element, ti: int, n: int):
        e.escaped_at[ti] = n
        last = e.last_essential[ti]
        t = n - last if last is not None else n
        r0 = e.first_r[ti] if e.first_r[ti] is not None else math.nan
        self.out.escapes.append(EscapeRecord(
            e.element_id, self.tracked[ti], n, t, r0, e.square.mass_units(self.cfg.max_depth)))
        if all(x is not None for x in e.escaped_at):
            self._retire(e, ESCAPED, n)

    # -- one critical index -------------------------------------------------
    def handle(self, e: Element, ti: int, n: int, refined: bool, checked: list) -> list[Element]:
        cfg, nb = self.cfg, self.cfg.nbhd
        diam, k, dist = self.geometry(e, ti)
        if n <= e.bound_until[ti]:
            if dist < nb.deltaPrime:
                self._event(e, ti, n, k, dist, ReturnKind.BOUND, 0)
            return [e]
        if diam >= nb.S:
            # escape is judged before partitioning, wherever the image lies
            self._escape(e, ti, n)
            return [e]
        if dist >= nb.delta:
            if dist < nb.deltaPrime:
                self._event(e, ti, n, k, dist, ReturnKind.PSEUDO, self._bound_period(e, ti, n, k))
            return [e]
        theta = math.exp(self.logK - 2 * self.alpha * n)
        if all(_dist_to(s.u[ti], s.rec[ti], s.crit) < theta for s in e.samples):
            # the whole sampled image violates the basic assumption: no point refining
            checked.append(True)
            self._retire(e, EXCLUDED, n, self._violation(e, ti) or {"l": self.tracked[ti], "k": n})
            return [e]
        # below the exclusion threshold the partition rule is moot, so cap its depth there
        bound = partition_bound(max(dist, min(theta, nb.delta)))
        if diam > bound:
            if e.square.depth >= cfg.max_depth:
                self._retire(e, RESOLUTION, n, {"l": self.tracked[ti], "k": n, "diam": diam, "dist": dist})
                return [e]
            leaves = []
            for c in self.children(e, n):
                leaves.extend(self.handle(c, ti, n, True, checked))
            return leaves
        checked.append(True)
        w = self._violation(e, ti)
        if w is not None:
            self._retire(e, EXCLUDED, n, w)
            return [e]
        kind = ReturnKind.ESSENTIAL if refined or diam >= bound / 3 else ReturnKind.INESSENTIAL
        self._event(e, ti, n, k, dist, kind, self._bound_period(e, ti, n, k))
        return [e]

    def step_element(self, e: Element, n: int) -> list[Element]:
        self.advance(e, n)
        leaves = [e]
        for ti in range(len(self.tracked)):
            nxt = []
            for x in leaves:
                if x.status != ACTIVE or x.escaped_at[ti] is not None:
                    nxt.append(x)
                    continue
                checked: list = []
                before = x.square.mass_units(self.cfg.max_depth)
                got = self.handle(x, ti, n, False, checked)
                if checked:
                    deleted = sum(g.square.mass_units(self.cfg.max_depth) for g in got
                                  if g.status == EXCLUDED and g.status_time == n)
                    self.out.deletions.append(DeletionEvent(n, x.element_id, deleted, before))
                nxt.extend(got)
            leaves = nxt
        return leaves

    def run(self, elements: list[Element], n_from: int, n_to: int, stop_at: int | None = None) -> tuple[list[Element], int]:
        """Advance ``elements`` through times ``n_from..n_to``.

        Returns the final leaves and the last completed time.  With
        ``stop_at`` the run pauses once that many elements are active.
        """
        active = [e for e in elements if e.status == ACTIVE]
        done = [e for e in elements if e.status != ACTIVE]
        n = n_from - 1
        for n in range(n_from, n_to + 1):
            nxt = []
            for e in active:
                for leaf in self.step_element(e, n):
                    (nxt if leaf.status == ACTIVE else done).append(leaf)
            active = nxt
            if stop_at is not None and len(active) >= stop_at:
                break
            if not active:
                break
        return active + done, n


def _dist_to(u: complex, rec: bool, pts) -> float:
    best = math.inf
    s1 = 1.0 + abs(u) ** 2
    for v, r in pts:
        num = abs(u - v) if r == rec else abs(1.0 - u * v)
        d = num / math.sqrt(s1 * (1.0 + abs(v) ** 2))
        if d < best:
            best = d
    return best


def _subtree_task(args) -> _Partial:
    fam, cfg, Gamma, elements, n_from = args
    runner = _Runner(fam, cfg, Gamma)
    leaves, _ = runner.run(elements, n_from, cfg.horizon)
    runner.out.leaves = leaves
    return runner.out


@dataclass
class EngineResult:
    config: EngineConfig
    unit_exp: int
    total_units: int
    ledger_rows: list  # (n, active, escaped, excluded, resolution, n_active_elements)
    events: list
    deletions: list
    escapes: list
    leaves: list
    gamma: GammaSup
    saturations: int

    def final_masses(self) -> dict:
        _, a, es, ex, rs, _ = self.ledger_rows[-1]
        return {ACTIVE: a, ESCAPED: es, EXCLUDED: ex, RESOLUTION: rs}

    def parked_units(self) -> int:
        H = self.config.horizon
        return sum(e.square.mass_units(self.config.max_depth) for e in self.leaves
                   if e.status == ACTIVE and any(b >= H for b in e.bound_until))

    def resum(self) -> dict:
        """Element masses re-summed by status, independent of the ledger."""
        out = {b: 0 for b in MASS_BUCKETS}
        for e in self.leaves:
            out[e.status] += e.square.mass_units(self.config.max_depth)
        return out


class PartitionEngine:
    def __init__(self, fam: MarkedFamily, cfg: EngineConfig, gamma: GammaSup | None = None):
        if not fam.jrit_indices:
            raise PreconditionError("the family marks no Julia critical point to track")
        self.fam = fam
        self.cfg = cfg
        self.gamma = gamma or estimate_gamma(fam, cfg.square, cfg.gamma_grid)

    def root(self, runner: _Runner) -> Element:
        sq = DyadicSquare(0, 0, 0)
        T = len(runner.tracked)
        samples = [runner.new_sample(a, 0, [True] * T) for a in sq.sample_params(self.cfg.square)]
        return Element(sq, samples, [0] * T, [0] * T, [None] * T, [None] * T, [None] * T)

    def run(self) -> EngineResult:
        cfg = self.cfg
        runner = _Runner(self.fam, cfg, self.gamma.Gamma)
        total = 4 ** cfg.max_depth
        elements = [self.root(runner)]
        n_done = 0
        if cfg.horizon > 0:
            elements, n_done = runner.run(elements, 1, cfg.horizon, stop_at=cfg.split_threshold)
        parts = [runner.out]
        active = sorted((e for e in elements if e.status == ACTIVE), key=lambda e: e.element_id)
        finished = [e for e in elements if e.status != ACTIVE]
        if active and n_done < cfg.horizon:
            # independent copies, so serial and pooled runs do exactly the same work
            tasks = [(self.fam, cfg, self.gamma.Gamma, [copy.deepcopy(e)], n_done + 1) for e in active]
            if cfg.workers > 1:
                ctx = multiprocessing.get_context("fork")
                with ProcessPoolExecutor(max_workers=cfg.workers, mp_context=ctx) as pool:
                    sub = list(pool.map(_subtree_task, tasks, chunksize=max(1, len(tasks) // (4 * cfg.workers))))
            else:
                sub = [_subtree_task(t) for t in tasks]
            parts.extend(sub)
            leaves = finished + [leaf for p in sub for leaf in p.leaves]
        else:
            leaves = elements
        return self._merge(parts, leaves, total)

    def _merge(self, parts: list[_Partial], leaves: list[Element], total: int) -> EngineResult:
        cfg = self.cfg
        H = cfg.horizon
        buckets = {b: [0] * (H + 1) for b in (ESCAPED, EXCLUDED, RESOLUTION)}
        counts = [0] * (H + 1)
        for p in parts:
            for n, bucket, units in p.transitions:
                buckets[bucket][n] += units
            for n, dc in p.count_delta:
                counts[n] += dc
        rows = []
        es = ex = rs = 0
        n_active = 1
        for n in range(H + 1):
            es += buckets[ESCAPED][n]
            ex += buckets[EXCLUDED][n]
            rs += buckets[RESOLUTION][n]
            n_active += counts[n]
            active = total - es - ex - rs
            rows.append((n, active, es, ex, rs, n_active))
        resum = {b: 0 for b in MASS_BUCKETS}
        for e in leaves:
            resum[e.status] += e.square.mass_units(cfg.max_depth)
        final = rows[-1]
        if (resum[ACTIVE], resum[ESCAPED], resum[EXCLUDED], resum[RESOLUTION]) != tuple(final[1:5]):
            raise AssertionError(f"mass ledger mismatch: ledger {final[1:5]} vs elements {resum}")
        if sum(resum.values()) != total:
            raise AssertionError("element masses do not sum to the total")
        events = sorted((ev for p in parts for ev in p.events),
                        key=lambda ev: (ev.nu, ev.element_id, ev.l, ev.kind.value))
        deletions = sorted((d for p in parts for d in p.deletions), key=lambda d: (d.nu, d.element_id))
        escapes = [x for p in parts for x in p.escapes]
        # elements still active at the horizon enter the tail as censored observations
        for e in leaves:
            if e.status != ACTIVE:
                continue
            for ti, l in enumerate(self.fam.jrit_indices):
                if e.escaped_at[ti] is None:
                    last = e.last_essential[ti]
                    r0 = e.first_r[ti] if e.first_r[ti] is not None else math.nan
                    escapes.append(EscapeRecord(e.element_id, l, H, H - (last or 0), r0,
                                                e.square.mass_units(cfg.max_depth), True))
        escapes.sort(key=lambda x: (x.time, x.element_id, x.l))
        gamma = GammaSup(self.gamma.Gamma, self.gamma.exceedances + sum(p.gamma_exceed for p in parts),
                         max([self.gamma.worst_seen] + [p.gamma_worst for p in parts]))
        leaves = sorted(leaves, key=lambda e: e.element_id)
        return EngineResult(cfg, -2 * cfg.max_depth, total, rows, events, deletions, escapes, leaves,
                            gamma, sum(p.saturations for p in parts))


# -- post-run analyses ---------------------------------------------------------

def is_partition_element(fam: MarkedFamily, A, n: int, l: int, cfg: NeighborhoodConfig, inflate: float = 1.2) -> bool:
    """Def-2.3-style diameter bound at every ``k <= n`` for the sampled image of ``A``.

    ``A`` is a ParameterSquare (five samples) or an explicit list of parameters.
    """
    params = A.samples() if isinstance(A, ParameterSquare) else list(A)
    states = []
    for a in params:
        u, rec = fam.tracks[l].at(a).as_tuple()
        states.append([fam.map_at(a), u, rec, fam.jrit_points(a)])
    for _ in range(n):
        for st in states:
            st[1], st[2], _ = st[0].step(st[1], st[2])
        if not image_ok([(st[1], st[2]) for st in states], [st[3] for st in states], cfg, inflate):
            return False
    return True


def image_ok(points: Sequence[tuple[complex, bool]], crits: Sequence, cfg: NeighborhoodConfig, inflate: float = 1.2) -> bool:
    cart = [to_cartesian(u, r) for u, r in points]
    diam = max((math.dist(x, y) / 2 for x in cart for y in cart), default=0.0) * inflate
    dist = min(_dist_to(u, r, c) for (u, r), c in zip(points, crits))
    if dist < cfg.delta:
        return diam <= partition_bound(dist)
    return diam <= cfg.S


def deletion_fraction_check(deletions: Sequence[DeletionEvent], alpha: float, nu_min: int = 0) -> list[dict]:
    """Observed deleted fraction against ``e^{-alpha nu}`` per recorded deletion."""
    out = []
    for d in deletions:
        if d.nu < nu_min:
            continue
        bound = math.exp(-alpha * d.nu)
        out.append({"nu": d.nu, "element_id": d.element_id, "observed": d.fraction,
                    "bound": bound, "violation": d.fraction > bound})
    return out


@dataclass
class TailFit:
    times: list
    ccdf: list
    fitted_rate: float | None
    reference_rate: float | None
    t_min: float
    n_events: int
    note: str = ""

    def to_dict(self) -> dict:
        return {"times": self.times, "ccdf": self.ccdf, "fitted_rate": self.fitted_rate,
                "reference_rate": self.reference_rate, "t_min": self.t_min, "n_events": self.n_events,
                "note": self.note}


def escape_tail(escapes: Sequence, h: float | None = None, t_min: float = 0.0, min_events: int = 10) -> TailFit:
    """Mass-weighted complementary CDF of escape times and a log-linear fit.

    ``escapes`` holds EscapeRecord objects or plain ``(t, weight)`` pairs.
    Censored records count towards the CCDF but not the event total.
    """
    pairs, n_events = [], 0
    for x in escapes:
        if isinstance(x, EscapeRecord):
            pairs.append((x.t, x.units))
            n_events += not x.censored
        else:
            pairs.append((float(x[0]), float(x[1])))
            n_events += 1
    if n_events < min_events:
        raise InsufficientData(f"{n_events} escape events, need at least {min_events}")
    t = np.array([p[0] for p in pairs], dtype=float)
    w = np.array([float(p[1]) for p in pairs], dtype=float)
    w /= w.sum()
    ts = np.unique(t)
    ccdf = np.array([w[t >= x].sum() for x in ts])
    ref = 1.0 / (3 * h) if h else None
    sel = (ts >= t_min) & (ccdf > 0)
    if np.count_nonzero(sel) < 2:
        return TailFit(ts.tolist(), ccdf.tolist(), None, ref, t_min, n_events,
                       "fewer than two distinct escape times past t_min; fit skipped")
    slope, _ = np.polyfit(ts[sel], np.log(ccdf[sel]), 1)
    return TailFit(ts.tolist(), ccdf.tolist(), float(-slope), ref, t_min, n_events)


@dataclass(frozen=True)
class StartupOutcome:
    l: int
    N: int | None
    outcome: str  # "essential_return" | "escaped" | "horizon"


def startup_scan(fam: MarkedFamily, Q: ParameterSquare, cfg: NeighborhoodConfig, horizon: int = 1000,
                 inflate: float = 1.2) -> list[StartupOutcome]:
    """First time the sampled image of ``Q`` needs partitioning or reaches scale ``S``.

    StartupFailure when that already happens at time 1.
    """
    out = []
    params = Q.samples()
    for l in fam.jrit_indices:
        states = []
        for a in params:
            u, rec = fam.tracks[l].at(a).as_tuple()
            states.append([fam.map_at(a), u, rec, fam.jrit_points(a)])
        result = StartupOutcome(l, None, "horizon")
        for n in range(1, horizon + 1):
            for st in states:
                st[1], st[2], _ = st[0].step(st[1], st[2])
            pts = [(st[1], st[2]) for st in states]
            cart = [to_cartesian(u, r) for u, r in pts]
            diam = max(math.dist(x, y) / 2 for x in cart for y in cart) * inflate
            dist = min(_dist_to(u, r, st[3]) for (u, r), st in zip(pts, states))
            if diam >= cfg.S:
                result = StartupOutcome(l, n, "escaped")
            elif dist < cfg.delta and diam > partition_bound(dist):
                result = StartupOutcome(l, n, "essential_return")
            else:
                continue
            if n == 1:
                raise StartupFailure(f"the square is not a partition element at time 1 for critical index {l}")
            break
        out.append(result)
    return sorted(out, key=lambda o: (o.N is None, o.N or 0, o.l))
