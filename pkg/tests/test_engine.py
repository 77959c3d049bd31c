import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcexcl.conditions import basic_assumption_check
from bcexcl.engine import (
    ACTIVE,
    ESCAPED,
    EXCLUDED,
    DeletionEvent,
    DyadicSquare,
    PartitionEngine,
    deletion_fraction_check,
    dyadic_pair,
    escape_tail,
    image_ok,
    is_partition_element,
    refine,
    startup_scan,
)
from bcexcl.errors import DepthLimit, InsufficientData, PreconditionError, StartupFailure
from bcexcl.family import ParameterSquare, quadratic, xi
from bcexcl.returns import NeighborhoodConfig, ReturnKind

from conftest import run_preset

QUAD = quadratic()


def test_dyadic_pair():
    assert dyadic_pair(0, -80) == (0, 0)
    assert dyadic_pair(12, -4) == (3, -2)
    assert dyadic_pair(4**40, -80) == (1, 0)


def test_refine_is_exact():
    sq = DyadicSquare(0, 0, 0)
    kids = refine(sq)
    assert [k.element_id for k in kids] == ["Q0", "Q1", "Q2", "Q3"]
    assert sum(k.mass_units(5) for k in kids) == sq.mass_units(5)
    Q = ParameterSquare(-2, 1e-3)
    # shared corners are bit-identical across neighbours and depths
    assert kids[0].param(Q, 1, 1) == kids[3].param(Q, 0, 0) == Q.center
    with pytest.raises(DepthLimit):
        refine(DyadicSquare(3, 0, 0), max_depth=3)


def test_zero_horizon_run():
    cfg, _, result = run_preset("smoke", engine_horizon=0)
    assert result.ledger_rows == [(0, result.total_units, 0, 0, 0, 1)]
    assert result.events == [] and result.deletions == []
    assert [e.status for e in result.leaves] == [ACTIVE]


def test_engine_rejects_family_without_tracked_point():
    cfg = run_preset("smoke", engine_horizon=0)[0]
    fam = QUAD.with_julia_flags([False, False])
    with pytest.raises(PreconditionError):
        PartitionEngine(fam, cfg.engine_config())


def _check_run(cfg, result):
    total = result.total_units
    prev = (0, 0, 0)
    for n, a, es, ex, rs, count in result.ledger_rows:
        assert a + es + ex + rs == total
        # mass never leaves a terminal status
        assert es >= prev[0] and ex >= prev[1] and rs >= prev[2]
        prev = (es, ex, rs)
    assert result.resum() == result.final_masses()
    ids = [e.element_id for e in result.leaves]
    assert len(ids) == len(set(ids))
    for e in result.leaves:
        assert (e.status == ACTIVE) == (e.status_time == -1)
    delta = cfg.nbhd().delta
    for ev in result.events:
        if ev.kind is ReturnKind.PSEUDO:
            assert math.exp(-ev.r) >= delta
        elif ev.kind in (ReturnKind.ESSENTIAL, ReturnKind.INESSENTIAL):
            assert math.exp(-ev.r) < delta
    rec = cfg.recurrence()
    for e in result.leaves:
        if e.status != EXCLUDED:
            continue
        w = e.witness
        assert w is not None and "k" in w
        if "a" in w:
            a = complex(*w["a"])
            rep = basic_assumption_check(QUAD, a, w["l"], w["k"], rec)
            assert not rep.passed
            assert dict(rep.per_step)[w["k"]] < 0


@settings(max_examples=100, deadline=None)
@given(st.floats(-1.99, -1.45), st.floats(2e-5, 2e-4), st.sampled_from([0.05, 0.3]))
def test_engine_invariants(a0, eps, K):
    cfg, _, result = run_preset("recurrent", a0=a0, epsilon=eps, K=K, DeltaPrime=0.5, engine_horizon=40,
                                gamma_grid=32)
    _check_run(cfg, result)


def test_exclusion_scenario_has_witnesses():
    cfg, _, result = run_preset("recurrent", a0=-1.76, epsilon=1e-4, K=0.3, DeltaPrime=0.5, engine_horizon=40)
    assert result.final_masses()[EXCLUDED] == result.total_units
    assert any("a" in e.witness for e in result.leaves if e.status == EXCLUDED)
    _check_run(cfg, result)


def test_recurrent_preset_invariants(recurrent_run):
    cfg, _, result = recurrent_run
    _check_run(cfg, result)
    assert result.final_masses()[ESCAPED] == result.total_units
    assert sum(not x.censored for x in result.escapes) >= 100


def test_shared_samples_advance_once():
    # refinement happens at time 6; siblings share corner samples after that
    cfg, _, result = run_preset("recurrent", engine_horizon=10)
    leaves = [e for e in result.leaves if e.status == ACTIVE]
    assert len(leaves) > 4
    for e in leaves:
        for s in e.samples:
            assert s.t[0] == 10
            assert (s.u[0], s.rec[0]) == xi(QUAD, s.a, 0, 10).as_tuple()


def test_worker_count_does_not_change_output(recurrent_run):
    cfg, fam, base = recurrent_run
    par = PartitionEngine(fam, cfg.replace(workers=2).engine_config()).run()
    assert par.ledger_rows == base.ledger_rows
    assert [ev.csv_row() for ev in par.events] == [ev.csv_row() for ev in base.events]
    assert [e.to_dict(cfg.max_depth) for e in par.leaves] == [e.to_dict(cfg.max_depth) for e in base.leaves]


def test_deletion_fraction_check():
    rows = deletion_fraction_check(
        [DeletionEvent(10, "Q", 1, 4), DeletionEvent(60, "Q0", 0, 4), DeletionEvent(70, "Q1", 4, 4)], 1e-5, 50)
    assert [r["nu"] for r in rows] == [60, 70]
    assert [r["violation"] for r in rows] == [False, True]


def test_escape_tail_recovers_rate():
    rate = 0.3
    # weights chosen so the complementary CDF is exactly exp(-rate t) on 0..59
    ccdf = np.exp(-rate * np.arange(61))
    w = ccdf[:-1] - ccdf[1:]
    w[-1] = ccdf[-2]
    pairs = [(t, float(x)) for t, x in enumerate(w)]
    fit = escape_tail(pairs, h=10.0)
    assert fit.fitted_rate == pytest.approx(rate, rel=1e-6)
    assert fit.reference_rate == pytest.approx(1 / 30)
    with pytest.raises(InsufficientData):
        escape_tail(pairs[:5])


def test_partition_element_checks():
    nb = NeighborhoodConfig(6.0, 4.0)
    assert is_partition_element(QUAD, ParameterSquare(-2, 1e-7), 5, 0, nb)
    assert not is_partition_element(QUAD, ParameterSquare(-2, 1e-3), 3, 0, nb)
    # a tight cluster far from the critical point is fine, a wide one is not
    assert image_ok([(0.5, False), (0.5 + 1e-6, False)], [[(0j, False)]] * 2, nb)
    assert not image_ok([(0.5, False), (0.6, False)], [[(0j, False)]] * 2, nb)


def test_startup_scan():
    nb = NeighborhoodConfig(6.0, 4.0)
    out = startup_scan(QUAD, ParameterSquare(-2, 1e-6), nb)
    assert [(o.l, o.N, o.outcome) for o in out] == [(0, 7, "escaped")]
    with pytest.raises(StartupFailure):
        startup_scan(QUAD, ParameterSquare(-2, 0.1), nb)
