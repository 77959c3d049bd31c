import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcexcl.conditions import (
    CEParams,
    ExponentLadder,
    RecurrenceParams,
    basic_assumption_check,
    ce_margin,
    membership_B,
    membership_E,
    slow_recurrence_check,
)
from bcexcl.errors import PreconditionError
from bcexcl.family import quadratic
from bcexcl.sphere import CriticalPoint, RationalMapCoeffs, SpherePoint

CHEB = RationalMapCoeffs.polynomial((-2, 0, 1))
CRIT = CriticalPoint(SpherePoint.from_complex(0), 2, True)
QUAD = quadratic()
LADDER = ExponentLadder(1.3, 0.2, 0.5, 1e-5)


def test_ladder_values():
    assert LADDER.gammaL == pytest.approx(1 / 60)
    assert LADDER.gammaI == pytest.approx(1 / 30)
    assert LADDER.gammaB == pytest.approx(0.075)
    assert LADDER.max_alpha == pytest.approx(1 / 6000)
    ExponentLadder(1.3, 0.2, 0.5, LADDER.max_alpha)
    with pytest.raises(PreconditionError):
        ExponentLadder(1.3, 0.2, 0.5, LADDER.max_alpha * 1.01)
    with pytest.raises(PreconditionError):
        ExponentLadder(1.3, 0.2, 1.0, 1e-5)


def test_ce_chebyshev_oracle():
    rep = ce_margin(CHEB, CRIT, 1000, CEParams(0.5, 1.3))
    assert abs(rep.exponent - math.log(4)) < 1e-12
    assert rep.passed and rep.verdict == "pass"


def test_ce_fails_for_fast_target():
    rep = ce_margin(CHEB, CRIT, 50, CEParams(0.5, 1.5))
    assert not rep.passed and rep.witness is not None


def test_ce_requires_julia_flag():
    with pytest.raises(PreconditionError):
        ce_margin(CHEB, CriticalPoint(SpherePoint.from_complex(0), 2, False), 10)


@settings(max_examples=100, deadline=None)
@given(st.integers(100, 3000))
def test_ce_estimate_converges(N):
    rep = ce_margin(CHEB, CRIT, N)
    assert abs(rep.exponent - math.log(4)) <= 5 / N


def test_slow_recurrence_chebyshev():
    # orbit of the critical value sits on the fixed point 2 at distance 2/sqrt(5) from 0
    kmin, rep = slow_recurrence_check(CHEB, -2, 100, 1e-5, [CRIT])
    assert kmin == pytest.approx(2 / math.sqrt(5) * math.exp(1e-5))
    assert rep.passed
    kmin, rep = slow_recurrence_check(CHEB, -2, 100, 1e-5, [])
    assert kmin == math.inf and rep.passed


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 0.25), st.floats(-0.8, 0.8), st.integers(1, 200), st.integers(1, 200),
       st.floats(1e-6, 1e-2), st.floats(1, 10))
def test_kmin_monotone(re, im, n1, n2, alpha, grow):
    f = QUAD.map_at(complex(re, im))
    z = complex(re, im)
    n1, n2 = sorted((n1, n2))
    k1, _ = slow_recurrence_check(f, z, n1, alpha, [CRIT])
    k2, _ = slow_recurrence_check(f, z, n2, alpha, [CRIT])
    assert k2 <= k1
    # a larger alpha weights every term up, so the minimum cannot drop
    k3, _ = slow_recurrence_check(f, z, n2, alpha * grow, [CRIT])
    assert k3 >= k2 * (1 - 1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, -1.4), st.floats(-0.05, 0.05), st.integers(1, 60), st.integers(1, 60))
def test_membership_monotone(re, im, n1, n2):
    a = complex(re, im)
    n1, n2 = sorted((n1, n2))
    rec = RecurrenceParams(1e-5, 0.05)
    if membership_E(QUAD, a, 0, n2, LADDER.gammaI, LADDER):
        assert membership_E(QUAD, a, 0, n1, LADDER.gammaI, LADDER)
    if membership_B(QUAD, a, 0, n2, rec, LADDER):
        assert membership_B(QUAD, a, 0, n1, rec, LADDER)


def test_basic_assumption_at_chebyshev():
    rep = basic_assumption_check(QUAD, -2, 0, 50, RecurrenceParams(1e-5, 0.1))
    assert rep.passed
    # the critical orbit of a = -1 returns to 0 every other step
    rep = basic_assumption_check(QUAD, -1, 0, 10, RecurrenceParams(1e-5, 0.1))
    assert rep.witness == 2
