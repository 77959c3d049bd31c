import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcexcl.conditions import RecurrenceParams
from bcexcl.errors import DomainError, HorizonSaturated, PreconditionError
from bcexcl.family import ParameterSquare, quadratic
from bcexcl.returns import (
    Containment,
    NeighborhoodConfig,
    bound_length_bracket,
    bound_period_element,
    bound_period_point,
    classify_distance,
    classify_point_step,
    essential_test,
    estimate_gamma,
    partition_bound,
)

QUAD = quadratic()
NB = NeighborhoodConfig(6.0, 4.0)


def test_neighbourhood_radii():
    assert NB.delta == pytest.approx(math.exp(-6))
    assert NB.deltaPrime == pytest.approx(math.exp(-4))
    assert NB.delta2 == pytest.approx(math.exp(-12))
    assert NB.S == pytest.approx(0.1 * math.exp(-6))
    with pytest.raises(PreconditionError):
        NeighborhoodConfig(4.0, 6.0)
    with pytest.raises(PreconditionError):
        NeighborhoodConfig(6.0, 4.0, 1.5)


def test_classify_distance_bands():
    assert classify_distance(1e-6, NB) is Containment.IN_U2
    assert classify_distance(1e-3, NB) is Containment.IN_U
    assert classify_distance(0.01, NB) is Containment.IN_U_PRIME
    assert classify_distance(0.5, NB) is Containment.OUTSIDE
    # the critical orbit of a = -1 sits on 0 at even times
    assert classify_point_step(QUAD, -1, 0, 2, NB) is Containment.IN_U2


def test_partition_bound_and_essential():
    d = math.exp(-5)
    assert partition_bound(d) == pytest.approx(d / 25)
    assert partition_bound(0) == 0
    assert essential_test(d / 75, d) and not essential_test(d / 80, d)
    with pytest.raises(DomainError):
        partition_bound(1.0)
    with pytest.raises(DomainError):
        essential_test(0.1, 0)


def test_bracket():
    lo, hi = bound_length_bracket(3.0, 2, 1 / 30, 2.0)
    assert (lo, hi) == pytest.approx((1.5, 360.0))
    with pytest.raises(PreconditionError):
        bound_length_bracket(3.0, 2, 0.0, 2.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 50), st.floats(0.1, 50), st.integers(2, 5))
def test_bracket_upper_end_is_linear_in_depth(r1, r2, d):
    _, h1 = bound_length_bracket(r1, d, 1 / 30, 2.0)
    _, h2 = bound_length_bracket(r2, d, 1 / 30, 2.0)
    assert h2 * r1 == pytest.approx(h1 * r2)


def test_bound_period_saturates_at_fixed_return():
    # at a = -1 the orbit returns exactly onto 0 and shadows it forever
    with pytest.raises(HorizonSaturated) as exc:
        bound_period_point(QUAD, -1, 0, 2, 0, RecurrenceParams(1e-5, 0.1), 30)
    assert exc.value.lower_bound == 30


def _period(fn):
    try:
        return fn()
    except HorizonSaturated as exc:
        return exc.lower_bound


@settings(max_examples=100, deadline=None)
@given(st.floats(-1.9999, -1.75), st.floats(-0.01, 0.01), st.floats(1e-7, 1e-4), st.integers(2, 12))
def test_bound_period_nesting(re, im, side, n):
    rec = RecurrenceParams(1e-5, 0.1)
    H = 40
    samples = ParameterSquare(complex(re, im), side).samples()
    p_elem = _period(lambda: bound_period_element(QUAD, samples, 0, n, 0, rec, H))
    p_pts = [_period(lambda a=a: bound_period_point(QUAD, a, 0, n, 0, rec, H)) for a in samples]
    assert p_elem <= min(p_pts)
    p_all = _period(lambda: bound_period_element(QUAD, samples, 0, n, 0, rec, H, z_mode="all"))
    assert p_all <= p_elem


def test_gamma_sup_quadratic():
    g = estimate_gamma(QUAD, ParameterSquare(-2, 1e-3), grid=128)
    assert 1.0 < g.Gamma < 3.0
    assert g.observe(g.Gamma - 1) and not g.observe(g.Gamma + 1)
    assert g.exceedances == 1

