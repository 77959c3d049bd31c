import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bcexcl.errors import IndeterminateForm, InvalidMap, RootFindingFailure
from bcexcl.sphere import (
    Chart,
    RationalMapCoeffs,
    SpherePoint,
    chordal_distance,
    critical_points,
    evaluate,
    mobius_apply,
    mobius_conjugate,
    orbit_with_derivative,
    spherical_derivative,
    to_cartesian,
)

coord = st.floats(-3, 3, allow_nan=False)
cplx = st.builds(complex, coord, coord)


@st.composite
def rational_maps(draw, max_degree=3):
    d = draw(st.integers(2, max_degree))
    p = [draw(cplx) for _ in range(d + 1)]
    q = [draw(cplx) for _ in range(d + 1)]
    assume(abs(p[-1]) > 0.1 or abs(q[-1]) > 0.1)
    try:
        return RationalMapCoeffs(tuple(p), tuple(q))
    except InvalidMap:
        assume(False)


# -- oracles -------------------------------------------------------------------

def test_chordal_known_values():
    assert chordal_distance(0, math.inf) == pytest.approx(1.0)
    assert chordal_distance(1, -1) == pytest.approx(1.0)
    assert chordal_distance(0, 1) == pytest.approx(1 / math.sqrt(2))
    assert chordal_distance(1j, 1j) == 0.0


def test_point_charts():
    p = SpherePoint.from_complex(10)
    assert p.chart is Chart.RECIPROCAL and p.value == pytest.approx(0.1)
    assert SpherePoint.from_complex(math.inf).is_infinity
    assert SpherePoint.from_complex(0.5).recharted().value == pytest.approx(2.0)
    assert SpherePoint(3 + 0j).canonical().chart is Chart.RECIPROCAL


def test_chebyshev_derivative_at_fixed_point():
    f = RationalMapCoeffs.polynomial((-2, 0, 1))
    assert evaluate(f, 2).to_complex() == pytest.approx(2)
    assert spherical_derivative(f, 2) == pytest.approx(4.0)
    assert evaluate(f, math.inf).is_infinity


def test_invalid_maps():
    with pytest.raises(InvalidMap):
        RationalMapCoeffs((1, 1), (1,))  # degree 1
    with pytest.raises(InvalidMap):
        RationalMapCoeffs((-1, 0, 1), (-1, 1))  # (z-1)(z+1) / (z-1)
    with pytest.raises(InvalidMap):
        RationalMapCoeffs((1, 0, 1), (0,))


def test_badly_scaled_map_is_not_mistaken_for_degenerate():
    # the inverted map has a denominator root near -7.6e122
    f = RationalMapCoeffs((1j, 0, 0, 1j), (1.3110024963393179e-123j, 1j, 0, 0))
    g = mobius_conjugate(f, (0, 1, 1, 0))
    assert g.degree == 3
    # sharing a root at 1e150 is still caught
    with pytest.raises(InvalidMap):
        RationalMapCoeffs((1, -1e-150), (1, 1, -1e-150))  # (1 + z)(1 - 1e-150 z)


def test_critical_points_quadratic():
    cs = critical_points(RationalMapCoeffs.polynomial((-2, 0, 1)))
    pts = sorted((c.point.is_infinity, c.multiplicity) for c in cs)
    assert pts == [(False, 2), (True, 2)]


def test_critical_points_cubic_polynomial():
    cs = critical_points(RationalMapCoeffs.polynomial((0, -3, 0, 1)))
    finite = sorted(c.point.to_complex().real for c in cs if not c.point.is_infinity)
    assert finite == pytest.approx([-1, 1])
    assert [c.multiplicity for c in cs if c.point.is_infinity] == [3]


def test_critical_points_bad_flags():
    with pytest.raises(ValueError):
        critical_points(RationalMapCoeffs.polynomial((0, 0, 1)), julia_flags=[True])


# -- properties ----------------------------------------------------------------

@settings(max_examples=150, deadline=None)
@given(cplx, cplx, cplx)
def test_chordal_metric_axioms(z, w, v):
    d = chordal_distance(z, w)
    assert 0 <= d <= 1
    assert d == pytest.approx(chordal_distance(w, z), abs=1e-15)
    assert chordal_distance(z, v) <= d + chordal_distance(w, v) + 1e-12
    # half the euclidean distance between the sphere points
    pz, pw = (to_cartesian(*SpherePoint.from_complex(x).as_tuple()) for x in (z, w))
    assert math.dist(pz, pw) / 2 == pytest.approx(d, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(rational_maps(), cplx, st.integers(1, 30))
def test_chain_rule(f, z, n):
    rec = orbit_with_derivative(f, z, n)
    try:
        steps = [spherical_derivative(f, p) for p in rec.points[:-1]]
    except IndeterminateForm:
        assume(False)
    log_prod = sum(math.log(s) if s > 0 else -math.inf for s in steps)
    assume(math.isfinite(log_prod) and abs(log_prod) < 600)
    assert rec.log_deriv[n] == pytest.approx(log_prod, rel=1e-9, abs=1e-9)
    assert rec.deriv_products[n] == pytest.approx(math.exp(log_prod), rel=1e-9)


@settings(max_examples=150, deadline=None)
@given(rational_maps(), st.floats(0.5, 2.0), st.floats(0, 2 * math.pi))
def test_chart_independence(f, r, theta):
    z = cmath.rect(r, theta)
    try:
        direct = spherical_derivative(f, SpherePoint(z, Chart.FINITE))
    except IndeterminateForm:
        assume(False)
    # the same point written in the reciprocal chart
    g = mobius_conjugate(f, (0, 1, 1, 0))
    via_rec = f.step(1 / z, True)[2]
    via_conj = spherical_derivative(g, 1 / z)
    assume(math.isfinite(direct))
    assert via_rec == pytest.approx(direct, rel=1e-9)
    assert via_conj == pytest.approx(direct, rel=1e-7)


@settings(max_examples=150, deadline=None)
@given(rational_maps(max_degree=4))
def test_riemann_hurwitz(f):
    try:
        cs = critical_points(f)
    except RootFindingFailure:
        assume(False)
    assert cs.hurwitz_sum() == 2 * f.degree - 2


@settings(max_examples=150, deadline=None)
@given(cplx, st.integers(1, 20))
def test_inversion_conjugacy_keeps_derivative_products(z, n):
    # z -> 1/z is a rotation of the sphere, so derivative products must agree
    f = RationalMapCoeffs.polynomial((0, 0, 1))
    m = (0, 1, 1, 0)
    g = mobius_conjugate(f, m)
    a = orbit_with_derivative(f, z, n).log_deriv[n]
    b = orbit_with_derivative(g, mobius_apply(m, z), n).log_deriv[n]
    assume(math.isfinite(a) and abs(a) < 600)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


def test_rotation_conjugacy_general_map():
    f = RationalMapCoeffs((0.3, -1, 0, 1), (1, 0.2j, 0, 0))
    rot = (cmath.exp(0.7j), 0, 0, 1)
    g = mobius_conjugate(f, rot)
    for z in np.linspace(-1.5, 1.5, 7) + 0.3j:
        a = orbit_with_derivative(f, z, 12).log_deriv[12]
        b = orbit_with_derivative(g, mobius_apply(rot, z), 12).log_deriv[12]
        assert b == pytest.approx(a, rel=1e-9, abs=1e-9)
