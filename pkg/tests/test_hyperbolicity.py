import cmath
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bcexcl.errors import PreconditionError
from bcexcl.family import quadratic
from bcexcl.hyperbolicity import (
    Verdict,
    classify_parameter,
    cycle_multiplier,
    density_samples,
    density_scan,
    find_attracting_cycles,
)
from bcexcl.sphere import RationalMapCoeffs

QUAD = quadratic()


def _poly(*c):
    return RationalMapCoeffs.polynomial(c)


def test_cycles_of_z_squared():
    cycles = find_attracting_cycles(_poly(0, 0, 1), 8, [0.3, 5.0, 0.1j, -7])
    assert sorted(c.representative.is_infinity for c in cycles) == [False, True]
    assert all(c.period == 1 and c.multiplier == 0 for c in cycles)


def test_basilica_two_cycle():
    cycles = find_attracting_cycles(_poly(-1, 0, 1), 8, [0.1])
    assert len(cycles) == 1 and cycles[0].period == 2
    pts = sorted(p.to_complex().real for p in cycles[0].points)
    assert pts == pytest.approx([-1, 0], abs=1e-12)


def test_attracting_fixed_point_oracle():
    z = (1 - math.sqrt(1.4)) / 2
    cycles = find_attracting_cycles(_poly(-0.1, 0, 1), 4, [0.0])
    assert cycles[0].representative.to_complex() == pytest.approx(z, abs=1e-12)
    assert cycles[0].multiplier == pytest.approx(2 * z, abs=1e-12)


def test_find_cycles_precondition():
    with pytest.raises(PreconditionError):
        find_attracting_cycles(_poly(0, 0, 1), 0, [0.1])


def test_classifier_oracles():
    v = classify_parameter(QUAD, 0)
    assert v.status is Verdict.HYPERBOLIC
    v = classify_parameter(QUAD, -2)
    assert v.status is Verdict.UNDETERMINED


def _cardioid(lam: complex) -> complex:
    # parameter whose finite fixed point has multiplier lam
    return lam / 2 - lam * lam / 4


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 0.9), st.floats(0, 2 * math.pi), st.floats(-1, 1), st.floats(-1, 1))
def test_verdict_stability(r, theta, dx, dy):
    a = _cardioid(cmath.rect(r, theta))
    assert classify_parameter(QUAD, a).status is Verdict.HYPERBOLIC
    b = a + 1e-12 * complex(dx, dy)
    assert classify_parameter(QUAD, b).status is Verdict.HYPERBOLIC


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 0.9), st.floats(0, 2 * math.pi), st.booleans())
def test_multiplier_independent_pass(r, theta, two_cycle):
    # period-2 component: multiplier 4(a + 1), so a = -1 + mu / 4
    mu = cmath.rect(r, theta)
    a = -1 + mu / 4 if two_cycle else _cardioid(mu)
    v = classify_parameter(QUAD, a)
    assert v.status is Verdict.HYPERBOLIC
    for c in v.cycles:
        if c.representative.is_infinity:
            continue
        prod = 1 + 0j
        for p in c.points:
            prod *= 2 * p.to_complex()
        assert abs(prod - c.multiplier) <= 1e-9 * max(abs(prod), 1e-12) + 1e-14
        assert abs(c.multiplier - mu) <= 1e-8
        f = QUAD.map_at(a)
        assert cycle_multiplier(f, *c.representative.as_tuple(), c.period) == pytest.approx(c.multiplier, abs=1e-14)


def test_density_interior_component():
    rows = density_scan(QUAD, 0, [0.1, 0.01], 100, horizon=500)
    assert [r.hyperbolic_fraction for r in rows] == [1.0, 1.0]
    assert rows[0].wilson_lo < 1.0 <= rows[0].wilson_hi + 1e-12


def test_density_preconditions():
    with pytest.raises(PreconditionError):
        density_scan(QUAD, 0, [0.1], 0)
    with pytest.raises(PreconditionError):
        density_scan(QUAD, 0, [0.01, 0.1], 100)


def test_density_seeded():
    a = density_samples(-2, 0.1, 50, 7, 0)
    assert (a == density_samples(-2, 0.1, 50, 7, 0)).all()
    assert not (a == density_samples(-2, 0.1, 50, 8, 0)).all()
    r1 = density_scan(QUAD, -1.75, [0.1], 100, horizon=300, seed=3)
    r2 = density_scan(QUAD, -1.75, [0.1], 100, horizon=300, seed=3)
    assert r1 == r2
