import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bcexcl.errors import ConfigError, PreconditionError
from bcexcl.family import (
    ParameterSquare,
    estimate_levin_limit,
    family_from_id,
    load_custom_family,
    quadratic,
    transversality_ratio,
    transversality_sequence,
    unicritical,
    xi,
    xi_with_sensitivity,
)

QUAD = quadratic()

# (centre, side) of the squares the presets run on, plus an interior one
PRESET_SQUARES = {
    "conservation": (-2.0, 1e-3),
    "recurrent": (-1.9964909697345163, 6e-5),
    "interior": (-0.5 + 0.2j, 0.1),
}


def test_quadratic_orbit_oracle():
    assert xi(QUAD, -2, 0, 1).to_complex() == -2
    assert xi(QUAD, -2, 0, 5).to_complex() == 2
    assert xi(QUAD, -1, 0, 7).to_complex() == -1


def test_derivative_oracle_at_chebyshev():
    # d/da of the n-th critical iterate at a = -2 is -(2 * 4**(n-1) + 1) / 3 for n >= 2
    states = xi_with_sensitivity(QUAD, -2, 0, 12)
    assert states[1].dxi_da == 1
    for n in range(2, 13):
        assert states[n].dxi_da == -(2 * 4 ** (n - 1) + 1) / 3


def test_transversality_ratio_oracle():
    for n in (2, 5, 10, 20):
        exact = (2 * 4 ** (n - 1) + 1) / (3 * 4 ** (n - 1))
        assert abs(transversality_ratio(QUAD, -2, 0, n) - exact) < 1e-12
    n, lim = estimate_levin_limit(QUAD, -2, 0)
    assert n > 100 and abs(lim - 2 / 3) < 1e-12


def test_spherical_ratio_variant_is_finite():
    r = transversality_ratio(QUAD, -2, 0, 20, spherical=True)
    assert math.isfinite(abs(r)) and abs(r) > 0


def test_unicritical_tracks():
    fam = unicritical(3)
    fam.check_tracks(0.3 + 0.1j)
    assert fam.hat_d == 3
    with pytest.raises(ValueError):
        unicritical(1)


def test_bad_track_is_caught():
    fam = quadratic().with_julia_flags([True, False])
    bad = type(fam)(fam.name, fam.p_poly, fam.q_poly, (type(fam.tracks[0])((1.0,), 2, True), fam.tracks[1]))
    with pytest.raises(PreconditionError):
        bad.check_tracks(-2)


def test_family_ids(tmp_path):
    assert family_from_id("quadratic").name == "quadratic"
    assert family_from_id("unicritical:4").hat_d == 4
    for bad in ("cubic", "unicritical:x"):
        with pytest.raises(ConfigError):
            family_from_id(bad)
    path = tmp_path / "fam.ini"
    path.write_text(
        "[family]\nname = shifted\np0 = 0, 1\np2 = 1\nq0 = 1\n\n"
        "[critical.0]\npoint = 0\ndegree = 2\njulia = true\n\n"
        "[critical.1]\npoint = inf\ndegree = 2\n"
    )
    fam = family_from_id(f"custom:{path}")
    assert fam.jrit_indices == [0]
    fam.check_tracks(-1.5)
    assert xi(fam, -2, 0, 3).to_complex() == xi(QUAD, -2, 0, 3).to_complex()
    (tmp_path / "broken.ini").write_text("[family]\np0 = 1\n")
    with pytest.raises(ConfigError):
        load_custom_family(tmp_path / "broken.ini")


def test_parameter_square():
    Q = ParameterSquare(-2, 1e-3)
    assert len(Q.samples()) == 5 and Q.contains(-2 + 4e-4j)
    with pytest.raises(PreconditionError):
        ParameterSquare(0, 0)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(sorted(PRESET_SQUARES)), st.floats(0, 1), st.floats(0, 1), st.integers(1, 30))
def test_sensitivity_matches_finite_differences(name, x, y, n):
    c, eps = PRESET_SQUARES[name]
    a = ParameterSquare(c, eps).point(x, y)
    h = 1e-6 * eps
    d = xi_with_sensitivity(QUAD, a, 0, n)[n].dxi_da
    assume(abs(d) > 1e-6)
    # central differences only resolve the derivative while h |d| stays in the linear regime
    assume(abs(d) * h < 1e-5)
    fd = (xi(QUAD, a + h, 0, n).to_complex() - xi(QUAD, a - h, 0, n).to_complex()) / (2 * h)
    roundoff = 1e-15 * max(1.0, abs(xi(QUAD, a, 0, n).to_complex())) / h
    assert abs(fd - d) <= 1e-4 * abs(d) + roundoff


@settings(max_examples=100, deadline=None)
@given(st.floats(-2, 0.25), st.floats(-1, 1), st.integers(0, 40))
def test_xi_is_deterministic(re, im, n):
    a = complex(re, im)
    assert xi(QUAD, a, 0, n) == xi(QUAD, a, 0, n)
    assert _bits(xi_with_sensitivity(QUAD, a, 0, n)) == _bits(xi_with_sensitivity(QUAD, a, 0, n))


def _bits(states):
    # float.hex keeps nan derivatives (orbit at infinity) comparable
    return [(s.xi.chart, *(float.hex(v) for v in (s.xi.value.real, s.xi.value.imag, s.dxi_da.real, s.dxi_da.imag)))
            for s in states]


@pytest.mark.parametrize("a", [-2, 1j, -1.5436890126920764])
def test_ratio_is_cauchy(a):
    # Misiurewicz parameters: geometric convergence at a rate no slower than gammaI
    gammaI = 1 / 30
    seq = dict(transversality_sequence(QUAD, a, 0, 60))
    diffs = {n: abs(seq[n + 1] - seq[n]) for n in range(10, 60)}
    C = max(diffs[n] * math.exp(gammaI * n) for n in range(10, 30))
    assert all(diffs[n] <= C * math.exp(-gammaI * n) * (1 + 1e-9) for n in range(30, 60))
