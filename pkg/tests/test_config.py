import pytest

from bcexcl.config import PRESETS, RunConfig, coerce_value, parse_config_text, parse_map_id, preset
from bcexcl.errors import ConfigError

GOOD = """\
[run]
preset = recurrent
epsilon = 5e-5

[horizons]
engine = 20
bound = 10

[samples]
window = 2, 5
radii = 0.1, 0.01
"""


def test_parse_with_preset_and_aliases():
    cfg = parse_config_text(GOOD)
    assert cfg.epsilon == 5e-5
    assert cfg.engine_horizon == 20 and cfg.bound_horizon == 10
    assert cfg.window == (2, 5) and cfg.radii == (0.1, 0.01)
    # untouched preset values survive
    assert cfg.Delta == PRESETS["recurrent"]["Delta"]


@pytest.mark.parametrize("text, line", [
    ("[run]\nepsilon = 0x10\n", 2),
    ("[run]\nfamily = quadratic\n\n[horizons]\nengine = ten\n", 5),
    ("[run]\nbogus = 1\n", 2),
])
def test_diagnostics_carry_line_numbers(text, line):
    with pytest.raises(ConfigError, match=f"line {line}"):
        parse_config_text(text)


def test_bad_configs():
    for text in ("[nowhere]\nx = 1\n", "not an ini", "[run]\nexclusion_mode = some\n",
                 "[recurrence]\nalpha = 0.01\n", "[neighborhood]\nDelta = 1\nDeltaPrime = 2\n",
                 "[run]\npreset = nope\n"):
        with pytest.raises(ConfigError):
            parse_config_text(text)


def test_coerce_value():
    assert coerce_value("epsilon", "1e-3") == 1e-3
    assert coerce_value("workers", "8") == 8
    for name, text in (("epsilon", "0x1p-3"), ("workers", "2.5"), ("window", "1"), ("epsilon", "nan")):
        with pytest.raises(ValueError):
            coerce_value(name, text)


def test_fingerprint():
    base = preset("smoke")
    assert base.fingerprint() == preset("smoke", workers=8, output_dir="elsewhere").fingerprint()
    assert base.fingerprint() != preset("smoke", epsilon=2e-3).fingerprint()
    assert len(base.fingerprint()) == 64


def test_presets_all_validate():
    for name in PRESETS:
        assert isinstance(preset(name), RunConfig)
    assert preset("conservation").engine_config().horizon == 500


def test_map_ids():
    fam, a = parse_map_id("chebyshev")
    assert a == -2 and fam.name == "quadratic"
    assert parse_map_id("quadratic:a=-0.1")[1] == -0.1
    assert parse_map_id("unicritical:3:a=0.2+0.1j")[1] == 0.2 + 0.1j
    for bad in ("cubic", "quadratic:b=1", "quadratic:a=zz"):
        with pytest.raises(ConfigError):
            parse_map_id(bad)


def test_invalid_fields():
    for kw in ({"workers": 0}, {"epsilon": -1.0}, {"window": (3, 1)}, {"radii": ()}, {"max_depth": 70}):
        with pytest.raises(ConfigError):
            RunConfig(**kw)
