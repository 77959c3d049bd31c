"""Run configuration: INI files, named presets and validation."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import re
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .conditions import CEParams, ExponentLadder, RecurrenceParams
from .engine import EngineConfig
from .errors import BCError, ConfigError
from .family import MarkedFamily, ParameterSquare, family_from_id, quadratic, unicritical
from .hyperbolicity import detect_cycle
from .returns import NeighborhoodConfig

_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")

# fields that never enter the fingerprint
_UNHASHED = ("workers", "output_dir")


@dataclass(frozen=True)
class RunConfig:
    family: str = "quadratic"
    map: str = ""
    a0: float = -2.0
    a0_im: float = 0.0
    epsilon: float = 1e-3
    seed: int = 0
    workers: int = 1
    output_dir: str = "bcexcl-out"
    exclusion_mode: str = "any"
    # neighbourhoods
    Delta: float = 6.0
    DeltaPrime: float = 4.0
    epsilon1: float = 0.1
    inflate: float = 1.2
    # recurrence
    alpha: float = 1e-5
    K: float = 0.1
    iota: float = 0.1
    # exponents
    gamma0: float = 1.3
    gammaH: float = 0.2
    C0: float = 0.5
    tau: float = 0.5
    # horizons
    orbit_horizon: int = 1000
    engine_horizon: int = 200
    classify_horizon: int = 2000
    bound_horizon: int = 200
    max_period: int = 64
    # samples and resolution
    max_depth: int = 40
    split_threshold: int = 64
    gamma_grid: int = 256
    density_samples: int = 1000
    radii: tuple = (0.1, 0.01, 0.001)
    pairs: int = 1000
    window: tuple = (1, 6)
    eps_prime: float = 0.1
    saturation_fraction: float = 0.5

    def __post_init__(self):
        self.validate()

    # -- derived objects ----------------------------------------------------
    @property
    def center(self) -> complex:
        return complex(self.a0, self.a0_im)

    def family_obj(self) -> MarkedFamily:
        return family_from_id(self.family)

    def nbhd(self) -> NeighborhoodConfig:
        return NeighborhoodConfig(self.Delta, self.DeltaPrime, self.epsilon1)

    def recurrence(self) -> RecurrenceParams:
        return RecurrenceParams(self.alpha, self.K)

    def ce_params(self) -> CEParams:
        return CEParams(self.C0, self.gamma0)

    def ladder(self, hat_d: int = 2) -> ExponentLadder:
        return ExponentLadder(self.gamma0, self.gammaH, self.tau, self.alpha, hat_d)

    def square(self) -> ParameterSquare:
        return ParameterSquare(self.center, self.epsilon)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            self.center, self.epsilon, self.engine_horizon, self.nbhd(), self.recurrence(),
            self.ladder(self.family_obj().hat_d), C0=self.C0, max_depth=self.max_depth,
            inflate=self.inflate, exclusion_mode=self.exclusion_mode, bound_horizon=self.bound_horizon,
            split_threshold=self.split_threshold, gamma_grid=self.gamma_grid, workers=self.workers,
            iota=self.iota,
        )

    def validate(self) -> None:
        try:
            fam = self.family_obj()
            self.nbhd()
            self.recurrence()
            self.ce_params()
            ladder = self.ladder(fam.hat_d)
            if not ladder.window_ok(self.iota):
                raise ConfigError(
                    f"alpha = {self.alpha} violates 32 hat_d^2 alpha / gammaI <= iota / 2 (iota = {self.iota})"
                )
            if self.map:
                parse_map_id(self.map)
        except ConfigError:
            raise
        except BCError as exc:
            raise ConfigError(str(exc)) from exc
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.exclusion_mode not in ("any", "all"):
            raise ConfigError("exclusion_mode must be 'any' or 'all'")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        for name in ("orbit_horizon", "engine_horizon", "classify_horizon", "bound_horizon"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not 1 <= self.max_depth <= 60:
            raise ConfigError("max_depth must lie in [1, 60]")
        if self.max_period < 1 or self.split_threshold < 1 or self.gamma_grid < 2:
            raise ConfigError("max_period, split_threshold and gamma_grid must be positive")
        if not self.radii or any(r <= 0 for r in self.radii):
            raise ConfigError("radii must be a non-empty list of positive numbers")
        if len(self.window) != 2 or not 1 <= self.window[0] <= self.window[1]:
            raise ConfigError("window must be two integers 1 <= nu <= nu2")
        if not 0 <= self.saturation_fraction <= 1:
            raise ConfigError("saturation_fraction must lie in [0, 1]")

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["radii"] = list(self.radii)
        d["window"] = list(self.window)
        return d

    def fingerprint(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


# section -> keys accepted there
SECTIONS: dict[str, tuple[str, ...]] = {
    "run": ("preset", "family", "map", "a0", "a0_im", "epsilon", "seed", "workers", "output_dir", "exclusion_mode"),
    "neighborhood": ("Delta", "DeltaPrime", "epsilon1", "inflate"),
    "recurrence": ("alpha", "K", "iota"),
    "ce": ("gamma0", "gammaH", "C0", "tau"),
    "horizons": ("orbit", "engine", "classify", "bound", "max_period"),
    "samples": ("max_depth", "split_threshold", "gamma_grid", "density", "radii", "pairs", "window",
                "eps_prime", "saturation_fraction"),
}
_ALIASES = {
    "orbit": "orbit_horizon", "engine": "engine_horizon", "classify": "classify_horizon",
    "bound": "bound_horizon", "density": "density_samples",
}
_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _decimal(text: str, key: str) -> float:
    s = text.strip()
    if not _DECIMAL.match(s):
        raise ValueError(f"{key}: expected a decimal number, got {text!r}")
    return float(s)


def coerce_value(name: str, text: str) -> Any:
    """Parse the textual value of field ``name``."""
    kind = _FIELD_TYPES[name]
    if name in ("radii",):
        return tuple(_decimal(x, name) for x in text.split(",") if x.strip())
    if name == "window":
        parts = [x.strip() for x in text.split(",") if x.strip()]
        if len(parts) != 2 or not all(p.isdigit() for p in parts):
            raise ValueError(f"window: expected 'nu, nu2', got {text!r}")
        return tuple(int(p) for p in parts)
    if kind == "int":
        s = text.strip()
        if not re.fullmatch(r"[+-]?\d+", s):
            raise ValueError(f"{name}: expected an integer, got {text!r}")
        return int(s)
    if kind == "float":
        return _decimal(text, name)
    return text.strip()


PRESETS: dict[str, dict[str, Any]] = {
    "smoke": dict(a0=-2.0, epsilon=1e-3, Delta=6.0, DeltaPrime=4.0, engine_horizon=200),
    "conservation": dict(a0=-2.0, epsilon=1e-3, Delta=6.0, DeltaPrime=4.0, engine_horizon=500),
    # a square next to the centre of the period-6 component near -2, placed so
    # that the first return (time 6) is essential at depth r ~ 3 and the
    # refined pieces then escape one by one
    "recurrent": dict(
        a0=-1.9964909697345163, epsilon=6e-5, Delta=1.5, DeltaPrime=1.0, epsilon1=0.3, K=1e-2,
        engine_horizon=150, bound_horizon=60,
    ),
    "startup": dict(a0=-2.0, epsilon=1e-6, Delta=6.0, DeltaPrime=4.0, window=(1, 6), engine_horizon=50),
    "chebyshev": dict(map="chebyshev", orbit_horizon=1000),
    "misiurewicz-tip": dict(a0=-2.0, radii=(0.1, 0.01, 0.001), density_samples=1000, classify_horizon=2000),
}


def preset(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return RunConfig(**{**PRESETS[name], **overrides})


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """``(section, key) -> line number`` for diagnostics."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif section and "=" in s and not s.startswith(("#", ";")):
            out[(section, s.split("=", 1)[0].strip().lower())] = i
    return out


def parse_config_text(text: str, source: str = "<config>", overrides: Mapping[str, Any] | None = None) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    lines = _line_index(text)
    values: dict[str, Any] = {}
    base = None
    for section in cp.sections():
        if section not in SECTIONS:
            line = next((n for (s, _), n in lines.items() if s == section), "?")
            raise ConfigError(f"{source}, line {line}: unknown section [{section}]")
        allowed = {k.lower(): k for k in SECTIONS[section]}
        for key, raw in cp[section].items():
            line = lines.get((section, key.lower()), "?")
            name = allowed.get(key.lower())
            if name is None:
                raise ConfigError(f"{source}, line {line}: unknown key {key!r} in [{section}]")
            if name == "preset":
                base = raw.strip()
                continue
            field_name = _ALIASES.get(name, name)
            try:
                values[field_name] = coerce_value(field_name, raw)
            except ValueError as exc:
                raise ConfigError(f"{source}, line {line}: {exc}") from exc
    values.update(overrides or {})
    try:
        return preset(base, **values) if base else RunConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config_text(text, str(path), overrides)


# -- single-map presets --------------------------------------------------------

def parse_map_id(map_id: str) -> tuple[MarkedFamily, complex]:
    """``chebyshev``, ``quadratic:a=<v>`` or ``unicritical:<d>:a=<v>``."""
    if map_id == "chebyshev":
        return quadratic(), -2 + 0j
    parts = map_id.split(":")
    try:
        if parts[0] == "quadratic" and len(parts) == 2:
            fam, arg = quadratic(), parts[1]
        elif parts[0] == "unicritical" and len(parts) == 3:
            fam, arg = unicritical(int(parts[1])), parts[2]
        else:
            raise ValueError
        if not arg.startswith("a="):
            raise ValueError
        val = arg[2:].replace(" ", "")
        if "j" in val:
            a = complex(val)
        else:
            a = complex(_decimal(val, "a"))
    except ValueError as exc:
        raise ConfigError(f"bad map id {map_id!r}; use chebyshev, quadratic:a=<v> or unicritical:<d>:a=<v>") from exc
    return fam, a


def map_with_flags(map_id: str, cycle_horizon: int = 200, max_period: int = 64) -> tuple[MarkedFamily, complex]:
    """The map preset with the finite critical point flagged in Julia
    only when its orbit finds no attracting cycle within ``cycle_horizon`` steps."""
    fam, a = parse_map_id(map_id)
    f = fam.map_at(a)
    flags = []
    for t in fam.tracks:
        if t.coeffs is None:
            flags.append(False)
            continue
        flags.append(detect_cycle(f, t.at(a), cycle_horizon, max_period, check_every=10) is None)
    return fam.with_julia_flags(flags), a
