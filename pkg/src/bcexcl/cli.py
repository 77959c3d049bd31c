"""Command-line driver: ``bcexcl <subcommand> [options]``.

Exit codes: 0 success, 1 configuration error, 2 check failed, 3 too many
saturated bound periods.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Callable

from . import __version__
from .artifacts import (
    DENSITY_HEADER,
    ESCAPE_HEADER,
    LEDGER_HEADER,
    density_rows,
    escape_rows,
    event_rows,
    ledger_rows,
    write_csv,
    write_json,
    write_schema,
)
from .conditions import ce_margin, slow_recurrence_check
from .config import PRESETS, RunConfig, coerce_value, load_config, map_with_flags, preset
from .engine import PartitionEngine, startup_scan
from .errors import BCError, ConfigError, HypothesesFailed, InsufficientData, PreconditionError, StartupFailure
from .hyperbolicity import density_scan
from .lab import (
    LEMMA_IDS,
    bound_distortion_probe,
    distortion_batch,
    growth_after_return_probe,
    mane_probe,
    mdl_probe,
    repulsion_probe,
    second_ce_probe,
    weak_param_probe,
)
from .report import SAMPLE_DESIGN, engine_report
from .returns import ReturnEvent, bound_period_point
from .sphere import Chart, CriticalPoint, SpherePoint

log = logging.getLogger("bcexcl")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_SATURATION = 0, 1, 2, 3


# -- configuration -------------------------------------------------------------

def resolve_config(args: argparse.Namespace, env: dict | None = None) -> RunConfig:
    """File or preset, then environment overrides, then explicit flags."""
    env = os.environ if env is None else env
    overrides: dict = {}
    if env.get("BCEXCL_OUTPUT_DIR"):
        overrides["output_dir"] = env["BCEXCL_OUTPUT_DIR"]
    if env.get("BCEXCL_WORKERS"):
        try:
            overrides["workers"] = coerce_value("workers", env["BCEXCL_WORKERS"])
        except ValueError as exc:
            raise ConfigError(f"BCEXCL_WORKERS: {exc}") from exc
    for f in fields(RunConfig):
        raw = getattr(args, f"opt_{f.name}", None)
        if raw is not None:
            try:
                overrides[f.name] = coerce_value(f.name, raw)
            except ValueError as exc:
                raise ConfigError(f"--{_flag(f.name)}: {exc}") from exc
    if args.config:
        return load_config(args.config, overrides)
    if args.preset:
        return preset(args.preset, **overrides)
    return RunConfig(**overrides)


def _flag(name: str) -> str:
    return name.replace("_", "-")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _critical_points(cfg: RunConfig):
    """The single map under study and its Julia critical points."""
    if cfg.map:
        fam, a = map_with_flags(cfg.map, max_period=cfg.max_period)
    else:
        fam, a = cfg.family_obj(), cfg.center
    crit = [CriticalPoint(fam.critical_point(a, l), fam.tracks[l].degree - 1, True) for l in fam.jrit_indices]
    if not crit:
        raise ConfigError(f"no critical point of {cfg.map or fam.name} at a = {a} is flagged in the Julia set")
    return fam, a, crit


# -- subcommands ---------------------------------------------------------------

def cmd_ce_check(cfg: RunConfig, args) -> int:
    fam, a, crit = _critical_points(cfg)
    f = fam.map_at(a)
    rows, ok = [], True
    for l, c in zip(fam.jrit_indices, crit):
        rep = ce_margin(f, c, cfg.orbit_horizon, cfg.ce_params())
        kmin, rec = slow_recurrence_check(f, _image(f, c), cfg.orbit_horizon, cfg.alpha, crit, cfg.K)
        ok = ok and rep.passed and rec.passed
        rows.append({"l": l, "point": c.point.to_complex(), "ce": _brief(rep.to_dict()),
                     "recurrence": {"K_min": kmin, **_brief(rec.to_dict())}})
    write_json(_out_dir(cfg) / "ce_report.json",
               {"map": cfg.map or fam.name, "a": a, "gamma0": cfg.gamma0, "C0": cfg.C0, "alpha": cfg.alpha,
                "K": cfg.K, "horizon": cfg.orbit_horizon, "critical_points": rows, "verdict": "pass" if ok else "fail"},
               cfg.fingerprint())
    for r in rows:
        log.info("critical %d: exponent %.6g, K_min %.6g", r["l"], r["ce"]["exponent"], r["recurrence"]["K_min"])
    return EXIT_OK if ok else EXIT_CHECK


def _image(f, c: CriticalPoint) -> SpherePoint:
    u, rec, _ = f.step(*c.point.canonical().as_tuple())
    return SpherePoint(u, Chart.RECIPROCAL if rec else Chart.FINITE)


def _brief(d: dict, keep: int = 50) -> dict:
    """Horizon reports trimmed to the last ``keep`` per-step entries."""
    out = dict(d)
    steps = out.pop("per_step", [])
    out["per_step_tail"] = steps[-keep:]
    return out


def cmd_recurrence(cfg: RunConfig, args) -> int:
    fam, a, crit = _critical_points(cfg)
    f = fam.map_at(a)
    rows, ok = [], True
    for l, c in zip(fam.jrit_indices, crit):
        kmin, rec = slow_recurrence_check(f, _image(f, c), cfg.orbit_horizon, cfg.alpha, crit, cfg.K)
        ok = ok and rec.passed
        rows.append({"l": l, "K_min": kmin, **_brief(rec.to_dict())})
    write_json(_out_dir(cfg) / "recurrence.json",
               {"map": cfg.map or fam.name, "a": a, "alpha": cfg.alpha, "K": cfg.K, "critical_points": rows,
                "verdict": "pass" if ok else "fail"}, cfg.fingerprint())
    return EXIT_OK if ok else EXIT_CHECK


def write_engine_outputs(cfg: RunConfig, result, fam, figures: bool = True) -> dict:
    out = _out_dir(cfg)
    fp = cfg.fingerprint()
    write_csv(out / "ledger.csv", LEDGER_HEADER, ledger_rows(result), fp)
    write_csv(out / "events.csv", ReturnEvent.CSV_HEADER, event_rows(result.events), fp)
    write_csv(out / "escapes.csv", ESCAPE_HEADER, escape_rows(result), fp)
    md = cfg.max_depth
    write_json(out / "elements.json", {"elements": [e.to_dict(md) for e in result.leaves]}, fp)
    rep = engine_report(result, fam)
    write_json(out / "report.json", {"config": cfg.to_dict(), **rep}, fp)
    write_schema(out)
    if figures:
        from . import plots

        plots.plot_ledger(result, out / "ledger.png")
        plots.plot_returns(result, out / "returns.png")
        plots.plot_escape_tail(rep["escape_tail"].get("full_fit", {}), out / "escape_tail.png")
    return rep


def cmd_exclusion_run(cfg: RunConfig, args) -> int:
    fam = cfg.family_obj()
    result = PartitionEngine(fam, cfg.engine_config()).run()
    rep = write_engine_outputs(cfg, result, fam, figures=not args.no_figures)
    fr = rep["final_fraction"]
    log.info("active %.4g  escaped %.4g  excluded %.4g  resolution %.4g",
             fr["active"], fr["escaped"], fr["excluded"], fr["resolution_excluded"])
    if rep["saturation_share"] > cfg.saturation_fraction:
        log.error("%.1f%% of returns saturated the bound-period horizon", 100 * rep["saturation_share"])
        return EXIT_SATURATION
    return EXIT_OK


def cmd_density_scan(cfg: RunConfig, args) -> int:
    fam = cfg.family_obj()
    rows = density_scan(fam, cfg.center, cfg.radii, cfg.density_samples, cfg.classify_horizon, cfg.seed,
                        cfg.workers, cfg.max_period)
    out = _out_dir(cfg)
    fp = cfg.fingerprint()
    write_csv(out / "density.csv", DENSITY_HEADER, density_rows(rows), fp)
    fractions = [r.hyperbolic_fraction for r in rows]
    write_json(out / "density.json", {
        "a0": cfg.center, "radii": list(cfg.radii), "seed": cfg.seed, "horizon": cfg.classify_horizon,
        "fractions": fractions,
        "non_decreasing": all(y >= x for x, y in zip(fractions, fractions[1:])),
        "note": "the critical point at infinity always counts as attracted, so parameters outside the "
                "connectedness locus are hyperbolic",
    }, fp)
    write_schema(out)
    if not args.no_figures:
        from . import plots

        plots.plot_density(rows, out / "density.png")
    return EXIT_OK


def _probe(cfg: RunConfig, lemma: str):
    fam = cfg.family_obj()
    a = cfg.center
    l = fam.jrit_indices[0]
    nu, nu2 = cfg.window
    ladder = cfg.ladder(fam.hat_d)
    if lemma in ("distortion", "mane", "ce2"):
        fam_m, a_m, crit = _critical_points(cfg)
        f = fam_m.map_at(a_m)
        if lemma == "distortion":
            return distortion_batch(f, crit, pairs=cfg.pairs, n_max=20, seed=cfg.seed).to_dict()
        if lemma == "mane":
            est = mane_probe(f, crit, cfg.nbhd().delta, min(cfg.orbit_horizon, 200), seed=cfg.seed)
            return {"lemma_id": "mane", **est.to_dict()}
        return second_ce_probe(f, crit[0].point, nu2, min(cfg.pairs, 200), cfg.seed).to_dict()
    if lemma == "weak-param":
        b = a + cfg.epsilon
        return weak_param_probe(fam, a, b, l, (nu, nu2)).to_dict()
    if lemma == "mdl":
        return mdl_probe(fam, cfg.square(), l, nu, nu2, cfg.eps_prime, ladder, cfg.recurrence(), cfg.nbhd(),
                         cfg.C0).to_dict()
    if lemma == "repulsion":
        return repulsion_probe(fam, cfg.square(), l, nu, nu2).to_dict()
    if lemma == "growth":
        return growth_after_return_probe(fam, a, l, nu, nu2, ladder).to_dict()
    if lemma == "bound-distortion":
        try:
            p = bound_period_point(fam, a, l, nu, l, cfg.recurrence(), cfg.bound_horizon)
        except BCError:
            p = cfg.bound_horizon
        return bound_distortion_probe(fam, a, l, nu, l, p, cfg.eps_prime).to_dict()
    raise ConfigError(f"unknown lemma id {lemma!r}; valid ids: {', '.join(LEMMA_IDS)}")


def cmd_lemma_probe(cfg: RunConfig, args) -> int:
    lemma = args.lemma_id
    if lemma not in LEMMA_IDS:
        raise ConfigError(f"unknown lemma id {lemma!r}; valid ids: {', '.join(LEMMA_IDS)}")
    try:
        res = _probe(cfg, lemma)
    except (HypothesesFailed, PreconditionError, InsufficientData, StartupFailure) as exc:
        res = {"lemma_id": lemma, "error": type(exc).__name__, "message": str(exc)}
        write_json(_out_dir(cfg) / "probes.json", {"probes": [res], "sample_design": SAMPLE_DESIGN},
                   cfg.fingerprint())
        log.error("%s: %s", lemma, exc)
        return EXIT_CHECK
    write_json(_out_dir(cfg) / "probes.json", {"probes": [res], "sample_design": SAMPLE_DESIGN}, cfg.fingerprint())
    return EXIT_OK


def cmd_startup_scan(cfg: RunConfig, args) -> int:
    fam = cfg.family_obj()
    try:
        res = startup_scan(fam, cfg.square(), cfg.nbhd(), cfg.orbit_horizon, cfg.inflate)
    except StartupFailure as exc:
        write_json(_out_dir(cfg) / "startup.json", {"error": str(exc)}, cfg.fingerprint())
        log.error("%s", exc)
        return EXIT_CHECK
    S = cfg.nbhd().S
    rows = [{"l": o.l, "N": o.N, "outcome": o.outcome} for o in res]
    write_json(_out_dir(cfg) / "startup.json", {
        "a0": cfg.center, "epsilon": cfg.epsilon, "S": S,
        "growth_estimate": math.log(S / cfg.epsilon) / math.log(4) if S > cfg.epsilon else 0.0,
        "critical_indices": rows,
    }, cfg.fingerprint())
    return EXIT_OK


COMMANDS: dict[str, Callable] = {
    "ce-check": cmd_ce_check,
    "recurrence": cmd_recurrence,
    "exclusion-run": cmd_exclusion_run,
    "density-scan": cmd_density_scan,
    "lemma-probe": cmd_lemma_probe,
    "startup-scan": cmd_startup_scan,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bcexcl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--preset", help=f"named preset ({', '.join(sorted(PRESETS))})")
    common.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")
    grp = common.add_argument_group("configuration overrides")
    for f in fields(RunConfig):
        grp.add_argument(f"--{_flag(f.name)}", dest=f"opt_{f.name}", metavar="VALUE")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "lemma-probe":
            p.add_argument("lemma_id", help=f"one of {', '.join(LEMMA_IDS)}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"bcexcl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BCError as exc:
        print(f"bcexcl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
