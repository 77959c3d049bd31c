"""CSV/JSON writers and the generated column schema."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .engine import MASS_BUCKETS, EngineResult, dyadic_pair
from .returns import ReturnEvent

FINGERPRINT_PREFIX = "# config_fingerprint: "


def _clean(obj: Any) -> Any:
    """JSON-safe copy: non-finite floats become strings, complex becomes [re, im]."""
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return _clean(obj.item())
    return obj


def write_json(path, payload: dict, fingerprint: str) -> Path:
    path = Path(path)
    body = {"config_fingerprint": fingerprint, **payload}
    path.write_text(json.dumps(_clean(body), sort_keys=True, indent=2) + "\n")
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], fingerprint: str) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(FINGERPRINT_PREFIX + fingerprint + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)
    return path


def read_fingerprint(path) -> str | None:
    """Fingerprint from a CSV header line or a JSON ``config_fingerprint`` key."""
    text = Path(path).read_text()
    if text.startswith(FINGERPRINT_PREFIX):
        return text.splitlines()[0][len(FINGERPRINT_PREFIX):].strip()
    try:
        return json.loads(text).get("config_fingerprint")
    except (ValueError, AttributeError):
        return None


# -- engine tables -----------------------------------------------------------

LEDGER_HEADER = ("n",) + tuple(f"{b}_{part}" for b in MASS_BUCKETS for part in ("mantissa", "exponent")) + (
    "active_elements",
)


def ledger_rows(result: EngineResult) -> list[list]:
    out = []
    for n, a, es, ex, rs, count in result.ledger_rows:
        row = [n]
        for units in (a, es, ex, rs):
            row.extend(dyadic_pair(units, result.unit_exp))
        row.append(count)
        out.append(row)
    return out


def event_rows(events: Sequence[ReturnEvent]) -> list[list[str]]:
    return [ev.csv_row() for ev in events]


ESCAPE_HEADER = ("element_id", "l", "time", "t", "r0", "mass_mantissa", "mass_exponent", "censored")


def escape_rows(result: EngineResult) -> list[list]:
    return [[x.element_id, x.l, x.time, x.t, f"{x.r0:.12g}", *dyadic_pair(x.units, result.unit_exp), int(x.censored)]
            for x in result.escapes]


DENSITY_HEADER = ("radius", "samples", "hyperbolic", "undetermined", "hyperbolic_fraction",
                  "wilson_lo", "wilson_hi")


def density_rows(rows) -> list[list]:
    return [[f"{r.radius:.12g}", r.n_samples, r.n_hyperbolic, r.n_undetermined,
             f"{r.hyperbolic_fraction:.12g}", f"{r.wilson_lo:.12g}", f"{r.wilson_hi:.12g}"] for r in rows]


# -- schema -------------------------------------------------------------------

SCHEMA: dict[str, list[tuple[str, str]]] = {
    "ledger.csv": [
        ("n", "time step (0 is the initial state)"),
        *[(f"{b}_mantissa / {b}_exponent",
           f"{b} mass as mantissa * 2**exponent, a fraction of m(Q); 0/0 means zero") for b in MASS_BUCKETS],
        ("active_elements", "number of active partition elements after step n"),
    ],
    "events.csv": [
        ("element_id", "dyadic path of the element: Q followed by child digits 0-3"),
        ("l", "tracked critical index whose orbit returned"),
        ("nu", "return time"),
        ("k", "critical index the orbit came close to"),
        ("r", "-log of the chordal distance to that critical point"),
        ("kind", "essential, inessential, pseudo or bound"),
        ("p", "bound period assigned at the return (0 for returns inside a bound period)"),
        ("L", "free time since the end of the previous bound period"),
    ],
    "escapes.csv": [
        ("element_id", "element that escaped (or was still active at the horizon)"),
        ("l", "tracked critical index"),
        ("time", "escape time, or the horizon for censored rows"),
        ("t", "time since the last essential return (since 0 if there was none)"),
        ("r0", "depth -log(dist) of the first essential return, nan if none"),
        ("mass_mantissa / mass_exponent", "element mass as a fraction of m(Q)"),
        ("censored", "1 when the element was still active at the horizon"),
    ],
    "density.csv": [
        ("radius", "side of the parameter square centred at a0"),
        ("samples", "number of sampled parameters"),
        ("hyperbolic", "parameters whose marked critical orbits all reach attracting cycles"),
        ("undetermined", "remaining parameters (including numeric failures)"),
        ("hyperbolic_fraction", "hyperbolic / samples"),
        ("wilson_lo / wilson_hi", "95% Wilson score interval for the fraction"),
    ],
}


def schema_markdown() -> str:
    lines = [
        "# Output schema",
        "",
        "Every CSV starts with a `# config_fingerprint: <sha256>` line; the header row follows.",
        "JSON files carry the same hash under `config_fingerprint` and use sorted keys.",
        "Non-finite floats in JSON are written as the strings `inf`, `-inf` and `nan`.",
        "",
    ]
    for name, cols in SCHEMA.items():
        lines += [f"## {name}", "", "| column | meaning |", "| --- | --- |"]
        lines += [f"| `{c}` | {m} |" for c, m in cols]
        lines.append("")
    lines += [
        "## JSON files",
        "",
        "| file | content |",
        "| --- | --- |",
        "| `ce_report.json` | growth exponent and slow-recurrence margin of a single map |",
        "| `recurrence.json` | slow-recurrence margin only |",
        "| `elements.json` | final partition elements with status, mass and exclusion witness |",
        "| `report.json` | exclusion-run summary: conservation, deletion check, escape tail, bound bracket |",
        "| `probes.json` | array of probe results |",
        "| `startup.json` | first essential return or escape time per tracked critical index |",
        "| `density.json` | density rows plus run metadata |",
        "",
    ]
    return "\n".join(lines)


def write_schema(out_dir) -> Path:
    path = Path(out_dir) / "SCHEMA.md"
    path.write_text(schema_markdown())
    return path
