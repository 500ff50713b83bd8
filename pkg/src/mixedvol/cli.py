"""Command-line front end: ``mixedvol <command> [inputs] [flags]``.

Settings resolve as defaults < ``--config`` JSON file < explicit flags. Exit
status is 0 when every asserted inequality or identity holds, 1 when one
fails, 2 on input or configuration errors. Artifacts carry no timestamps, so
the same inputs and seed give byte-identical output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .brascamp_lieb import DeformationFamily, convexity_report
from .convex_core import BodyFormatError, ConvexBody, body_potential, load_body, shipped_bodies
from .convex_core.bodies import DegenerateBodyError
from .inequalities import af_check, bm_check, corpus_af_cases, corpus_bm_cases, kt_check
from .metric_check import certify
from .monge_ampere import (
    DEFAULT_MC_SAMPLES,
    DEFAULT_NODES,
    DEFAULT_RADIUS,
    QuadratureGrid,
    mixed_volume_polyfit,
    mixed_volume_quadrature,
    monte_carlo_grid,
    tensor_grid,
)
from .sweeps import (
    discriminant_instance,
    lefschetz_instance,
    positivity_sweep,
    run_instances,
)

COMMANDS = ("mixed-volume", "verify-af", "verify-bm", "verify-kt", "lefschetz", "hrr-sweep", "metric-cert", "bl-report")

DEFAULTS: dict[str, Any] = {
    "grid": "auto",
    "radius": DEFAULT_RADIUS,
    "nodes": DEFAULT_NODES,
    "samples": None,
    "seed": 0,
    "tol": None,
    "epsilon": 0.0,
    "out": None,
    "format": "csv",
    "method": None,
    "m": None,
    "dims": [2, 3, 4],
}

# per-command fallbacks for settings left at None
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "mixed-volume": {"tol": 1e-2, "method": "both"},
    "verify-af": {"tol": 1e-8, "method": "polyfit"},
    "verify-bm": {"tol": 1e-12},
    "verify-kt": {"tol": 1e-8},
    "lefschetz": {"tol": 1e-9, "samples": 200},
    "hrr-sweep": {"tol": 1e-9, "samples": 2000},
    "metric-cert": {"tol": 1e-9, "samples": 100_000},
    "bl-report": {"tol": 1e-6},
}

FLOAT_FORMAT = "{:.12g}"


class InputError(Exception):
    """Bad input or configuration; maps to exit status 2."""


# -- rendering -----------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return FLOAT_FORMAT.format(v)
    if v is None:
        return ""
    return str(v)


def _json_value(v):
    if isinstance(v, float):
        if not math.isfinite(v):
            return str(v)
        return float(FLOAT_FORMAT.format(v))
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    return v


@dataclass
class Report:
    command: str
    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    passed: bool = True
    failures: list[str] = field(default_factory=list)
    raw_csv: str | None = None


def render_csv(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def render_table(columns: Sequence[str], rows: Sequence[dict]) -> str:
    """Aligned plain-text table; an empty row set gives the header alone."""
    cells = [[_cell(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[j]) for row in cells]) for j, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip()]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells]
    return "\n".join(lines) + "\n"


def render_json(report: Report, config: dict) -> str:
    payload = {
        "command": report.command,
        "config": config,
        "passed": report.passed,
        "failures": report.failures,
        "summary": report.summary,
        "columns": report.columns,
        "rows": [{c: r.get(c) for c in report.columns} for r in report.rows],
    }
    return json.dumps(_json_value(payload), indent=2, sort_keys=True) + "\n"


def report_render(report: Report, config: dict | None = None) -> tuple[str, str]:
    """(human table, JSON document)."""
    return render_table(report.columns, report.rows), render_json(report, config or {})


# -- inputs --------------------------------------------------------------------------


def resolve_body(spec: str) -> ConvexBody:
    """A JSON path, or the name of a shipped body."""
    path = Path(spec)
    if path.exists():
        try:
            return load_body(path)
        except (BodyFormatError, DegenerateBodyError, ValueError) as exc:
            raise InputError(f"{spec}: {exc}" if str(path) not in str(exc) else str(exc)) from None
    shipped = shipped_bodies()
    name = spec[:-5] if spec.endswith(".json") else spec
    if name in shipped:
        return shipped[name]
    raise InputError(f"{spec}: no such file or shipped body (shipped: {', '.join(sorted(shipped))})")


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise InputError(f"{path}: config file not found")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: config must be a JSON object")
    unknown = set(data) - set(DEFAULTS) - {"inputs"}
    if unknown:
        raise InputError(f"{path}: unknown config keys {sorted(unknown)}")
    return data


def resolve_settings(command: str, flags: dict, config: dict) -> dict:
    """defaults < config file < flags; then per-command fallbacks for what is still unset."""
    s = dict(DEFAULTS)
    s.update(config)
    s.update({k: v for k, v in flags.items() if v is not None})
    for k, v in COMMAND_DEFAULTS.get(command, {}).items():
        if s.get(k) is None:
            s[k] = v
    if s["tol"] is not None and not float(s["tol"]) > 0:
        raise InputError("--tol must be positive")
    if float(s["epsilon"]) < 0:
        raise InputError("--epsilon must be >= 0")
    if s["format"] not in ("csv", "json"):
        raise InputError("--format must be csv or json")
    if s["grid"] not in ("auto", "tensor", "mc"):
        raise InputError("--grid must be auto, tensor or mc")
    return s


def make_grid(dim: int, s: dict) -> QuadratureGrid:
    mode = s["grid"]
    if mode == "auto":
        mode = "tensor" if dim <= 3 else "mc"
    if mode == "tensor":
        nodes = int(s["nodes"])
        if nodes < 3 or nodes % 2 == 0:
            raise InputError("--nodes must be odd and >= 3 (composite Simpson)")
        return tensor_grid(dim, float(s["radius"]), nodes)
    return monte_carlo_grid(dim, int(s["samples"] or DEFAULT_MC_SAMPLES), float(s["radius"]), int(s["seed"]))


def _bodies(inputs: Sequence[str]) -> list[ConvexBody]:
    return [resolve_body(x) for x in inputs]


def _corpus(inputs: Sequence[str], dim: int | None = None) -> dict[str, ConvexBody]:
    if inputs:
        out = {}
        for b in _bodies(inputs):
            out[b.name or f"body{len(out)}"] = b
        return out
    return shipped_bodies(dim)


# -- commands ------------------------------------------------------------------------


def cmd_mixed_volume(inputs, s) -> Report:
    bodies = _bodies(inputs)
    if not bodies:
        raise InputError("mixed-volume needs n body files")
    n = bodies[0].dim
    if len(bodies) != n or any(b.dim != n for b in bodies):
        raise InputError(f"mixed-volume needs exactly n = {n} bodies of dimension {n}")
    method = s["method"]
    if method not in ("quadrature", "polyfit", "both"):
        raise InputError("--method must be quadrature, polyfit or both")
    results = []
    if method in ("quadrature", "both"):
        results.append(mixed_volume_quadrature([body_potential(b) for b in bodies], make_grid(n, s)))
    if method in ("polyfit", "both"):
        results.append(mixed_volume_polyfit(bodies))
    rows = [{"method": r.method, "value": r.value, "error_estimate": r.error_estimate,
             "convention": r.convention} for r in results]
    rep = Report("mixed-volume", ["method", "value", "error_estimate", "convention"], rows)
    if len(results) == 2:
        q, p = results[0].value, results[1].value
        rel = abs(q - p) / max(abs(p), 1e-300)
        rep.summary = {"relative_difference": rel, "tol": s["tol"]}
        if rel > s["tol"]:
            rep.passed, rep.failures = False, ["quadrature-vs-polyfit"]
    return rep


def _af_report(command, cases, s, fn: Callable) -> Report:
    if not cases:
        raise InputError("inputs form no complete family (need n bodies of one dimension n)")
    rows = []
    for name, bodies in cases:
        r = fn(bodies, name)
        rows.append({"case": r.name, "V12": r.V12, "V11": r.V11, "V22": r.V22, "V12_sq": r.lhs,
                     "V11_V22": r.rhs, "margin": r.margin, "relative_margin": r.relative_gap,
                     "passed": r.passed})
    rep = Report(command, ["case", "V12", "V11", "V22", "V12_sq", "V11_V22", "margin", "relative_margin", "passed"], rows)
    rep.failures = [r["case"] for r in rows if not r["passed"]]
    rep.passed = not rep.failures
    rep.summary = {"cases": len(rows), "tol": s["tol"],
                   "min_relative_margin": min((r["relative_margin"] for r in rows), default=None)}
    return rep


def _cases(inputs, dim=None):
    corpus = _corpus(inputs, dim)
    if inputs and len(corpus) == corpus[next(iter(corpus))].dim and len({b.dim for b in corpus.values()}) == 1:
        # exactly one family given: check it as is
        bodies = list(corpus.values())
        return [("|".join(b.name for b in bodies), bodies)]
    return corpus_af_cases(corpus)


def cmd_verify_af(inputs, s) -> Report:
    method = s["method"]
    if method not in ("polyfit", "quadrature"):
        raise InputError("--method must be polyfit or quadrature")
    grids: dict[int, QuadratureGrid] = {}

    def run(bodies, name):
        n = bodies[0].dim
        grid = grids.setdefault(n, make_grid(n, s)) if method == "quadrature" else None
        return af_check(bodies[0], bodies[1], bodies[2:], method, grid, s["tol"], name)

    return _af_report("verify-af", _cases(inputs), s, run)


def cmd_verify_kt(inputs, s) -> Report:
    grids: dict[int, QuadratureGrid] = {}

    def run(bodies, name):
        n = bodies[0].dim
        return kt_check(bodies[0], bodies[1], bodies[2:], grids.setdefault(n, make_grid(n, s)), s["tol"], name)

    # quadrature in 3D costs ~20 s per family, so the default corpus is the 2D one
    return _af_report("verify-kt", _cases(inputs, None if inputs else 2), s, run)


def cmd_verify_bm(inputs, s) -> Report:
    cases = corpus_bm_cases(_corpus(inputs))
    if not cases:
        raise InputError("inputs form no pair of one dimension")
    rows = []
    for name, a, b in cases:
        r = bm_check(a, b, s["tol"], name)
        rows.append({"pair": r.name, "vol_a": r.vol_a, "vol_b": r.vol_b, "vol_sum": r.vol_sum,
                     "margin": r.margin, "passed": r.passed})
    rep = Report("verify-bm", ["pair", "vol_a", "vol_b", "vol_sum", "margin", "passed"], rows)
    rep.failures = [r["pair"] for r in rows if not r["passed"]]
    rep.passed = not rep.failures
    rep.summary = {"cases": len(rows), "tol": s["tol"]}
    return rep


def _dims(s) -> tuple[int, ...]:
    dims = tuple(int(d) for d in s["dims"])
    if not dims or any(not 2 <= d <= 4 for d in dims):
        raise InputError("dims must be a non-empty list drawn from 2, 3, 4")
    return dims


def cmd_lefschetz(inputs, s) -> Report:
    if inputs:
        raise InputError("lefschetz takes no positional inputs")
    recs = run_instances(lefschetz_instance, int(s["seed"]), int(s["samples"]), dims=_dims(s))
    cols = ["index", "n", "m", "hard_lefschetz", "reconstruction", "primitivity", "star_involution", "passed"]
    tol = s["tol"]
    rows = []
    for r in recs:
        d = r.to_dict()
        # primitivity and star residuals carry the tighter 1e-10 bound
        d["passed"] = bool(r.hard_lefschetz < tol and max(r.reconstruction, r.primitivity, r.star_involution) < tol / 10)
        rows.append(d)
    rep = Report("lefschetz", cols, rows)
    rep.failures = [str(r["index"]) for r in rows if not r["passed"]]
    rep.passed = not rep.failures
    rep.summary = {c: max((r[c] for r in rows), default=0.0) for c in cols[3:7]}
    return rep


def cmd_hrr_sweep(inputs, s) -> Report:
    if inputs:
        raise InputError("hrr-sweep takes no positional inputs")
    seed, samples, dims = int(s["seed"]), int(s["samples"]), _dims(s)
    contexts = max(1, samples // 10)
    pos = positivity_sweep(seed, samples, contexts, dims)
    groups: dict[tuple, list] = {}
    for r in pos:
        groups.setdefault(("t_norm_sq", r.n, r.m, r.degree), []).append(r.normalized)
    disc = run_instances(discriminant_instance, seed + 1, samples, dims=dims)
    for r in disc:
        groups.setdefault(("discriminant", r.n, 2, 1), []).append(r.relative_margin)
    rows = []
    for (kind, n, m, k), vals in sorted(groups.items()):
        bound = 1e-14 if kind == "t_norm_sq" else -s["tol"]
        bad = sum(1 for v in vals if not v > bound) if kind == "t_norm_sq" else sum(1 for v in vals if v < bound)
        rows.append({"kind": kind, "n": n, "m": m, "degree": k, "count": len(vals), "min_value": min(vals),
                     "violations": bad, "passed": bad == 0})
    rep = Report("hrr-sweep", ["kind", "n", "m", "degree", "count", "min_value", "violations", "passed"], rows)
    rep.failures = [f"{r['kind']}:n={r['n']},m={r['m']},k={r['degree']}" for r in rows if not r["passed"]]
    rep.passed = not rep.failures
    rep.summary = {"forms": len(pos), "contexts": contexts, "tuples": len(disc),
                   "max_shadow_inconsistency": max((r.consistency for r in disc), default=0.0)}
    return rep


def cmd_metric_cert(inputs, s) -> Report:
    if inputs:
        raise InputError("metric-cert takes no positional inputs")
    dims = [d for d in _dims(s)]
    rows = []
    summary = {}
    for n in dims:
        cert = certify(n, int(s["samples"]), int(s["seed"]))
        summary[f"n={n}"] = cert.pop("constant")
        for claim, rec in cert.items():
            rows.append({"n": n, "claim": claim, "checked_points": rec["checked_points"],
                         "violations": rec["violations"], "min_margin": rec.get("min_margin"),
                         "max_margin": rec.get("max_margin"), "passed": rec["violations"] == 0})
    rep = Report("metric-cert", ["n", "claim", "checked_points", "violations", "min_margin", "max_margin", "passed"], rows)
    rep.failures = [f"n={r['n']}:{r['claim']}" for r in rows if not r["passed"]]
    rep.passed = not rep.failures
    rep.summary = summary
    return rep


def cmd_bl_report(inputs, s) -> Report:
    bodies = _bodies(inputs)
    if len(bodies) < 2:
        raise InputError("bl-report needs A1 A2 [T-factor bodies...]")
    n = bodies[0].dim
    if any(b.dim != n for b in bodies):
        raise InputError("all bodies must share one dimension")
    m = int(s["m"]) if s["m"] is not None else n - (len(bodies) - 2)
    try:
        fam = DeformationFamily.from_bodies(bodies[0], bodies[1], bodies[2:], m=m, epsilon=float(s["epsilon"]))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rep_bl = convexity_report(fam, grid=make_grid(n, s), tol=float(s["tol"]))
    cols = ["t", "f", "f_t_fd", "f_tt_quad", "f_tt_fd", "E_G", "int_Gt", "variance", "verdict"]
    rows = [{c: getattr(r, c) for c in cols} for r in rep_bl.rows]
    rep = Report("bl-report", cols, rows, summary=rep_bl.summary(), raw_csv=rep_bl.to_csv())
    rep.failures = [f"t={r['t']}" for r in rows if r["verdict"] != "PASS"]
    rep.passed = not rep.failures
    return rep


HANDLERS: dict[str, Callable[[list, dict], Report]] = {
    "mixed-volume": cmd_mixed_volume,
    "verify-af": cmd_verify_af,
    "verify-bm": cmd_verify_bm,
    "verify-kt": cmd_verify_kt,
    "lefschetz": cmd_lefschetz,
    "hrr-sweep": cmd_hrr_sweep,
    "metric-cert": cmd_metric_cert,
    "bl-report": cmd_bl_report,
}


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixedvol", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mixedvol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name, help=HANDLERS[name].__name__.removeprefix("cmd_").replace("_", " "))
        p.add_argument("inputs", nargs="*", help="body JSON files or shipped body names")
        p.add_argument("--config", help="JSON file of settings (overridden by flags)")
        p.add_argument("--grid", choices=("auto", "tensor", "mc"))
        p.add_argument("--radius", type=float)
        p.add_argument("--nodes", type=int)
        p.add_argument("--samples", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--out", help="artifact path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--method", help="mixed-volume/verify-af route: quadrature, polyfit or both")
        p.add_argument("--m", type=int, help="bl-report: degree m of the deformed class")
        p.add_argument("--dims", type=int, nargs="+", help="dimensions for random sweeps")
    return parser


def run(command: str, inputs: Sequence[str], flags: dict, config_path: str | None = None) -> tuple[int, Report, dict]:
    config = load_config(config_path)
    inputs = list(inputs) or list(config.get("inputs", []))
    s = resolve_settings(command, flags, config)
    report = HANDLERS[command](inputs, s)
    return (0 if report.passed else 1), report, s


def _artifact(report: Report, settings: dict) -> str:
    public = {k: v for k, v in settings.items() if k != "out"}
    if settings["format"] == "json":
        return render_json(report, public)
    if report.raw_csv is not None:
        return report.raw_csv
    return render_csv(report.columns, report.rows)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "inputs", "config")}
    try:
        code, report, settings = run(args.command, args.inputs, flags, args.config)
    except InputError as exc:
        print(f"mixedvol: error: {exc}", file=sys.stderr)
        return 2
    except (BodyFormatError, DegenerateBodyError) as exc:
        print(f"mixedvol: error: {exc}", file=sys.stderr)
        return 2
    text = _artifact(report, settings)
    if settings["out"]:
        Path(settings["out"]).write_text(text)
        sys.stdout.write(render_table(report.columns, report.rows))
    else:
        sys.stdout.write(text)
    if not report.passed:
        print(json.dumps({"status": "fail", "command": report.command, "failures": report.failures}),
              file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
