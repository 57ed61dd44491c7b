"""Command-line front end: ``weylkit check|weylize|geodesic``.

Exit codes: 0 success/compatible, 2 incompatible, 1 usage/parse/numeric error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .compat import (
    DefiniteSignatureError,
    DimensionError,
    IncompatibleError,
    default_samples,
    integrability_check,
    is_lightcone_compatible,
    weylize,
)
from .expr import ExprError
from .geodesic import GeodesicIntegrationError, integrate_geodesic, null_norm_drift, pregeodesic_residual, write_trace_csv
from .geometry import LeviCivitaConnection, metric_at
from .scenario import Scenario, ScenarioError, load_scenario
from .tensor import DegenerateMetricError

EXIT_OK, EXIT_ERROR, EXIT_INCOMPATIBLE = 0, 1, 2


# ---------------------------------------------------------------------------
# deterministic JSON


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj) + 0.0  # folds -0.0 into 0.0
        if not math.isfinite(x):
            raise ValueError(f"cannot serialize non-finite float {x!r}")
        text = format(x, ".17g")
        if not any(c in text for c in ".en"):
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(x, (int, float, np.number)) and not isinstance(x, bool) for x in obj):
            return "[" + ", ".join(_encode(x, indent, level + 1) for x in obj) + "]"
        items = ",\n".join(pad + _encode(x, indent, level + 1) for x in obj)
        return "[\n" + items + "\n" + end + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            pad + json.dumps(str(k), ensure_ascii=False) + ": " + _encode(v, indent, level + 1)
            for k, v in obj.items()
        )
        return "{\n" + items + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with insertion-ordered keys and floats at 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


# ---------------------------------------------------------------------------
# commands


def _settings(scn: Scenario, args) -> dict:
    s = dict(scn.settings)
    for key in ("tol", "samples", "seed", "degeneracy_threshold"):
        value = getattr(args, key, None)
        if value is not None:
            s[key] = value
    if s["samples"] is None:
        s["samples"] = default_samples(scn.chart.dim)
    return s


def _header(command: str, scn: Scenario, settings: dict) -> dict:
    return {
        "tool": "weylkit",
        "version": __version__,
        "command": command,
        "scenario": scn.name,
        "config": {"settings": settings, "scenario": scn.raw},
    }


def _point_entry(k, rep, seed) -> dict:
    dec = rep.decomposition
    return {
        "index": k,
        "point": list(rep.point),
        "seed": seed,
        "samples": rep.samples,
        "nullcone_residual": rep.nullcone_residual,
        "decomposition_residual": rep.decomposition_residual,
        "tolerance": rep.tolerance,
        "sampling_verdict": "compatible" if rep.sampling_compatible else "incompatible",
        "decomposition_verdict": "compatible" if rep.decomposition_compatible else "incompatible",
        "verdict": rep.verdict,
        "phi_vec": dec.phi_vec,
        "eta": dec.eta,
        "warnings": list(rep.warnings),
    }


_POINT_ERRORS = (DegenerateMetricError, DefiniteSignatureError, ExprError)


def cmd_check(scn: Scenario, settings: dict) -> tuple[dict, int]:
    report = _header("check", scn, settings)
    entries, code = [], EXIT_OK
    for k, p in enumerate(scn.points):
        seed = settings["seed"] ^ k
        try:
            rep = is_lightcone_compatible(scn.metric, scn.connection, p, settings["samples"],
                                          settings["tol"], seed, settings["degeneracy_threshold"])
        except _POINT_ERRORS as exc:
            entries.append({"index": k, "point": list(p), "error": str(exc)})
            code = EXIT_ERROR
            continue
        entries.append(_point_entry(k, rep, seed))
        if not rep.compatible and code == EXIT_OK:
            code = EXIT_INCOMPATIBLE
    report["points"] = entries
    report["verdict"] = {EXIT_OK: "compatible", EXIT_INCOMPATIBLE: "incompatible"}.get(code, "error")
    return report, code


def cmd_weylize(scn: Scenario, settings: dict) -> tuple[dict, int]:
    report = _header("weylize", scn, settings)
    try:
        res = weylize(scn.metric, scn.connection, scn.points, settings["tol"], settings["seed"],
                      settings["samples"], settings["degeneracy_threshold"])
    except IncompatibleError as exc:
        report["points"] = [_point_entry(k, r, settings["seed"] ^ k) for k, r in enumerate(exc.reports)]
        report["verdict"] = "incompatible"
        report["worst_point"] = list(exc.point)
        report["worst_residual"] = exc.residual
        return report, EXIT_INCOMPATIBLE
    entries = []
    for k, rep in enumerate(res.reports):
        e = _point_entry(k, rep, settings["seed"] ^ k)
        e["phi"] = res.phi[k]
        e["normal_form_phi"] = res.normal_form_phi[k]
        entries.append(e)
    report["points"] = entries
    report["verdict"] = "compatible"
    if scn.integrability is not None:
        closed, curl = integrability_check(scn.one_forms[scn.integrability], scn.points, settings["tol"])
        report["integrability"] = {"one_form": scn.integrability, "closed": closed, "max_curl": curl}
    return report, EXIT_OK


def cmd_geodesic(scn: Scenario, settings: dict, outdir: Path) -> tuple[dict, int]:
    report = _header("geodesic", scn, settings)
    outdir.mkdir(parents=True, exist_ok=True)
    lc = LeviCivitaConnection(scn.metric)
    thr = settings["degeneracy_threshold"]
    entries, code = [], EXIT_OK
    for k, gd in enumerate(scn.geodesics):
        trace = integrate_geodesic(lc, gd.x0, gd.v0, gd.steps, gd.h, thr)
        csv_name = f"{gd.name}.csv"
        write_trace_csv(trace, outdir / csv_name)
        v0 = np.asarray(gd.v0)
        g0 = metric_at(scn.metric, gd.x0, thr).data
        residual = pregeodesic_residual(scn.connection, trace, thr)
        flagged = residual > settings["geodesic_tol"]
        if flagged:
            code = EXIT_INCOMPATIBLE
        entries.append({
            "index": k,
            "name": gd.name,
            "csv": csv_name,
            "x0": list(gd.x0),
            "v0": list(gd.v0),
            "steps": gd.steps,
            "h": gd.h,
            "initial_norm": float(v0 @ g0 @ v0),
            "null_norm_drift": null_norm_drift(scn.metric, trace),
            "pregeodesic_residual": residual,
            "tolerance": settings["geodesic_tol"],
            "flagged": flagged,
        })
    report["geodesics"] = entries
    report["verdict"] = "compatible" if code == EXIT_OK else "incompatible"
    return report, code


# ---------------------------------------------------------------------------
# entry point


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--tol", type=float, default=default, help="relative tolerance (default 1e-8)")
    parser.add_argument("--samples", type=int, default=default, help="null samples per point (default 10*n^2)")
    parser.add_argument("--seed", type=int, default=default, help="base seed; point k uses seed XOR k")
    parser.add_argument("--degeneracy-threshold", dest="degeneracy_threshold", type=float, default=default,
                        help="relative determinant threshold for degenerate metrics (default 1e-12)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weylkit", description="Light-cone and Weyl compatibility toolkit.")
    parser.add_argument("--version", action="version", version=f"weylkit {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="pointwise light-cone compatibility report (stdout)")
    p.add_argument("scenario")
    _global_flags(p, suppress=True)

    p = sub.add_parser("weylize", help="recover the Weyl one-form at every point")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", help="report path (default stdout)")
    _global_flags(p, suppress=True)

    p = sub.add_parser("geodesic", help="integrate null geodesics and check them against the connection")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True, help="output directory for CSV traces and summary.json")
    _global_flags(p, suppress=True)
    return parser


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scn = load_scenario(args.scenario)
        settings = _settings(scn, args)
        if args.command == "check":
            report, code = cmd_check(scn, settings)
            _emit(dumps(report), None)
        elif args.command == "weylize":
            report, code = cmd_weylize(scn, settings)
            _emit(dumps(report), args.output)
        else:
            outdir = Path(args.output)
            report, code = cmd_geodesic(scn, settings, outdir)
            (outdir / "summary.json").write_text(dumps(report), encoding="utf-8")
        return code
    except GeodesicIntegrationError as exc:
        print(f"weylkit: geodesic integration failed: {exc}", file=sys.stderr)
    except (ScenarioError, ExprError, DegenerateMetricError, DefiniteSignatureError, DimensionError) as exc:
        print(f"weylkit: {exc}", file=sys.stderr)
    except (OSError, ValueError) as exc:
        print(f"weylkit: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
