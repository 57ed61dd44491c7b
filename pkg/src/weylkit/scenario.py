"""Scenario files: JSON descriptions of a chart, fields, points and geodesics."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .expr import Chart, ExprError, ScalarExpr, parse
from .geometry import (
    Connection,
    ConnectionSpec,
    EPSConnection,
    LeviCivitaConnection,
    MetricSpec,
    OneFormSpec,
    WeylConnection,
    projective_shift,
)

__all__ = ["Scenario", "ScenarioError", "GeodesicSpec", "load_scenario", "scenario_from_dict"]


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class GeodesicSpec:
    x0: tuple[float, ...]
    v0: tuple[float, ...]
    steps: int
    h: float
    name: str = ""


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    chart: Chart
    metric: MetricSpec
    connection: Connection
    one_forms: dict[str, OneFormSpec]
    points: list[tuple[float, ...]]
    geodesics: list[GeodesicSpec]
    integrability: str | None
    settings: dict[str, Any]
    raw: dict = field(repr=False, default_factory=dict)


def _where(path: str, msg: str) -> ScenarioError:
    return ScenarioError(f"{path}: {msg}")


def _p(text, chart: Chart, where: str) -> ScalarExpr:
    try:
        return parse(text, chart)
    except (ExprError, TypeError) as exc:
        raise _where(where, f"{exc} in expression {text!r}") from None


def _metric(raw, chart: Chart) -> MetricSpec:
    n = chart.dim
    if isinstance(raw, dict):
        if set(raw) != {"diag"}:
            raise _where("metric", "object form must be {\"diag\": [...]}")
        if not isinstance(raw["diag"], list) or len(raw["diag"]) != n:
            raise _where("metric.diag", f"expected {n} expressions")
        return MetricSpec.diagonal(chart, [_p(e, chart, f"metric.diag[{j}]") for j, e in enumerate(raw["diag"])])
    if not isinstance(raw, list) or len(raw) != n:
        raise _where("metric", f"expected {n}x{n} array of expressions")
    return MetricSpec(chart, tuple(
        tuple(_p(e, chart, f"metric[{j}][{k}]") for k, e in enumerate(row)) for j, row in enumerate(raw)
    ))


def _one_form(ref, forms: dict[str, OneFormSpec], chart: Chart, where: str) -> OneFormSpec:
    if isinstance(ref, str):
        if ref not in forms:
            raise _where(where, f"unknown one-form {ref!r}")
        return forms[ref]
    if isinstance(ref, list):
        return OneFormSpec(chart, tuple(_p(e, chart, f"{where}[{k}]") for k, e in enumerate(ref)))
    raise _where(where, "one-form must be a name or a list of expressions")


def _explicit(raw, chart: Chart) -> ConnectionSpec:
    n = chart.dim
    if isinstance(raw, list):
        return ConnectionSpec(chart, tuple(
            tuple(tuple(_p(e, chart, f"connection.explicit[{i}][{j}][{k}]") for k, e in enumerate(row))
                  for j, row in enumerate(mat))
            for i, mat in enumerate(raw)
        ))
    if not isinstance(raw, dict):
        raise _where("connection.explicit", "expected nested array or {\"i,j,k\": expr} map")
    grid = [[["0"] * n for _ in range(n)] for _ in range(n)]
    seen: dict[tuple, str] = {}
    for key, text in raw.items():
        try:
            i, j, k = (int(s) for s in key.split(","))
        except ValueError:
            raise _where("connection.explicit", f"bad component key {key!r}") from None
        if not all(0 <= a < n for a in (i, j, k)):
            raise _where("connection.explicit", f"component {key!r} out of range")
        canon = (i, min(j, k), max(j, k))
        if canon in seen and seen[canon] != text:
            raise _where("connection.explicit", f"conflicting values for symmetric component {key!r}")
        seen[canon] = text
        grid[i][j][k] = grid[i][k][j] = text
    return ConnectionSpec(chart, tuple(
        tuple(tuple(_p(e, chart, f"connection.explicit[{i},{j},{k}]") for k, e in enumerate(row))
              for j, row in enumerate(mat))
        for i, mat in enumerate(grid)
    ))


def _connection(raw, metric: MetricSpec, forms, chart: Chart, where: str = "connection") -> Connection:
    if raw == "levi_civita":
        return LeviCivitaConnection(metric)
    if not isinstance(raw, dict) or len(raw) != 1:
        raise _where(where, "expected \"levi_civita\" or a single-key object")
    (kind, body), = raw.items()
    if kind == "weyl":
        return WeylConnection(metric, _one_form(body, forms, chart, f"{where}.weyl"))
    if kind == "eps":
        if not isinstance(body, dict) or set(body) != {"phi", "eta"}:
            raise _where(f"{where}.eps", "expected {\"phi\": ..., \"eta\": ...}")
        return EPSConnection(
            metric,
            _one_form(body["phi"], forms, chart, f"{where}.eps.phi"),
            _one_form(body["eta"], forms, chart, f"{where}.eps.eta"),
        )
    if kind == "projective_shift":
        if not isinstance(body, dict) or set(body) != {"base", "psi"}:
            raise _where(f"{where}.projective_shift", "expected {\"base\": ..., \"psi\": ...}")
        base = _connection(body["base"], metric, forms, chart, f"{where}.projective_shift.base")
        return projective_shift(base, _one_form(body["psi"], forms, chart, f"{where}.projective_shift.psi"))
    if kind == "explicit":
        return _explicit(body, chart)
    raise _where(where, f"unknown connection kind {kind!r}")


def _vector(raw, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(raw, list) or len(raw) != n:
        raise _where(where, f"expected a list of {n} numbers")
    try:
        return tuple(float(x) for x in raw)
    except (TypeError, ValueError):
        raise _where(where, "entries must be numbers") from None


SETTINGS_DEFAULTS = {
    "tol": 1e-8,
    "samples": None,
    "seed": 0,
    "geodesic_tol": 1e-6,
    "degeneracy_threshold": 1e-12,
}


def scenario_from_dict(raw: dict) -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    chart_raw = raw.get("chart")
    if not isinstance(chart_raw, dict) or "dim" not in chart_raw:
        raise _where("chart", "expected {\"dim\": n, \"coordinates\": [...]}")
    try:
        chart = Chart(int(chart_raw["dim"]), tuple(chart_raw.get("coordinates", ())))
    except ValueError as exc:
        raise _where("chart", str(exc)) from None
    n = chart.dim
    if "metric" not in raw:
        raise _where("metric", "missing")
    metric = _metric(raw["metric"], chart)
    forms = {
        name: _one_form(comps, {}, chart, f"one_forms.{name}")
        for name, comps in raw.get("one_forms", {}).items()
    }
    connection = _connection(raw.get("connection", "levi_civita"), metric, forms, chart)
    points = [_vector(p, n, f"points[{i}]") for i, p in enumerate(raw.get("points", []))]
    geodesics = []
    for i, gd in enumerate(raw.get("geodesics", [])):
        where = f"geodesics[{i}]"
        try:
            steps, h = int(gd["steps"]), float(gd["h"])
        except (KeyError, TypeError, ValueError):
            raise _where(where, "needs integer 'steps' and numeric 'h'") from None
        geodesics.append(GeodesicSpec(
            _vector(gd.get("x0"), n, f"{where}.x0"),
            _vector(gd.get("v0"), n, f"{where}.v0"),
            steps, h, str(gd.get("name", f"geodesic_{i}")),
        ))
    integ = raw.get("integrability")
    if integ is None and isinstance(raw.get("connection"), dict) and isinstance(raw["connection"].get("weyl"), str):
        integ = raw["connection"]["weyl"]
    if integ is not None and integ not in forms:
        raise _where("integrability", f"unknown one-form {integ!r}")
    settings = dict(SETTINGS_DEFAULTS)
    unknown = set(raw.get("settings", {})) - set(settings)
    if unknown:
        raise _where("settings", f"unknown keys {sorted(unknown)}")
    settings.update(raw.get("settings", {}))
    return Scenario(str(raw.get("name", "scenario")), chart, metric, connection, forms,
                    points, geodesics, integ, settings, raw)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return scenario_from_dict(raw)
