"""Fixed-step RK4 geodesics and curve-level checks.

The geodesic equation ``x'' = -Gamma^i_{jk}(x) x'^j x'^k`` is integrated as a
first-order system in ``(x, v)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .expr import ExprError
from .geometry import Connection, MetricSpec
from .tensor import DEGENERACY_THRESHOLD, DegenerateMetricError

__all__ = [
    "GeodesicTrace",
    "GeodesicIntegrationError",
    "integrate_geodesic",
    "rk4_step",
    "null_norm_drift",
    "pregeodesic_residual",
    "write_trace_csv",
    "read_trace_csv",
]


class GeodesicIntegrationError(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


@dataclass(frozen=True, eq=False)
class GeodesicTrace:
    t: np.ndarray  # (m,)
    x: np.ndarray  # (m, n)
    v: np.ndarray  # (m, n)
    h: float
    connection: str = ""

    def __post_init__(self):
        for name in ("t", "x", "v"):
            a = np.array(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.x.shape != self.v.shape or self.x.shape[0] != self.t.shape[0]:
            raise ValueError("inconsistent trace arrays")

    def __len__(self):
        return self.t.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def _accel(conn: Connection, x, v, threshold):
    G = conn.at(x, threshold)
    return -np.einsum("ijk,j,k->i", G, v, v)


def rk4_step(conn: Connection, x, v, h: float, threshold: float = DEGENERACY_THRESHOLD):
    """One classical RK4 step of the geodesic system."""
    k1x, k1v = v, _accel(conn, x, v, threshold)
    x2, v2 = x + 0.5 * h * k1x, v + 0.5 * h * k1v
    k2x, k2v = v2, _accel(conn, x2, v2, threshold)
    x3, v3 = x + 0.5 * h * k2x, v + 0.5 * h * k2v
    k3x, k3v = v3, _accel(conn, x3, v3, threshold)
    x4, v4 = x + h * k3x, v + h * k3v
    k4x, k4v = v4, _accel(conn, x4, v4, threshold)
    x_new = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v_new = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return x_new, v_new


def integrate_geodesic(
    conn: Connection,
    x0: Sequence[float],
    v0: Sequence[float],
    steps: int,
    h: float,
    threshold: float = DEGENERACY_THRESHOLD,
) -> GeodesicTrace:
    """Integrate ``steps`` RK4 steps of size ``h`` from ``(x0, v0)``; returns ``steps + 1`` samples."""
    if not h > 0:
        raise ValueError("step size must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    n = conn.dim
    if x.shape != (n,) or v.shape != (n,):
        raise ValueError(f"initial data must have length {n}")
    if not np.any(v):
        raise ValueError("initial velocity must be nonzero")
    xs = np.empty((steps + 1, n))
    vs = np.empty((steps + 1, n))
    xs[0], vs[0] = x, v
    for step in range(1, steps + 1):
        try:
            x, v = rk4_step(conn, x, v, h, threshold)
        except (ExprError, DegenerateMetricError) as exc:
            raise GeodesicIntegrationError(str(exc), step) from exc
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise GeodesicIntegrationError("non-finite state", step)
        xs[step], vs[step] = x, v
    t = h * np.arange(steps + 1)
    return GeodesicTrace(t, xs, vs, h, getattr(conn, "label", ""))


def null_norm_drift(g: MetricSpec, trace: GeodesicTrace) -> float:
    """``max |g(v, v) - g(v0, v0)|`` along the trace."""
    norms = [float(v @ g.values(x) @ v) for x, v in zip(trace.x, trace.v)]
    return max(abs(q - norms[0]) for q in norms)


def pregeodesic_residual(conn: Connection, trace: GeodesicTrace,
                         threshold: float = DEGENERACY_THRESHOLD) -> float:
    """Euclidean-transverse part of ``a + Gamma(v, v)`` along the trace.

    The acceleration ``a`` is the central difference of the sampled velocity.
    The result vanishes (up to discretization) iff the curve is a geodesic of
    ``conn`` up to reparameterization.
    """
    m = len(trace)
    if m < 3:
        raise ValueError("trace needs at least 3 samples")
    h = trace.h
    worst = 0.0
    for i in range(1, m - 1):
        v = trace.v[i]
        vv = float(v @ v)
        if vv == 0.0:
            raise ValueError(f"zero velocity at sample {i}")
        a = (trace.v[i + 1] - trace.v[i - 1]) / (2.0 * h)
        r = a + np.einsum("ijk,j,k->i", conn.at(trace.x[i], threshold), v, v)
        transverse = r - (float(r @ v) / vv) * v
        worst = max(worst, float(np.linalg.norm(transverse)) / (1.0 + float(np.linalg.norm(r))))
    return worst


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace_csv(trace: GeodesicTrace, path) -> None:
    n = trace.dim
    header = ["t"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, x, v in zip(trace.t, trace.x, trace.v):
            w.writerow([_fmt(t)] + [_fmt(c) for c in x] + [_fmt(c) for c in v])


def read_trace_csv(path, connection: str = "") -> GeodesicTrace:
    """Load a trace written by :func:`write_trace_csv` (or any compatible CSV)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trace file")
    header, body = rows[0], rows[1:]
    if len(header) < 3 or header[0] != "t" or (len(header) - 1) % 2:
        raise ValueError(f"{path}: bad header {header}")
    n = (len(header) - 1) // 2
    expected = ["t"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)]
    if header != expected:
        raise ValueError(f"{path}: expected header {expected}")
    data = np.array([[float(c) for c in row] for row in body if row])
    if data.shape[0] < 2:
        raise ValueError(f"{path}: need at least two samples")
    t = data[:, 0]
    steps = np.diff(t)
    h = float(steps[0])
    if h <= 0 or not np.allclose(steps, h, rtol=1e-9, atol=0.0):
        raise ValueError(f"{path}: parameter must increase with uniform step")
    return GeodesicTrace(t, data[:, 1:1 + n], data[:, 1 + n:], h, connection or Path(path).stem)
