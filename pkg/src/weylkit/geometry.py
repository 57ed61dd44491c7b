"""Metrics, one-forms and connections on a chart, and their point evaluations.

Conventions used throughout:

* one-forms (``phi``, ``eta``, ``psi``) are stored with a lower index; the
  vector ``phi^i = g^{ij} phi_j`` is raised on demand;
* connection arrays are indexed ``gamma[i, j, k]`` = Gamma^i_{jk} and are
  symmetric in ``j, k``;
* the Weyl connection of ``(g, phi)`` is
  ``F^i_{jk} + delta^i_j phi_k + delta^i_k phi_j - g_{jk} phi^i`` with ``F`` the
  Levi-Civita connection of ``g``; it satisfies ``nabla g + 2 phi (x) g = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .expr import Chart, ScalarExpr, add, canonical_key, const, differentiate, evaluate, func, mul, parse, sub
from .tensor import DEGENERACY_THRESHOLD, PointTensor, SymMatrix, invert

__all__ = [
    "MetricSpec",
    "OneFormSpec",
    "ConnectionSpec",
    "Connection",
    "LeviCivitaConnection",
    "WeylConnection",
    "EPSConnection",
    "ShiftedConnection",
    "WeylStructure",
    "ChartMismatchError",
    "metric_at",
    "inverse_metric_at",
    "levi_civita",
    "weyl_connection",
    "eps_connection",
    "nabla_g_residual",
    "projective_shift",
    "conformal_rescale",
    "gauge_transform",
    "difference_tensor",
    "pure_trace",
]

ExprLike = Union[str, float, int, ScalarExpr]
LOWER_SYM = ((1, 2),)


class ChartMismatchError(ValueError):
    pass


def _expr(value: ExprLike, chart: Chart) -> ScalarExpr:
    if isinstance(value, ScalarExpr):
        return value
    return parse(value, chart)


def _same_chart(a: Chart, b: Chart):
    if a != b:
        raise ChartMismatchError(f"chart mismatch: {a} vs {b}")


def _point(p: Sequence[float], dim: int) -> tuple[float, ...]:
    p = tuple(float(x) for x in p)
    if len(p) != dim:
        raise ValueError(f"point has length {len(p)}, chart dimension is {dim}")
    return p


# ---------------------------------------------------------------------------
# field specifications


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """Symmetric matrix of coordinate expressions ``g[j][k]``."""

    chart: Chart
    g: tuple[tuple[ScalarExpr, ...], ...]

    def __post_init__(self):
        n = self.chart.dim
        rows = tuple(tuple(_expr(e, self.chart) for e in row) for row in self.g)
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"metric must be {n}x{n}")
        for j in range(n):
            for k in range(j + 1, n):
                if rows[j][k] != rows[k][j] and str(rows[j][k]) != str(rows[k][j]):
                    raise ValueError(f"metric is not symmetric at ({j}, {k})")
        object.__setattr__(self, "g", rows)

    @classmethod
    def from_strings(cls, chart: Chart, rows) -> "MetricSpec":
        return cls(chart, rows)

    @classmethod
    def diagonal(cls, chart: Chart, entries: Sequence[ExprLike]) -> "MetricSpec":
        n = chart.dim
        if len(entries) != n:
            raise ValueError(f"need {n} diagonal entries")
        zero = const(0.0)
        return cls(chart, tuple(
            tuple(_expr(entries[j], chart) if j == k else zero for k in range(n)) for j in range(n)
        ))

    @property
    def dim(self) -> int:
        return self.chart.dim

    @cached_property
    def dg(self) -> tuple:
        """Exact derivatives; ``dg[l][j][k]`` is d_l g_{jk}."""
        n = self.dim
        return tuple(
            tuple(tuple(differentiate(self.g[j][k], l) for k in range(n)) for j in range(n))
            for l in range(n)
        )

    def values(self, p) -> np.ndarray:
        p = _point(p, self.dim)
        return np.array([[evaluate(e, p) for e in row] for row in self.g])

    def derivative_values(self, p) -> np.ndarray:
        p = _point(p, self.dim)
        return np.array([[[evaluate(e, p) for e in row] for row in mat] for mat in self.dg])


@dataclass(frozen=True, eq=False)
class OneFormSpec:
    """Covector field ``omega_k`` given by coordinate expressions."""

    chart: Chart
    omega: tuple[ScalarExpr, ...]

    def __post_init__(self):
        comps = tuple(_expr(e, self.chart) for e in self.omega)
        if len(comps) != self.chart.dim:
            raise ValueError(f"one-form needs {self.chart.dim} components, got {len(comps)}")
        object.__setattr__(self, "omega", comps)

    @classmethod
    def zero(cls, chart: Chart) -> "OneFormSpec":
        return cls(chart, (const(0.0),) * chart.dim)

    @classmethod
    def exact(cls, chart: Chart, potential: ExprLike) -> "OneFormSpec":
        """The differential ``d f`` of a scalar expression."""
        f = _expr(potential, chart)
        return cls(chart, tuple(differentiate(f, k) for k in range(chart.dim)))

    @property
    def dim(self) -> int:
        return self.chart.dim

    def values(self, p) -> np.ndarray:
        p = _point(p, self.dim)
        return np.array([evaluate(e, p) for e in self.omega])

    @cached_property
    def d_omega(self) -> tuple:
        n = self.dim
        return tuple(tuple(differentiate(self.omega[k], j) for k in range(n)) for j in range(n))

    @cached_property
    def _curl_cancels(self) -> np.ndarray:
        # pairs whose mixed partials are the same expression up to operand order
        n = self.dim
        keys = [[canonical_key(e) for e in row] for row in self.d_omega]
        return np.array([[keys[j][k] == keys[k][j] for k in range(n)] for j in range(n)])

    def curl_values(self, p) -> np.ndarray:
        """``c[j, k] = d_j omega_k - d_k omega_j`` from exact derivatives.

        Entries whose two terms agree symbolically are exactly zero.
        """
        p = _point(p, self.dim)
        d = np.array([[evaluate(e, p) for e in row] for row in self.d_omega])
        c = d - d.T
        c[self._curl_cancels] = 0.0
        return c


class Connection:
    """Anything that yields Gamma^i_{jk} as an (n, n, n) array at a point."""

    chart: Chart
    label = "connection"

    @property
    def dim(self) -> int:
        return self.chart.dim

    def at(self, p, threshold: float = DEGENERACY_THRESHOLD) -> np.ndarray:
        raise NotImplementedError

    def tensor_at(self, p, threshold: float = DEGENERACY_THRESHOLD) -> PointTensor:
        return PointTensor(self.at(p, threshold), LOWER_SYM)


@dataclass(frozen=True, eq=False)
class ConnectionSpec(Connection):
    """Explicit torsion-free connection ``gamma[i][j][k]`` (symmetric in j, k)."""

    chart: Chart
    gamma: tuple

    label = "explicit"

    def __post_init__(self):
        n = self.chart.dim
        arr = tuple(tuple(tuple(_expr(e, self.chart) for e in row) for row in mat) for mat in self.gamma)
        if len(arr) != n or any(len(m) != n or any(len(r) != n for r in m) for m in arr):
            raise ValueError(f"connection must be {n}x{n}x{n}")
        for i in range(n):
            for j in range(n):
                for k in range(j + 1, n):
                    a, b = arr[i][j][k], arr[i][k][j]
                    if a != b and str(a) != str(b):
                        raise ValueError(f"connection not symmetric in lower indices at ({i}, {j}, {k})")
        object.__setattr__(self, "gamma", arr)

    @classmethod
    def zero(cls, chart: Chart) -> "ConnectionSpec":
        n = chart.dim
        z = const(0.0)
        return cls(chart, tuple(tuple((z,) * n for _ in range(n)) for _ in range(n)))

    def at(self, p, threshold=DEGENERACY_THRESHOLD):
        p = _point(p, self.dim)
        return np.array([[[evaluate(e, p) for e in row] for row in mat] for mat in self.gamma])


@dataclass(frozen=True, eq=False)
class LeviCivitaConnection(Connection):
    g: MetricSpec
    label = "levi_civita"

    @property
    def chart(self):
        return self.g.chart

    def at(self, p, threshold=DEGENERACY_THRESHOLD):
        return _christoffel(self.g, p, threshold)[0]


@dataclass(frozen=True, eq=False)
class WeylConnection(Connection):
    g: MetricSpec
    phi: OneFormSpec
    label = "weyl"

    def __post_init__(self):
        _same_chart(self.g.chart, self.phi.chart)

    @property
    def chart(self):
        return self.g.chart

    def at(self, p, threshold=DEGENERACY_THRESHOLD):
        return _weyl_array(self.g, self.phi, p, threshold)


@dataclass(frozen=True, eq=False)
class EPSConnection(Connection):
    """``F^i_{jk} + phi^i g_{jk} + eta_j delta^i_k + eta_k delta^i_j``."""

    g: MetricSpec
    phi: OneFormSpec
    eta: OneFormSpec
    label = "eps"

    def __post_init__(self):
        _same_chart(self.g.chart, self.phi.chart)
        _same_chart(self.g.chart, self.eta.chart)

    @property
    def chart(self):
        return self.g.chart

    def at(self, p, threshold=DEGENERACY_THRESHOLD):
        return _eps_array(self.g, self.phi, self.eta, p, threshold)


@dataclass(frozen=True, eq=False)
class ShiftedConnection(Connection):
    """Projective shift of an arbitrary connection provider."""

    base: Connection
    psi: OneFormSpec
    label = "projective_shift"

    def __post_init__(self):
        _same_chart(self.base.chart, self.psi.chart)

    @property
    def chart(self):
        return self.base.chart

    def at(self, p, threshold=DEGENERACY_THRESHOLD):
        return self.base.at(p, threshold) + pure_trace(self.psi.values(p))


@dataclass(frozen=True, eq=False)
class WeylStructure:
    """A Weylian metric represented by one gauge ``(g, phi)``."""

    g: MetricSpec
    phi: OneFormSpec

    def __post_init__(self):
        _same_chart(self.g.chart, self.phi.chart)

    @property
    def connection(self) -> WeylConnection:
        return WeylConnection(self.g, self.phi)

    def connection_at(self, p, threshold=DEGENERACY_THRESHOLD) -> PointTensor:
        return weyl_connection(self.g, self.phi, p, threshold)

    def compatibility_residual(self, p, threshold=DEGENERACY_THRESHOLD) -> PointTensor:
        return nabla_g_residual(self.g, self.connection_at(p, threshold), self.phi, p)

    def regauge(self, ln_omega: ExprLike) -> "WeylStructure":
        return WeylStructure(conformal_rescale(self.g, ln_omega), gauge_transform(self.phi, ln_omega))


# ---------------------------------------------------------------------------
# point evaluations


def pure_trace(eta: np.ndarray) -> np.ndarray:
    """``delta^i_j eta_k + delta^i_k eta_j`` as an (n, n, n) array."""
    eta = np.asarray(eta, dtype=float)
    n = eta.shape[0]
    eye = np.eye(n)
    return np.einsum("ij,k->ijk", eye, eta) + np.einsum("ik,j->ijk", eye, eta)


def _metric_pair(g: MetricSpec, p, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    gm = SymMatrix(g.values(p))
    return gm.data, invert(gm, threshold).data


def _christoffel(g: MetricSpec, p, threshold: float):
    gm, ginv = _metric_pair(g, p, threshold)
    dg = g.derivative_values(p)
    # t[l, j, k] = d_j g_{lk} + d_k g_{lj} - d_l g_{jk}
    t = np.transpose(dg, (1, 0, 2)) + np.transpose(dg, (1, 2, 0)) - dg
    F = 0.5 * np.einsum("il,ljk->ijk", ginv, t)
    F = 0.5 * (F + np.transpose(F, (0, 2, 1)))
    return F, gm, ginv


def _weyl_array(g, phi, p, threshold):
    _same_chart(g.chart, phi.chart)
    F, gm, ginv = _christoffel(g, p, threshold)
    phi_low = phi.values(p)
    phi_up = ginv @ phi_low
    return F + pure_trace(phi_low) - np.einsum("jk,i->ijk", gm, phi_up)


def _eps_array(g, phi, eta, p, threshold):
    _same_chart(g.chart, phi.chart)
    _same_chart(g.chart, eta.chart)
    F, gm, ginv = _christoffel(g, p, threshold)
    phi_up = ginv @ phi.values(p)
    return F + np.einsum("i,jk->ijk", phi_up, gm) + pure_trace(eta.values(p))


def metric_at(g: MetricSpec, p, threshold: float = DEGENERACY_THRESHOLD) -> SymMatrix:
    """Numeric metric at ``p``; raises DegenerateMetricError if degenerate."""
    m = SymMatrix(g.values(p))
    invert(m, threshold)
    return m


def inverse_metric_at(g: MetricSpec, p, threshold: float = DEGENERACY_THRESHOLD) -> SymMatrix:
    return invert(SymMatrix(g.values(p)), threshold)


def levi_civita(g: MetricSpec, p, threshold: float = DEGENERACY_THRESHOLD) -> PointTensor:
    """Christoffel symbols of the second kind from exact metric derivatives."""
    return PointTensor(_christoffel(g, p, threshold)[0], LOWER_SYM)


def weyl_connection(g: MetricSpec, phi: OneFormSpec, p, threshold: float = DEGENERACY_THRESHOLD) -> PointTensor:
    return PointTensor(_weyl_array(g, phi, p, threshold), LOWER_SYM)


def eps_connection(g: MetricSpec, phi: OneFormSpec, eta: OneFormSpec, p,
                   threshold: float = DEGENERACY_THRESHOLD) -> PointTensor:
    """Connection ``F + phi^i g_{jk} + eta_j delta^i_k + eta_k delta^i_j``.

    ``phi`` is given as a one-form and raised with the inverse metric. The
    result has the null geodesics of ``g`` among its (unparameterized)
    geodesics for any choice of ``phi`` and ``eta``.
    """
    return PointTensor(_eps_array(g, phi, eta, p, threshold), LOWER_SYM)


def nabla_g_residual(g: MetricSpec, gamma: PointTensor, phi: OneFormSpec, p) -> PointTensor:
    """``R[l, j, k] = d_l g_{jk} - G^m_{lj} g_{mk} - G^m_{lk} g_{jm} + 2 phi_l g_{jk}``."""
    _same_chart(g.chart, phi.chart)
    G = np.asarray(gamma.data if isinstance(gamma, PointTensor) else gamma, dtype=float)
    n = g.dim
    if G.shape != (n, n, n):
        raise ValueError(f"connection shape {G.shape} does not match dimension {n}")
    gm = g.values(p)
    dg = g.derivative_values(p)
    phi_low = phi.values(p)
    lowered = np.einsum("mlj,mk->ljk", G, gm)
    res = dg - lowered - np.transpose(lowered, (0, 2, 1)) + 2.0 * np.einsum("l,jk->ljk", phi_low, gm)
    return PointTensor(res, LOWER_SYM)


def projective_shift(gamma: Connection, psi: OneFormSpec) -> Connection:
    """Add ``delta^i_j psi_k + delta^i_k psi_j``.

    Explicit specs are shifted symbolically and stay ConnectionSpecs; induced
    connections are wrapped in a ShiftedConnection.
    """
    _same_chart(gamma.chart, psi.chart)
    if not isinstance(gamma, ConnectionSpec):
        return ShiftedConnection(gamma, psi)
    n = gamma.dim
    out = []
    for i in range(n):
        mat = []
        for j in range(n):
            row = []
            for k in range(n):
                e = gamma.gamma[i][j][k]
                if i == j:
                    e = add(e, psi.omega[k])
                if i == k:
                    e = add(e, psi.omega[j])
                row.append(e)
            mat.append(tuple(row))
        out.append(tuple(mat))
    return ConnectionSpec(gamma.chart, tuple(out))


def conformal_rescale(g: MetricSpec, ln_omega: ExprLike) -> MetricSpec:
    """``g -> exp(2 ln_omega) g``."""
    lam = _expr(ln_omega, g.chart)
    factor = func("exp", mul(const(2.0), lam))
    return MetricSpec(g.chart, tuple(tuple(mul(factor, e) for e in row) for row in g.g))


def gauge_transform(phi: OneFormSpec, ln_omega: ExprLike) -> OneFormSpec:
    """``phi_k -> phi_k - d_k ln_omega`` (exact derivative)."""
    lam = _expr(ln_omega, phi.chart)
    return OneFormSpec(phi.chart, tuple(sub(w, differentiate(lam, k)) for k, w in enumerate(phi.omega)))


def difference_tensor(gamma: Connection, g: MetricSpec, p, threshold: float = DEGENERACY_THRESHOLD) -> PointTensor:
    """``D^s_{jk} = Gamma^s_{jk} - F^s_{jk}`` with ``F`` the Levi-Civita connection of ``g``."""
    _same_chart(gamma.chart, g.chart)
    F = _christoffel(g, p, threshold)[0]
    return PointTensor(gamma.at(p, threshold) - F, LOWER_SYM)
