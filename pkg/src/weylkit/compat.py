"""Light-cone compatibility, normal-form decomposition and weylization.

Two independent pointwise tests decide whether a connection Gamma and a
metric g are light-cone compatible at a point, both acting on the difference
tensor ``D = Gamma - F`` (F the Levi-Civita connection of g):

* sampling: ``D^i_{jk} v^j v^k`` must be parallel to ``v`` for every null ``v``;
* decomposition: ``D`` must have the form
  ``phi^i g_{jk} + delta^i_j eta_k + delta^i_k eta_j``.

When the decomposition succeeds, ``-phi`` (lowered) is the one-form of a Weyl
structure whose connection differs from Gamma by a projective shift.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import Connection, MetricSpec, OneFormSpec, difference_tensor, metric_at, pure_trace
from .tensor import DEGENERACY_THRESHOLD, PointTensor, SymMatrix, invert, max_abs_diff, signature

__all__ = [
    "DEFAULT_TOL",
    "default_samples",
    "DefiniteSignatureError",
    "DimensionError",
    "IncompatibleError",
    "Decomposition",
    "CompatReport",
    "WeylizeResult",
    "sample_null_vectors",
    "nullcone_residual",
    "is_lightcone_compatible",
    "extract_phi",
    "extract_eta",
    "decompose",
    "weylize",
    "integrability_check",
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8


def default_samples(n: int) -> int:
    return 10 * n * n


class DefiniteSignatureError(ValueError):
    """The metric has no null directions; light-cone compatibility is vacuous."""


class DimensionError(ValueError):
    pass


class IncompatibleError(ValueError):
    """Raised by :func:`weylize` with the worst offending point."""

    def __init__(self, point, residual: float, reports: list["CompatReport"]):
        super().__init__(f"connection is not light-cone compatible at {list(point)}: residual {residual:.6g}")
        self.point = tuple(point)
        self.residual = residual
        self.reports = reports


@dataclass(frozen=True)
class Decomposition:
    phi_vec: np.ndarray  # phi^i, upper index
    eta: np.ndarray  # eta_k, lower index
    residual: float
    point: tuple[float, ...] = ()
    warnings: tuple[str, ...] = ()

    def phi_form(self, gp: SymMatrix) -> np.ndarray:
        return np.asarray(gp.data) @ self.phi_vec


@dataclass(frozen=True)
class CompatReport:
    point: tuple[float, ...]
    samples: int
    nullcone_residual: float
    decomposition_residual: float
    tolerance: float  # effective (scaled) tolerance
    decomposition: Decomposition
    warnings: tuple[str, ...] = field(default=())

    @property
    def sampling_compatible(self) -> bool:
        return self.nullcone_residual <= self.tolerance

    @property
    def decomposition_compatible(self) -> bool:
        return self.decomposition_residual <= self.tolerance

    @property
    def compatible(self) -> bool:
        return self.sampling_compatible and self.decomposition_compatible

    @property
    def verdict(self) -> str:
        return "compatible" if self.compatible else "incompatible"


@dataclass(frozen=True)
class WeylizeResult:
    """Per-point output of :func:`weylize`.

    ``phi`` holds the Weyl one-form ``phi_k`` at each point: the Weyl connection
    of ``(g, phi)`` is projectively equivalent to the input connection.
    ``normal_form_phi`` is the lowered coefficient of ``phi^i g_{jk}`` in the
    difference tensor, which is ``-phi``.
    """

    points: list[tuple[float, ...]]
    phi: list[np.ndarray]
    normal_form_phi: list[np.ndarray]
    eta: list[np.ndarray]
    reports: list[CompatReport]


def _as_sym(gp) -> SymMatrix:
    return gp if isinstance(gp, SymMatrix) else SymMatrix(np.asarray(gp, dtype=float))


def _require_indefinite(gp: SymMatrix, threshold: float = DEGENERACY_THRESHOLD):
    p, q = signature(gp, threshold)
    if p == 0 or q == 0:
        raise DefiniteSignatureError(f"metric signature ({p}, {q}) is definite; no null vectors")


def sample_null_vectors(gp, count: int, seed: int) -> list[np.ndarray]:
    """Deterministic Euclidean-unit null vectors of ``gp``.

    Each vector combines a random unit direction from the positive eigenspace
    with one from the negative eigenspace, weighted so the two quadratic
    contributions cancel.
    """
    gp = _as_sym(gp)
    if count < 1:
        raise ValueError("count must be >= 1")
    _require_indefinite(gp)
    eig, vecs = np.linalg.eigh(gp.data)
    pos, neg = vecs[:, eig > 0], vecs[:, eig < 0]
    lam_pos, lam_neg = eig[eig > 0], eig[eig < 0]
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        cp = rng.standard_normal(pos.shape[1])
        cn = rng.standard_normal(neg.shape[1])
        cp /= np.linalg.norm(cp)
        cn /= np.linalg.norm(cn)
        q_pos = float(lam_pos @ cp**2)
        q_neg = float(lam_neg @ cn**2)
        # eigenspaces are g-orthogonal, so g(a u+ + b u-) = a^2 q_pos + b^2 q_neg
        v = math.sqrt(-q_neg) * (pos @ cp) + math.sqrt(q_pos) * (neg @ cn)
        out.append(v / np.linalg.norm(v))
    return out


def nullcone_residual(D, v) -> float:
    """``max_{i,s} |w^i v^s - w^s v^i| / |v|^3`` with ``w^i = D^i_{jk} v^j v^k``."""
    D = np.asarray(D.data if isinstance(D, PointTensor) else D, dtype=float)
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("nullcone_residual needs a nonzero vector")
    w = np.einsum("ijk,j,k->i", D, v, v)
    a = np.outer(w, v)
    return float(np.max(np.abs(a - a.T))) / norm**3


def _scaled_tol(tol: float, D: np.ndarray) -> float:
    return tol * max(1.0, float(np.max(np.abs(D))) if D.size else 0.0)


def extract_phi(D, gp) -> np.ndarray:
    """Recover ``phi^i`` from a difference tensor of normal form.

    Uses ``(n - 2/(n+1)) phi^i = (D^i_{jk} - tr_k delta^i_j/(n+1) - tr_j delta^i_k/(n+1)) g^{jk}``
    with ``tr_k = D^s_{sk}``. For D outside the normal form the output is finite
    but meaningless; check the reconstruction residual.
    """
    gp = _as_sym(gp)
    D = np.asarray(D.data if isinstance(D, PointTensor) else D, dtype=float)
    n = D.shape[0]
    ginv = invert(gp).data
    tr = np.einsum("ssk->k", D)
    reduced = D - pure_trace(tr) / (n + 1)
    return np.einsum("ijk,jk->i", reduced, ginv) / (n - 2.0 / (n + 1))


def extract_eta(D, phi_vec, gp) -> np.ndarray:
    """``eta_k = (D^s_{sk} - g_{ks} phi^s) / (n + 1)``."""
    gp = _as_sym(gp)
    D = np.asarray(D.data if isinstance(D, PointTensor) else D, dtype=float)
    n = D.shape[0]
    phi_vec = np.asarray(phi_vec, dtype=float)
    if phi_vec.shape != (n,) or gp.dim != n:
        raise ValueError("shape mismatch between D, phi and metric")
    return (np.einsum("ssk->k", D) - gp.data @ phi_vec) / (n + 1)


def reconstruct(phi_vec, eta, gp) -> np.ndarray:
    gp = _as_sym(gp)
    return np.einsum("i,jk->ijk", phi_vec, gp.data) + pure_trace(eta)


def decompose(D, gp, point: Sequence[float] = ()) -> Decomposition:
    """Split ``D`` into ``phi^i g_{jk} + delta^i_j eta_k + delta^i_k eta_j`` plus a residual."""
    gp = _as_sym(gp)
    Dt = D if isinstance(D, PointTensor) else PointTensor(D, ((1, 2),))
    n = Dt.dim
    phi = extract_phi(Dt, gp)
    eta = extract_eta(Dt, phi, gp)
    rebuilt = PointTensor(reconstruct(phi, eta, gp), ((1, 2),))
    warnings = ()
    if n < 3:
        warnings = ("dimension < 3: the light-cone/Weyl equivalence is only guaranteed for n >= 3",)
    return Decomposition(phi, eta, max_abs_diff(Dt, rebuilt), tuple(float(x) for x in point), warnings)


def is_lightcone_compatible(
    g: MetricSpec,
    gamma: Connection,
    p: Sequence[float],
    samples: int | None = None,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    threshold: float = DEGENERACY_THRESHOLD,
) -> CompatReport:
    """Run both the null-cone sampling test and the decomposition test at ``p``.

    ``tol`` is relative: the effective tolerance is ``tol * max(1, |D|_inf)``.
    """
    n = g.dim
    samples = default_samples(n) if samples is None else int(samples)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    gp = metric_at(g, p, threshold)
    _require_indefinite(gp, threshold)
    D = difference_tensor(gamma, g, p, threshold)
    worst = 0.0
    for v in sample_null_vectors(gp, samples, seed):
        worst = max(worst, nullcone_residual(D, v))
    dec = decompose(D, gp, p)
    eff = _scaled_tol(tol, D.data)
    return CompatReport(tuple(float(x) for x in p), samples, worst, dec.residual, eff, dec, dec.warnings)


def weylize(
    g: MetricSpec,
    gamma: Connection,
    points: Sequence[Sequence[float]],
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    samples: int | None = None,
    threshold: float = DEGENERACY_THRESHOLD,
) -> WeylizeResult:
    """Produce Weyl one-form samples realizing ``gamma`` up to projective shift.

    Point ``k`` is sampled with seed ``seed ^ k``. Raises IncompatibleError at the
    point with the largest decomposition residual if any point fails.
    """
    if g.dim < 3:
        raise DimensionError(f"weylize requires dimension >= 3, got {g.dim}")
    reports, phis, nf_phis, etas = [], [], [], []
    for k, p in enumerate(points):
        rep = is_lightcone_compatible(g, gamma, p, samples, tol, seed ^ k, threshold)
        reports.append(rep)
        gp = metric_at(g, p, threshold)
        nf = rep.decomposition.phi_form(gp)
        nf_phis.append(nf)
        phis.append(-nf)
        etas.append(rep.decomposition.eta)
    bad = [r for r in reports if not r.decomposition_compatible]
    if bad:
        worst = max(bad, key=lambda r: r.decomposition_residual / r.tolerance)
        raise IncompatibleError(worst.point, worst.decomposition_residual, reports)
    for r in reports:
        if not r.sampling_compatible:
            log.warning("sampling test disagrees with decomposition at %s", r.point)
    return WeylizeResult([r.point for r in reports], phis, nf_phis, etas, reports)


def integrability_check(phi: OneFormSpec, points: Sequence[Sequence[float]], tol: float = DEFAULT_TOL):
    """Return ``(closed, max |d_j phi_k - d_k phi_j|)`` over the sample points."""
    worst = 0.0
    for p in points:
        c = phi.curl_values(p)
        worst = max(worst, float(np.max(np.abs(c))) if c.size else 0.0)
    return worst <= tol, worst
