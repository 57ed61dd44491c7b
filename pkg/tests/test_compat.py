import numpy as np
import pytest
from scipy.optimize import linprog

from randgeo import PerturbedConnection, random_metric, random_one_form, random_perturbation, random_point
from weylkit.compat import (
    DefiniteSignatureError,
    DimensionError,
    IncompatibleError,
    decompose,
    default_samples,
    extract_eta,
    extract_phi,
    integrability_check,
    is_lightcone_compatible,
    nullcone_residual,
    sample_null_vectors,
    weylize,
)
from weylkit.expr import Chart
from weylkit.geometry import (
    ConnectionSpec,
    EPSConnection,
    LeviCivitaConnection,
    MetricSpec,
    OneFormSpec,
    WeylConnection,
    difference_tensor,
    metric_at,
    pure_trace,
)
from weylkit.tensor import PointTensor, SymMatrix

C3, C4 = Chart(3), Chart(4)
MINK3 = np.diag([-1.0, 1, 1])
MINK4 = np.diag([-1.0, 1, 1, 1])


def normal_form(phi_up, eta, gm):
    return np.einsum("i,jk->ijk", phi_up, gm) + pure_trace(eta)


def witness_D():
    D = np.zeros((3, 3, 3))
    D[1, 1, 1] = 1.0
    return D


def counterexample_connection():
    return ConnectionSpec(C3, [[["1" if (i, j, k) == (1, 1, 1) else "0" for k in range(3)]
                                for j in range(3)] for i in range(3)])


def min_linf_residual(D, gm):
    """Smallest L-infinity distance from D to the normal-form family, by LP."""
    n = gm.shape[0]
    basis = [np.einsum("i,jk->ijk", e, gm) for e in np.eye(n)] + [pure_trace(e) for e in np.eye(n)]
    A = np.stack([b.ravel() for b in basis], axis=1)
    d = D.ravel()
    m, k = A.shape
    # variables (x, t): minimize t subject to |d - A x| <= t
    c = np.zeros(k + 1)
    c[-1] = 1.0
    ones = np.ones((m, 1))
    A_ub = np.vstack([np.hstack([-A, -ones]), np.hstack([A, -ones])])
    b_ub = np.concatenate([-d, d])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k + [(0, None)])
    assert res.success
    return res.fun


# -- null sampling ---------------------------------------------------------


@pytest.mark.parametrize("seed", [0, 1, 42])
def test_minkowski_null_vectors(seed):
    vs = sample_null_vectors(SymMatrix(MINK4), 50, seed)
    assert len(vs) == 50
    for v in vs:
        assert v[0] ** 2 == pytest.approx(v[1] ** 2 + v[2] ** 2 + v[3] ** 2, abs=1e-15)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-15)


def test_null_vectors_deterministic():
    a = sample_null_vectors(SymMatrix(MINK4), 10, 5)
    b = sample_null_vectors(SymMatrix(MINK4), 10, 5)
    c = sample_null_vectors(SymMatrix(MINK4), 10, 6)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not all(np.array_equal(x, y) for x, y in zip(a, c))


def test_definite_metric_has_no_null_vectors():
    with pytest.raises(DefiniteSignatureError):
        sample_null_vectors(SymMatrix(np.eye(3)), 3, 0)


def test_two_dimensional_null_directions():
    expected = np.array([np.sqrt(3), np.sqrt(2)]) / np.sqrt(5)
    for v in sample_null_vectors(SymMatrix(np.diag([-2.0, 3.0])), 5, 0):
        assert -2 * v[0] ** 2 + 3 * v[1] ** 2 == pytest.approx(0, abs=1e-15)
        np.testing.assert_allclose(np.abs(v), expected, rtol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_null_vectors_of_random_indefinite_metric(seed):
    rng = np.random.default_rng(seed)
    n = 3 + seed % 4
    A = rng.standard_normal((n, n))
    eta = np.diag([-1.0] * (1 + seed % 2) + [1.0] * (n - 1 - seed % 2))
    gm = A.T @ eta @ A
    for v in sample_null_vectors(SymMatrix(gm), 20, seed):
        assert abs(v @ gm @ v) <= 1e-12 * max(1.0, np.max(np.abs(gm)))
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-15)


# -- null-cone residual -----------------------------------------------------


def test_nullcone_residual_zero_tensor():
    assert nullcone_residual(np.zeros((4, 4, 4)), np.array([1.0, 1, 0, 0])) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_pure_trace_residual_vanishes_for_every_vector(seed):
    rng = np.random.default_rng(seed)
    n = 3 + seed % 3
    D = pure_trace(rng.standard_normal(n))
    for _ in range(20):
        v = rng.standard_normal(n)  # generally not null
        assert nullcone_residual(D, v) <= 1e-14


def test_witness_residual():
    # w = (0, 1, 0); |w^1 v^0 - w^0 v^1| = 1, normalized by |v|^3 = 2^(3/2)
    r = nullcone_residual(witness_D(), np.array([1.0, 1.0, 0.0]))
    assert r == pytest.approx(1 / 2**1.5, rel=1e-15)


def test_nullcone_residual_zero_vector():
    with pytest.raises(ValueError):
        nullcone_residual(witness_D(), np.zeros(3))


@pytest.mark.parametrize("seed", range(10))
def test_nullcone_residual_nonzero_off_cone_unless_pure_trace(seed):
    rng = np.random.default_rng(seed)
    gm = np.diag([-1.0, 1, 1, 1])
    D = normal_form(rng.standard_normal(4), rng.standard_normal(4), gm)
    v = rng.standard_normal(4)
    assert nullcone_residual(D, v) > 1e-6  # phi part shows once g(v, v) != 0


# -- compatibility at a point ----------------------------------------------


@pytest.mark.parametrize("seed", range(10))
def test_eps_connection_is_compatible(seed):
    rng = np.random.default_rng(seed)
    n = 3 + seed % 3
    g = random_metric(rng, n)
    gam = EPSConnection(g, random_one_form(rng, n), random_one_form(rng, n))
    rep = is_lightcone_compatible(g, gam, random_point(rng, n), seed=seed)
    assert rep.compatible and rep.verdict == "compatible"
    assert rep.nullcone_residual <= 1e-9
    assert rep.decomposition_residual <= 1e-9
    assert rep.samples == default_samples(n)


def test_levi_civita_is_compatible_with_zero_residual():
    rng = np.random.default_rng(1)
    g = random_metric(rng, 4)
    rep = is_lightcone_compatible(g, LeviCivitaConnection(g), random_point(rng, 4))
    assert rep.compatible
    assert rep.nullcone_residual == 0.0 and rep.decomposition_residual == 0.0


def test_counterexample_is_incompatible_with_100_samples():
    g = MetricSpec.diagonal(C3, ["-1", "1", "1"])
    rep = is_lightcone_compatible(g, counterexample_connection(), (0, 0, 0), samples=100, seed=0)
    assert not rep.sampling_compatible
    assert not rep.decomposition_compatible
    assert rep.verdict == "incompatible"


def test_definite_metric_rejected():
    g = MetricSpec.diagonal(C3, ["1", "1", "1"])
    with pytest.raises(DefiniteSignatureError):
        is_lightcone_compatible(g, LeviCivitaConnection(g), (0, 0, 0))


# -- extraction formulas ---------------------------------------------------


def test_extract_phi_zero():
    np.testing.assert_array_equal(extract_phi(np.zeros((4, 4, 4)), SymMatrix(MINK4)), np.zeros(4))


def test_extract_phi_minkowski_example():
    D = normal_form(np.array([-1.0, 0, 0, 0]), np.array([0.0, 2, 0, 0]), MINK4)
    np.testing.assert_allclose(extract_phi(D, SymMatrix(MINK4)), [-1.0, 0, 0, 0], atol=1e-15)


def test_extract_phi_pure_trace_is_zero():
    D = pure_trace(np.array([0.3, -1.0, 2.0, 0.5]))
    np.testing.assert_allclose(extract_phi(D, SymMatrix(MINK4)), np.zeros(4), atol=1e-15)


def test_extract_eta_zero():
    np.testing.assert_array_equal(extract_eta(np.zeros((3, 3, 3)), np.zeros(3), SymMatrix(MINK3)), np.zeros(3))


def test_extract_eta_pure_trace_exact():
    eta = np.array([1.0, 1.0, 0.0])
    D = pure_trace(eta)
    np.testing.assert_array_equal(np.einsum("ssk->k", D), 4 * eta)
    np.testing.assert_array_equal(extract_eta(D, np.zeros(3), SymMatrix(MINK3)), eta)


@pytest.mark.parametrize("seed", range(10))
def test_extract_eta_round_trip(seed):
    rng = np.random.default_rng(seed)
    g, phi, eta = random_metric(rng, 4), random_one_form(rng, 4), random_one_form(rng, 4)
    p = random_point(rng, 4)
    D = difference_tensor(EPSConnection(g, phi, eta), g, p)
    gp = metric_at(g, p)
    got = extract_eta(D, extract_phi(D, gp), gp)
    assert np.max(np.abs(got - eta.values(p))) <= 1e-10


# -- decompose ---------------------------------------------------------------


def test_decompose_zero():
    dec = decompose(np.zeros((4, 4, 4)), SymMatrix(MINK4))
    assert dec.residual == 0.0
    assert not np.any(dec.phi_vec) and not np.any(dec.eta)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("seed", range(10))
def test_decompose_round_trip(n, seed):
    rng = np.random.default_rng(1000 * n + seed)
    g = random_metric(rng, n)
    phi, eta = random_one_form(rng, n, offset=True), random_one_form(rng, n, offset=True)
    p = random_point(rng, n)
    gp = metric_at(g, p)
    D = difference_tensor(EPSConnection(g, phi, eta), g, p)
    dec = decompose(D, gp, p)
    phi_up = np.linalg.solve(gp.data, phi.values(p))
    assert dec.residual <= 1e-9
    assert np.max(np.abs(dec.phi_vec - phi_up)) <= 1e-8 * np.max(np.abs(phi_up))
    assert np.max(np.abs(dec.eta - eta.values(p))) <= 1e-8 * np.max(np.abs(eta.values(p)))


def test_decompose_counterexample_against_lp_oracle():
    D = witness_D()
    best = min_linf_residual(D, MINK3)
    dec = decompose(D, SymMatrix(MINK3))
    assert best > 0.1
    assert dec.residual >= best - 1e-12
    assert dec.residual > 0.1


@pytest.mark.parametrize("seed", range(10))
def test_lp_oracle_agrees_on_family_members(seed):
    rng = np.random.default_rng(seed)
    D = normal_form(rng.standard_normal(3), rng.standard_normal(3), MINK3)
    assert min_linf_residual(D, MINK3) <= 1e-9
    assert decompose(D, SymMatrix(MINK3)).residual <= 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_pure_trace_invisibility(seed):
    rng = np.random.default_rng(seed)
    n = 4
    gm = MINK4 + 0.1 * np.diag(rng.uniform(-1, 1, n))
    D = normal_form(rng.standard_normal(n), rng.standard_normal(n), gm) + 0.01 * random_perturbation(rng, n)
    psi = rng.standard_normal(n)
    a = decompose(D, SymMatrix(gm))
    b = decompose(D + pure_trace(psi), SymMatrix(gm))
    assert np.max(np.abs(a.phi_vec - b.phi_vec)) <= 1e-9
    assert np.max(np.abs((b.eta - a.eta) - psi)) <= 1e-12


@pytest.mark.parametrize("c", [-3.0, 0.5, 7.0])
def test_scale_equivariance(c):
    rng = np.random.default_rng(5)
    D = normal_form(rng.standard_normal(4), rng.standard_normal(4), MINK4) + random_perturbation(rng, 4)
    a = decompose(D, SymMatrix(MINK4))
    b = decompose(c * D, SymMatrix(MINK4))
    np.testing.assert_allclose(b.phi_vec, c * a.phi_vec, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(b.eta, c * a.eta, rtol=1e-13, atol=1e-15)
    assert b.residual == pytest.approx(abs(c) * a.residual, rel=1e-12)


def test_two_dimensional_decomposition_warns():
    gm = np.diag([-1.0, 1.0])
    dec = decompose(normal_form(np.array([1.0, 2.0]), np.array([0.5, 0.0]), gm), SymMatrix(gm))
    assert dec.warnings and "n >= 3" in dec.warnings[0]


def test_pointtensor_and_array_inputs_agree():
    D = witness_D()
    a = decompose(D, MINK3)
    b = decompose(PointTensor(D, ((1, 2),)), SymMatrix(MINK3))
    assert a.residual == b.residual


# -- weylize ---------------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_weylize_recovers_weyl_form(seed):
    rng = np.random.default_rng(seed)
    g, phi0 = random_metric(rng, 4), random_one_form(rng, 4, offset=True)
    pts = [random_point(rng, 4) for _ in range(4)]
    res = weylize(g, WeylConnection(g, phi0), pts, seed=seed)
    for p, phi in zip(pts, res.phi):
        want = phi0.values(p)
        assert np.max(np.abs(phi - want)) <= 1e-8 * np.max(np.abs(want))
    for p, eta in zip(pts, res.eta):
        np.testing.assert_allclose(eta, phi0.values(p), rtol=1e-8)


def test_weylize_levi_civita_gives_zero():
    rng = np.random.default_rng(3)
    g = random_metric(rng, 4)
    res = weylize(g, LeviCivitaConnection(g), [random_point(rng, 4) for _ in range(3)])
    for phi in res.phi:
        assert np.max(np.abs(phi)) <= 1e-14


def test_weylize_result_realizes_connection_up_to_projective_shift():
    rng = np.random.default_rng(4)
    g = random_metric(rng, 4)
    gam = EPSConnection(g, random_one_form(rng, 4), random_one_form(rng, 4))
    pts = [random_point(rng, 4) for _ in range(3)]
    res = weylize(g, gam, pts)
    for p, phi in zip(pts, res.phi):
        # Weyl connection of (g, phi) with phi frozen at its sampled value
        const_phi = OneFormSpec(C4, [repr(float(c)) for c in phi])
        diff = gam.at(p) - WeylConnection(g, const_phi).at(p)
        dec = decompose(diff, metric_at(g, p))
        assert np.max(np.abs(dec.phi_vec)) <= 1e-10
        assert dec.residual <= 1e-10


def test_weylize_incompatible_raises_with_worst_point():
    g = MetricSpec.diagonal(C3, ["-1", "1", "1"])
    with pytest.raises(IncompatibleError) as err:
        weylize(g, counterexample_connection(), [(0, 0, 0), (1, 1, 1)])
    assert err.value.residual > 0.1
    assert err.value.point in [(0.0, 0.0, 0.0), (1.0, 1.0, 1.0)]
    assert len(err.value.reports) == 2


def test_weylize_perturbed_raises():
    rng = np.random.default_rng(8)
    g = random_metric(rng, 4)
    gam = PerturbedConnection(EPSConnection(g, random_one_form(rng, 4), random_one_form(rng, 4)),
                              random_perturbation(rng, 4))
    with pytest.raises(IncompatibleError):
        weylize(g, gam, [random_point(rng, 4)])


def test_weylize_requires_three_dimensions():
    g = MetricSpec.diagonal(Chart(2), ["-1", "1"])
    with pytest.raises(DimensionError):
        weylize(g, LeviCivitaConnection(g), [(0, 0)])


def test_weylize_seed_per_point():
    rng = np.random.default_rng(9)
    g = random_metric(rng, 4)
    gam = EPSConnection(g, random_one_form(rng, 4), random_one_form(rng, 4))
    pts = [random_point(rng, 4) for _ in range(3)]
    res = weylize(g, gam, pts, seed=5)
    for k, p in enumerate(pts):
        rep = is_lightcone_compatible(g, gam, p, seed=5 ^ k)
        assert rep.nullcone_residual == res.reports[k].nullcone_residual


# -- integrability -----------------------------------------------------------


def test_exact_form_is_closed():
    closed, curl = integrability_check(OneFormSpec(C3, ["x1", "x0", "0"]), [(0.1, 2, 3), (-1, 0.5, 2)])
    assert closed and curl == 0.0


def test_non_closed_form():
    pts = [(0, 0, 0), (1, -2, 3), (0.3, 0.4, -5)]
    closed, curl = integrability_check(OneFormSpec(C3, ["x1", "0", "0"]), pts)
    assert not closed and curl == 1.0


def test_zero_form_is_closed():
    assert integrability_check(OneFormSpec.zero(C3), [(0, 0, 0)]) == (True, 0.0)


def test_exact_differential_of_expression_is_closed():
    phi = OneFormSpec.exact(C4, "sin(x0*x1) + exp(x2)*x3^2")
    closed, curl = integrability_check(phi, [(0.1, 0.2, 0.3, 0.4), (1, -1, 0.5, 2)])
    assert closed and curl == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_symbolic_cancellation_never_hides_curl(seed):
    # oracle: curl from the raw derivative values, without symbolic cancellation
    rng = np.random.default_rng(seed)
    n = 3 + seed % 3
    phi = random_one_form(rng, n)
    for _ in range(3):
        p = random_point(rng, n)
        d = np.array([[e(p) for e in row] for row in phi.d_omega])
        np.testing.assert_allclose(phi.curl_values(p), d - d.T, rtol=0, atol=1e-14)
    assert integrability_check(phi, [random_point(rng, n)])[1] > 1e-3


# -- oracle agreement (smaller sweep; the full one is an acceptance test) --


@pytest.mark.parametrize("seed", range(20))
def test_sampling_and_decomposition_agree(seed):
    rng = np.random.default_rng(seed)
    n = 3 + seed % 2
    g = random_metric(rng, n)
    gam = EPSConnection(g, random_one_form(rng, n), random_one_form(rng, n))
    if seed % 2:
        gam = PerturbedConnection(gam, random_perturbation(rng, n))
    rep = is_lightcone_compatible(g, gam, random_point(rng, n), seed=seed)
    assert rep.sampling_compatible == rep.decomposition_compatible == (seed % 2 == 0)
