import numpy as np
import pytest

from idecycle import bvp as bv
from idecycle import manifold as mf
from idecycle import model as md
from idecycle import seqspace as ss
from idecycle.exceptions import DomainError, SeedError


@pytest.fixture(scope="module")
def small(logistic_coeffs, logistic_orbit):
    """The converged orbit cut to N=20 on a problem of the same order."""
    prob = bv.BvpProblem(logistic_coeffs, 20, 1.05)
    return prob, logistic_orbit.solution_.resized(20)


def test_equilibrium_constants(logistic_coeffs):
    prob = bv.BvpProblem(logistic_coeffs, 10)
    u = np.zeros((4, 11))
    u[:, 0] = prob.manifold.problem.xeq
    x = bv.BvpUnknowns(0.3, np.zeros(2), u)
    scal, U = bv.calG_apply(x, prob)
    assert scal[0] == pytest.approx(-0.95)
    np.testing.assert_allclose(U[:, 1:], 0.0, atol=1e-13)
    np.testing.assert_allclose(U[:, 0], 0.0, atol=1e-15)


def test_untruncated_P_not_computable(logistic_coeffs, small):
    prob, x = small
    with pytest.raises(DomainError):
        bv.calG_apply(x, prob, use_bar_P=False)


def test_converged_residual(logistic_orbit):
    prob, x = logistic_orbit.problem_, logistic_orbit.solution_
    res = bv.residual_norm(*bv.calG_apply(x, prob), prob.nu, bv.default_mu(prob.model))
    assert res <= 1e-11


def test_reference_theta_normalized(bvp_ref):
    th = np.array(bvp_ref["theta"])
    assert abs(th @ th - 0.95) <= 1e-9


def test_derivative_structure(small):
    prob, x = small
    D = bv.DcalG_matrix(x, prob)
    np.testing.assert_allclose(D[0, 1:3], 2 * x.theta)
    DP = mf.eval_DP(prob.manifold.a, x.theta)
    for j in range(4):
        np.testing.assert_allclose(D[prob.offset(j), 1:3], -DP[j])


def test_derivative_vs_finite_differences(small, rng):
    prob, x = small
    v0 = x.to_vector()
    v0 = v0 + rng.standard_normal(v0.size) * 1e-4
    x0 = bv.BvpUnknowns.from_vector(v0, prob.N, prob.nu)
    D = bv.DcalG_matrix(x0, prob)

    def G(v):
        scal, U = bv.calG_apply(bv.BvpUnknowns.from_vector(v, prob.N, prob.nu), prob)
        return np.concatenate([scal, U.ravel()])

    h = 1e-7
    for _ in range(5):
        d = rng.standard_normal(v0.size)
        fd = (G(v0 + h * d) - G(v0 - h * d)) / (2 * h)
        np.testing.assert_allclose(D @ d, fd, atol=1e-6 * np.max(np.abs(fd)))


def test_interval_map_encloses_float(small):
    prob, x = small
    scal, U = bv.calG_apply(x, prob)
    scal_iv, U_iv = bv.calG_apply(x, prob, rigorous=True)
    assert scal_iv.contains(scal)
    assert U_iv.contains(U)
    D = bv.DcalG_matrix(x, prob)
    assert bv.DcalG_matrix(x, prob, rigorous=True).contains(D)


def test_reference_solution(logistic_orbit, bvp_ref):
    x = logistic_orbit.solution_
    assert abs(x.L - bvp_ref["L"]) <= 1e-8
    np.testing.assert_allclose(x.theta, bvp_ref["theta"], atol=1e-8)
    assert x.u[0, 0] == pytest.approx(1.081354585, abs=1e-8)
    assert x.u[3, 0] == pytest.approx(-0.5394882617, abs=1e-8)


def test_chebyshev_decay(logistic_orbit):
    assert np.max(np.abs(logistic_orbit.solution_.u[:, 60:])) <= 1e-10


def test_shooting_defect_small(logistic_orbit):
    assert logistic_orbit.seed_defect_ < 1e-2


def test_degenerate_theta_has_no_symmetric_point(logistic_coeffs):
    xeq = logistic_coeffs.problem.xeq
    sol = bv._backward_flow(logistic_coeffs.problem.model, mf.eval_P(logistic_coeffs.a, (0.0, 0.0)), 5.0)
    d = md.pi_r_defect(sol.y)
    np.testing.assert_allclose(d, abs(xeq[0] - xeq[2]), atol=1e-12)
    assert np.min(d) > 0.1


def test_seed_failure_raises(logistic_coeffs):
    prob = bv.BvpProblem(logistic_coeffs, 20)
    with pytest.raises(SeedError):
        bv.seed_from_shooting(prob, n_angles=8, tol=1e-30, n_refine=1)


def test_symmetry_and_matching(logistic_orbit, logistic_coeffs):
    x = logistic_orbit.solution_
    g0 = bv.eval_orbit(x, 0.0)
    assert md.pi_r_defect(g0) <= 1e-9
    gL = bv.eval_orbit(x, 2 * x.L)
    np.testing.assert_allclose(gL, mf.eval_P(logistic_coeffs.a, x.theta), atol=1e-8)
    # manifold side of the boundary condition: alternating coefficient sums
    left = np.array([x.u[j, 0] + 2 * np.sum(x.u[j, 1:] * (-1.0) ** np.arange(1, x.N + 1))
                     for j in range(4)])
    np.testing.assert_allclose(left, mf.eval_P(logistic_coeffs.a, x.theta), atol=1e-9)


def test_orbit_solves_ode(logistic_orbit):
    x = logistic_orbit.solution_
    model = logistic_orbit.problem_.model
    t = np.linspace(0, 2 * x.L, 20)
    g = bv.eval_orbit(x, t)
    dg = bv.eval_orbit_deriv(x, t)
    assert np.max(np.abs(dg - md.vector_field(g, model))) <= 1e-8
    # numerical differentiation of the evaluated series agrees as well
    h = 1e-6
    ti = t[1:-1]
    fd = (bv.eval_orbit(x, ti + h) - bv.eval_orbit(x, ti - h)) / (2 * h)
    assert np.max(np.abs(fd - md.vector_field(bv.eval_orbit(x, ti), model))) <= 1e-6


def test_endpoint_identities():
    u = np.zeros(7)
    u[5] = 1.0
    assert ss.cheb_eval(u, 1.0) == 2.0
    assert ss.cheb_eval(u, -1.0) == -2.0


def test_eval_orbit_domain(logistic_orbit):
    x = logistic_orbit.solution_
    with pytest.raises(DomainError):
        bv.eval_orbit(x, -0.1)
    with pytest.raises(DomainError):
        bv.eval_orbit(x, 2 * x.L + 0.1)


def test_reversed_extension_continuous(logistic_orbit):
    x = logistic_orbit.solution_
    model = logistic_orbit.problem_.model
    g0 = bv.eval_orbit(x, 0.0)
    np.testing.assert_allclose(md.reversor(g0), g0, atol=1e-9)
    # R Gamma(-t) has derivative -R Gamma'(s) = -R f(Gamma) = f(R Gamma)
    t = np.linspace(0.0, 2 * x.L, 9)
    g = bv.eval_orbit(x, t)
    lhs = -md.reversor(bv.eval_orbit_deriv(x, t))
    np.testing.assert_allclose(lhs, md.vector_field(md.reversor(g), model), atol=1e-8)


def test_problem_validation(logistic_coeffs):
    with pytest.raises(DomainError):
        bv.BvpProblem(logistic_coeffs, 1)
    with pytest.raises(DomainError):
        bv.BvpProblem(logistic_coeffs, 10, 0.9)


def test_json_round_trip(logistic_orbit):
    x = logistic_orbit.solution_
    back = bv.BvpUnknowns.from_json(x.to_json())
    np.testing.assert_array_equal(back.u, x.u)
    assert back.L == x.L and back.nu == x.nu


def test_estimator_predict(logistic_orbit):
    pts = logistic_orbit.predict(np.array([0.0, logistic_orbit.L_]))
    assert pts.shape == (2, 4)
    assert logistic_orbit.get_params()["order"] == 500
