import csv
import io
import json

import numpy as np
import pytest

from idecycle import evans as ev
from idecycle import model as md
from idecycle.exceptions import DomainError, InconclusiveError

LOG = md.GrowthModel()


@pytest.fixture(scope="module")
def logistic_evans(logistic_cycle):
    return ev.EvansStability(eps1=0.1, eps2=0.1).fit(logistic_cycle)


@pytest.fixture(scope="module")
def setup(logistic_evans):
    return logistic_evans.setup_


def ends(model):
    nm, npl = md.two_cycle(model)
    return float(model.dF(nm)), float(model.dF(npl))


def test_mu_and_product_logistic(logistic_cycle):
    mu, prod = ev.mu_and_product(logistic_cycle)
    assert prod == pytest.approx(0.16, abs=1e-12)
    assert mu == pytest.approx(3.67303, abs=1e-4)
    # the sup norm is attained inside the orbit, above the endpoint values
    dm, dp = ends(LOG)
    assert mu > dm * dp


def test_mu_and_product_ricker(ricker_cycle):
    mu, prod = ev.mu_and_product(ricker_cycle)
    assert prod == pytest.approx(0.215726, abs=1e-5)
    assert mu == pytest.approx(1.491825, abs=1e-4)


def test_growth_modes_on_real_axis():
    xm0, xm1, xp0, xp1 = ev.growth_modes(2.0, 0.16)
    for x in (xm0, xm1):
        assert abs(x.imag) < 1e-15 and x.real > 0
    for x in (xp0, xp1):
        assert abs(x.imag) < 1e-15 and x.real < 0
    with pytest.raises(DomainError):
        ev.growth_modes(0.0, 0.16)


def test_growth_mode_identity(setup, rng):
    lams = ev.contour_point(setup, rng.uniform(0, 1, 200))
    for lam in lams:
        for xi in ev.growth_modes(lam, 0.16):
            assert abs((1 - xi * xi) ** 2 - 0.16 / lam) <= 1e-12
        xm0, xm1, xp0, xp1 = ev.growth_modes(lam, 0.16)
        assert min(abs(xm0.real), abs(xm1.real), abs(xp0.real), abs(xp1.real)) > 0
        assert xm0.real > 0 and xm1.real > 0 and xp0.real < 0 and xp1.real < 0


def test_growth_modes_continuous_along_contour(setup):
    s = ev.contour_nodes(setup, 0.01)
    lams = ev.contour_point(setup, s)
    modes = np.array([ev.growth_modes(l, 0.16) for l in lams])
    assert np.max(np.abs(np.diff(modes, axis=0))) < 0.2


@pytest.mark.parametrize("lam", [2.0, 1.5 + 0.7j, -1.2 + 0.3j])
def test_asymptotic_bases(lam):
    dm, dp = ends(LOG)
    Vm, Vp = ev.asymptotic_bases(lam, LOG)
    xm0, xm1, xp0, xp1 = ev.growth_modes(lam, dm * dp)
    Am = ev.limit_matrix(lam, dp, dm)
    Ap = ev.limit_matrix(lam, dm, dp)
    for V, A, xs in ((Vm, Am, (xm0, xm1)), (Vp, Ap, (xp0, xp1))):
        for k in range(2):
            assert np.max(np.abs(A @ V[:, k] - xs[k] * V[:, k])) <= 1e-10
        minors = ev.wedge2(V[:, 0], V[:, 1])
        assert np.max(np.abs(minors)) > 1e-6


def test_bases_related_by_reflection():
    # swapping the ends and reversing the sign of xi maps one basis onto the other
    dm, dp = ends(LOG)
    Vm, Vp = ev.asymptotic_bases(1.3, LOG)
    flip = np.diag([1.0, -1.0, 1.0, -1.0])
    scale = np.diag([1.0, 1.0, dp / dm, dp / dm])
    np.testing.assert_allclose(flip @ scale @ Vm, Vp, atol=1e-12)


def test_coefficient_matrix_limits(logistic_cycle):
    dm, dp = ends(LOG)
    lam = 1.1 - 0.4j
    np.testing.assert_allclose(ev.evans_coeff_matrix(-200.0, lam, logistic_cycle),
                               ev.limit_matrix(lam, dp, dm), atol=1e-10)
    np.testing.assert_allclose(ev.evans_coeff_matrix(200.0, lam, logistic_cycle),
                               ev.limit_matrix(lam, dm, dp), atol=1e-10)


def test_compound_lift_wedge_identity(rng):
    for _ in range(20):
        A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        w = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        lhs = ev.compound_lift(A) @ ev.wedge2(v, w)
        rhs = ev.wedge2(A @ v, w) + ev.wedge2(v, A @ w)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
        assert np.trace(ev.compound_lift(A)) == pytest.approx(3 * np.trace(A), abs=1e-12)


def test_compound_lift_of_coefficient_matrix():
    a, b, lam = 0.7, -0.3, 2.0
    c = -a / lam
    K = ev.compound_lift(ev.limit_matrix(lam, a, b))
    # columns are the images of e12, e13, e14, e23, e24, e34, worked out by hand
    expected = np.array([
        [0, 0, 0, 0, b, 0],
        [c, 0, 1, 1, 0, b],
        [0, 1, 0, 0, 1, 0],
        [0, 1, 0, 0, 1, 0],
        [0, 0, 1, 1, 0, 0],
        [0, 0, 0, 0, c, 0],
    ], complex).T
    np.testing.assert_allclose(K, expected, atol=1e-15)


def test_EL_vanishes_at_translation_eigenvalue(logistic_evans, setup):
    assert abs(logistic_evans.EL_at_1_) <= 1e-5
    assert abs(ev.evans_EL(1.0, setup)) <= 1e-5
    # away from the eigenvalue the value is not small
    assert abs(ev.evans_EL(2.0, setup)) > 1e3 * abs(logistic_evans.EL_at_1_)


def test_conjugate_symmetry(setup):
    up, down = ev.evans_many([1.5 + 0.7j, 1.5 - 0.7j], setup)
    assert abs(up - np.conj(down)) <= 1e-6 * abs(up)


def test_logistic_winding(logistic_evans):
    assert logistic_evans.winding_ == 1
    assert logistic_evans.mu_ == pytest.approx(3.67303, abs=1e-4)
    rep = json.loads(logistic_evans.report_json())
    assert rep["winding"] == 1 and rep["eps1"] == 0.1


def test_ricker_winding(ricker_cycle):
    est = ev.EvansStability(eps1=0.3, eps2=0.3).fit(ricker_cycle)
    assert est.winding_ == 1
    assert abs(est.EL_at_1_) <= 1e-5


def test_synthetic_function_counts_zeros(setup):
    def toy(z):
        return (z - 1.0001) * (z - 0.5 * np.exp(1j * np.pi / 4))

    w, contour = ev.winding_number(setup, 0.05, fun=toy)
    assert w == 1
    w, _ = ev.winding_number(setup, 0.05, fun=lambda z: (z - 1.0001) * (z - 2.0 - 1.0j))
    assert w == 2
    w, _ = ev.winding_number(setup, 0.05, fun=lambda z: z - 10.0)
    assert w == 0


@pytest.mark.parametrize("L", [6.0, 10.0])
def test_winding_robust_in_truncation(logistic_cycle, L):
    assert ev.EvansStability(L=L).fit(logistic_cycle).winding_ == 1


def test_winding_robust_in_mesh(logistic_cycle):
    assert ev.EvansStability(mesh=0.025).fit(logistic_cycle).winding_ == 1


def test_setup_validation(logistic_cycle):
    with pytest.raises(DomainError):
        ev.SpectralSetup(logistic_cycle, 3.7, 1.2)
    with pytest.raises(DomainError):
        ev.SpectralSetup(logistic_cycle, 3.7, 0.16, eps2=0.9)
    with pytest.raises(DomainError):
        ev.SpectralSetup(logistic_cycle, 3.7, 0.16, eps1=4.0)
    with pytest.raises(DomainError):
        ev.EvansStability(mesh=0.0).fit(logistic_cycle)


def test_zero_on_contour_is_inconclusive(setup):
    z0 = ev.contour_point(setup, 0.0)[0]
    with pytest.raises(InconclusiveError):
        ev.winding_number(setup, 0.05, fun=lambda z: z - z0)


def test_contour_export(logistic_evans):
    rows = list(csv.reader(io.StringIO(logistic_evans.contour_.to_csv())))
    assert rows[0] == ["s", "re_lambda", "im_lambda", "re_E", "im_E"]
    body = np.array(rows[1:], float)
    assert np.all(np.diff(body[:, 0]) > 0)
    assert body[0, 0] == 0.0 and body[-1, 0] == 1.0
    np.testing.assert_allclose(body[0, 1:3], body[-1, 1:3], atol=1e-12)


def test_predict(logistic_evans):
    vals = logistic_evans.predict([2.0, 1.5 + 0.7j])
    assert vals.shape == (2,)
    with pytest.raises(DomainError):
        logistic_evans.predict([np.nan])
