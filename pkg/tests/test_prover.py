import json

import numpy as np
import pytest
from scipy.linalg import lu_factor, lu_solve

from idecycle import bvp as bv
from idecycle import manifold as mf
from idecycle import prover as pv
from idecycle.exceptions import DomainError, ProofError


@pytest.fixture(scope="module")
def order10():
    return mf.StableManifold(order=10).fit().coeffs_


def reference_bounds(doc, r_star=None):
    b = doc["bounds"]
    return pv.BoundSet(b["Y0"], b["Z0"], b["Z1"], b["Z2"], r_star)


# radii polynomial

def test_trivial_polynomial():
    b = pv.BoundSet(0.0, 0.0, 0.0, 1.0)
    assert pv.radii_poly(b, 0.5).certainly_negative()
    lo, hi = pv.success_interval(b)
    assert lo < 1e-100 and hi == pytest.approx(1.0, rel=1e-9)


def test_reference_manifold_success_interval(manifold_ref):
    lo, hi = pv.success_interval(reference_bounds(manifold_ref))
    assert lo == pytest.approx(7.464746738654994e-14, rel=1e-8)
    assert hi == pytest.approx(0.18615659613392965, rel=1e-8)


def test_reference_bvp_success_interval(bvp_ref):
    lo, hi = pv.success_interval(reference_bounds(bvp_ref, 1e-5), r_star=1e-5)
    assert lo == pytest.approx(2.2580382640246346e-12, rel=1e-8)
    assert hi <= 1e-5


def test_no_proof_diagnostics():
    with pytest.raises(ProofError) as exc:
        pv.success_interval(pv.BoundSet(1e-3, 0.5, 0.6, 1.0))
    assert exc.value.stage == "Z0+Z1"
    with pytest.raises(ProofError) as exc:
        pv.success_interval(pv.BoundSet(1.0, 0.0, 0.0, 1.0))
    assert exc.value.stage == "discriminant"


def test_radii_polynomial_monotone_in_bounds():
    base = pv.BoundSet(1e-10, 1e-12, 0.2, 10.0)
    r = 1e-9
    p0 = pv.radii_poly(base, r)
    for bigger in (pv.BoundSet(2e-10, 1e-12, 0.2, 10.0), pv.BoundSet(1e-10, 1e-11, 0.2, 10.0),
                   pv.BoundSet(1e-10, 1e-12, 0.3, 10.0), pv.BoundSet(1e-10, 1e-12, 0.2, 20.0)):
        assert pv.radii_poly(bigger, r).lo >= p0.lo


# manifold bounds

def test_manifold_certificate(manifold_cert, manifold_ref):
    b = manifold_cert.bounds
    ref = manifold_ref["bounds"]
    assert 0.5 * ref["Y0"] <= b.Y0 <= 10 * ref["Y0"]
    assert b.Z1 <= 0.15
    assert ref["Z1"] / 10 <= b.Z1 <= 10 * ref["Z1"]
    assert b.Z0 + b.Z1 < 0.5
    assert b.Z0 <= 1e-10
    assert manifold_cert.certified_radius <= 1e-12
    assert pv.radii_poly(b, manifold_cert.certified_radius).certainly_negative()


def test_weight_scaling_homogeneity(order10):
    c1 = pv.certify_manifold(order10)
    c2 = pv.certify_manifold(order10, mu=tuple(10 * m for m in mf.default_mu(order10.problem.model)))
    assert c2.certified_radius == pytest.approx(10 * c1.certified_radius, rel=1e-10)
    assert c2.bounds.Z1 == pytest.approx(c1.bounds.Z1, rel=1e-12)


def test_inverse_reproduces_newton_step(order10):
    prob = order10.problem
    a = order10.a + 1e-6
    _, parts = pv.manifold_bounds(mf.ManifoldCoeffs(a, prob), return_parts=True)
    G = mf.G_apply(a, prob).ravel()
    step = lu_solve(lu_factor(mf.DG_matrix(a, prob)), G)
    np.testing.assert_allclose(parts["A"] @ G, step, atol=1e-10 * max(1.0, np.max(np.abs(step))))


def test_corrupted_coefficients(order10):
    a = order10.a.copy()
    a[:, 2:, 2:] += 1e-6
    bad = mf.ManifoldCoeffs(a, order10.problem)
    good = pv.certify_manifold(order10)
    try:
        cert = pv.certify_manifold(bad)
    except ProofError:
        return
    assert cert.bounds.Y0 > good.bounds.Y0
    assert pv.radii_poly(cert.bounds, cert.certified_radius).certainly_negative()


# connecting-orbit bounds

def test_bvp_certificate(bvp_cert, bvp_ref):
    b = bvp_cert.bounds
    ref = bvp_ref["bounds"]
    assert b.Z1 <= 0.25
    assert 0.5 * ref["Z2"] <= b.Z2 <= 10 * ref["Z2"]
    assert ref["Y0"] / 10 <= b.Y0 <= 10 * ref["Y0"]
    assert b.Z0 <= 1e-10
    assert b.Z0 + b.Z1 < 1
    assert bvp_cert.certified_radius <= 1e-10
    assert bvp_cert.certified_radius <= 1e-5
    assert pv.radii_poly(b, bvp_cert.certified_radius).certainly_negative()


def test_bvp_Y0_monotone_in_manifold_radius(logistic_orbit, bvp_cert):
    b0 = pv.bvp_bounds(logistic_orbit.problem_, logistic_orbit.solution_, 0.0)
    assert b0.Y0 < bvp_cert.bounds.Y0


def test_bvp_bounds_reject_theta_outside_polydisc(logistic_orbit):
    x = logistic_orbit.solution_
    far = bv.BvpUnknowns(x.L, np.array([1.2, 0.0]), x.u, x.nu)
    with pytest.raises(DomainError):
        pv.bvp_bounds(logistic_orbit.problem_, far, 1e-13)


# certificates

def test_certificate_schema_and_round_trip(manifold_cert, bvp_cert):
    for cert in (manifold_cert, bvp_cert):
        doc = json.loads(json.dumps(cert.to_json()))
        for key in ("problem", "params", "bounds", "r_interval", "certified_radius",
                    "input_sha256", "created_at"):
            assert key in doc
        assert set(doc["bounds"]) == {"Y0", "Z0", "Z1", "Z2"}
        back = pv.ProofCertificate.from_json(doc)
        assert back.certified_radius == cert.certified_radius
        assert back.bounds.as_dict() == cert.bounds.as_dict()
    assert manifold_cert.params["mu"] == [10.0, 1.0, 10.0, 1.0]
    assert "mu_interpretation" in manifold_cert.to_json()
    assert bvp_cert.params["mu"] == [10.0, 1.0, 1.0, 10.0, 1.0, 10.0, 1.0]
    assert bvp_cert.params["r_star"] == 1e-5


def test_sha256_is_order_independent():
    assert pv.sha256_of({"a": 1, "b": [1, 2]}) == pv.sha256_of({"b": [1, 2], "a": 1})
