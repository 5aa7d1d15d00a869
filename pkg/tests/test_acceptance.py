"""Acceptance criteria, one test per criterion.

Every test records a ``criterion N: PASS|FAIL ...`` line with its runtime;
the lines are printed together at the end of the pytest run.  Run this file
directly (``python tests/test_acceptance.py``) for just the acceptance suite.
"""

import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

import test_properties as props
from conftest import ACCEPTANCE, TIMINGS
from idecycle import evans as ev
from idecycle import prover as pv
from idecycle import twocycle as tc


@contextmanager
def criterion(number, title, *timing_keys):
    t0 = time.perf_counter()
    info = {}
    try:
        yield info
    except BaseException as exc:
        status, detail = "FAIL", f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
        raise
    else:
        status, detail = "PASS", ", ".join(f"{k}={v}" for k, v in info.items())
    finally:
        seconds = time.perf_counter() - t0 + sum(TIMINGS.get(k, 0.0) for k in timing_keys)
        ACCEPTANCE[number] = f"criterion {number}: {status}  {title}  [{detail}]  runtime {seconds:.1f}s"


def test_criterion_1_manifold_reproduction(logistic_coeffs, manifold_ref):
    with criterion(1, "manifold coefficients", "manifold_solve") as info:
        a = logistic_coeffs.a
        errs = [abs(a[c["component"] - 1, c["alpha"][0], c["alpha"][1]] - c["value"])
                for c in manifold_ref["coefficients"]]
        info["coefficients"] = len(errs)
        info["max_error"] = f"{max(errs):.2e}"
        assert len(errs) == 64
        assert max(errs) <= 1e-8
        assert TIMINGS["manifold_solve"] < 120


def test_criterion_2_manifold_certificate(manifold_cert, manifold_ref):
    with criterion(2, "manifold certificate", "manifold_certify") as info:
        b = manifold_cert.bounds
        ref = manifold_ref["bounds"]
        r = manifold_cert.certified_radius
        info.update(Y0=f"{b.Y0:.3e}", Z1=f"{b.Z1:.4f}", r_manif=f"{r:.3e}")
        assert b.Z0 + b.Z1 < 0.5
        assert pv.radii_poly(b, r).certainly_negative()
        assert r <= 1e-12
        for key in ("Y0", "Z1"):
            assert ref[key] / 10 <= getattr(b, key) <= 10 * ref[key]
        assert TIMINGS["manifold_certify"] < 300


def test_criterion_3_bvp(logistic_orbit, bvp_cert, bvp_ref):
    with criterion(3, "connecting orbit and certificate", "bvp_solve", "bvp_certify") as info:
        x = logistic_orbit.solution_
        u_ref = np.array(bvp_ref["u"])
        err = max(abs(x.L - bvp_ref["L"]), np.max(np.abs(x.theta - bvp_ref["theta"])),
                  np.max(np.abs(x.u[:, :u_ref.shape[1]] - u_ref)))
        r = bvp_cert.certified_radius
        info.update(max_error=f"{err:.2e}", r_bvp=f"{r:.3e}")
        assert x.N == 500 and x.nu == 1.05
        assert err <= 1e-8
        assert r <= 1e-10
        assert pv.radii_poly(bvp_cert.bounds, r).certainly_negative()
        for key, ref in bvp_ref["bounds"].items():
            assert ref / 10 <= getattr(bvp_cert.bounds, key) <= 10 * ref, key
        assert TIMINGS["bvp_solve"] + TIMINGS["bvp_certify"] < 900


def test_criterion_4_two_cycle(logistic_coeffs, logistic_orbit, manifold_cert, bvp_cert):
    with criterion(4, "two-cycle validation") as info:
        r_manif, r_bvp = manifold_cert.certified_radius, bvp_cert.certified_radius
        sigma = logistic_coeffs.problem.model.sigma
        r_uniform = tc.uniform_bound(r_bvp, r_manif, sigma)
        cycle = tc.TwoCycle(logistic_coeffs, logistic_orbit.solution_, r_uniform)
        grid = np.linspace(-3.0, 3.0, 200)
        # the grid must cover the transition layer [-2L, 2L]
        assert grid[0] < -2 * cycle.L and grid[-1] > 2 * cycle.L
        rN, rM = tc.ide_residual(cycle, grid, tc.Quadrature(sigma, T=6.0))
        info.update(r_uniform=f"{r_uniform:.3e}", residual_N=f"{rN:.1e}", residual_M=f"{rM:.1e}")
        expected = max(r_bvp / sigma, r_manif)
        assert expected <= r_uniform <= expected * (1 + 1e-12)
        assert rN <= 1e-6 and rM <= 1e-6


def test_criterion_5_evans_logistic(logistic_cycle):
    with criterion(5, "Evans function, logistic") as info:
        est = ev.EvansStability(eps1=0.1, eps2=0.1, L=8.0, mesh=0.05).fit(logistic_cycle)
        info.update(mu=f"{est.mu_:.5f}", product=f"{est.product_:.5f}", winding=est.winding_,
                    EL1=f"{est.EL_at_1_.real:.3e}")
        assert abs(est.mu_ - 3.6731) <= 1e-3
        assert abs(est.product_ - 0.1599) <= 1e-3
        assert est.winding_ == 1
        assert abs(est.EL_at_1_) <= 1e-5


def test_criterion_6_evans_ricker(ricker_orbit, ricker_cycle):
    with criterion(6, "Evans function, Ricker", "ricker_pipeline") as info:
        _, orbit = ricker_orbit
        est = ev.EvansStability(eps1=0.3, eps2=0.3, L=8.0, mesh=0.05).fit(ricker_cycle)
        info.update(seed_defect=f"{orbit.seed_defect_:.1e}", mu=f"{est.mu_:.5f}",
                    product=f"{est.product_:.5f}", winding=est.winding_,
                    EL1=f"{est.EL_at_1_.real:.3e}")
        assert orbit.seed_defect_ is not None and orbit.seed_defect_ < 1e-2
        assert abs(est.mu_ - 1.4918) <= 2e-2
        assert abs(est.product_ - 0.2157) <= 2e-2
        assert est.winding_ == 1
        assert abs(est.EL_at_1_) <= 1e-5


def test_criterion_7_properties():
    with criterion(7, "property suites") as info:
        rng = np.random.default_rng(7)
        for name, check in props.PROPERTY_CHECKS.items():
            check(rng)
        fuzz = [props.test_binary_inclusion_monotone, props.test_division_inclusion_monotone,
                props.test_unary_inclusion_monotone, props.test_exp_inclusion_monotone,
                props.test_growth_map_inclusion_monotone]
        for f in fuzz:
            f()
        info["checks"] = len(props.PROPERTY_CHECKS) + len(fuzz)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
