"""Shared fixtures: the logistic and Ricker pipelines are solved once per session.

Each expensive stage records its wall-clock time in ``TIMINGS`` so the
acceptance suite can report runtimes next to the numerical checks.
"""

import json
import os
import time

import numpy as np
import pytest

from idecycle import bvp as bv
from idecycle import manifold as mf
from idecycle import prover as pv
from idecycle import twocycle as tc

DATA = os.path.join(os.path.dirname(__file__), "data")

TIMINGS = {}
ACCEPTANCE = {}


def _timed(key, fun):
    t0 = time.perf_counter()
    out = fun()
    TIMINGS[key] = time.perf_counter() - t0
    return out


def load_data(name):
    with open(os.path.join(DATA, name)) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def manifold_ref():
    return load_data("manifold_reference.json")


@pytest.fixture(scope="session")
def bvp_ref():
    return load_data("bvp_reference.json")


@pytest.fixture(scope="session")
def logistic_manifold():
    """Fitted N=30 manifold estimator for rho=2.2, sigma=10."""
    return _timed("manifold_solve", lambda: mf.StableManifold().fit())


@pytest.fixture(scope="session")
def logistic_coeffs(logistic_manifold):
    return logistic_manifold.coeffs_


@pytest.fixture(scope="session")
def manifold_cert(logistic_coeffs):
    return _timed("manifold_certify", lambda: pv.certify_manifold(logistic_coeffs))


@pytest.fixture(scope="session")
def logistic_orbit(logistic_coeffs):
    """Connecting orbit at N=500, nu=1.05, seeded by shooting."""
    return _timed("bvp_solve", lambda: bv.ConnectingOrbit(500, 1.05).fit(logistic_coeffs))


@pytest.fixture(scope="session")
def bvp_cert(logistic_orbit, manifold_cert):
    return _timed("bvp_certify", lambda: pv.certify_bvp(
        logistic_orbit.problem_, logistic_orbit.solution_, manifold_cert.certified_radius))


@pytest.fixture(scope="session")
def logistic_cycle(logistic_coeffs, logistic_orbit):
    return tc.TwoCycle(logistic_coeffs, logistic_orbit.solution_)


@pytest.fixture(scope="session")
def ricker_orbit():
    """Float-only Ricker connecting orbit: manifold N=30, orbit N=160, shooting seed."""
    def build():
        sm = mf.StableManifold("ricker", 2.2, 10.0, 30).fit()
        return sm, bv.ConnectingOrbit(160, 1.05).fit(sm)
    return _timed("ricker_pipeline", build)


@pytest.fixture(scope="session")
def ricker_cycle(ricker_orbit):
    sm, orbit = ricker_orbit
    return tc.TwoCycle(sm.coeffs_, orbit.solution_)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
