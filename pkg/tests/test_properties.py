"""Property suites that need no reference numbers.

Each ``check_*`` function raises ``AssertionError`` on failure; the tests
below call them one by one and the acceptance suite runs them together.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from idecycle import interval as iv
from idecycle import manifold as mf
from idecycle import model as md
from idecycle import seqspace as ss
from idecycle.interval import Interval

LOG = md.GrowthModel()
RICK = md.GrowthModel("ricker", 2.2, 10.0)


def brute_cheb(u, v):
    n, m = len(u) - 1, len(v) - 1
    out = np.zeros(n + m + 1)
    for k in range(n + m + 1):
        for j in range(-n, n + 1):
            if abs(k - j) <= m:
                out[k] += u[abs(j)] * v[abs(k - j)]
    return out


def brute_taylor(a, b):
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for p in range(a.shape[0]):
        for q in range(a.shape[1]):
            out[p:p + b.shape[0], q:q + b.shape[1]] += a[p, q] * b
    return out


def check_submultiplicative(rng, cases=1000):
    for _ in range(cases):
        n = rng.integers(1, 8, 4)
        a = rng.standard_normal((n[0], n[1])) * rng.uniform(0.01, 10)
        b = rng.standard_normal((n[2], n[3])) * rng.uniform(0.01, 10)
        assert ss.norm_T(ss.taylor_conv(a, b)).lo <= ss.norm_T(a).hi * ss.norm_T(b).hi
    for _ in range(cases):
        nu = rng.uniform(1.0, 1.5)
        u = rng.standard_normal(rng.integers(1, 20)) * rng.uniform(0.01, 10)
        v = rng.standard_normal(rng.integers(1, 20)) * rng.uniform(0.01, 10)
        assert ss.norm_Cnu(ss.cheb_conv(u, v), nu).lo <= ss.norm_Cnu(u, nu).hi * ss.norm_Cnu(v, nu).hi


def check_convolution_brute_force(rng, cases=200):
    for _ in range(cases):
        u = rng.standard_normal(rng.integers(1, 15))
        v = rng.standard_normal(rng.integers(1, 15))
        np.testing.assert_allclose(ss.cheb_conv(u, v), brute_cheb(u, v), atol=1e-12)
        a = rng.standard_normal(tuple(rng.integers(1, 7, 2)))
        b = rng.standard_normal(tuple(rng.integers(1, 7, 2)))
        np.testing.assert_allclose(ss.taylor_conv(a, b), brute_taylor(a, b), atol=1e-12)


def check_upsilon_truncations(nu=1.05):
    depths = [1, 2, 5, 10, 20, 50, 100, 200]
    vals = [ss.upsilon_truncation_norm(d, nu) for d in depths]
    assert all(x <= y for x, y in zip(vals, vals[1:]))
    assert all(v <= 2 * nu for v in vals)
    assert abs(vals[-1] - 2 * nu) <= 1e-10


def check_psi_domination(rng, cases=500):
    for _ in range(cases):
        N = int(rng.integers(2, 12))
        nu = rng.uniform(1.0, 1.3)
        u = rng.standard_normal(N + 1) * nu ** -np.arange(N + 1.0)
        tail = int(rng.integers(1, 3 * N))
        h = np.zeros(N + 1 + tail)
        h[N + 1:] = rng.standard_normal(tail) * nu ** -np.arange(N + 1.0, N + 1 + tail)
        uh = brute_cheb(u, h)
        psi = ss.psi_estimates(u, N, nu)
        h_norm = ss.norm_Cnu(h, nu).hi
        for k in range(N + 2):
            assert abs(uh[k]) <= psi[k] * h_norm * (1 + 1e-12) + 1e-300


def check_reversibility(rng, states=1000):
    x = rng.uniform(0.0, 2.0, (4, states))
    x[1] = rng.uniform(-1, 1, states)
    x[3] = rng.uniform(-1, 1, states)
    for m in (LOG, RICK):
        lhs = md.vector_field(md.reversor(x), m)
        rhs = -md.reversor(md.vector_field(x, m))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


def check_eigen_residuals(rng, cases=50):
    for _ in range(cases):
        rho = rng.uniform(2.01, np.sqrt(5) - 0.01)
        m = md.GrowthModel("logistic", float(rho), float(rng.uniform(0.5, 20)))
        e = md.eigen_data(m)
        J = md.jacobian(md.equilibria(m)[0], m)
        for i in range(4):
            v = e.xis[:, i]
            assert np.max(np.abs(J @ v - e.lambdas[i] * v)) <= 1e-12 * max(1.0, abs(e.lambdas[i]))


def _rel_fd(f, df, x, d, h):
    fd = (f(x + h * d) - f(x - h * d)) / (2 * h)
    return np.max(np.abs(df(x) @ d - fd)) / max(np.max(np.abs(fd)), 1e-300)


def check_derivatives(rng):
    for m in (LOG, RICK):
        u = rng.uniform(0.3, 1.5, 200)
        h = 1e-5
        for f, df in ((m.F, m.dF), (m.dF, m.d2F)):
            fd = (f(u + h) - f(u - h)) / (2 * h)
            assert np.max(np.abs(df(u) - fd) / np.maximum(np.abs(fd), 1e-3)) <= 1e-6
        for _ in range(10):
            x = rng.uniform(0.3, 1.5, 4)
            d = rng.standard_normal(4)
            assert _rel_fd(lambda y: md.vector_field(y, m), lambda y: md.jacobian(y, m), x, d, 1e-6) <= 1e-6
    prob = mf.ManifoldProblem(LOG, 6)
    a = mf.seed(prob) + rng.standard_normal((4, 7, 7)) * 1e-2
    D = mf.DG_matrix(a, prob)
    for _ in range(5):
        d = rng.standard_normal(a.size)
        assert _rel_fd(lambda v: mf.G_apply(v.reshape(a.shape), prob).ravel(), lambda v: D,
                       a.ravel(), d, 1e-6) <= 1e-6


PROPERTY_CHECKS = {
    "submultiplicativity": check_submultiplicative,
    "convolution": check_convolution_brute_force,
    "upsilon": lambda rng: check_upsilon_truncations(),
    "psi": check_psi_domination,
    "reversibility": check_reversibility,
    "eigenpairs": check_eigen_residuals,
    "derivatives": check_derivatives,
}


@pytest.mark.parametrize("name", sorted(PROPERTY_CHECKS))
def test_property(name, rng):
    PROPERTY_CHECKS[name](rng)


# inclusion monotonicity: X in Y implies f(X) in f(Y), and x in X implies f(x) in f(X)

finite = st.floats(-1e6, 1e6, allow_nan=False)
positive = st.floats(1e-6, 1e6, allow_nan=False)


def nested(elements):
    return st.tuples(elements, elements, elements, elements).map(sorted)


def _contains(outer, inner):
    return np.all(outer.lo <= inner.lo) and np.all(inner.hi <= outer.hi)


BINARY = [lambda a, b: a + b, lambda a, b: a - b, lambda a, b: a * b]
UNARY_POS = [iv.sqrt, iv.log, lambda a: a * a]


@settings(max_examples=300, deadline=None)
@given(nested(finite), nested(finite), st.integers(0, 2))
def test_binary_inclusion_monotone(p, q, op):
    f = BINARY[op]
    X, Y = Interval(p[1], p[2]), Interval(p[0], p[3])
    U, V = Interval(q[1], q[2]), Interval(q[0], q[3])
    assert _contains(f(Y, V), f(X, U))
    assert f(X, U).contains(f(p[1], q[2]))


@settings(max_examples=300, deadline=None)
@given(nested(finite), nested(positive))
def test_division_inclusion_monotone(p, q):
    X, Y = Interval(p[1], p[2]), Interval(p[0], p[3])
    U, V = Interval(q[1], q[2]), Interval(q[0], q[3])
    assert _contains(Y / V, X / U)
    assert (X / U).contains(p[1] / q[2])


@settings(max_examples=300, deadline=None)
@given(nested(positive), st.integers(0, 2))
def test_unary_inclusion_monotone(p, op):
    f = UNARY_POS[op]
    X, Y = Interval(p[1], p[2]), Interval(p[0], p[3])
    assert _contains(f(Y), f(X))


@settings(max_examples=300, deadline=None)
@given(nested(st.floats(-50, 50, allow_nan=False)))
def test_exp_inclusion_monotone(p):
    X, Y = Interval(p[1], p[2]), Interval(p[0], p[3])
    assert _contains(iv.exp(Y), iv.exp(X))
    assert iv.exp(X).contains(float(np.exp(p[1])))


@settings(max_examples=200, deadline=None)
@given(nested(st.floats(0.2, 1.6, allow_nan=False)))
def test_growth_map_inclusion_monotone(p):
    X, Y = Interval(p[1], p[2]), Interval(p[0], p[3])
    assert _contains(LOG.F_iv(Y), LOG.F_iv(X))
    assert LOG.F_iv(X).contains(LOG.F(p[1]))
