"""Assembly of the two-cycle profiles and quadrature cross-checks.

The connecting orbit ``z`` on ``t >= 0`` is the Chebyshev piece on
``[0, 2L]`` followed by the manifold tail ``P(exp(Lambda (t - 2L)) theta)``.
It is extended to ``t < 0`` by the reversor, ``z(t) = R z(-t)``, and the
profiles are ``N = z_1``, ``M = z_3`` (so ``M(t) = N(-t)``).
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import bvp as bv
from . import interval as iv
from . import manifold as mf
from . import model as md
from .exceptions import DomainError, InconclusiveError, StaleArtifactError


def _trim(u, tol=1e-20):
    """Drop trailing Chebyshev coefficients that cannot affect a float evaluation."""
    mag = np.max(np.abs(u), axis=0)
    keep = np.nonzero(mag > tol * max(1.0, float(np.max(mag))))[0]
    n = int(keep[-1]) + 1 if keep.size else 1
    return u[:, :n]


def _cheb_eval_many(u, s):
    """Clenshaw evaluation of several series ``u[j]`` at the same points."""
    b1 = np.zeros((u.shape[0],) + s.shape)
    b2 = np.zeros_like(b1)
    for k in range(u.shape[1] - 1, 0, -1):
        b1, b2 = 2 * s * b1 - b2 + 2 * u[:, k, None], b1
    return s * b1 - b2 + u[:, 0, None]


def _powers(t, n):
    """``t**k`` for ``k < n`` by repeated products, flushing subnormals to zero."""
    V = np.empty((t.size, n))
    V[:, 0] = 1.0
    for k in range(1, n):
        v = V[:, k - 1] * t
        V[:, k] = np.where(np.abs(v) < 1e-290, 0.0, v)
    return V


def _taylor_eval_many(a, t1, t2):
    """``sum_alpha a[j, alpha] t1**a1 t2**a2`` for all components at once."""
    m, n1, n2 = a.shape
    V1 = _powers(t1, n1)
    V2 = _powers(t2, n2)
    W = (V1 @ a.transpose(1, 0, 2).reshape(n1, m * n2)).reshape(-1, m, n2)
    return np.einsum("imk,ik->mi", W, V2)


@dataclass
class TwoCycle:
    """Piecewise profiles built from manifold coefficients and the BVP solution."""

    manifold: mf.ManifoldCoeffs
    bvp: bv.BvpUnknowns
    r_uniform: float = None
    _u: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._u = _trim(self.bvp.u)
        lo, hi = md.two_cycle(self.model)
        self.n_minus, self.n_plus = lo, hi

    @property
    def model(self):
        return self.manifold.problem.model

    @property
    def L(self):
        return self.bvp.L

    @property
    def theta(self):
        return self.bvp.theta

    @property
    def lams(self):
        return np.asarray(self.manifold.problem.lams, float)

    def state(self, t):
        """The full orbit ``z(t)`` of shape ``(4,) + t.shape``."""
        t = np.asarray(t, float)
        shape = t.shape
        t = t.ravel()
        a = np.abs(t)
        out = np.empty((4, t.size))
        inner = a <= 2 * self.L
        if np.any(inner):
            s = 1.0 - a[inner] / self.L
            out[:, inner] = _cheb_eval_many(self._u, s)
        outer = ~inner
        if np.any(outer):
            s = a[outer] - 2 * self.L
            t1 = self.theta[0] * np.exp(self.lams[0] * s)
            t2 = self.theta[1] * np.exp(self.lams[1] * s)
            out[:, outer] = _taylor_eval_many(self.manifold.a, t1, t2)
        neg = t < 0
        out[:, neg] = md.reversor(out[:, neg])
        return out.reshape((4,) + shape)

    def eval_N(self, t):
        return self.state(t)[0]

    def eval_M(self, t):
        return self.eval_N(-np.asarray(t, float))

    def eval_dN(self, t):
        """``N'(t)``, read off the second orbit component (no differencing)."""
        return self.state(t)[1]

    def limits(self):
        """``(N(-inf), N(+inf))``."""
        return self.n_minus, self.n_plus


def uniform_bound(r_bvp, r_manif, mu_u1):
    """``max(r_bvp / mu_u1, r_manif)`` rounded up."""
    if r_bvp is None or r_manif is None:
        raise StaleArtifactError("both the manifold and the BVP radius are required")
    q = iv.Interval(float(r_bvp)) / iv.Interval(float(mu_u1))
    return float(max(q.hi, float(r_manif)))


class Quadrature:
    """Composite Gauss-Legendre rule for ``Q[f](x) = int K(x - y) f(y) dy``.

    ``K(u) = (sigma/2) exp(-sigma |u|)``.  The integral is split at ``y = x``
    (kink of the kernel), truncated to ``|y - x| <= T`` and completed with the
    limits of ``f`` at ``-inf`` and ``+inf``.
    """

    def __init__(self, sigma, T=6.0, panel=0.25, order=16):
        if T <= 0 or panel <= 0 or order < 1:
            raise DomainError("quadrature parameters must be positive")
        self.sigma = float(sigma)
        self.T = float(T)
        n_pan = max(1, int(np.ceil(T / panel)))
        edges = np.linspace(0.0, T, n_pan + 1)
        x, w = np.polynomial.legendre.leggauss(order)
        h = np.diff(edges)
        self.u = ((x[None, :] + 1) / 2 * h[:, None] + edges[:-1, None]).ravel()
        self.w = (w[None, :] / 2 * h[:, None]).ravel() * self.kernel(self.u)
        self.tail = float(np.exp(-self.sigma * self.T) / 2)

    def kernel(self, u):
        return self.sigma / 2 * np.exp(-self.sigma * np.abs(u))

    @property
    def n_nodes(self):
        return 2 * self.u.size

    def nodes(self, x):
        x = np.asarray(x, float).ravel()
        return x[:, None] - self.u[None, :], x[:, None] + self.u[None, :]

    def combine(self, f_left, f_right, lim_left, lim_right):
        """Apply the rule to integrand values at :meth:`nodes`."""
        return (f_left @ self.w + f_right @ self.w) + self.tail * (lim_left + lim_right)

    def apply(self, fun, x, lim_left, lim_right, tail_tol=1e-8):
        yl, yr = self.nodes(x)
        fl = fun(yl)
        fr = fun(yr)
        # the tail completion is only valid once f has settled at its limits
        err = max(float(np.max(np.abs(fl[:, -1] - lim_left))),
                  float(np.max(np.abs(fr[:, -1] - lim_right))))
        if err > tail_tol:
            raise InconclusiveError(f"integrand differs from its limit by {err:.2e} at the cutoff")
        return self.combine(fl, fr, lim_left, lim_right)


def ide_residual(cycle, grid=None, quad=None):
    """``(sup |N - Q[M]|, sup |M - Q[N]|)`` over ``grid``."""
    grid = np.linspace(-3, 3, 200) if grid is None else np.asarray(grid, float)
    quad = Quadrature(cycle.model.sigma) if quad is None else quad
    F = cycle.model.F
    nm, npl = cycle.limits()
    QM = quad.apply(lambda y: F(cycle.eval_M(y)), grid, F(npl), F(nm))
    QN = quad.apply(lambda y: F(cycle.eval_N(y)), grid, F(nm), F(npl))
    return (float(np.max(np.abs(cycle.eval_N(grid) - QM))),
            float(np.max(np.abs(cycle.eval_M(grid) - QN))))


def second_iterate_derivative(cycle, h, x, quad=None):
    """``DS[N]h(x) = int K(x-y) F'(Q[N](y)) int K(y-z) F'(N(z)) h(z) dz dy``.

    Both inner integrals are evaluated by quadrature at every outer node; ``h``
    must vanish at both ends.  ``h=None`` means the translation mode ``N'``.
    """
    quad = Quadrature(cycle.model.sigma, T=3.0, panel=0.25, order=10) if quad is None else quad
    m = cycle.model
    x = np.asarray(x, float).ravel()
    nm, npl = cycle.limits()
    yl, yr = quad.nodes(x)
    y = np.concatenate([yl, yr], axis=1).ravel()
    zl, zr = quad.nodes(y)
    if h is None:
        Sl, Sr = cycle.state(zl), cycle.state(zr)
        Nl, Nr, hl, hr = Sl[0], Sr[0], Sl[1], Sr[1]
    else:
        Nl, Nr = cycle.eval_N(zl), cycle.eval_N(zr)
        hl, hr = h(zl), h(zr)
    QN = quad.combine(m.F(Nl), m.F(Nr), m.F(nm), m.F(npl))
    inner = quad.combine(m.dF(Nl) * hl, m.dF(Nr) * hr, 0.0, 0.0)
    outer = (m.dF(QN) * inner).reshape(x.size, -1)
    k = quad.u.size
    return quad.combine(outer[:, :k], outer[:, k:], 0.0, 0.0)


def eigen_translation_check(cycle, grid=None, quad=None):
    """``sup |DS[N] N' - N'|``: the translation mode is an eigenfunction with eigenvalue 1."""
    grid = np.linspace(-2, 2, 41) if grid is None else np.asarray(grid, float)
    val = second_iterate_derivative(cycle, None, grid, quad)
    return float(np.max(np.abs(val - cycle.eval_dN(grid))))


def export_profiles(cycle, grid, path=None):
    """CSV with columns ``t, N, M, n_minus, n_plus``; written to ``path`` if given."""
    grid = np.asarray(grid, float).ravel()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "N", "M", "n_minus", "n_plus"])
    N = cycle.eval_N(grid)
    M = cycle.eval_M(grid)
    for row in zip(grid, N, M):
        w.writerow([repr(float(v)) for v in row] + [repr(cycle.n_minus), repr(cycle.n_plus)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


class TwoCycleProfile(BaseEstimator):
    """Float pipeline from model parameters to the two-cycle profiles.

    ``fit`` solves the manifold and the connecting-orbit problems; ``predict``
    returns ``(N(t), M(t))`` as an array of shape ``(n, 2)``.
    """

    def __init__(self, growth="logistic", rho=2.2, sigma=10.0, manifold_order=30,
                 bvp_order=500, nu=1.05):
        self.growth = growth
        self.rho = rho
        self.sigma = sigma
        self.manifold_order = manifold_order
        self.bvp_order = bvp_order
        self.nu = nu

    def fit(self, X=None, y=None):
        sm = mf.StableManifold(self.growth, self.rho, self.sigma, self.manifold_order).fit()
        orbit = bv.ConnectingOrbit(self.bvp_order, self.nu).fit(sm)
        self.manifold_ = sm
        self.orbit_ = orbit
        self.cycle_ = TwoCycle(sm.coeffs_, orbit.solution_)
        self.L_ = orbit.L_
        return self

    def predict(self, X):
        check_is_fitted(self, "cycle_")
        t = check_array(np.asarray(X, float).reshape(-1, 1)).ravel()
        return np.stack([self.cycle_.eval_N(t), self.cycle_.eval_M(t)], axis=1)
