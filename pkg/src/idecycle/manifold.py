"""Parameterization of the local stable manifold of ``x+``.

The unknown is ``P(theta) = sum_alpha a_alpha theta**alpha`` with
``P(0) = x+`` and ``DP(0) = V`` (stable eigenvectors).  The invariance equation
``DP(theta) Lambda theta = f(P(theta))`` becomes, coefficient by coefficient,

    (alpha . lambda) a_alpha = phi(a)_alpha,    |alpha|_1 >= 2,

with ``phi(a) = (a2, s^2 (a1 - F(a3)), a4, s^2 (a3 - F(a1)))``.  Coefficients are
stored as an array of shape ``(4, N+1, N+1)``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import interval as iv
from . import model as md
from . import seqspace as ss
from .exceptions import DomainError, SolverError
from .interval import Interval

CONSTRAINED = ((0, 0), (1, 0), (0, 1))


@dataclass
class ManifoldProblem:
    model: md.GrowthModel = field(default_factory=md.GrowthModel)
    N: int = 30
    scaling: str = "unit"

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("manifold order must be at least 2")
        self.eigen = md.eigen_data(self.model)
        self.lams, self.V = self.eigen.stable_basis(self.scaling)
        self.xeq = md.equilibria(self.model)[0]
        ratio = self.lams.max() / self.lams.min()
        if not (self.lams < 0).all() or ratio <= 0:
            raise DomainError("stable eigenvalues must be real and negative")

    @property
    def size(self):
        return 4 * (self.N + 1) ** 2

    def lambda_dot(self, M=None):
        M = self.N if M is None else M
        a1, a2 = np.meshgrid(np.arange(M + 1), np.arange(M + 1), indexing="ij")
        return a1 * self.lams[0] + a2 * self.lams[1]

    def iv_data(self):
        """Interval enclosures ``(lams, V, xeq)`` (logistic model only)."""
        if not hasattr(self, "_iv_cache"):
            lams, V = md.eigen_data_iv(self.model, self.scaling)
            nm, npl = md.two_cycle_iv(self.model)
            xeq = iv.stack([npl, Interval(0.0), nm, Interval(0.0)])
            self._iv_cache = (lams, V, xeq)
        return self._iv_cache


@dataclass
class ManifoldCoeffs:
    a: np.ndarray
    problem: ManifoldProblem

    @property
    def N(self):
        return self.a.shape[1] - 1

    def component(self, j):
        return ss.TaylorSeq2(self.a[j])

    def to_json(self):
        m = self.problem.model
        return {"kind": "manifold", "model": {"growth": m.kind, "rho": m.rho, "sigma": m.sigma},
                "N": self.N, "scaling": self.problem.scaling,
                "lambdas": self.problem.lams.tolist(),
                "a": [ss.seq_to_json(self.component(j)) for j in range(4)]}

    @classmethod
    def from_json(cls, doc):
        m = doc["model"]
        model = md.GrowthModel(m["growth"], m["rho"], m["sigma"])
        prob = ManifoldProblem(model, doc["N"], doc.get("scaling", "unit"))
        a = np.stack([ss.seq_from_json(s).coeffs for s in doc["a"]])
        return cls(a, prob)


def seed(problem):
    a = np.zeros((4, problem.N + 1, problem.N + 1))
    a[:, 0, 0] = problem.xeq
    a[:, 1, 0] = problem.V[:, 0]
    a[:, 0, 1] = problem.V[:, 1]
    return a


def _phi(a, model, box):
    """phi(a) on the box ``[0, box]^2``; float or interval depending on ``a``."""
    rigorous = isinstance(a, Interval)
    s2 = model.sigma_iv.sqr() if rigorous else model.sigma ** 2
    Fa1 = md.F_on_taylor(a[0], model, box)
    Fa3 = md.F_on_taylor(a[2], model, box)
    pad = [md._pad_taylor(a[j], box) for j in range(4)]
    return [pad[1], (pad[0] - Fa3) * s2, pad[3], (pad[2] - Fa1) * s2]


def G_apply(a, problem, full=False, rigorous=False):
    """Residual of the truncated manifold map.

    With ``full=True`` the (exact, untruncated) map applied to ``a`` is returned
    on the box ``[0, 2N]^2``, which contains its whole support for the
    logistic model.  ``rigorous=True`` returns an interval enclosure.
    """
    N = a.shape[1] - 1
    box = 2 * N if full else N
    if rigorous:
        lams, V, xeq = problem.iv_data()
        A = iv.as_interval(a)
        phi = _phi(A, problem.model, box)
        a1, a2 = np.meshgrid(np.arange(box + 1), np.arange(box + 1), indexing="ij")
        dots = iv.as_interval(a1) * lams[0] + iv.as_interval(a2) * lams[1]
        G = Interval.zeros((4, box + 1, box + 1))
        for j in range(4):
            G[j] = dots * md._pad_taylor(A[j], box) - phi[j]
            G[j, 0, 0] = A[j, 0, 0] - xeq[j]
            G[j, 1, 0] = A[j, 1, 0] - V[j, 0]
            G[j, 0, 1] = A[j, 0, 1] - V[j, 1]
        return G
    phi = _phi(a, problem.model, box)
    dots = problem.lambda_dot(box)
    G = np.empty((4, box + 1, box + 1))
    for j in range(4):
        G[j] = dots * md._pad_taylor(a[j], box) - phi[j]
    G[:, 0, 0] = a[:, 0, 0] - problem.xeq
    G[:, 1, 0] = a[:, 1, 0] - problem.V[:, 0]
    G[:, 0, 1] = a[:, 0, 1] - problem.V[:, 1]
    return G


def constrained_indices(N):
    n = (N + 1) ** 2
    return [j * n + a1 * (N + 1) + a2 for j in range(4) for a1, a2 in CONSTRAINED]


def dphi_blocks(a, problem, rigorous=False):
    """Blocks ``D_{a_j} phi_i(a)`` as a dict ``(i, j) -> matrix`` on the box ``[0,N]^2``."""
    N = a.shape[1] - 1
    n = (N + 1) ** 2
    model = problem.model
    eye = np.eye(n)
    if rigorous:
        s2 = model.sigma_iv.sqr()
        r = model.rho_iv
        dF1 = md._pad_taylor(iv.as_interval(a[0]) * (-2 * r), N)
        dF3 = md._pad_taylor(iv.as_interval(a[2]) * (-2 * r), N)
        dF1[0, 0] = dF1[0, 0] + (1 + r)
        dF3[0, 0] = dF3[0, 0] + (1 + r)
    else:
        s2 = model.sigma ** 2
        dF1 = md.dF_on_taylor(a[0], model, N)
        dF3 = md.dF_on_taylor(a[2], model, N)
    return {(0, 1): eye,
            (1, 0): s2 * iv.as_interval(eye) if rigorous else s2 * eye,
            (1, 2): ss.taylor_mult_matrix(dF3, N) * (-s2),
            (2, 3): eye,
            (3, 2): s2 * iv.as_interval(eye) if rigorous else s2 * eye,
            (3, 0): ss.taylor_mult_matrix(dF1, N) * (-s2)}


def DG_matrix(a, problem, rigorous=False):
    """Derivative of the truncated map as a dense ``4(N+1)^2`` square matrix."""
    N = a.shape[1] - 1
    n = (N + 1) ** 2
    blocks = dphi_blocks(a, problem, rigorous)
    if rigorous:
        lams = problem.iv_data()[0]
        a1, a2 = np.divmod(np.arange(n), N + 1)
        dots = iv.as_interval(a1) * lams[0] + iv.as_interval(a2) * lams[1]
        lo = np.zeros((4 * n, 4 * n))
        hi = np.zeros((4 * n, 4 * n))
        for j in range(4):
            sl = slice(j * n, (j + 1) * n)
            lo[sl, sl][np.diag_indices(n)] = dots.lo
            hi[sl, sl][np.diag_indices(n)] = dots.hi
        for (i, j), B in blocks.items():
            B = iv.as_interval(B)
            rs, cs = slice(i * n, (i + 1) * n), slice(j * n, (j + 1) * n)
            # G = dots*a - phi
            lo[rs, cs] -= B.hi
            hi[rs, cs] -= B.lo
        M = Interval._raw(lo, hi)
        rows = constrained_indices(N)
        M.lo[rows] = 0.0
        M.hi[rows] = 0.0
        M.lo[rows, rows] = 1.0
        M.hi[rows, rows] = 1.0
        return M
    dots = problem.lambda_dot(N).ravel()
    D = np.zeros((4 * n, 4 * n))
    for j in range(4):
        D[j * n:(j + 1) * n, j * n:(j + 1) * n][np.diag_indices(n)] = dots
    for (i, j), B in blocks.items():
        D[i * n:(i + 1) * n, j * n:(j + 1) * n] -= B
    rows = constrained_indices(N)
    D[rows] = 0.0
    D[rows, rows] = 1.0
    return D


def residual_norm(G, problem, mu):
    """``max_i mu_i ||G_i||`` in the range-space norm, float estimate."""
    dots = np.abs(problem.lambda_dot(G.shape[1] - 1))
    dots[0, 0] = 1.0
    return max(mu[i] * float(np.sum(np.abs(G[i]) / dots)) for i in range(4))


def newton_solve(problem, a0=None, tol=1e-12, max_iter=50, mu=None):
    """Newton iteration on the truncated map; returns converged coefficients."""
    if mu is None:
        mu = default_mu(problem.model)
    a = seed(problem) if a0 is None else np.array(a0, dtype=float, copy=True)
    history = []
    res = residual_norm(G_apply(a, problem), problem, mu)
    history.append(res)
    for it in range(max_iter):
        G = G_apply(a, problem)
        lu = lu_factor(DG_matrix(a, problem))
        step = lu_solve(lu, G.ravel()).reshape(a.shape)
        t = 1.0
        while True:
            trial = a - t * step
            new = residual_norm(G_apply(trial, problem), problem, mu)
            if new <= res or t < 1e-3 or new < tol:
                break
            t /= 2
        a = trial
        small_step = np.max(np.abs(t * step)) <= 1e-15 * max(1.0, np.max(np.abs(a)))
        res = new
        history.append(res)
        if res < tol and (small_step or it >= 2):
            return ManifoldCoeffs(a, problem), history
        if small_step and res >= tol:
            break
    if res < tol:
        return ManifoldCoeffs(a, problem), history
    raise SolverError(f"manifold Newton did not reach {tol:g}; last residual {res:.3e}", history)


def default_mu(model):
    """Weights ``(sigma, 1, sigma, 1)`` on ``(a1, a2, a3, a4)``."""
    s = float(model.sigma)
    return (s, 1.0, s, 1.0)


# evaluation

def _check_theta(theta1, theta2):
    if np.any(np.abs(theta1) > 1 + 1e-14) or np.any(np.abs(theta2) > 1 + 1e-14):
        raise DomainError("theta must lie in the closed unit polydisc")


def eval_P(a, theta):
    t1, t2 = np.asarray(theta[0], float), np.asarray(theta[1], float)
    _check_theta(t1, t2)
    return np.stack([ss.taylor_eval(a[j], t1, t2) for j in range(4)])


def _d1(c):
    k = np.arange(1, c.shape[0])[:, None]
    return c[1:, :] * k


def _d2(c):
    k = np.arange(1, c.shape[1])[None, :]
    return c[:, 1:] * k


def eval_DP(a, theta):
    """Jacobian ``dP/dtheta`` as an array of shape ``(4, 2, ...)``."""
    t1, t2 = np.asarray(theta[0], float), np.asarray(theta[1], float)
    _check_theta(t1, t2)
    return np.stack([np.stack([ss.taylor_eval(_d1(a[j]), t1, t2),
                               ss.taylor_eval(_d2(a[j]), t1, t2)]) for j in range(4)])


def eval_D2P(a, theta):
    """Second derivatives, shape ``(4, 2, 2, ...)``."""
    t1, t2 = np.asarray(theta[0], float), np.asarray(theta[1], float)
    _check_theta(t1, t2)
    out = []
    for j in range(4):
        h11 = ss.taylor_eval(_d1(_d1(a[j])), t1, t2)
        h12 = ss.taylor_eval(_d2(_d1(a[j])), t1, t2)
        h22 = ss.taylor_eval(_d2(_d2(a[j])), t1, t2)
        out.append(np.stack([np.stack([h11, h12]), np.stack([h12, h22])]))
    return np.stack(out)


def _taylor_eval_iv(c, t1, t2):
    """Interval Horner evaluation of ``c`` of shape ``(m, n1, n2)`` at interval theta."""
    c = iv.as_interval(c)
    m, n1, n2 = c.shape
    acc = Interval.zeros(m)
    for i in range(n1 - 1, -1, -1):
        row = Interval.zeros(m)
        for j in range(n2 - 1, -1, -1):
            row = row * t2 + c[:, i, j]
        acc = acc * t1 + row
    return acc


def eval_P_iv(a, theta):
    t1, t2 = iv.as_interval(theta[0]), iv.as_interval(theta[1])
    return _taylor_eval_iv(a, t1, t2)


def eval_DP_iv(a, theta):
    """Enclosure of ``dP/dtheta`` on an interval box, shape ``(4, 2)``."""
    t1, t2 = iv.as_interval(theta[0]), iv.as_interval(theta[1])
    N = a.shape[1] - 1
    k = np.arange(N + 1, dtype=float)
    d1 = a[:, 1:, :] * k[1:, None][None]
    d2 = a[:, :, 1:] * k[1:][None, None, :]
    # multiplying by small integers is exact in binary64 for these magnitudes
    return iv.stack([_taylor_eval_iv(d1, t1, t2), _taylor_eval_iv(d2, t1, t2)], axis=1)


def eval_D2P_iv(a, theta):
    t1, t2 = iv.as_interval(theta[0]), iv.as_interval(theta[1])
    N = a.shape[1] - 1
    k = np.arange(N + 1, dtype=float)
    c11 = iv.as_interval(a[:, 2:, :]) * (k[2:] * k[1:-1])[None, :, None]
    c12 = iv.as_interval(a[:, 1:, 1:]) * (k[1:, None] * k[None, 1:])[None]
    c22 = iv.as_interval(a[:, :, 2:]) * (k[2:] * k[1:-1])[None, None, :]
    return (_taylor_eval_iv(c11, t1, t2), _taylor_eval_iv(c12, t1, t2),
            _taylor_eval_iv(c22, t1, t2))


def tail_orbit(a, lams, theta, s):
    """``P(exp(Lambda s) theta)`` for times ``s >= 0`` after entering the chart."""
    s = np.asarray(s, float)
    t1 = theta[0] * np.exp(lams[0] * s)
    t2 = theta[1] * np.exp(lams[1] * s)
    return eval_P(a, (t1, t2))


class StableManifold(BaseEstimator):
    """Estimator-style front end: ``fit`` solves for the Taylor coefficients.

    After fitting, ``coef_`` has shape ``(4, order+1, order+1)`` and ``predict``
    maps parameters ``theta`` of shape ``(n, 2)`` to points ``(n, 4)`` on the
    manifold chart.
    """

    def __init__(self, growth="logistic", rho=2.2, sigma=10.0, order=30, tol=1e-12,
                 max_iter=50, scaling="unit"):
        self.growth = growth
        self.rho = rho
        self.sigma = sigma
        self.order = order
        self.tol = tol
        self.max_iter = max_iter
        self.scaling = scaling

    def _problem(self):
        return ManifoldProblem(md.GrowthModel(self.growth, self.rho, self.sigma),
                               self.order, self.scaling)

    def fit(self, X=None, y=None):
        prob = self._problem()
        coeffs, history = newton_solve(prob, tol=self.tol, max_iter=self.max_iter)
        self.problem_ = prob
        self.coeffs_ = coeffs
        self.coef_ = coeffs.a
        self.eigenvalues_ = prob.lams
        self.residual_history_ = history
        self.n_iter_ = len(history) - 1
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != 2:
            raise DomainError("theta must have two columns")
        return eval_P(self.coef_, (X[:, 0], X[:, 1])).T

    def transform(self, X):
        return self.predict(X)

    def certify(self, mu=None):
        from .prover import certify_manifold
        check_is_fitted(self, "coef_")
        return certify_manifold(self.coeffs_, mu=mu)
