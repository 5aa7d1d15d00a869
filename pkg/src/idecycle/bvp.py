"""Chebyshev boundary-value problem for the symmetric half of the connecting orbit.

On ``t in [-1, 1]`` we solve ``x' = -L f(x)`` with ``x(-1) = P(theta)`` on the
stable-manifold chart and ``x(1)`` in the fixed set of the reversor.  Each
component is ``u_0 + 2 sum u_k T_k(t)``; integrating the ODE term by term gives,
for ``k >= 1``,

    2k u_k + L (Upsilon phi(u))_k = 0,    (Upsilon h)_k = h_{k-1} - h_{k+1}.

The unknown vector is ordered ``(L, theta1, theta2, u1, u2, u3, u4)``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import lu_factor, lu_solve
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import interval as iv
from . import manifold as mf
from . import model as md
from . import seqspace as ss
from .exceptions import DomainError, SeedError, SolverError
from .interval import Interval

RADIUS2 = 0.95


@dataclass
class BvpProblem:
    manifold: mf.ManifoldCoeffs
    N: int = 500
    nu: float = 1.05

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("Chebyshev order must be at least 2")
        if self.nu < 1:
            raise DomainError("nu must be at least 1")

    @property
    def model(self):
        return self.manifold.problem.model

    @property
    def size(self):
        return 3 + 4 * (self.N + 1)

    def offset(self, j):
        return 3 + j * (self.N + 1)


@dataclass
class BvpUnknowns:
    L: float
    theta: np.ndarray
    u: np.ndarray
    nu: float = 1.05

    @property
    def N(self):
        return self.u.shape[1] - 1

    def to_vector(self):
        return np.concatenate([[self.L], self.theta, self.u.ravel()])

    @classmethod
    def from_vector(cls, x, N, nu=1.05):
        x = np.asarray(x, float)
        return cls(float(x[0]), x[1:3].copy(), x[3:].reshape(4, N + 1).copy(), nu)

    def resized(self, N):
        u = np.zeros((4, N + 1))
        m = min(N, self.N) + 1
        u[:, :m] = self.u[:, :m]
        return BvpUnknowns(self.L, self.theta.copy(), u, self.nu)

    def to_json(self):
        return {"kind": "bvp", "L": self.L, "theta": list(map(float, self.theta)), "nu": self.nu,
                "N": self.N, "u": [ss.seq_to_json(ss.ChebSeq(self.u[j], self.nu)) for j in range(4)]}

    @classmethod
    def from_json(cls, doc):
        u = np.stack([ss.seq_from_json(s).coeffs for s in doc["u"]])
        return cls(float(doc["L"]), np.asarray(doc["theta"], float), u, float(doc.get("nu", 1.05)))


def _endpoint_weights(N):
    w = 2.0 * np.ones(N + 1)
    w[0] = 1.0
    return w


def _alt_weights(N):
    w = 2.0 * (-1.0) ** np.arange(N + 1)
    w[0] = 1.0
    return w


def phi_cheb(u, model, n_out):
    """Chebyshev coefficients of the vector field components, ``k < n_out``."""
    rigorous = isinstance(u, Interval)
    if rigorous:
        s2 = model.sigma_iv.sqr()
    else:
        s2 = model.sigma ** 2
    F1 = md.F_on_cheb(u[0], model, n_out)
    F3 = md.F_on_cheb(u[2], model, n_out)
    pad = [md._pad_cheb(u[j], n_out) for j in range(4)]
    return [pad[1], (pad[0] - F3) * s2, pad[3], (pad[2] - F1) * s2]


def calG_apply(x, problem, use_bar_P=True, full=False, rigorous=False):
    """Residual ``(L-row, Theta1, Theta2, U1..U4)``.

    Returns ``(scalars, U)`` with ``U`` of shape ``(4, N+1)``, or ``(4, 2N+2)``
    when ``full`` is set (the untruncated map applied to ``x``).  Only the
    computable ``P`` (the truncated series) is available, so ``use_bar_P`` must
    be true; the difference is accounted for by the manifold radius.
    """
    if not use_bar_P:
        raise DomainError("only the truncated parameterization is computable")
    N = x.N
    model = problem.model
    a = problem.manifold.a
    rows = 2 * N + 2 if full else N + 1
    w1 = _endpoint_weights(N)
    wa = _alt_weights(N)
    if rigorous:
        U = iv.as_interval(x.u)
        th = iv.as_interval(x.theta)
        Lrow = th[0].sqr() + th[1].sqr() - Interval.from_decimal("0.95")
        T1 = (U[0] * w1 - U[2] * w1).sum()
        T2 = (U[1] * w1 + U[3] * w1).sum()
        P = mf.eval_P_iv(a, (th[0], th[1]))
        phi = phi_cheb(U, model, rows + 1)
        out = Interval.zeros((4, rows))
        k = np.arange(rows, dtype=float)
        for j in range(4):
            ups = ss.upsilon(phi[j])[:rows]
            out[j] = md._pad_cheb(U[j], rows) * (2 * k) + ups * x.L
            out[j, 0] = (U[j] * wa).sum() - P[j]
        return iv.stack([Lrow, T1, T2]), out
    u = x.u
    th = x.theta
    scal = np.array([th[0] ** 2 + th[1] ** 2 - RADIUS2,
                     w1 @ (u[0] - u[2]), w1 @ (u[1] + u[3])])
    P = mf.eval_P(a, th)
    phi = phi_cheb(u, model, rows + 1)
    k = np.arange(rows)
    out = np.empty((4, rows))
    for j in range(4):
        out[j] = 2 * k * md._pad_cheb(u[j], rows) + x.L * ss.upsilon(phi[j])[:rows]
        out[j, 0] = wa @ u[j] - P[j]
    return scal, out


def _ups_rows(M, N):
    """Rows ``1..N`` of ``Upsilon M`` for a matrix ``M`` with rows ``0..N+1``."""
    return M[0:N] - M[2:N + 2]


def dphi_cheb_blocks(u, model, N, rigorous=False):
    """Blocks ``(j, i) -> D_{u_i} phi_j`` as matrices with rows ``0..N+1``, columns ``0..N``."""
    eye = np.eye(N + 2, N + 1)
    if rigorous:
        s2 = model.sigma_iv.sqr()
        r = model.rho_iv
        dF = []
        for j in (0, 2):
            c = Interval.zeros(2 * N + 3)
            c[:N + 1] = iv.as_interval(u[j]) * (-2 * r)
            c[0] = c[0] + (1 + r)
            dF.append(c)
        eye_s = iv.as_interval(eye) * s2
    else:
        s2 = model.sigma ** 2
        dF = [md.dF_on_cheb(u[j], model, 2 * N + 3) for j in (0, 2)]
        eye_s = eye * s2
    M1 = ss.cheb_mult_matrix(dF[0], N + 2, N + 1) * (-s2)
    M3 = ss.cheb_mult_matrix(dF[1], N + 2, N + 1) * (-s2)
    return {(0, 1): eye, (1, 0): eye_s, (1, 2): M3, (2, 3): eye, (3, 2): eye_s, (3, 0): M1}


def DcalG_matrix(x, problem, rigorous=False):
    """Derivative of the truncated map, a square matrix of size ``3 + 4(N+1)``."""
    N = x.N
    S = 3 + 4 * (N + 1)
    model = problem.model
    a = problem.manifold.a
    off = [3 + j * (N + 1) for j in range(4)]
    w1 = _endpoint_weights(N)
    wa = _alt_weights(N)
    blocks = dphi_cheb_blocks(x.u, model, N, rigorous)
    lo = np.zeros((S, S))
    hi = lo if not rigorous else np.zeros((S, S))

    def put(rs, cs, val):
        if rigorous:
            v = iv.as_interval(val)
            lo[rs, cs] += v.lo
            hi[rs, cs] += v.hi
        else:
            lo[rs, cs] += val

    put(0, slice(1, 3), 2 * x.theta)
    put(1, slice(off[0], off[0] + N + 1), w1)
    put(1, slice(off[2], off[2] + N + 1), -w1)
    put(2, slice(off[1], off[1] + N + 1), w1)
    put(2, slice(off[3], off[3] + N + 1), w1)
    if rigorous:
        DP = mf.eval_DP_iv(a, (x.theta[0], x.theta[1]))
        phi = phi_cheb(iv.as_interval(x.u), model, N + 2)
    else:
        DP = mf.eval_DP(a, x.theta)
        phi = phi_cheb(x.u, model, N + 2)
    k = np.arange(1, N + 1, dtype=float)
    for j in range(4):
        r0 = off[j]
        put(r0, slice(off[j], off[j] + N + 1), wa)
        put(r0, slice(1, 3), -DP[j])
        rs = slice(r0 + 1, r0 + N + 1)
        ups = ss.upsilon(phi[j])[1:N + 1]
        put(rs, 0, ups)
        diag = (np.arange(r0 + 1, r0 + N + 1), np.arange(off[j] + 1, off[j] + N + 1))
        if rigorous:
            lo[diag] += 2 * k
            hi[diag] += 2 * k
        else:
            lo[diag] += 2 * k
        for i in range(4):
            if (j, i) in blocks:
                put(rs, slice(off[i], off[i] + N + 1), _ups_rows(blocks[(j, i)], N) * x.L)
    if rigorous:
        return Interval._raw(lo, hi)
    return lo


def residual_norm(scal, U, nu, mu):
    """Weighted range-space norm of a residual, float estimate."""
    N = U.shape[1] - 1
    k = np.arange(N + 1, dtype=float)
    w = 2.0 * nu ** k / np.maximum(2 * k, 1)
    w[0] = 1.0
    vals = [mu[i] * abs(scal[i]) for i in range(3)]
    vals += [mu[3 + j] * float(np.sum(np.abs(U[j]) * w)) for j in range(4)]
    return max(vals)


def default_mu(model):
    s = float(model.sigma)
    return (s, 1.0, 1.0, s, 1.0, s, 1.0)


def newton_solve_bvp(problem, seed, tol=1e-11, max_iter=50, mu=None):
    mu = default_mu(problem.model) if mu is None else mu
    x = seed.resized(problem.N)
    x.nu = problem.nu
    history = []
    res = residual_norm(*calG_apply(x, problem), problem.nu, mu)
    history.append(res)
    for it in range(max_iter):
        scal, U = calG_apply(x, problem)
        rhs = np.concatenate([scal, U.ravel()])
        lu = lu_factor(DcalG_matrix(x, problem))
        step = lu_solve(lu, rhs)
        v = x.to_vector()
        t = 1.0
        while True:
            trial = BvpUnknowns.from_vector(v - t * step, problem.N, problem.nu)
            new = residual_norm(*calG_apply(trial, problem), problem.nu, mu)
            if new <= res or t < 1e-3:
                break
            t /= 2
        x = trial
        res = new
        history.append(res)
        small = np.max(np.abs(t * step)) <= 1e-15 * max(1.0, np.max(np.abs(v)))
        if res < tol and (small or it >= 2):
            return x, history
        if small:
            break
    if res < tol:
        return x, history
    raise SolverError(f"BVP Newton did not reach {tol:g}; last residual {res:.3e}", history)


# numerical candidate by shooting

def _backward_flow(model, x0, T, dense=True):
    def rhs(s, y):
        return -md.vector_field(y, model)

    def blowup(s, y):
        return 20.0 - np.max(np.abs(y[[0, 2]]))

    blowup.terminal = True
    return solve_ivp(rhs, (0.0, T), x0, method="DOP853", rtol=1e-12, atol=1e-13,
                     dense_output=dense, events=blowup)


def seed_from_shooting(problem, n_angles=72, T=None, tol=0.1, n_refine=8):
    """Candidate ``(L, theta, u)`` from shooting off the manifold chart.

    For ``theta`` on the circle ``|theta|^2 = 0.95`` the point ``P(theta)`` is
    flowed backward in time; every time at which the trajectory comes locally
    closest to the reversor's fixed set proposes ``2L``.  The best proposals
    are refined by least squares on the two symmetry conditions.  When several
    symmetric orbits exist, the one whose first component stays closest to the
    range ``[n_minus, n_plus]`` is taken (the order-preserving front), then the
    smaller defect and the shorter time.
    """
    model = problem.model
    a = problem.manifold.a
    lam_slow = float(np.max(problem.manifold.problem.lams))
    if T is None:
        T = 20.0 / abs(lam_slow)
    rad = np.sqrt(RADIUS2)
    n_lo, n_hi = md.two_cycle(model)
    props = []
    for psi in np.linspace(0, 2 * np.pi, n_angles, endpoint=False):
        th = rad * np.array([np.cos(psi), np.sin(psi)])
        sol = _backward_flow(model, mf.eval_P(a, th), T)
        s = np.linspace(0, sol.t[-1], 4000)[1:]
        d = md.pi_r_defect(sol.sol(s))
        interior = (d[1:-1] < d[:-2]) & (d[1:-1] <= d[2:])
        for i in np.nonzero(interior)[0] + 1:
            props.append((float(d[i]), float(s[i]), float(psi)))
        i = int(np.argmin(d))
        props.append((float(d[i]), float(s[i]), float(psi)))
    props.sort()

    def resid(p):
        psi, s = p
        th = rad * np.array([np.cos(psi), np.sin(psi)])
        sol = _backward_flow(model, mf.eval_P(a, th), max(s, 1e-6), dense=False)
        y = sol.y[:, -1]
        if sol.status != 0:
            return np.array([1e3, 1e3])
        return np.array([y[0] - y[2], y[1] + y[3]])

    cands = []
    tried = 0
    for d0, s0, psi0 in props:
        if tried >= n_refine or d0 > 20 * tol:
            break
        tried += 1
        fit = least_squares(resid, [psi0, s0], xtol=1e-14, ftol=1e-14, gtol=1e-14)
        d = float(np.sum(np.abs(fit.fun)))
        if d >= tol or fit.x[1] <= 0:
            continue
        psi, s_star = float(fit.x[0]) % (2 * np.pi), float(fit.x[1])
        if any(abs(s_star - c[2]) < 1e-8 and abs(np.angle(np.exp(1j * (psi - c[3])))) < 1e-8
               for c in cands):
            continue
        th = rad * np.array([np.cos(psi), np.sin(psi)])
        path = _backward_flow(model, mf.eval_P(a, th), s_star).y[0]
        excursion = max(0.0, n_lo - float(path.min()), float(path.max()) - n_hi)
        cands.append((round(excursion, 6), d, s_star, psi))
    if not cands:
        raise SeedError(f"shooting found no angle with symmetry defect below {tol}")
    cands.sort(key=lambda c: (c[0], round(c[1], 6), c[2]))
    _, d, s_star, psi = cands[0]
    th = rad * np.array([np.cos(psi), np.sin(psi)])
    L = s_star / 2
    sol = _backward_flow(model, mf.eval_P(a, th), s_star)
    M = min(problem.N, 256)
    tj = np.cos(np.pi * np.arange(M + 1) / M)
    vals = sol.sol(L * (tj + 1))
    u = np.zeros((4, problem.N + 1))
    for j in range(4):
        u[j, :M + 1] = md._cheb_coeffs(vals[j], M)
    u[:, M] *= 0.5
    return BvpUnknowns(float(L), th, u, problem.nu), d


def eval_orbit(x, t):
    """Physical orbit ``Gamma(t) = u(1 - t/L)`` for ``0 <= t <= 2L``."""
    t = np.asarray(t, float)
    if np.any(t < -1e-14) or np.any(t > 2 * x.L * (1 + 1e-14)):
        raise DomainError("t must lie in [0, 2L]")
    s = np.clip(1 - t / x.L, -1.0, 1.0)
    return np.stack([ss.cheb_eval(x.u[j], s) for j in range(4)])


def eval_orbit_deriv(x, t):
    t = np.asarray(t, float)
    s = np.clip(1 - t / x.L, -1.0, 1.0)
    return np.stack([-ss.cheb_eval_deriv(x.u[j], s) / x.L for j in range(4)])


class ConnectingOrbit(BaseEstimator):
    """Estimator-style front end for the symmetric connecting orbit.

    ``fit(manifold)`` accepts a fitted :class:`~idecycle.manifold.StableManifold`
    or :class:`~idecycle.manifold.ManifoldCoeffs`; ``predict(t)`` evaluates the
    physical orbit at times ``0 <= t <= 2L``.
    """

    def __init__(self, order=500, nu=1.05, seed="shooting", tol=1e-11, max_iter=50):
        self.order = order
        self.nu = nu
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        coeffs = X.coeffs_ if hasattr(X, "coeffs_") else X
        prob = BvpProblem(coeffs, self.order, self.nu)
        if isinstance(self.seed, BvpUnknowns):
            start, defect = self.seed, None
        else:
            start, defect = seed_from_shooting(prob)
        sol, history = newton_solve_bvp(prob, start, tol=self.tol, max_iter=self.max_iter)
        self.problem_ = prob
        self.solution_ = sol
        self.L_ = sol.L
        self.theta_ = sol.theta
        self.coef_ = sol.u
        self.seed_defect_ = defect
        self.residual_history_ = history
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        t = check_array(np.asarray(X, float).reshape(-1, 1)).ravel()
        return eval_orbit(self.solution_, t).T

    def certify(self, r_manif, r_star=1e-5, mu=None):
        from .prover import certify_bvp
        check_is_fitted(self, "coef_")
        return certify_bvp(self.problem_, self.solution_, r_manif, r_star=r_star, mu=mu)
