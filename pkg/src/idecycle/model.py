"""Growth functions, the first-order ODE system, its equilibria and eigenpairs.

With the Laplace kernel ``K(u) = (sigma/2) exp(-sigma |u|)`` a 2-cycle
``N = Q[M], M = Q[N]`` of the integrodifference equation solves

    N'' = sigma**2 (N - F(M)),   M'' = sigma**2 (M - F(N)),

written here as ``x' = f(x)`` with ``x = (N, N', M, M')``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from . import interval as iv
from .exceptions import DomainError, ModelDomainError, UnsupportedRigorError
from .interval import Interval
from . import seqspace as ss

LOGISTIC = "logistic"
RICKER = "ricker"


@dataclass(frozen=True)
class GrowthModel:
    kind: str = LOGISTIC
    rho: float = 2.2
    sigma: float = 10.0

    def __post_init__(self):
        if self.kind not in (LOGISTIC, RICKER):
            raise DomainError(f"unknown growth model {self.kind!r}")
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")

    # exact parameter enclosures: the decimal the user wrote and its float
    @property
    def rho_iv(self):
        return Interval.from_decimal(repr(float(self.rho))).hull(Interval(float(self.rho)))

    @property
    def sigma_iv(self):
        return Interval.from_decimal(repr(float(self.sigma))).hull(Interval(float(self.sigma)))

    def F(self, u):
        r = self.rho
        if self.kind == LOGISTIC:
            return (1 + r) * u - r * u * u
        return u * np.exp(r * (1 - u))

    def dF(self, u):
        r = self.rho
        if self.kind == LOGISTIC:
            return 1 + r - 2 * r * u
        return (1 - r * u) * np.exp(r * (1 - u))

    def d2F(self, u):
        r = self.rho
        if self.kind == LOGISTIC:
            return -2 * r + 0 * u
        return r * (r * u - 2) * np.exp(r * (1 - u))

    def F_iv(self, u):
        """Enclosure of F on intervals (logistic only)."""
        if self.kind != LOGISTIC:
            raise UnsupportedRigorError("certified evaluation is available for the logistic model only")
        r = self.rho_iv
        u = iv.as_interval(u)
        return (1 + r) * u - r * u.sqr()

    def dF_iv(self, u):
        if self.kind != LOGISTIC:
            raise UnsupportedRigorError("certified evaluation is available for the logistic model only")
        r = self.rho_iv
        return (1 + r) - 2 * r * iv.as_interval(u)


def two_cycle(model, tol=1e-13):
    """Return ``(n_minus, n_plus)`` with ``F(n_minus) = n_plus`` and vice versa."""
    r = model.rho
    if model.kind == LOGISTIC:
        if not r > 2:
            raise ModelDomainError(f"no 2-cycle: the logistic map needs rho > 2 (got {r})")
        d = np.sqrt(r * r - 4)
        n_minus = (r + 2 - d) / (2 * r)
        n_plus = (r + 2 + d) / (2 * r)
    else:
        n_minus, n_plus = _ricker_cycle(model, tol)
    for a, b in ((n_minus, n_plus), (n_plus, n_minus)):
        if abs(model.F(a) - b) > 1e-12:
            raise ModelDomainError("2-cycle relation not satisfied")
    return float(n_minus), float(n_plus)


def two_cycle_iv(model):
    """Interval enclosures of ``(n_minus, n_plus)`` for the logistic model."""
    if model.kind != LOGISTIC:
        raise UnsupportedRigorError("certified 2-cycle only for the logistic model")
    r = model.rho_iv
    if not (r - 2).certainly_positive():
        raise ModelDomainError("no 2-cycle: rho must exceed 2")
    d = iv.sqrt(r.sqr() - 4)
    return (r + 2 - d) / (2 * r), (r + 2 + d) / (2 * r)


def _ricker_cycle(model, tol):
    u = 0.5
    for _ in range(1000):
        u = model.F(u)
    for _ in range(100):
        v = model.F(u)
        g = model.F(v) - u
        dg = model.dF(v) * model.dF(u) - 1
        step = g / dg
        lam = 1.0
        while lam > 1e-4:
            un = u - lam * step
            if abs(model.F(model.F(un)) - un) < abs(g) or abs(g) < tol:
                break
            lam /= 2
        u = un
        if abs(step) < tol:
            break
    v = model.F(u)
    if abs(model.F(v) - u) > 1e-12 or abs(u - v) < 1e-6:
        raise ModelDomainError("Newton on F(F(u)) - u found no genuine 2-cycle")
    return min(u, v), max(u, v)


def equilibria(model):
    """The two equilibria ``x+ = (n+, 0, n-, 0)`` and ``x- = (n-, 0, n+, 0)``."""
    nm, npl = two_cycle(model)
    return np.array([npl, 0.0, nm, 0.0]), np.array([nm, 0.0, npl, 0.0])


def vector_field(x, model):
    x = np.asarray(x, float)
    s2 = model.sigma ** 2
    return np.stack([x[1], s2 * (x[0] - model.F(x[2])), x[3], s2 * (x[2] - model.F(x[0]))])


def jacobian(x, model):
    x = np.asarray(x, float)
    s2 = model.sigma ** 2
    return np.array([[0.0, 1.0, 0.0, 0.0],
                     [s2, 0.0, -s2 * model.dF(x[2]), 0.0],
                     [0.0, 0.0, 0.0, 1.0],
                     [-s2 * model.dF(x[0]), 0.0, s2, 0.0]])


def reversor(x):
    x = np.asarray(x)
    return np.stack([x[2], -x[3], x[0], -x[1]])


def is_in_Pi_R(x, tol=1e-10):
    """Fixed-point set of the reversor: ``x1 = x3`` and ``x2 = -x4``."""
    x = np.asarray(x, float)
    return bool(abs(x[0] - x[2]) <= tol and abs(x[1] + x[3]) <= tol)


def pi_r_defect(x):
    x = np.asarray(x, float)
    return np.abs(x[0] - x[2]) + np.abs(x[1] + x[3])


@dataclass
class EigenData:
    """Eigenpairs of the Jacobian at ``x+``.

    ``lambdas[0] <= lambdas[1] < 0 < lambdas[3] <= lambdas[2]``; column ``i`` of
    ``xis`` is the eigenvector of ``lambdas[i]``.
    """

    lambdas: np.ndarray
    xis: np.ndarray
    product: float

    @property
    def Lambda(self):
        return np.diag(self.lambdas[:2])

    @property
    def V(self):
        return self.xis[:, :2]

    def stable_basis(self, scaling="unit"):
        """Stable eigenvalues and eigenvectors used to parameterize the manifold.

        ``"closed_form"`` keeps the closed-form vectors with order ``(lambda1, lambda2)``.
        ``"unit"`` orders the slow direction first and scales each vector to unit
        Euclidean length with positive last component.
        """
        if scaling == "closed_form":
            return self.lambdas[:2].copy(), self.V.copy()
        if scaling == "unit":
            lam = self.lambdas[[1, 0]]
            V = self.xis[:, [1, 0]]
            V = V / np.linalg.norm(V, axis=0) * np.sign(V[3])
            return lam, V
        raise DomainError(f"unknown eigenvector scaling {scaling!r}")


def eigen_data(model):
    nm, npl = two_cycle(model)
    dm, dp = model.dF(nm), model.dF(npl)
    p = dm * dp
    if not 0 < p < 1:
        raise ModelDomainError(f"hyperbolicity fails: F'(n-)F'(n+) = {p}")
    s = model.sigma
    sp = np.sqrt(p)
    lam = np.array([-s * np.sqrt(1 + sp), -s * np.sqrt(1 - sp), s * np.sqrt(1 + sp), s * np.sqrt(1 - sp)])
    # x1/x3 = -F'(n-)/(lambda^2/sigma^2 - 1), and lambda^2/sigma^2 - 1 = +-sqrt(p)
    c = np.array([-dm / sp, dm / sp, -dm / sp, dm / sp])
    xis = np.stack([c / lam, c, 1 / lam, np.ones(4)])
    return EigenData(lam, xis, float(p))


def eigen_data_iv(model, scaling="unit"):
    """Interval enclosures of the stable eigenvalues and eigenvectors (logistic)."""
    nm, npl = two_cycle_iv(model)
    dm, dp = model.dF_iv(nm), model.dF_iv(npl)
    p = dm * dp
    if not (p.certainly_positive() and p.certainly_lt(1.0)):
        raise ModelDomainError("hyperbolicity cannot be verified")
    s = model.sigma_iv
    sp = iv.sqrt(p)
    lam1 = -s * iv.sqrt(1 + sp)
    lam2 = -s * iv.sqrt(1 - sp)
    c1 = -dm / sp
    c2 = dm / sp
    xi1 = [c1 / lam1, c1, 1 / lam1, Interval(1.0)]
    xi2 = [c2 / lam2, c2, 1 / lam2, Interval(1.0)]
    if scaling == "closed_form":
        lams, cols = [lam1, lam2], [xi1, xi2]
    elif scaling == "unit":
        lams, cols = [lam2, lam1], []
        for xi in (xi2, xi1):
            nrm = iv.sqrt(sum((v.sqr() for v in xi[1:]), xi[0].sqr()))
            cols.append([v / nrm for v in xi])
    else:
        raise DomainError(f"unknown eigenvector scaling {scaling!r}")
    V = iv.stack([iv.stack(col) for col in cols], axis=1)
    return iv.stack(lams), V


# composition with sequences

def _exp_taylor(h, N):
    """Taylor coefficients of ``exp(h)`` on the box ``[0,N]^2`` by the derivative recurrence."""
    h = np.asarray(h, float)
    hp = np.zeros((N + 1, N + 1))
    s1, s2 = min(h.shape[0], N + 1), min(h.shape[1], N + 1)
    hp[:s1, :s2] = h[:s1, :s2]
    E = np.zeros((N + 1, N + 1))
    E[0, 0] = np.exp(hp[0, 0])
    i1 = np.arange(N + 1)[:, None] * hp
    i2 = np.arange(N + 1)[None, :] * hp
    for tot in range(1, 2 * N + 1):
        for a1 in range(max(0, tot - N), min(N, tot) + 1):
            a2 = tot - a1
            if a1 > 0:
                # a1 E_a = sum_{b <= a} b1 h_b E_{a-b}
                acc = np.sum(i1[:a1 + 1, :a2 + 1] * E[a1::-1, a2::-1])
                E[a1, a2] = acc / a1
            else:
                acc = np.sum(i2[0, :a2 + 1] * E[0, a2::-1])
                E[a1, a2] = acc / a2
    return E


def F_on_taylor(a, model, N=None):
    """Coefficients of ``F(a(theta))`` on the box ``[0,N]^2`` (default: the box of ``a``)."""
    a_arr = ss._arr(a)
    if N is None:
        N = a_arr.shape[0] - 1
    if model.kind == LOGISTIC:
        if isinstance(a_arr, Interval):
            r = model.rho_iv
            sq = ss.taylor_conv(a_arr, a_arr)[:N + 1, :N + 1]
            return (1 + r) * _pad_taylor(a_arr, N) - r * sq
        r = model.rho
        sq = ss.taylor_conv(a_arr, a_arr)[:N + 1, :N + 1]
        return (1 + r) * _pad_taylor(a_arr, N) - r * _pad_taylor(sq, N)
    if isinstance(a_arr, Interval):
        raise UnsupportedRigorError("Ricker composition is a float-only path")
    E = _exp_taylor(-model.rho * np.asarray(a_arr), N) * np.exp(model.rho)
    return ss.taylor_conv(_pad_taylor(a_arr, N), E)[:N + 1, :N + 1]


def dF_on_taylor(a, model, N=None):
    """Coefficients of ``F'(a(theta))`` on the box ``[0,N]^2``."""
    a_arr = np.asarray(ss._arr(a), float)
    if N is None:
        N = a_arr.shape[0] - 1
    ap = _pad_taylor(a_arr, N)
    if model.kind == LOGISTIC:
        out = -2 * model.rho * ap
        out[0, 0] += 1 + model.rho
        return out
    E = _exp_taylor(-model.rho * ap, N) * np.exp(model.rho)
    lin = -model.rho * ap
    lin[0, 0] += 1.0
    return ss.taylor_conv(lin, E)[:N + 1, :N + 1]


def _pad_taylor(a, N):
    if isinstance(a, Interval):
        out = Interval.zeros((N + 1, N + 1))
    else:
        out = np.zeros((N + 1, N + 1))
    s1, s2 = min(a.shape[0], N + 1), min(a.shape[1], N + 1)
    out[:s1, :s2] = a[:s1, :s2]
    return out


def _cheb_values(u, M):
    """Values of ``u_0 + 2 sum u_k T_k`` at ``cos(pi j / M)``, ``j = 0..M``."""
    c = np.zeros(M + 1)
    n = min(len(u), M + 1)
    c[:n] = 2 * np.asarray(u, float)[:n]
    c[0] = u[0]
    # DCT-I: y_j = c_0 + (-1)^j c_M + 2 sum c_k cos(pi jk/M)
    y = dct(c, type=1)
    return 0.5 * (y + c[0] + c[M] * (-1.0) ** np.arange(M + 1))


def _cheb_coeffs(values, M):
    y = dct(values, type=1)
    return y / (2 * M)


def F_on_cheb(u, model, n_out=None):
    """Chebyshev coefficients of ``F(u(t))``, ``k = 0..n_out-1``.

    The logistic case is the exact algebra formula; the Ricker case samples at
    Chebyshev-Lobatto points and transforms back (not rigorous).
    """
    u_arr = ss._arr(u)
    n = u_arr.shape[0]
    if n_out is None:
        n_out = 2 * n - 1
    if model.kind == LOGISTIC:
        if isinstance(u_arr, Interval):
            r = model.rho_iv
            sq = ss.cheb_conv(u_arr, u_arr)
            out = Interval.zeros(max(n_out, 2 * n - 1))
            out[:n] = (1 + r) * u_arr
            out = out - r * _pad_cheb(sq, len(out))
            return out[:n_out]
        r = model.rho
        sq = ss.cheb_conv(u_arr, u_arr)
        out = -r * _pad_cheb(sq, max(n_out, 2 * n - 1))
        out[:n] += (1 + r) * u_arr
        return out[:n_out]
    if isinstance(u_arr, Interval):
        raise UnsupportedRigorError("Ricker composition is a float-only path")
    return _cheb_compose(lambda x: model.F(x), u_arr, n_out)


def dF_on_cheb(u, model, n_out=None):
    u_arr = np.asarray(ss._arr(u), float)
    n = u_arr.shape[0]
    if n_out is None:
        n_out = n
    if model.kind == LOGISTIC:
        out = np.zeros(max(n_out, n))
        out[:n] = -2 * model.rho * u_arr
        out[0] += 1 + model.rho
        return out[:n_out]
    return _cheb_compose(lambda x: model.dF(x), u_arr, n_out)


def _cheb_compose(fun, u, n_out):
    M = 1
    while M < 4 * max(n_out, len(u)):
        M *= 2
    vals = fun(_cheb_values(u, M))
    return _cheb_coeffs(vals, M)[:n_out]


def _pad_cheb(c, n):
    if isinstance(c, Interval):
        out = Interval.zeros(n)
        m = min(n, len(c))
        out[:m] = c[:m]
        return out
    out = np.zeros(n)
    m = min(n, len(c))
    out[:m] = c[:m]
    return out
