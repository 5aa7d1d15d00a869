"""Approximate Evans function for the second-iterate linearization.

Everything here works in the rescaled spatial variable ``s = sigma * x``, in
which the dispersal kernel has unit rate.  A two-cycle ``N(x)`` for rate
``sigma`` becomes ``N0(s) = N(s / sigma)`` and ``N1(s) = N0(-s)``.

The eigenvalue problem ``DS[N0] h = lambda h`` is equivalent to bounded
solutions of ``z' = A(s; lambda) z`` on ``C^4``.  That system is lifted to the
second exterior power (``C^6``), the dominant asymptotic growth is scaled out,
and the two halves are integrated inward from ``s = -L`` and ``s = +L``.  The
value at ``s = 0`` is the wedge of the two lifted solutions.

Nothing in this module is rigorous.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.integrate import solve_ivp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DomainError, InconclusiveError, SolverError

# basis of the second exterior power: e1^e2, e1^e3, e1^e4, e2^e3, e2^e4, e3^e4
PAIRS = list(combinations(range(4), 2))
_PAIR_INDEX = {p: i for i, p in enumerate(PAIRS)}


# growth modes and asymptotic bases

def log_rotated(z):
    """Logarithm with its branch cut on the positive imaginary axis."""
    z = np.asarray(z, complex)
    return np.log(np.abs(z)) + 1j * (np.angle(1j * z) - np.pi / 2)


def sqrt_rotated(z):
    """Square root built from :func:`log_rotated`."""
    return np.exp(0.5 * log_rotated(z))


def growth_modes(lam, product):
    """``(xi_minus_0, xi_minus_1, xi_plus_0, xi_plus_1)`` at ``lam``.

    The ``minus`` modes are the unstable growth modes at ``-inf`` and the
    ``plus`` modes the stable growth modes at ``+inf``; each is analytic in
    ``lam`` away from the disc of radius ``product``.
    """
    lam = complex(lam)
    if lam == 0:
        raise DomainError("growth modes are undefined at lambda = 0")
    r = sqrt_rotated(product / lam)
    root = [np.sqrt(1 + r), np.sqrt(1 - r)]
    return (complex(root[0]), complex(root[1]), complex(-root[0]), complex(-root[1]))


def _growth_modes_many(lams, product):
    lams = np.asarray(lams, complex)
    if np.any(lams == 0):
        raise DomainError("growth modes are undefined at lambda = 0")
    r = sqrt_rotated(product / lams)
    p0, p1 = np.sqrt(1 + r), np.sqrt(1 - r)
    return p0, p1, -p0, -p1


def _basis_column(xi, dF_end):
    q = 1 - xi * xi
    return np.stack([q, q * xi, dF_end * np.ones_like(xi), dF_end * xi])


def asymptotic_bases(lam, model):
    """``(V_minus, V_plus)``: each a ``4 x 2`` complex basis.

    ``V_minus`` spans the unstable subspace of ``A(-inf; lam)`` and ``V_plus``
    the stable subspace of ``A(+inf; lam)``.
    """
    from .model import two_cycle

    n_minus, n_plus = two_cycle(model)
    d_minus, d_plus = float(model.dF(n_minus)), float(model.dF(n_plus))
    xm0, xm1, xp0, xp1 = growth_modes(lam, d_minus * d_plus)
    Vm = np.stack([_basis_column(np.asarray(x), d_minus) for x in (xm0, xm1)], axis=1)
    Vp = np.stack([_basis_column(np.asarray(x), d_plus) for x in (xp0, xp1)], axis=1)
    return Vm.astype(complex), Vp.astype(complex)


def limit_matrix(lam, dF_N1, dF_N0):
    """``A`` with constant coefficients ``F'(N1)`` and ``F'(N0)``."""
    A = np.zeros((4, 4), complex)
    A[0, 1] = 1
    A[1, 0] = 1
    A[1, 2] = -dF_N1 / lam
    A[2, 3] = 1
    A[3, 0] = -dF_N0
    A[3, 2] = 1
    return A


# exterior algebra

def wedge2(v, w):
    """``v ^ w`` in the six-dimensional pair basis."""
    v = np.asarray(v)
    w = np.asarray(w)
    return np.stack([v[i] * w[j] - v[j] * w[i] for i, j in PAIRS])


def wedge22(omega, eta):
    """Pairing of two bivectors into the top power, as a scalar."""
    o, e = omega, eta
    return (o[0] * e[5] - o[1] * e[4] + o[2] * e[3]
            + o[3] * e[2] - o[4] * e[1] + o[5] * e[0])


def compound_lift(A):
    """Matrix of ``v ^ w -> (A v) ^ w + v ^ (A w)`` in the pair basis."""
    A = np.asarray(A)
    out = np.zeros((6, 6), dtype=np.result_type(A, float))
    for col, (k, l) in enumerate(PAIRS):
        # (A e_k) ^ e_l + e_k ^ (A e_l)
        for m in range(4):
            for a, b, c in ((m, l, A[m, k]), (k, m, A[m, l])):
                if a == b or c == 0:
                    continue
                if a < b:
                    out[_PAIR_INDEX[(a, b)], col] += c
                else:
                    out[_PAIR_INDEX[(b, a)], col] -= c
    return out


# the variable-coefficient system

def _dF_profiles(cycle, s):
    """``(F'(N1(s)), F'(N0(s)))`` in the rescaled variable."""
    sigma = cycle.model.sigma
    x = np.asarray(s, float) / sigma
    N0 = cycle.eval_N(x)
    N1 = cycle.eval_N(-x)
    return cycle.model.dF(N1), cycle.model.dF(N0)


def evans_coeff_matrix(t, lam, cycle):
    """``A(t; lam)`` with ``t`` in the rescaled variable."""
    a, b = _dF_profiles(cycle, float(t))
    return limit_matrix(complex(lam), float(a), float(b))


# the lift is linear in A, so split it by coefficient once
_K0 = compound_lift(limit_matrix(1.0, 0.0, 0.0).real)
_KA = compound_lift(limit_matrix(1.0, 1.0, 0.0).real) - _K0
_KB = compound_lift(limit_matrix(1.0, 0.0, 1.0).real) - _K0


@dataclass
class SpectralSetup:
    """Inputs of the Evans computation for one two-cycle."""

    cycle: object
    mu_bound: float
    product: float
    eps1: float = 0.1
    eps2: float = 0.1
    L_evans: float = 8.0
    rtol: float = 1e-10
    atol: float = 1e-12
    _ends: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not 0 < self.product < 1:
            raise DomainError(f"F'(n+)F'(n-) = {self.product:.4g} is not in (0, 1)")
        if not 0 < self.eps1 < np.pi:
            raise DomainError("eps1 must lie in (0, pi)")
        if not 0 < self.eps2 < 1 - self.product:
            raise DomainError(f"eps2 must lie in (0, {1 - self.product:.4g})")
        if self.L_evans <= 0:
            raise DomainError("L must be positive")
        m = self.cycle.model
        self._ends = (float(m.dF(self.cycle.n_minus)), float(m.dF(self.cycle.n_plus)))

    @classmethod
    def from_cycle(cls, cycle, eps1=0.1, eps2=0.1, L_evans=8.0, **kw):
        mu, prod = mu_and_product(cycle)
        return cls(cycle, mu, prod, eps1, eps2, L_evans, **kw)

    @property
    def dF_minus(self):
        return self._ends[0]

    @property
    def dF_plus(self):
        return self._ends[1]


def mu_and_product(cycle, n_samples=20001):
    """``(||F' o N0|| ||F' o N1||, F'(n+) F'(n-))``.

    The sup norms come from dense sampling across the orbit together with the
    limits at both ends.  ``N1`` is a reflection of ``N0``, so both sup norms
    are taken over the same set of values.
    """
    m = cycle.model
    span = 2 * cycle.L + 40.0 / m.sigma
    x = np.linspace(-span, span, n_samples)
    vals = np.abs(m.dF(cycle.eval_N(x)))
    ends = np.abs([m.dF(cycle.n_minus), m.dF(cycle.n_plus)])
    sup0 = float(max(np.max(vals), np.max(ends)))
    sup1 = sup0
    product = float(m.dF(cycle.n_minus) * m.dF(cycle.n_plus))
    return sup0 * sup1, product


def _initial_data(setup, lams):
    """Lifted initial data and shifts for both halves, one column per ``lam``."""
    xm0, xm1, xp0, xp1 = _growth_modes_many(lams, setup.product)
    Wm = wedge2(_basis_column(xm0, setup.dF_minus), _basis_column(xm1, setup.dF_minus))
    Wp = wedge2(_basis_column(xp0, setup.dF_plus), _basis_column(xp1, setup.dF_plus))
    return Wm, Wp, xm0 + xm1, xp0 + xp1


def _integrate(setup, lams, W0, zeta, t0):
    """Integrate the shifted lifted system from ``t0`` to 0 for all ``lams`` at once."""
    n = lams.size
    inv = 1.0 / lams

    def rhs(t, y):
        Y = y.reshape(6, n)
        a, b = _dF_profiles(setup.cycle, t)
        return (_K0 @ Y + b * (_KB @ Y) + (a * inv) * (_KA @ Y) - zeta * Y).ravel()

    sol = solve_ivp(rhs, (t0, 0.0), W0.ravel(), method="DOP853",
                    rtol=setup.rtol, atol=setup.atol)
    if sol.status != 0:
        t_fail = float(sol.t[-1]) if sol.t.size else t0
        raise SolverError(
            f"lifted Evans system failed at t = {t_fail:.6g} for lambda in "
            f"[{lams.min():.4g}, {lams.max():.4g}]: {sol.message}", [])
    return sol.y[:, -1].reshape(6, n)


def evans_many(lams, setup, batch=256):
    """``E_L`` at every point of ``lams`` (vectorized over ``lam``)."""
    lams = np.atleast_1d(np.asarray(lams, complex))
    out = np.empty(lams.size, complex)
    L = float(setup.L_evans)
    for lo in range(0, lams.size, batch):
        chunk = lams[lo:lo + batch]
        Wm, Wp, zm, zp = _initial_data(setup, chunk)
        Um = _integrate(setup, chunk, Wm, zm, -L)
        Up = _integrate(setup, chunk, Wp, zp, L)
        out[lo:lo + batch] = wedge22(Up, Um)
    return out


def evans_EL(lam, setup):
    """``E_L(lam)`` up to a positive constant."""
    return complex(evans_many([lam], setup)[0])


# contour and winding number

def contour_pieces(setup):
    """The four pieces of the region boundary, in positive orientation.

    Each piece is ``(length, fun)`` with ``fun`` mapping ``[0, 1]`` to the
    piece.  The walk starts at the right end of the outer arc.
    """
    e1, e2 = setup.eps1, setup.eps2
    r_in, r_out = 1 - e2, setup.mu_bound + e2
    a0, a1 = -e1, np.pi + e1
    span = a1 - a0
    return [
        (r_out * span, lambda u: r_out * np.exp(1j * (a0 + span * u))),
        (r_out - r_in, lambda u: (r_out - (r_out - r_in) * u) * np.exp(1j * a1)),
        (r_in * span, lambda u: r_in * np.exp(1j * (a1 - span * u))),
        (r_out - r_in, lambda u: (r_in + (r_out - r_in) * u) * np.exp(1j * a0)),
    ]


def contour_point(setup, s):
    """Boundary point at normalized arc length ``s`` in ``[0, 1]``."""
    pieces = contour_pieces(setup)
    total = sum(p[0] for p in pieces)
    s = np.atleast_1d(np.asarray(s, float))
    out = np.empty(s.size, complex)
    acc = 0.0
    done = np.zeros(s.size, bool)
    for i, (length, fun) in enumerate(pieces):
        frac = length / total
        last = i == len(pieces) - 1
        sel = ~done & ((s <= acc + frac) | last)
        out[sel] = fun(np.clip((s[sel] - acc) / frac, 0.0, 1.0))
        done |= sel
        acc += frac
    return out


def contour_nodes(setup, spacing):
    """Parameters of a mesh with arc spacing at most ``spacing``; corners included."""
    pieces = contour_pieces(setup)
    total = sum(p[0] for p in pieces)
    s = []
    acc = 0.0
    for length, _ in pieces:
        n = max(1, int(np.ceil(length / spacing)))
        s.append(acc + np.arange(n) / n * length / total)
        acc += length / total
    s.append([1.0])
    return np.concatenate(s)


@dataclass
class EvansContour:
    """Samples of ``E_L`` around the closed boundary and the resulting winding."""

    s: np.ndarray
    nodes: np.ndarray
    values: np.ndarray
    winding: int

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "re_lambda", "im_lambda", "re_E", "im_E"])
        for s, z, e in zip(self.s, self.nodes, self.values):
            w.writerow([repr(float(v)) for v in (s, z.real, z.imag, e.real, e.imag)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _arg_steps(values):
    return np.angle(values[1:] / values[:-1])


def winding_of(fun, s, point, max_rounds=12, max_nodes=20000, zero_tol=1e-12):
    """Winding number of ``fun(point(s))`` around 0 with adaptive refinement.

    ``s`` must start at 0 and end at 1 with ``point(0) == point(1)``.  Any
    step whose argument increment reaches ``pi/2`` is bisected until it does
    not.  Returns ``(winding, s, nodes, values)``.
    """
    s = np.asarray(s, float)
    nodes = point(s)
    values = np.asarray(fun(nodes), complex)
    for _ in range(max_rounds + 1):
        if np.any(np.abs(values) < zero_tol):
            k = int(np.argmin(np.abs(values)))
            raise InconclusiveError(f"E_L vanishes to tolerance at lambda = {nodes[k]:.6g}")
        bad = np.nonzero(np.abs(_arg_steps(values)) >= np.pi / 2)[0]
        if bad.size == 0:
            total = float(np.sum(_arg_steps(values)))
            return int(round(total / (2 * np.pi))), s, nodes, values
        if s.size + bad.size > max_nodes:
            break
        s_new = 0.5 * (s[bad] + s[bad + 1])
        z_new = point(s_new)
        v_new = np.asarray(fun(z_new), complex)
        order = np.argsort(np.concatenate([s, s_new]), kind="stable")
        s = np.concatenate([s, s_new])[order]
        nodes = np.concatenate([nodes, z_new])[order]
        values = np.concatenate([values, v_new])[order]
    raise InconclusiveError("argument increments could not be resolved within the refinement budget")


def winding_number(setup, mesh_spacing=0.05, fun=None, **kw):
    """Winding number of ``E_L`` along the region boundary.

    ``fun`` replaces ``E_L`` (any vectorized function of ``lambda``); it is
    used to test the counting on functions with known zeros.
    """
    fun = (lambda z: evans_many(z, setup)) if fun is None else fun
    s0 = contour_nodes(setup, mesh_spacing)
    w, s, nodes, values = winding_of(fun, s0, lambda t: contour_point(setup, t), **kw)
    return w, EvansContour(s, nodes, values, w)


def stability_report(setup, winding, EL_at_1):
    return {
        "mu": setup.mu_bound,
        "product": setup.product,
        "eps1": setup.eps1,
        "eps2": setup.eps2,
        "L": setup.L_evans,
        "winding": int(winding),
        "EL_at_1": [float(np.real(EL_at_1)), float(np.imag(EL_at_1))],
    }


class EvansStability(BaseEstimator):
    """Winding-number assessment of a fitted two-cycle.

    ``fit`` takes a :class:`~idecycle.twocycle.TwoCycle`; afterwards
    ``winding_``, ``contour_``, ``mu_``, ``product_`` and ``EL_at_1_`` are
    available and ``predict`` evaluates ``E_L`` at complex points.
    """

    def __init__(self, eps1=0.1, eps2=0.1, L=8.0, mesh=0.05, rtol=1e-10, atol=1e-12):
        self.eps1 = eps1
        self.eps2 = eps2
        self.L = L
        self.mesh = mesh
        self.rtol = rtol
        self.atol = atol

    def fit(self, cycle, y=None):
        if self.mesh <= 0:
            raise DomainError("mesh spacing must be positive")
        setup = SpectralSetup.from_cycle(cycle, self.eps1, self.eps2, self.L,
                                         rtol=self.rtol, atol=self.atol)
        self.setup_ = setup
        self.mu_ = setup.mu_bound
        self.product_ = setup.product
        self.winding_, self.contour_ = winding_number(setup, self.mesh)
        self.EL_at_1_ = evans_EL(1.0, setup)
        return self

    def predict(self, X):
        check_is_fitted(self, "setup_")
        lams = np.asarray(X, complex).ravel()
        if not np.all(np.isfinite(lams)):
            raise DomainError("lambda values must be finite")
        return evans_many(lams, self.setup_)

    def report(self):
        check_is_fitted(self, "setup_")
        return stability_report(self.setup_, self.winding_, self.EL_at_1_)

    def report_json(self):
        return json.dumps(self.report(), indent=2)
