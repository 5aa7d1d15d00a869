"""Coefficient-sequence Banach algebras.

Two spaces are used:

* two-index Taylor sequences with the plain l1 norm, ``a_alpha`` stored densely
  for ``|alpha|_inf <= N``;
* one-index Chebyshev sequences with weights ``w_0 = 1, w_k = 2 nu**k``, where
  the represented function is ``u_0 + 2 sum_k u_k T_k``.

Every routine accepts either float arrays or :class:`~idecycle.interval.Interval`
arrays.  In interval mode convolutions are formed by direct summation and all
norms are rounded up.
"""

from functools import lru_cache
import json

import numpy as np
from scipy.signal import convolve2d

from . import interval as iv
from .exceptions import DomainError
from .interval import Interval


def _is_iv(x):
    return isinstance(x, Interval)


def _arr(x):
    if isinstance(x, (TaylorSeq2, ChebSeq)):
        return x.coeffs
    if _is_iv(x):
        return x
    return np.asarray(x, dtype=float)


class TaylorSeq2:
    """Two-index Taylor coefficients stored on the box ``[0, N1] x [0, N2]``."""

    def __init__(self, coeffs):
        c = _arr(coeffs)
        if len(c.shape) != 2:
            raise DomainError("Taylor coefficients must be a 2-d array")
        self.coeffs = c

    @property
    def order(self):
        return max(self.coeffs.shape) - 1

    @property
    def scalar(self):
        return "interval" if _is_iv(self.coeffs) else "f64"

    def __mul__(self, other):
        return TaylorSeq2(taylor_conv(self.coeffs, _arr(other)))

    def __add__(self, other):
        return TaylorSeq2(_pad_add(self.coeffs, _arr(other)))

    def norm(self):
        return norm_T(self.coeffs)

    def project(self, N):
        return TaylorSeq2(project(self.coeffs, N))

    def __call__(self, theta1, theta2):
        return taylor_eval(self.coeffs, theta1, theta2)

    def to_json(self):
        return seq_to_json(self)


class ChebSeq:
    """Chebyshev coefficients ``u_0..u_N`` with weight parameter ``nu``."""

    def __init__(self, coeffs, nu=1.0):
        c = _arr(coeffs)
        if len(c.shape) != 1:
            raise DomainError("Chebyshev coefficients must be a 1-d array")
        if nu < 1:
            raise DomainError("nu must be at least 1")
        self.coeffs = c
        self.nu = float(nu)

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    @property
    def scalar(self):
        return "interval" if _is_iv(self.coeffs) else "f64"

    def __mul__(self, other):
        return ChebSeq(cheb_conv(self.coeffs, _arr(other)), self.nu)

    def __add__(self, other):
        return ChebSeq(_pad_add(self.coeffs, _arr(other)), self.nu)

    def norm(self):
        return norm_Cnu(self.coeffs, self.nu)

    def project(self, N):
        return ChebSeq(project(self.coeffs, N), self.nu)

    def __call__(self, t):
        return cheb_eval(self.coeffs, t)

    def to_json(self):
        return seq_to_json(self)


class WeightVector(tuple):
    """Positive weights, one per component of a product space."""

    def __new__(cls, mu):
        mu = tuple(float(m) for m in mu)
        if not mu or min(mu) <= 0:
            raise DomainError("weights must be strictly positive")
        return super().__new__(cls, mu)


def _pad_add(a, b):
    shape = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
    out = _zeros(shape, _is_iv(a) or _is_iv(b))
    out[tuple(slice(0, s) for s in a.shape)] = out[tuple(slice(0, s) for s in a.shape)] + a
    out[tuple(slice(0, s) for s in b.shape)] = out[tuple(slice(0, s) for s in b.shape)] + b
    return out


def _zeros(shape, interval):
    return Interval.zeros(shape) if interval else np.zeros(shape)


# convolutions

def taylor_conv(a, b):
    """Cauchy product of two-index sequences; output box is the sum of the input boxes."""
    a = _arr(a)
    b = _arr(b)
    if not (_is_iv(a) or _is_iv(b)):
        return convolve2d(a, b)
    return _iv_product(a, b, _taylor_comp, _taylor_up)


def _taylor_comp(a, b):
    n1, n2 = a.shape
    m1, m2 = b.shape
    acc = iv.ProductAccumulator((n1 + m1 - 1, n2 + m2 - 1))
    if a.size < b.size:
        a, b = b, a
        n1, n2, m1, m2 = m1, m2, n1, n2
    for i, j in zip(*np.nonzero(b)):
        acc.add_products((slice(i, i + n1), slice(j, j + n2)), a, b[i, j])
    return acc.result()


def _taylor_up(a, b):
    """Upper bound of the Cauchy product of nonnegative arrays."""
    n = max(min(a.size, b.size), 1)
    return iv._up(convolve2d(a, b) * (1 + iv._gamma_up(n)) + n * iv._ETA)


def _iv_product(a, b, comp, up):
    """Enclosure of a bilinear product through midpoint and radius parts."""
    a = iv.as_interval(a)
    b = iv.as_interval(b)
    ma, ra = a.mid(), a.rad()
    mb, rb = b.mid(), b.rad()
    out = comp(ma, mb)
    if np.any(ra != 0) or np.any(rb != 0):
        rad = up(np.abs(ma), rb)
        rad = iv.up_add(rad, up(ra, iv.up_add(np.abs(mb), rb)))
        out = out + Interval(-rad, rad)
    return out


def _two_sided(u):
    """Map ``u_0..u_n`` to the symmetric sequence indexed ``-n..n``."""
    if _is_iv(u):
        return iv.concatenate([u[:0:-1], u])
    return np.concatenate([u[:0:-1], u])


def cheb_conv(u, v):
    """Chebyshev product ``(u*v)_n = sum_k u_|k| v_|n-k|`` for ``n = 0..len(u)+len(v)-2``."""
    u = _arr(u)
    v = _arr(v)
    n = u.shape[0] - 1
    m = v.shape[0] - 1
    if not (_is_iv(u) or _is_iv(v)):
        full = np.convolve(_two_sided(u), _two_sided(v))
        return full[n + m:]
    return _iv_product(u, v, _cheb_comp, _cheb_up)


def _cheb_comp(u, v):
    n = u.shape[0] - 1
    m = v.shape[0] - 1
    ve = _two_sided(v)
    acc = iv.ProductAccumulator(n + m + 1)
    for j in range(-n, n + 1):
        uj = u[abs(j)]
        if uj == 0:
            continue
        k0 = max(0, j - m)
        k1 = min(n + m, j + m)
        if k0 > k1:
            continue
        acc.add_products(slice(k0, k1 + 1), ve[k0 - j + m:k1 - j + m + 1], uj)
    return acc.result()


def _cheb_up(u, v):
    n = u.shape[0] - 1
    m = v.shape[0] - 1
    full = np.convolve(_two_sided(u), _two_sided(v))[n + m:]
    k = 2 * min(n, m) + 1
    return iv._up(full * (1 + iv._gamma_up(k)) + k * iv._ETA)


def cheb_mult_matrix(c, n_rows, n_cols):
    """Matrix of ``h -> c*h`` restricted to ``h_0..h_{n_cols-1}`` and rows ``0..n_rows-1``.

    Entry ``[n, m]`` is ``c_n`` for ``m = 0`` and ``c_|n-m| + c_{n+m}`` otherwise.
    """
    interval = _is_iv(c)
    size = n_rows + n_cols + 1
    if interval:
        cp = Interval.zeros(size)
        cp[:min(len(c), size)] = c[:size]
    else:
        cp = np.zeros(size)
        cp[:min(len(c), size)] = np.asarray(c)[:size]
    n = np.arange(n_rows)[:, None]
    m = np.arange(n_cols)[None, :]
    first = cp[np.abs(n - m)]
    second = cp[n + m]
    if interval:
        second = Interval._raw(np.where(m > 0, second.lo, 0.0), np.where(m > 0, second.hi, 0.0))
        return first + second
    return first + np.where(m > 0, second, 0.0)


def taylor_mult_matrix(c, N):
    """Matrix of ``h -> c*h`` on the box ``|alpha|_inf <= N``, row-major flattening."""
    size = (N + 1) ** 2
    a1, a2 = np.divmod(np.arange(size), N + 1)
    d1 = a1[:, None] - a1[None, :]
    d2 = a2[:, None] - a2[None, :]
    valid = (d1 >= 0) & (d2 >= 0)
    cp_shape = (N + 1, N + 1)
    if _is_iv(c):
        cp = Interval.zeros(cp_shape)
        s1, s2 = min(c.shape[0], N + 1), min(c.shape[1], N + 1)
        cp[:s1, :s2] = c[:s1, :s2]
        lo = np.where(valid, cp.lo[np.maximum(d1, 0), np.maximum(d2, 0)], 0.0)
        hi = np.where(valid, cp.hi[np.maximum(d1, 0), np.maximum(d2, 0)], 0.0)
        return Interval._raw(lo, hi)
    cp = np.zeros(cp_shape)
    s1, s2 = min(c.shape[0], N + 1), min(c.shape[1], N + 1)
    cp[:s1, :s2] = np.asarray(c)[:s1, :s2]
    return np.where(valid, cp[np.maximum(d1, 0), np.maximum(d2, 0)], 0.0)


# weights and norms

@lru_cache(maxsize=32)
def _nu_powers(nu, n):
    nu_i = Interval(nu)
    lo = np.empty(n)
    hi = np.empty(n)
    p = Interval(1.0)
    for k in range(n):
        lo[k], hi[k] = p.lo, p.hi
        p = p * nu_i
    lo.flags.writeable = False
    hi.flags.writeable = False
    return lo, hi


def nu_powers(nu, n):
    """Enclosures of ``nu**k`` for ``k = 0..n-1``."""
    lo, hi = _nu_powers(float(nu), int(n))
    return Interval._raw(lo.copy(), hi.copy())


def cheb_weights(nu, n):
    """Enclosures of the Chebyshev weights ``w_0 = 1``, ``w_k = 2 nu**k``, ``k < n``."""
    w = nu_powers(nu, n) * 2.0
    w[0] = Interval(1.0)
    return w


def _abs_bounds(x):
    x = _arr(x)
    if _is_iv(x):
        return x.mig(), x.mag()
    a = np.abs(x)
    return a, a


def norm_T(a):
    a = _arr(a)
    lo, hi = _abs_bounds(a)
    return Interval(_down_sum(lo), iv.up_sum(hi))


def _down_sum(x):
    x = np.asarray(x, float).ravel()
    s = np.sum(x)
    err = iv.up_sum(x) - s
    return max(0.0, float(np.nextafter(s - 2 * err, -np.inf)))


def norm_Cnu(u, nu):
    """``|u_0| + 2 sum |u_k| nu**k`` as an enclosing interval."""
    u = _arr(u)
    lo, hi = _abs_bounds(u)
    w = cheb_weights(nu, len(lo))
    return Interval(_down_sum(iv.mul_bounds(lo, w.lo)[0]), iv.up_sum(iv.up_mul(hi, w.hi)))


def lambda_dot(N, lam1, lam2):
    """Enclosure of ``alpha . lambda`` on the box ``[0,N]^2``."""
    a1, a2 = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    return iv.as_interval(a1) * lam1 + iv.as_interval(a2) * lam2


def norm_T_tilde(a, lam1, lam2):
    """``|a_0| + sum_{|alpha|>=1} |a_alpha| / |alpha.lambda|``."""
    lam1 = iv.as_interval(lam1)
    lam2 = iv.as_interval(lam2)
    if not ((lam1.certainly_negative() and lam2.certainly_negative())
            or (lam1.certainly_positive() and lam2.certainly_positive())):
        raise DomainError("eigenvalues must be nonzero with a common sign")
    a = _arr(a)
    n1, n2 = a.shape
    a1, a2 = np.meshgrid(np.arange(n1), np.arange(n2), indexing="ij")
    dots = abs(iv.as_interval(a1) * lam1 + iv.as_interval(a2) * lam2)
    lo, hi = _abs_bounds(a)
    dots.lo[0, 0] = 1.0
    dots.hi[0, 0] = 1.0
    up = iv.up_div(hi, dots.lo)
    down = iv.div_bounds(lo, dots.hi)[0]
    return Interval(_down_sum(down), iv.up_sum(up))


def norm_C_tilde(u, nu):
    """``|u_0| + 2 sum |u_k| nu**k / (2k)``, the norm of the range space."""
    u = _arr(u)
    lo, hi = _abs_bounds(u)
    w = cheb_weights(nu, len(lo))
    k = np.arange(len(lo), dtype=float)
    k[0] = 0.5
    up = iv.up_div(iv.up_mul(hi, w.hi), 2 * k)
    down = iv.div_bounds(iv.mul_bounds(lo, w.lo)[0], 2 * k)[0]
    return Interval(_down_sum(down), iv.up_sum(up))


# operator norms (upper bounds, floats)

def opnorm_taylor(M, tail=0.0):
    """``sup_beta sum_alpha |M[alpha, beta]|`` combined with a tail bound."""
    _, hi = _abs_bounds(M)
    finite = float(np.max(iv.up_sum(hi, axis=0))) if hi.size else 0.0
    return max(finite, float(tail))


def opnorm_cheb_to_R(row, nu):
    """``sup_k |Gamma_k| / w_k`` for a functional on the Chebyshev space."""
    _, hi = _abs_bounds(row)
    w = cheb_weights(nu, len(hi))
    return float(np.max(iv.up_div(hi, w.lo)))


def opnorm_R_to_cheb(col, nu):
    """``|| Gamma ||`` for a map from the reals into the Chebyshev space."""
    _, hi = _abs_bounds(col)
    w = cheb_weights(nu, len(hi))
    return float(iv.up_sum(iv.up_mul(hi, w.hi)))


def opnorm_cheb_to_cheb(M, nu, tail=0.0):
    """``sup_l (1/w_l) sum_k |M[k, l]| w_k`` combined with a tail bound."""
    _, hi = _abs_bounds(M)
    nr, nc = hi.shape
    wr = cheb_weights(nu, nr)
    wc = cheb_weights(nu, nc)
    colsum = iv.up_matmul(wr.hi[None, :], hi)[0]
    finite = float(np.max(iv.up_div(colsum, wc.lo)))
    return max(finite, float(tail))


# projections and auxiliary operators

def project(x, N):
    """Zero every coefficient with index (sup-norm for Taylor) above ``N``."""
    if isinstance(x, TaylorSeq2):
        return x.project(N)
    if isinstance(x, ChebSeq):
        return x.project(N)
    x = _arr(x)
    if _is_iv(x):
        out = x.copy()
        lo, hi = out.lo, out.hi
    else:
        out = np.array(x, copy=True)
        lo = hi = out
    if len(x.shape) == 2:
        for arr in {id(lo): lo, id(hi): hi}.values():
            arr[N + 1:, :] = 0.0
            arr[:, N + 1:] = 0.0
    else:
        for arr in {id(lo): lo, id(hi): hi}.values():
            arr[N + 1:] = 0.0
    return out


def upsilon(h):
    """``(Uh)_0 = 0`` and ``(Uh)_k = h_{k-1} - h_{k+1}``; output has one more entry."""
    if isinstance(h, ChebSeq):
        return ChebSeq(upsilon(h.coeffs), h.nu)
    h = _arr(h)
    n = h.shape[0]
    if _is_iv(h):
        prev = Interval.zeros(n + 1)
        nxt = Interval.zeros(n + 1)
    else:
        prev = np.zeros(n + 1)
        nxt = np.zeros(n + 1)
    prev[1:] = h
    nxt[:n - 1] = h[1:]
    out = prev - nxt
    out[0] = 0.0
    return out


def upsilon_matrix(n_in, n_out):
    """Matrix of the Upsilon operator from ``h_0..h_{n_in-1}`` to rows ``0..n_out-1``."""
    M = np.zeros((n_out, n_in))
    for k in range(1, n_out):
        if k - 1 < n_in:
            M[k, k - 1] = 1.0
        if k + 1 < n_in:
            M[k, k + 1] = -1.0
    return M


def upsilon_truncation_norm(depth, nu):
    """Operator norm of Upsilon restricted to ``h_0..h_depth`` (float)."""
    M = upsilon_matrix(depth + 1, depth + 2)
    w_out = 2.0 * nu ** np.arange(depth + 2, dtype=float)
    w_out[0] = 1.0
    w_in = w_out[:depth + 1]
    return float(np.max((np.abs(M) * w_out[:, None]).sum(axis=0) / w_in))


def psi_estimates(u, N, nu):
    """Dual estimates ``Psi_k(u)``, ``k = 0..N+1``, as rounded-up floats.

    ``Psi_k(u) = max_{j=N+1..k+N} |u_|k+j| + u_|k-j|| / (2 nu**j)`` bounds the
    coefficient ``k`` of ``u * h`` for any ``h`` supported beyond ``N``.
    """
    u = _arr(u)
    _, hi = _abs_bounds(u)
    up = np.zeros(3 * N + 4)
    up[:min(len(hi), N + 1)] = hi[:N + 1]
    if np.any(np.asarray(hi[N + 1:]) != 0):
        raise DomainError("u must be supported on k <= N")
    w = nu_powers(nu, 2 * N + 2)
    out = np.zeros(N + 2)
    js = np.arange(N + 1, 2 * N + 2)
    for k in range(1, N + 2):
        j = js[js <= k + N]
        c = iv.up_add(up[k + j], up[np.abs(k - j)])
        out[k] = float(np.max(iv.up_div(c, iv.mul_bounds(2.0, w.lo[j])[0])))
    return out


# evaluation

def taylor_eval(a, theta1, theta2):
    """Evaluate ``sum a_alpha theta1**a1 theta2**a2`` (floats, broadcasting)."""
    a = np.asarray(_arr(a), float)
    t1 = np.asarray(theta1, float)
    t2 = np.asarray(theta2, float)
    inner = np.zeros(np.broadcast(t1, t2).shape)
    for i in range(a.shape[0] - 1, -1, -1):
        row = np.zeros_like(inner)
        for j in range(a.shape[1] - 1, -1, -1):
            row = row * t2 + a[i, j]
        inner = inner * t1 + row
    return inner


def cheb_eval(u, t):
    """Evaluate ``u_0 + 2 sum u_k T_k(t)`` by the Clenshaw recurrence."""
    u = np.asarray(_arr(u), float)
    t = np.asarray(t, float)
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for k in range(len(u) - 1, 0, -1):
        b1, b2 = 2 * t * b1 - b2 + 2 * u[k], b1
    return t * b1 - b2 + u[0]


def cheb_eval_deriv(u, t):
    """Derivative of ``u_0 + 2 sum u_k T_k`` at ``t``."""
    u = np.asarray(_arr(u), float)
    c = 2 * u.copy()
    c[0] = u[0]
    return np.polynomial.chebyshev.chebval(np.asarray(t, float), np.polynomial.chebyshev.chebder(c))


# persistence

def seq_to_json(seq):
    c = seq.coeffs
    if _is_iv(c):
        coeffs = np.stack([np.asarray(c.lo), np.asarray(c.hi)], axis=-1).reshape(-1, 2).tolist()
        scalar = "interval"
    else:
        coeffs = np.asarray(c).ravel().tolist()
        scalar = "f64"
    doc = {"kind": "taylor2" if isinstance(seq, TaylorSeq2) else "chebyshev",
           "N": int(seq.order), "shape": list(c.shape), "coeffs": coeffs, "scalar": scalar}
    if isinstance(seq, ChebSeq):
        doc["nu"] = seq.nu
    return doc


def seq_from_json(doc):
    if isinstance(doc, str):
        doc = json.loads(doc)
    shape = tuple(doc.get("shape") or ((doc["N"] + 1,) * (2 if doc["kind"] == "taylor2" else 1)))
    if doc["scalar"] == "interval":
        arr = np.asarray(doc["coeffs"], float).reshape(shape + (2,))
        coeffs = Interval(arr[..., 0], arr[..., 1])
    else:
        coeffs = np.asarray(doc["coeffs"], float).reshape(shape)
    if doc["kind"] == "taylor2":
        return TaylorSeq2(coeffs)
    if doc["kind"] == "chebyshev":
        return ChebSeq(coeffs, doc.get("nu", 1.0))
    raise DomainError(f"unknown sequence kind {doc['kind']!r}")
