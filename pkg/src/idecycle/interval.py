"""Outward-rounded interval arithmetic on binary64 endpoints.

An :class:`Interval` holds ``lo`` and ``hi`` which may be scalars or numpy
arrays of the same shape, so the same type serves as a certified scalar and as
an elementwise interval array.  Rounding direction is decided exactly with
error-free transformations (TwoSum, Dekker's TwoProduct): a result is moved one
ulp outward only when the floating-point operation was actually inexact in that
direction.  Where those transformations are not valid (overflow, deep
underflow) the result is widened by one ulp on both sides.

Matrix products go through a midpoint-radius enclosure with the a priori
error bound ``|fl(A B) - A B| <= gamma_n |A| |B|``, valid for any summation
order used by BLAS.
"""

from fractions import Fraction

import numpy as np

from .exceptions import DomainError, EnclosureError

_INF = np.inf
_EPS = np.finfo(float).eps / 2          # unit roundoff
_ETA = 5e-324                           # smallest subnormal
_SPLITTER = 134217729.0                 # 2**27 + 1
_SAFE_HI = 2.0 ** 995
_SAFE_LO = 2.0 ** -968


def _down(x):
    return np.nextafter(x, -_INF)


def _up(x):
    return np.nextafter(x, _INF)


def _directed(s, err):
    """Bracket ``s + err`` given the float ``s`` and the sign of the exact error."""
    bad = ~np.isfinite(err)
    lo = np.where((err < 0) | bad, _down(s), s)
    hi = np.where((err > 0) | bad, _up(s), s)
    return lo, hi


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _split(a):
    c = _SPLITTER * a
    ah = c - (c - a)
    return ah, a - ah


def _two_prod(a, b):
    p = a * b
    with np.errstate(over="ignore", invalid="ignore"):
        ah, al = _split(a)
        bh, bl = _split(b)
        err = al * bl - (((p - ah * bh) - al * bh) - ah * bl)
    unsafe = (np.abs(a) > _SAFE_HI) | (np.abs(b) > _SAFE_HI) | (np.abs(p) < _SAFE_LO)
    err = np.where(unsafe, np.nan, err)
    # an exact zero product (one factor zero) needs no widening
    err = np.where((a == 0) | (b == 0), 0.0, err)
    return p, err


def add_bounds(a, b):
    s, err = _two_sum(np.asarray(a, float), np.asarray(b, float))
    return _directed(s, err)


def mul_bounds(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    p, err = _two_prod(a, b)
    return _directed(p, err)


def div_bounds(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        q = a / b
        p, e = _two_prod(q, b)
        r = (a - p) - e
        err = r * np.sign(b)
    err = np.where(q == 0, np.where(a == 0, 0.0, np.nan), err)
    return _directed(q, err)


def up_add(a, b):
    return add_bounds(a, b)[1]


def up_mul(a, b):
    return mul_bounds(a, b)[1]


def up_div(a, b):
    return div_bounds(a, b)[1]


def down_sub(a, b):
    return add_bounds(a, -np.asarray(b, float))[0]


def _gamma_up(n):
    """Rounded-up value of gamma_n (1 + gamma_n) for n summands."""
    g = n * _EPS / (1.0 - n * _EPS)
    return _up(_up(g * (1.0 + g)) * (1.0 + 4 * _EPS))


class ProductAccumulator:
    """Compensated accumulation of sums of products on a float array.

    Every product and partial sum is split exactly into a float and an error
    term (TwoProduct, TwoSum); the error terms are summed separately and their
    own rounding is bounded a priori.  :meth:`result` returns an enclosure whose
    width is a couple of ulps of the exact value, independent of the number of
    terms.
    """

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)
        self.cabs = np.zeros(shape)
        self.slack = np.zeros(shape)
        self.count = 0

    def add_products(self, idx, a, b):
        p, e = _two_prod(np.asarray(a, float), np.asarray(b, float))
        bad = ~np.isfinite(e)
        if np.any(bad):
            # deep underflow: |ab - p| <= u|p| + eta
            e = np.where(bad, 0.0, e)
            self.slack[idx] += np.where(bad, np.abs(p) * (2 * _EPS) + 2 * _ETA, 0.0)
        s, es = _two_sum(self.s[idx], p)
        self.s[idx] = s
        self.c[idx] = self.c[idx] + e + es
        self.cabs[idx] = self.cabs[idx] + np.abs(e) + np.abs(es)
        self.count += 1

    def result(self):
        m = 3 * max(self.count, 1)
        g = _gamma_up(m)
        # |c - sum e| <= gamma_m sum|e| and sum|e| <= cabs (1 + gamma_m)
        eabs = _up(self.cabs + _up(g * self.cabs) + m * _ETA)
        err = _up(_up(g * eabs) + m * _ETA)
        err = _up(err + _up(self.slack * (1 + 4 * _EPS)))
        lo, hi = add_bounds(self.s, self.c)
        lo = add_bounds(lo, -err)[0]
        hi = add_bounds(hi, err)[1]
        return Interval._raw(lo, hi)


def up_sum(x, axis=None):
    """Upper bound of the exact sum of a nonnegative array."""
    x = np.asarray(x, float)
    n = x.size if axis is None else x.shape[axis]
    s = np.sum(x, axis=axis)
    return _up(s + _up(_gamma_up(max(n, 1)) * s) + n * _ETA)


def up_matmul(x, y):
    """Upper bound of the exact product of two nonnegative matrices/vectors."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = x.shape[-1]
    s = x @ y
    return _up(s + _up(_gamma_up(max(n, 1)) * s) + n * _ETA)


def _to_float(v):
    if isinstance(v, str):
        return Interval.from_decimal(v)
    return v


class Interval:
    """Closed interval ``[lo, hi]``; endpoints may be scalars or arrays."""

    __slots__ = ("lo", "hi")
    __array_priority__ = 1000

    def __init__(self, lo, hi=None):
        lo = np.asarray(lo, dtype=float)
        hi = lo if hi is None else np.asarray(hi, dtype=float)
        if lo.shape != hi.shape:
            lo, hi = np.broadcast_arrays(lo, hi)
            lo, hi = lo.copy(), hi.copy()
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise EnclosureError("invalid interval endpoints")
        if lo.ndim == 0:
            lo, hi = float(lo), float(hi)
        self.lo = lo
        self.hi = hi

    @classmethod
    def _raw(cls, lo, hi):
        obj = cls.__new__(cls)
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        if lo.ndim == 0:
            lo, hi = float(lo), float(hi)
        obj.lo = lo
        obj.hi = hi
        return obj

    @classmethod
    def from_decimal(cls, text):
        """Tightest enclosure of a decimal literal such as ``"2.2"``."""
        exact = Fraction(str(text))
        x = float(exact)
        fx = Fraction(x)
        if fx == exact:
            return cls(x)
        if fx < exact:
            return cls(x, float(_up(x)))
        return cls(float(_down(x)), x)

    @classmethod
    def zeros(cls, shape):
        z = np.zeros(shape)
        return cls._raw(z, z.copy())

    # basic shape handling
    @property
    def shape(self):
        return np.shape(self.lo)

    @property
    def ndim(self):
        return np.ndim(self.lo)

    def __len__(self):
        return len(self.lo)

    def __getitem__(self, idx):
        return Interval._raw(np.asarray(self.lo)[idx], np.asarray(self.hi)[idx])

    def __setitem__(self, idx, value):
        v = as_interval(value)
        if self.lo is self.hi:
            self.hi = self.hi.copy()
        self.lo[idx] = v.lo
        self.hi[idx] = v.hi

    def copy(self):
        return Interval._raw(np.array(self.lo, copy=True), np.array(self.hi, copy=True))

    def reshape(self, *shape):
        return Interval._raw(np.reshape(self.lo, *shape), np.reshape(self.hi, *shape))

    @property
    def T(self):
        return Interval._raw(np.transpose(self.lo), np.transpose(self.hi))

    def __repr__(self):
        if self.ndim == 0:
            return f"Interval({self.lo!r}, {self.hi!r})"
        return f"Interval(shape={self.shape})"

    # measurements
    def mid(self):
        m = 0.5 * self.lo + 0.5 * self.hi
        return np.where(np.isfinite(m), m, 0.5 * (self.lo + self.hi))

    def rad(self):
        """Upper bound of the radius around :meth:`mid`."""
        m = self.mid()
        return np.maximum(up_add(self.hi, -m), up_add(m, -np.asarray(self.lo)))

    def width(self):
        return up_add(self.hi, -np.asarray(self.lo))

    def mag(self):
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self):
        m = np.minimum(np.abs(self.lo), np.abs(self.hi))
        return np.where((np.asarray(self.lo) <= 0) & (np.asarray(self.hi) >= 0), 0.0, m)

    def contains(self, x):
        x = np.asarray(x, float)
        return np.all((self.lo <= x) & (x <= self.hi))

    def subset(self, other):
        other = as_interval(other)
        return bool(np.all((other.lo <= self.lo) & (self.hi <= other.hi)))

    def hull(self, other):
        other = as_interval(other)
        return Interval._raw(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersect(self, other):
        other = as_interval(other)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            raise EnclosureError("empty intersection")
        return Interval._raw(lo, hi)

    # arithmetic
    def __neg__(self):
        return Interval._raw(-np.asarray(self.hi), -np.asarray(self.lo))

    def __pos__(self):
        return self

    def __add__(self, other):
        other = as_interval(other)
        lo = add_bounds(self.lo, other.lo)[0]
        hi = add_bounds(self.hi, other.hi)[1]
        return Interval._raw(lo, hi)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-as_interval(other))

    def __rsub__(self, other):
        return as_interval(other) + (-self)

    def __mul__(self, other):
        other = as_interval(other)
        if self.lo is self.hi and other.lo is other.hi:
            lo, hi = mul_bounds(self.lo, other.lo)
            return Interval._raw(lo, hi)
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        prods = [mul_bounds(x, y) for x, y in ((a, c), (a, d), (b, c), (b, d))]
        lo = np.minimum.reduce([p[0] for p in prods])
        hi = np.maximum.reduce([p[1] for p in prods])
        return Interval._raw(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_interval(other)
        if np.any((np.asarray(other.lo) <= 0) & (np.asarray(other.hi) >= 0)):
            raise EnclosureError("division by an interval containing zero")
        a, b, c, d = self.lo, self.hi, other.lo, other.hi
        quots = [div_bounds(x, y) for x, y in ((a, c), (a, d), (b, c), (b, d))]
        lo = np.minimum.reduce([q[0] for q in quots])
        hi = np.maximum.reduce([q[1] for q in quots])
        return Interval._raw(lo, hi)

    def __rtruediv__(self, other):
        return as_interval(other) / self

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise DomainError("only nonnegative integer powers are supported")
        if n == 0:
            return Interval._raw(np.ones_like(self.lo), np.ones_like(self.lo))
        if n % 2 == 0:
            base = abs(self)
        else:
            base = self
        out = base
        for _ in range(n - 1):
            out = out * base
        return out

    def __abs__(self):
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        new_lo = np.where(lo >= 0, lo, np.where(hi <= 0, -hi, 0.0))
        new_hi = np.maximum(-lo, hi)
        return Interval._raw(new_lo, new_hi)

    def sqr(self):
        a = abs(self)
        return a * a

    def sum(self, axis=None):
        """Enclosure of the sum along ``axis``."""
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        n = lo.size if axis is None else lo.shape[axis]
        g = _gamma_up(max(n, 1))
        slo = np.sum(lo, axis=axis)
        shi = np.sum(hi, axis=axis)
        elo = up_sum(np.abs(lo), axis) * g
        ehi = up_sum(np.abs(hi), axis) * g
        return Interval._raw(_down(slo - _up(elo) - n * _ETA), _up(shi + _up(ehi) + n * _ETA))

    def __matmul__(self, other):
        return imatmul(self, other)

    def __rmatmul__(self, other):
        return imatmul(other, self)

    # comparisons return plain booleans about certainty
    def certainly_lt(self, other):
        other = as_interval(other)
        return bool(np.all(np.asarray(self.hi) < np.asarray(other.lo)))

    def certainly_positive(self):
        return bool(np.all(np.asarray(self.lo) > 0))

    def certainly_negative(self):
        return bool(np.all(np.asarray(self.hi) < 0))


def as_interval(x):
    if isinstance(x, Interval):
        return x
    if isinstance(x, str):
        return Interval.from_decimal(x)
    x = np.asarray(x, dtype=float)
    return Interval._raw(x, x)


def point(x):
    return as_interval(x)


def sqrt(a):
    a = as_interval(a)
    if np.any(np.asarray(a.lo) < 0):
        raise DomainError("sqrt of an interval with negative lower endpoint")

    def bounds(x):
        x = np.asarray(x, float)
        s = np.sqrt(x)
        p, e = _two_prod(s, s)
        r = (x - p) - e
        return _directed(s, r)

    return Interval._raw(bounds(a.lo)[0], bounds(a.hi)[1])


def _libm_widen(v, k=4):
    sp = np.spacing(np.abs(v))
    return v - k * sp, v + k * sp


def exp(a):
    """Enclosure of exp; libm results are widened by four ulps."""
    a = as_interval(a)
    with np.errstate(over="ignore"):
        lo = _libm_widen(np.exp(a.lo))[0]
        hi = _libm_widen(np.exp(a.hi))[1]
    return Interval._raw(np.maximum(lo, 0.0), hi)


def log(a):
    """Enclosure of log for positive intervals; widened by four ulps."""
    a = as_interval(a)
    if np.any(np.asarray(a.lo) <= 0):
        raise DomainError("log of a non-positive interval")
    lo = _libm_widen(np.log(a.lo))[0]
    hi = _libm_widen(np.log(a.hi))[1]
    return Interval._raw(lo, hi)


def abs_upper(a):
    """sup |x| over the interval, as a float (exact: endpoints are floats)."""
    return as_interval(a).mag()


def imax(items):
    items = [as_interval(i) for i in items]
    return Interval._raw(np.maximum.reduce([i.lo for i in items]),
                         np.maximum.reduce([i.hi for i in items]))


def imin(items):
    items = [as_interval(i) for i in items]
    return Interval._raw(np.minimum.reduce([i.lo for i in items]),
                         np.minimum.reduce([i.hi for i in items]))


def stack(items, axis=0):
    items = [as_interval(i) for i in items]
    return Interval._raw(np.stack([np.asarray(i.lo) for i in items], axis=axis),
                         np.stack([np.asarray(i.hi) for i in items], axis=axis))


def concatenate(items, axis=0):
    items = [as_interval(i) for i in items]
    return Interval._raw(np.concatenate([np.atleast_1d(i.lo) for i in items], axis=axis),
                         np.concatenate([np.atleast_1d(i.hi) for i in items], axis=axis))


def _mid_rad(x):
    if isinstance(x, Interval):
        return np.asarray(x.mid()), np.asarray(x.rad())
    x = np.asarray(x, float)
    return x, None


def imatmul(a, b):
    """Enclosure of a matrix (or matrix-vector) product.

    Either factor may be a float array (exact data) or an :class:`Interval`.
    """
    ma, ra = _mid_rad(a)
    mb, rb = _mid_rad(b)
    c = ma @ mb
    aa = np.abs(ma)
    ab = np.abs(mb)
    n = ma.shape[-1]
    # rounding error of the midpoint product
    err = _up(_gamma_up(n) * up_matmul(aa, ab))
    if rb is not None:
        err = up_add(err, up_matmul(aa, rb))
    if ra is not None:
        wb = ab if rb is None else up_add(ab, rb)
        err = up_add(err, up_matmul(ra, wb))
    err = up_add(err, n * _ETA)
    lo = add_bounds(c, -err)[0]
    hi = add_bounds(c, err)[1]
    return Interval._raw(lo, hi)


def _slice_split(M, axis, beta, max_slices):
    """Split ``M`` into slices with aligned exponents along ``axis``.

    Each slice holds integer multiples of ``2**(E + beta - 53)`` where
    ``2**E`` bounds the remaining magnitudes of its row (axis=1) or column
    (axis=0).  Returns the slices, their exponents and the exact remainder.
    """
    R = np.array(M, float)
    slices, exps = [], []
    for _ in range(max_slices):
        mx = np.max(np.abs(R), axis=axis, keepdims=True)
        if not np.any(mx > 0):
            break
        with np.errstate(divide="ignore"):
            E = np.where(mx > 0, np.ceil(np.log2(np.where(mx > 0, mx, 1.0))), -np.inf)
        E = np.where(np.isfinite(E) & (2.0 ** np.where(np.isfinite(E), E, 0) < mx), E + 1, E)
        sigma = np.where(np.isfinite(E), np.ldexp(1.0, np.where(np.isfinite(E), E + beta, 0).astype(int)), 0.0)
        S = (R + sigma) - sigma
        R = R - S
        slices.append(S)
        exps.append(E)
    return slices, exps, R


def exact_matmul(a, b, max_slices=4):
    """Tight enclosure of ``a @ b`` for float matrices.

    Both factors are cut into slices with about 20 significant bits so that
    every slice product is computed exactly by BLAS regardless of summation
    order; only the final summation of the slice products and the (tiny)
    unsplit remainders contribute width.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n = a.shape[-1]
    beta = int(np.ceil((55 + np.log2(max(n, 2))) / 2)) + 1
    sa, ea, ra = _slice_split(a, 1, beta, max_slices)
    sb, eb, rb = _slice_split(b, 0, beta, max_slices)
    terms = []
    extra = Interval(np.zeros((a.shape[0], b.shape[1])))
    for S, E in zip(sa, ea):
        for T, F in zip(sb, eb):
            unit = E + F + 2 * beta - 106
            if np.all(~np.isfinite(unit) | (unit >= -1000)):
                terms.append(S @ T)
            else:
                extra = extra + imatmul(S, T)
    # remainders: a @ b = (sum S)(sum T) + ra @ b + (a - ra) @ rb
    rad = np.zeros(extra.shape)
    if np.any(ra != 0):
        rad = up_add(rad, up_matmul(np.abs(ra), np.abs(b)))
    if np.any(rb != 0):
        rad = up_add(rad, up_matmul(up_add(np.abs(a), np.abs(ra)), np.abs(rb)))
    terms.sort(key=lambda t: float(np.max(np.abs(t))) if t.size else 0.0)
    acc = extra
    for t in terms:
        acc = acc + t
    return acc + Interval(-rad, rad)


def imatmul_tight(a, b):
    """Enclosure of ``a @ b`` (float ``a``, float or interval ``b``) via :func:`exact_matmul`."""
    mb, rb = _mid_rad(b)
    out = exact_matmul(a, mb)
    if rb is not None and np.any(rb != 0):
        r = up_matmul(np.abs(np.asarray(a, float)), rb)
        out = out + Interval(-r, r)
    return out


def upper(x):
    """Upper endpoint of an interval or the value of a float."""
    if isinstance(x, Interval):
        return x.hi
    return np.asarray(x, float)


def mag(x):
    if isinstance(x, Interval):
        return x.mag()
    return np.abs(np.asarray(x, float))
