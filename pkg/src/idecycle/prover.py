"""Newton-Kantorovich bounds and radii-polynomial certificates.

For a zero-finding problem ``G(x) = 0`` with approximate zero ``xbar``,
approximate derivative ``A_dagger`` and approximate inverse ``A`` we need

    ||A G(xbar)|| <= Y0,   ||I - A A_dagger|| <= Z0,
    ||A (DG(xbar) - A_dagger)|| <= Z1,   ||A (DG(c) - DG(xbar))|| <= Z2 r.

If ``p(r) = Z2 r^2 - (1 - Z0 - Z1) r + Y0 < 0`` there is a unique zero in the
ball of radius ``r`` about ``xbar``.  All bounds below are upper bounds computed
with outward rounding from the stored float data.
"""

from dataclasses import dataclass, field
import datetime as _dt
import hashlib
import json

import numpy as np

from . import interval as iv
from . import seqspace as ss
from .exceptions import DomainError, ProofError, UnsupportedRigorError
from .interval import Interval


@dataclass
class BoundSet:
    Y0: float
    Z0: float
    Z1: float
    Z2: float
    r_star: float = None

    def as_dict(self):
        return {"Y0": self.Y0, "Z0": self.Z0, "Z1": self.Z1, "Z2": self.Z2}


@dataclass
class ProofCertificate:
    problem: str
    params: dict
    bounds: BoundSet
    r_interval: tuple
    certified_radius: float
    input_sha256: str = ""
    created_at: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat())
    mu_interpretation: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self):
        doc = {"problem": self.problem, "params": self.params, "bounds": self.bounds.as_dict(),
               "r_interval": list(self.r_interval), "certified_radius": self.certified_radius,
               "input_sha256": self.input_sha256, "created_at": self.created_at}
        if self.mu_interpretation:
            doc["mu_interpretation"] = self.mu_interpretation
        if self.extra:
            doc.update(self.extra)
        return doc

    @classmethod
    def from_json(cls, doc):
        b = doc["bounds"]
        bounds = BoundSet(b["Y0"], b["Z0"], b["Z1"], b["Z2"], doc["params"].get("r_star"))
        known = {"problem", "params", "bounds", "r_interval", "certified_radius",
                 "input_sha256", "created_at", "mu_interpretation"}
        return cls(doc["problem"], doc["params"], bounds, tuple(doc["r_interval"]),
                   doc["certified_radius"], doc.get("input_sha256", ""), doc.get("created_at", ""),
                   doc.get("mu_interpretation", ""), {k: v for k, v in doc.items() if k not in known})


def sha256_of(obj):
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


# radii polynomial

def radii_poly(bounds, r):
    r = iv.as_interval(r)
    Y0, Z0, Z1, Z2 = (Interval(v) for v in (bounds.Y0, bounds.Z0, bounds.Z1, bounds.Z2))
    return Z2 * r.sqr() - (1 - Z0 - Z1) * r + Y0


def success_interval(bounds, r_star=None):
    """A verified interval ``(r_lo, r_hi)`` on which ``p(r) < 0``."""
    b = 1.0 - bounds.Z0 - bounds.Z1
    if not b > 0:
        raise ProofError(f"Z0 + Z1 = {bounds.Z0 + bounds.Z1:.3e} is not below 1", "Z0+Z1", bounds)
    disc = b * b - 4 * bounds.Z2 * bounds.Y0
    if not disc > 0:
        raise ProofError("radii polynomial has no positive negativity region", "discriminant", bounds)
    sq = np.sqrt(disc)
    r_min = 2 * bounds.Y0 / (b + sq)
    r_max = (b + sq) / (2 * bounds.Z2) if bounds.Z2 > 0 else np.inf
    if r_star is not None:
        r_max = min(r_max, r_star)
    r_lo = r_min * (1 + 1e-10) if r_min > 0 else 1e-300
    r_hi = r_max * (1 - 1e-10) if np.isfinite(r_max) else 1.0
    if not r_lo < r_hi:
        raise ProofError("empty success interval", "interval", bounds)
    for r in (r_lo, r_hi):
        if not radii_poly(bounds, r).certainly_negative():
            raise ProofError(f"p({r:.3e}) not verified negative", "radii polynomial", bounds)
    return float(r_lo), float(r_hi)


def certified_radius(bounds, r_star=None):
    r_lo, r_hi = success_interval(bounds, r_star)
    r = min(2 * r_lo, r_hi)
    if not radii_poly(bounds, r).certainly_negative():
        raise ProofError("radii polynomial not negative at the chosen radius", "radius", bounds)
    return r, (r_lo, r_hi)


# small helpers for upward-rounded scalar assembly

def _u(x):
    return Interval(float(np.max(x)))


def _wsum(terms):
    """Upper bound of ``sum c_i v_i`` for nonnegative float pairs."""
    acc = Interval(0.0)
    for c, v in terms:
        acc = acc + iv.as_interval(c) * iv.as_interval(float(v))
    return float(acc.hi)


def _block_norms_taylor(M, n, tails=None):
    """4x4 array of column-sum operator norms of the ``n x n`` blocks of ``M``."""
    mag = iv.mag(M)
    out = np.zeros((4, 4))
    for i in range(4):
        for j in range(4):
            blk = mag[i * n:(i + 1) * n, j * n:(j + 1) * n]
            tail = tails if (tails is not None and i == j) else 0.0
            out[i, j] = ss.opnorm_taylor(blk, tail)
    return out


def _weighted_block_norm(norms, mu):
    """``max_i mu_i sum_j ||M_ij|| / mu_j`` rounded up."""
    vals = []
    for i in range(norms.shape[0]):
        s = _wsum((Interval(1.0) / Interval(mu[j]), norms[i, j]) for j in range(norms.shape[1]))
        vals.append(float((Interval(mu[i]) * Interval(s)).hi))
    return max(vals)


# manifold

def manifold_bounds(coeffs, mu=None, return_parts=False):
    """Y0, Z0, Z1, Z2 for the truncated manifold problem (logistic model)."""
    from . import manifold as mf

    prob = coeffs.problem
    a = coeffs.a
    N = coeffs.N
    n = (N + 1) ** 2
    model = prob.model
    mu = mf.default_mu(model) if mu is None else tuple(float(m) for m in mu)
    lams_iv = prob.iv_data()[0]

    DG = mf.DG_matrix(a, prob, rigorous=True)
    A = np.linalg.inv(DG.mid())

    # Y0: finite block through A, tail through the diagonal 1/(alpha.lambda)
    Gfull = mf.G_apply(a, prob, full=True, rigorous=True)
    Gfin = iv.stack([Gfull[j, :N + 1, :N + 1].reshape(n) for j in range(4)]).reshape(4 * n)
    AG = iv.imatmul(A, Gfin)
    AG_mag = AG.mag().reshape(4, n)
    M2 = 2 * N
    a1, a2 = np.meshgrid(np.arange(M2 + 1), np.arange(M2 + 1), indexing="ij")
    dots = abs(iv.as_interval(a1) * lams_iv[0] + iv.as_interval(a2) * lams_iv[1])
    tail_mask = (a1 > N) | (a2 > N)
    y0 = []
    for i in range(4):
        fin = iv.up_sum(AG_mag[i])
        gm = Gfull[i].mag()[tail_mask]
        tail = iv.up_sum(iv.up_div(gm, dots.lo[tail_mask]))
        y0.append(float((Interval(mu[i]) * (Interval(fin) + Interval(tail))).hi))
    Y0 = max(y0)

    # Z0
    B = iv.as_interval(np.eye(4 * n)) - iv.imatmul_tight(A, DG)
    del DG
    Z0 = _weighted_block_norm(_block_norms_taylor(B, n), mu)
    del B

    # Z1: tail of D phi through 1/lambda_*(N)
    lam_min = float(np.min(abs(lams_iv).lo))
    lam_star = iv.mul_bounds(float(N + 1), lam_min)[0]
    s2 = model.sigma_iv.sqr()
    r = model.rho_iv
    norm_b = []
    for j in (0, 2):
        b = iv.as_interval(a[j]) * (2 * r)
        b[0, 0] = b[0, 0] - (1 + r)
        norm_b.append(ss.norm_T(b).hi)
    dphi = np.zeros((4, 4))
    dphi[0, 1] = 1.0
    dphi[1, 0] = s2.hi
    dphi[1, 2] = float((s2 * Interval(norm_b[1])).hi)
    dphi[2, 3] = 1.0
    dphi[3, 2] = s2.hi
    dphi[3, 0] = float((s2 * Interval(norm_b[0])).hi)
    z1 = []
    for i in range(4):
        s = _wsum((Interval(1.0) / Interval(mu[j]), dphi[i, j]) for j in range(4))
        z1.append(float((Interval(mu[i]) * Interval(s) / Interval(lam_star)).hi))
    Z1 = max(z1)

    # Z2: only components 2 and 4 are nonlinear (through a3 and a1)
    tail_inv = float((Interval(1.0) / Interval(lam_star)).hi)
    normsA = _block_norms_taylor(A, n, tails=tail_inv)
    coef = 2 * r * s2
    z2 = []
    for i in range(4):
        t = (Interval(normsA[i, 1]) / Interval(mu[2]).sqr()
             + Interval(normsA[i, 3]) / Interval(mu[0]).sqr())
        z2.append(float((coef * Interval(mu[i]) * t).hi))
    Z2 = max(z2)
    bounds = BoundSet(Y0, Z0, Z1, Z2)
    if return_parts:
        return bounds, {"A": A, "normsA": normsA, "y0": y0, "z1": z1, "z2": z2}
    return bounds


def certify_manifold(coeffs, mu=None):
    from . import manifold as mf

    prob = coeffs.problem
    mu = mf.default_mu(prob.model) if mu is None else tuple(float(m) for m in mu)
    bounds = manifold_bounds(coeffs, mu)
    r, interval = certified_radius(bounds)
    m = prob.model
    return ProofCertificate(
        "manifold",
        {"growth": m.kind, "rho": m.rho, "sigma": m.sigma, "N": coeffs.N, "nu": None,
         "mu": list(mu), "scaling": prob.scaling},
        bounds, interval, r, sha256_of(coeffs.to_json()),
        mu_interpretation="weights (mu1, mu2, mu3, mu4) on (a1, a2, a3, a4) = (sigma, 1, sigma, 1)")


# connecting-orbit boundary value problem

def _bvp_slices(N):
    out = [slice(0, 1), slice(1, 2), slice(2, 3)]
    out += [slice(3 + j * (N + 1), 3 + (j + 1) * (N + 1)) for j in range(4)]
    return out


def _bvp_block_norms(M, N, nu, tail=None):
    """7x7 operator norms of the blocks of ``M`` on ``R^3 x (C_nu)^4``."""
    mag = iv.mag(M)
    sl = _bvp_slices(N)
    out = np.zeros((7, 7))
    for i in range(7):
        for j in range(7):
            blk = mag[sl[i], sl[j]]
            if i < 3 and j < 3:
                out[i, j] = float(blk[0, 0])
            elif i < 3:
                out[i, j] = ss.opnorm_cheb_to_R(blk[0], nu)
            elif j < 3:
                out[i, j] = ss.opnorm_R_to_cheb(blk[:, 0], nu)
            else:
                t = tail if (tail is not None and i == j) else 0.0
                out[i, j] = ss.opnorm_cheb_to_cheb(blk, nu, t)
    return out


def _up(x):
    return float(iv.as_interval(x).hi) if isinstance(x, Interval) else float(x)


def bvp_bounds(problem, x, r_manif, r_star=1e-5, mu=None, return_parts=False):
    """Y0, Z0, Z1, Z2 for the Chebyshev boundary value problem (logistic model).

    ``r_manif`` bounds every Taylor coefficient of the true parameterization
    minus the stored one; ``Z2`` is valid for ``r <= r_star``.
    """
    from . import bvp as bv
    from . import manifold as mf

    model = problem.model
    if model.kind != "logistic":
        raise UnsupportedRigorError("BVP bounds are implemented for the logistic model only")
    N = x.N
    nu = float(problem.nu)
    mu = bv.default_mu(model) if mu is None else tuple(float(m) for m in mu)
    if len(mu) != 7:
        raise ValueError("mu must have 7 entries (L, theta1, theta2, u1..u4)")
    a = problem.manifold.a
    sl = _bvp_slices(N)
    inv_mu = [Interval(1.0) / Interval(m) for m in mu]
    muL, muT1, muT2, mu1, mu2, mu3, mu4 = (Interval(m) for m in mu)
    mu_u = (mu1, mu2, mu3, mu4)
    rman = Interval(float(r_manif))
    s2 = model.sigma_iv.sqr()
    rho = model.rho_iv
    Lb = Interval(x.L)
    th = np.abs(x.theta)
    if np.any(th >= 1):
        raise DomainError("|theta| must be below 1 for the tail estimates")
    w = ss.cheb_weights(nu, N + 1)
    nupow = ss.nu_powers(nu, 2 * N + 2)
    nuN1 = nupow[N + 1]

    DG = bv.DcalG_matrix(x, problem, rigorous=True)
    A = np.linalg.inv(DG.mid())
    absA = np.abs(A)

    # Y0
    scal, U = bv.calG_apply(x, problem, full=True, rigorous=True)
    Gvec = iv.concatenate([scal, U[:, :N + 1].reshape(4 * (N + 1))])
    AG = iv.imatmul(A, Gvec).mag()
    col0 = iv.up_sum(absA[:, [sl[3 + j].start for j in range(4)]], axis=1)
    Umag = U.mag()
    kk = np.arange(N + 1, 2 * N + 2, dtype=float)
    y0 = []
    for al in range(7):
        if al < 3:
            v = Interval(float(AG[al])) + rman * Interval(float(col0[al]))
        else:
            rows = sl[al]
            fin = iv.up_sum(iv.up_mul(AG[rows], w.hi))
            corr = iv.up_sum(iv.up_mul(col0[rows], w.hi))
            tail = iv.up_sum(iv.up_div(iv.up_mul(Umag[al - 3, N + 1:], nupow.hi[N + 1:]), kk))
            v = Interval(fin) + rman * Interval(corr) + Interval(tail)
        y0.append(_up(Interval(mu[al]) * v))
    Y0 = max(y0)

    # Z0
    S = DG.shape[0]
    B = iv.as_interval(np.eye(S)) - iv.imatmul_tight(A, DG)
    del DG
    Z0 = _weighted_block_norm(_bvp_block_norms(B, N, nu), mu)
    del B

    # Z1: componentwise bound zhat of z = (DG(xbar) - A_dagger) h, ||h|| <= 1
    zhat = np.zeros(S)
    zhat[1] = _up((inv_mu[3] + inv_mu[5]) / nuN1)
    zhat[2] = _up((inv_mu[4] + inv_mu[6]) / nuN1)
    t1, t2 = Interval(float(th[0])), Interval(float(th[1]))
    dP_tail = (rman * inv_mu[1] / (1 - t1).sqr() / (1 - t2)
               + rman * inv_mu[2] / (1 - t2).sqr() / (1 - t1))
    psi1 = ss.psi_estimates(x.u[0], N, nu)
    psi3 = ss.psi_estimates(x.u[2], N, nu)
    ups_psi = {0: iv.up_add(psi1[:N], psi1[2:N + 2]), 2: iv.up_add(psi3[:N], psi3[2:N + 2])}
    half_tail = Interval(1.0) / (2 * nuN1)
    for j in range(4):
        base = sl[3 + j].start
        zhat[base] = _up(inv_mu[3 + j] / nuN1 + dP_tail)
        psi = Interval.zeros(N + 1)
        if j in (0, 2):
            other = 1 if j == 0 else 3
            psi[N] = half_tail * inv_mu[3 + other]
        else:
            lin, nl = (0, 2) if j == 1 else (2, 0)
            up_ = Interval(ups_psi[nl])
            psi[1:N] = s2 * 2 * rho * inv_mu[3 + nl] * up_[:N - 1]
            psi[N] = s2 * ((inv_mu[3 + lin] + (1 + rho) * inv_mu[3 + nl]) * half_tail
                           + 2 * rho * inv_mu[3 + nl] * up_[N - 1])
        zhat[base + 1:base + N + 1] = (Lb * psi[1:]).hi
    Az = iv.up_matmul(absA, zhat)
    norms_u = [ss.norm_Cnu(x.u[j], nu).hi for j in range(4)]
    sq = [ss.norm_Cnu(ss.cheb_conv(iv.as_interval(x.u[j]), iv.as_interval(x.u[j])), nu).hi
          for j in (0, 2)]
    sq = {0: sq[0], 2: sq[1]}
    phi_inf = []
    for j in range(4):
        if j in (0, 2):
            other = 1 if j == 0 else 3
            v = Interval(norms_u[other]) * inv_mu[0] + Lb * inv_mu[3 + other]
        else:
            lin, nl = (0, 2) if j == 1 else (2, 0)
            v = s2 * ((Interval(norms_u[lin]) + (1 + rho) * Interval(norms_u[nl])
                       + rho * Interval(sq[nl])) * inv_mu[0]
                      + Lb * (inv_mu[3 + lin] + (1 + rho) * inv_mu[3 + nl]
                              + 2 * rho * Interval(norms_u[nl]) * inv_mu[3 + nl]))
        phi_inf.append(v)
    z1 = []
    for al in range(7):
        if al < 3:
            v = Interval(float(Az[al]))
        else:
            fin = iv.up_sum(iv.up_mul(Az[sl[al]], w.hi))
            v = Interval(fin) + Interval(nu) / (N + 1) * phi_inf[al - 3]
        z1.append(_up(Interval(mu[al]) * v))
    Z1 = max(z1)

    # Z2
    eps = Interval(1.0) / Interval(min(mu[1], mu[2]))
    rad = _up(Interval(r_star) * eps)
    box = [Interval(float(x.theta[i])) + Interval(-rad, rad) for i in range(2)]
    c = [float((Interval(float(th[i])) + Interval(rad)).hi) for i in range(2)]
    if max(c) >= 1:
        raise DomainError("theta box leaves the unit polydisc")
    c1, c2 = Interval(c[0]), Interval(c[1])
    o1, o2 = 1 - c1, 1 - c2
    zeta2 = 2 * rman * (Interval(1.0) / (o1 * o1 * o1 * o2) + Interval(1.0) / (o1 * o1 * o2 * o2)
                        + Interval(1.0) / (o1 * o2 * o2 * o2))
    d11, d12, d22 = (m.mag() for m in mf.eval_D2P_iv(a, box))
    rs = Interval(r_star)
    z2 = [_up(2 * (inv_mu[1].sqr() + inv_mu[2].sqr()) * muL), 0.0, 0.0]
    for j in range(4):
        zeta1 = Interval(float(iv.up_add(iv.up_add(d11[j], iv.up_mul(2.0, d12[j])), d22[j])))
        k0 = eps.sqr() * (zeta1 + zeta2)
        if j in (0, 2):
            other = 1 if j == 0 else 3
            Phi = inv_mu[3 + other]
            cross = inv_mu[3 + other]
            psi_h = Interval(0.0)
        else:
            lin, nl = (0, 2) if j == 1 else (2, 0)
            nu_nl = Interval(norms_u[nl])
            base = inv_mu[3 + lin] + (1 + rho) * inv_mu[3 + nl]
            Phi = s2 * (base + 2 * rho * nu_nl * inv_mu[3 + nl] + rho * rs * inv_mu[3 + nl].sqr())
            cross = s2 * (base + 2 * rho * (nu_nl + rs * inv_mu[3 + nl]) * inv_mu[3 + nl])
            psi_h = 2 * s2 * rho * inv_mu[3 + nl].sqr()
        v = k0 + 2 * Interval(nu) * (Phi * inv_mu[0] + Lb * psi_h + cross * inv_mu[0])
        z2.append(_up(Interval(mu[3 + j]) * v))
    tail_inv = _up(Interval(1.0) / Interval(2.0 * (N + 1)))
    normsA = _bvp_block_norms(A, N, nu, tail=tail_inv)
    normA = _weighted_block_norm(normsA, mu)
    Z2 = _up(Interval(normA) * Interval(max(z2)))
    bounds = BoundSet(Y0, Z0, Z1, Z2, r_star)
    if return_parts:
        return bounds, {"A": A, "normA": normA, "y0": y0, "z1": z1, "z2": z2, "zhat": zhat}
    return bounds


def certify_bvp(problem, x, r_manif, r_star=1e-5, mu=None, manifold_sha256=""):
    from . import bvp as bv

    mu = bv.default_mu(problem.model) if mu is None else tuple(float(m) for m in mu)
    bounds = bvp_bounds(problem, x, r_manif, r_star=r_star, mu=mu)
    r, interval = certified_radius(bounds, r_star)
    m = problem.model
    return ProofCertificate(
        "bvp",
        {"growth": m.kind, "rho": m.rho, "sigma": m.sigma, "N": x.N, "nu": problem.nu,
         "mu": list(mu), "r_star": r_star, "r_manif": float(r_manif)},
        bounds, interval, r, sha256_of(x.to_json()),
        extra={"manifold_sha256": manifold_sha256} if manifold_sha256 else {})
