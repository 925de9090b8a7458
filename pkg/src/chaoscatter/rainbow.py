"""Rainbow normal form: a model scattering function on one strip of
continuity, the quartic that counts its preimages, discriminants and the
caustic curves.

    p_out = p0 - (chi0 - chi)^2 + b cos(psi)
    dL    = a sin(psi) / (1 - c (chi - chi0))

Eliminating psi gives a monic quartic in x = chi - chi0,
    P(x) = x^4 + A x^2 + B x + C.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import TWO_PI, angle_diff, wrap_angle

NEWTON_TOL = 1e-12
DEDUP_RADIUS = 1e-6
N_PSI_SCAN = 4096


@dataclass(frozen=True)
class NormalFormParams:
    p0: float = 1.0
    chi0: float = math.pi
    a: float = 1.0
    b: float = 0.1
    c: float = 0.1

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("a must be positive")
        if self.b < 0 or self.c < 0:
            raise ValueError("b and c must be >= 0")


@dataclass(frozen=True)
class QuarticCoeffs:
    A: float
    B: float
    C: float
    D: float  # dL^2/a^2 - 1

    def __call__(self, x):
        x = np.asarray(x)
        return x ** 4 + self.A * x ** 2 + self.B * x + self.C

    def roots(self):
        return np.roots([1.0, 0.0, self.A, self.B, self.C])


def model_scattering(chi, psi, nf: NormalFormParams = NormalFormParams()):
    """(p_out, delta_L) of the normal form; vectorised."""
    chi = np.asarray(chi, float)
    psi = np.asarray(psi, float)
    den = 1.0 - nf.c * (chi - nf.chi0)
    if np.any(den == 0.0):
        raise ZeroDivisionError("1 - c (chi - chi0) vanishes")
    p = nf.p0 - (nf.chi0 - chi) ** 2 + nf.b * np.cos(psi)
    dL = nf.a * np.sin(psi) / den
    if p.ndim == 0:
        return float(p), float(dL)
    return p, dL


def model_jacobian(chi, psi, nf: NormalFormParams = NormalFormParams()):
    """Closed-form d(p_out, dL)/d(chi, psi) as a (..., 2, 2) array."""
    chi = np.asarray(chi, float)
    psi = np.asarray(psi, float)
    x = chi - nf.chi0
    den = 1.0 - nf.c * x
    s, co = np.sin(psi), np.cos(psi)
    J = np.empty(chi.shape + (2, 2))
    J[..., 0, 0] = -2.0 * x
    J[..., 0, 1] = -nf.b * s
    J[..., 1, 0] = nf.a * s * nf.c / den ** 2
    J[..., 1, 1] = nf.a * co / den
    return J


def closed_form_weight(chi, psi, nf: NormalFormParams = NormalFormParams()):
    """g = 1/|det J| from the closed-form Jacobian."""
    J = model_jacobian(chi, psi, nf)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    return 1.0 / np.abs(det)


def quartic_coeffs(p_out, delta_L, nf: NormalFormParams = NormalFormParams()) -> QuarticCoeffs:
    a, b, c = nf.a, nf.b, nf.c
    u = p_out - nf.p0
    r = delta_L ** 2 / a ** 2
    A = 2.0 * u + b ** 2 * delta_L ** 2 * c ** 2 / a ** 2
    B = -2.0 * b ** 2 * delta_L ** 2 * c / a ** 2
    C = u ** 2 + b ** 2 * (r - 1.0)
    return QuarticCoeffs(A, B, C, r - 1.0)


def quartic_discriminant(qc: QuarticCoeffs):
    A, B, C = qc.A, qc.B, qc.C
    return (-27.0 * B ** 4 - 4.0 * A ** 3 * B ** 2 + 16.0 * A ** 4 * C
            + 144.0 * A * B ** 2 * C - 128.0 * A ** 2 * C ** 2 + 256.0 * C ** 3)


def root_product_discriminant(roots):
    """prod_{i<j} (r_i - r_j)^2 for the roots of a monic polynomial."""
    r = np.asarray(roots, complex)
    d = 1.0 + 0j
    for i in range(r.size):
        for j in range(i + 1, r.size):
            d *= (r[i] - r[j]) ** 2
    return d.real


def dis6(p_out, delta_L, nf: NormalFormParams = NormalFormParams()):
    a, b, c = nf.a, nf.b, nf.c
    u = np.asarray(p_out, float) - nf.p0
    r = np.asarray(delta_L, float) ** 2 / a ** 2
    D = r - 1.0
    return b ** 2 * D ** 3 + u ** 2 * D ** 2 + 2.0 * u ** 3 * (r + 1.0) * r * c ** 2


@dataclass
class ZeroCurve:
    points: np.ndarray  # (n, 2) columns p_out, delta_L
    closed: bool


def trace_zero_curves(field, p_grid, L_grid, level=0.0):
    """Level set of ``field`` (shape (len(L_grid), len(p_grid))) by marching
    squares. Returns ZeroCurve objects."""
    import contourpy

    gen = contourpy.contour_generator(np.asarray(p_grid), np.asarray(L_grid),
                                      np.asarray(field, float),
                                      line_type=contourpy.LineType.Separate)
    out = []
    for seg in gen.lines(level):
        seg = np.asarray(seg)
        if len(seg) < 2:
            continue
        closed = bool(np.allclose(seg[0], seg[-1]))
        out.append(ZeroCurve(seg, closed))
    return out


def dis6_curves(nf: NormalFormParams = NormalFormParams(), p_range=None, L_range=None, n=400):
    """Zero curves of Dis6 on an n x n grid."""
    if p_range is None:
        p_range = (nf.p0 - 1.5 * max(nf.p0, nf.b), nf.p0 + 0.5 * max(nf.p0, nf.b))
    if L_range is None:
        L_range = (-1.5 * nf.a, 1.5 * nf.a)
    P = np.linspace(*p_range, n)
    Lg = np.linspace(*L_range, n)
    PP, LL = np.meshgrid(P, Lg)
    return trace_zero_curves(dis6(PP, LL, nf), P, Lg)


def caustic_closed_forms(nf: NormalFormParams = NormalFormParams(), n=401):
    """Ellipse and the two parabola-like caustics as (p_out, dL) arrays.

    ellipse:    a^2 (p0 - p)^2 + b^2 dL^2 = a^2 b^2
    parabola+-: dL = +-a / (1 + c s), p = p0 - s^2, s in [-sqrt(p0), sqrt(p0)]
    """
    t = np.linspace(0.0, TWO_PI, n)
    ell = np.column_stack([nf.p0 + nf.b * np.cos(t), nf.a * np.sin(t)])
    s = np.linspace(-math.sqrt(max(nf.p0, 0.0)), math.sqrt(max(nf.p0, 0.0)), n)
    p = nf.p0 - s * s
    up = np.column_stack([p, nf.a / (1.0 + nf.c * s)])
    lo = np.column_stack([p, -nf.a / (1.0 + nf.c * s)])
    return {"ellipse": ell, "parabola+": up, "parabola-": lo}


def _newton(x, psi, p_t, L_t, nf, maxit=50):
    for _ in range(maxit):
        den = 1.0 - nf.c * x
        F1 = nf.p0 - x * x + nf.b * math.cos(psi) - p_t
        F2 = nf.a * math.sin(psi) / den - L_t
        if abs(F1) <= NEWTON_TOL and abs(F2) <= NEWTON_TOL:
            return x, psi, True
        j11, j12 = -2.0 * x, -nf.b * math.sin(psi)
        j21 = nf.a * math.sin(psi) * nf.c / den ** 2
        j22 = nf.a * math.cos(psi) / den
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            return x, psi, False
        dx = (F1 * j22 - F2 * j12) / det
        dp = (j11 * F2 - j21 * F1) / det
        x -= dx
        psi -= dp
    den = 1.0 - nf.c * x
    ok = (abs(nf.p0 - x * x + nf.b * math.cos(psi) - p_t) <= 10 * NEWTON_TOL
          and abs(nf.a * math.sin(psi) / den - L_t) <= 10 * NEWTON_TOL)
    return x, psi, ok


def find_preimages(p_out, delta_L, nf: NormalFormParams = NormalFormParams(), n_psi=N_PSI_SCAN):
    """Brute-force preimages (chi, psi) of (p_out, delta_L) on the torus,
    restricted to the strip where p_out > 0.

    psi is scanned on a grid. On each branch x = +-sqrt(p0 + b cos psi - p_out)
    the dL residual is checked for sign changes, including across the
    junction x = 0 where the branches meet. Candidates are polished by 2D
    Newton and deduplicated.
    """
    if p_out <= 0.0:
        return []
    psi = np.linspace(0.0, TWO_PI, n_psi + 1)
    w = nf.p0 + nf.b * np.cos(psi) - p_out
    valid = w >= 0.0
    s = np.sqrt(np.where(valid, w, 0.0))
    seeds = []
    res = {}
    for sgn in (1.0, -1.0):
        x = sgn * s
        r = nf.a * np.sin(psi) / (1.0 - nf.c * x) - delta_L
        res[sgn] = r
        ok = valid[:-1] & valid[1:]
        ch = ok & (np.sign(r[:-1]) != np.sign(r[1:]))
        for k in np.nonzero(ch)[0]:
            t = r[k] / (r[k] - r[k + 1]) if r[k] != r[k + 1] else 0.5
            seeds.append((x[k] + t * (x[k + 1] - x[k]), psi[k] + t * (psi[k + 1] - psi[k])))
    # junctions: valid runs end where w crosses zero; the branches meet there
    edge = np.nonzero(valid[:-1] != valid[1:])[0]
    for k in edge:
        j = k if valid[k] else k + 1
        if np.sign(res[1.0][j]) != np.sign(res[-1.0][j]):
            seeds.append((0.0, psi[j]))
    found = []
    for x0, p0 in seeds:
        x, ps, ok = _newton(x0, p0, p_out, delta_L, nf)
        if not ok:
            continue
        chi = nf.chi0 + x
        if not (0.0 <= chi < TWO_PI):
            continue
        ps = wrap_angle(ps)
        dup = False
        for c2, p2 in found:
            if math.hypot(chi - c2, float(angle_diff(ps, p2))) < DEDUP_RADIUS:
                dup = True
                break
        if not dup:
            found.append((chi, ps))
    return found


def count_preimages(p_out, delta_L, nf: NormalFormParams = NormalFormParams(), n_psi=N_PSI_SCAN):
    return len(find_preimages(p_out, delta_L, nf, n_psi))


def quartic_real_roots(p_out, delta_L, nf: NormalFormParams = NormalFormParams(), tol=1e-7):
    """Real roots x of P(x), from the companion matrix with Newton polish."""
    qc = quartic_coeffs(p_out, delta_L, nf)
    out = []
    for r in qc.roots():
        if abs(r.imag) > tol * max(1.0, abs(r.real)):
            continue
        x = r.real
        for _ in range(5):
            d = 4 * x ** 3 + 2 * qc.A * x + qc.B
            if d == 0:
                break
            x -= qc(x) / d
        out.append(float(x))
    return sorted(out)


def quartic_preimages(p_out, delta_L, nf: NormalFormParams = NormalFormParams()):
    """Preimages (chi, psi) from the real roots of P(x); psi follows from
    cos(psi) = (p_out - p0 + x^2)/b and sin(psi) = dL (1 - c x)/a."""
    if p_out <= 0.0:
        return []
    if nf.b == 0.0:
        return find_preimages(p_out, delta_L, nf)
    out = []
    for x in quartic_real_roots(p_out, delta_L, nf):
        chi = nf.chi0 + x
        if not (0.0 <= chi < TWO_PI):
            continue
        co = (p_out - nf.p0 + x * x) / nf.b
        si = delta_L * (1.0 - nf.c * x) / nf.a
        out.append((chi, wrap_angle(math.atan2(si, co))))
    return out


def semi_analytic_sigma(p_out, delta_L, nf: NormalFormParams = NormalFormParams()):
    """sigma = sum of closed-form weights over the quartic preimages,
    normalised to a density for (chi, psi) uniform on the torus."""
    pre = quartic_preimages(p_out, delta_L, nf)
    if not pre:
        return 0.0
    g = [float(closed_form_weight(c, p, nf)) for c, p in pre]
    return sum(g) / TWO_PI ** 2


def fold_location(p_out, L_lo, L_hi, nf: NormalFormParams = NormalFormParams()):
    """dL in (L_lo, L_hi) where the quartic discriminant vanishes at fixed
    p_out; the bracket must hold one sign change."""
    f = lambda L: quartic_discriminant(quartic_coeffs(p_out, L, nf))  # noqa: E731
    return brentq(f, L_lo, L_hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def count_region_map(nf: NormalFormParams, p_grid, L_grid, n_psi=N_PSI_SCAN):
    """Preimage counts on a lattice, shape (len(L_grid), len(p_grid))."""
    out = np.zeros((len(L_grid), len(p_grid)), np.int64)
    for i, L in enumerate(L_grid):
        for j, p in enumerate(p_grid):
            out[i, j] = count_preimages(p, L, nf, n_psi)
    return out
