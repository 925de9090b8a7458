"""Invariant manifolds of the reduced map at A = 0.

The outer fixed points sit at q = +-inf, p = 0 and are parabolic. Their
stable/unstable manifolds are grown from a seed segment close to the
asymptotic region and stored in compactified coordinates z = tanh(q).

Parametrisation: a seed segment covers one fundamental domain [q_a, q_b]
with q_b the image of q_a under the growth direction. A curve point is
identified by (n, s): the seed point at parameter s in [0, 1] iterated n
times. Consecutive (n, s) are ordered along the curve and (n, 1) is the
same point as (n + 1, 0).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from numpy.polynomial import chebyshev as cheb

from .map_model import MapParams, reduced_inverse_kernel, reduced_kernel

UNSTABLE = "unstable"
STABLE = "stable"

DS_MAX = 1e-3
ALPHA_MAX = 0.2
DS_MIN = 1e-7
S_MIN = 1e-14
Q_SEED_GROW = 4.0
CLASSIFY_BUDGET = 5000


class BracketError(RuntimeError):
    pass


class FreeFlightError(ValueError):
    """L = L_max: no force, no returning orbits, no manifolds."""


class NoHorseshoe(RuntimeError):
    pass


class TruncatedCurveWarning(UserWarning):
    pass


def _direction(kind):
    if kind == UNSTABLE:
        return 1
    if kind == STABLE:
        return -1
    raise ValueError(f"kind must be {UNSTABLE!r} or {STABLE!r}")


# ---------------------------------------------------------------- kernels

@nb.njit(cache=True)
def _iter(q, p, k, n, direction):
    for _ in range(n):
        if direction > 0:
            q, p = reduced_kernel(q, p, k)
        else:
            q, p = reduced_inverse_kernel(q, p, k)
    return q, p


@nb.njit(cache=True)
def _classify(q, p, k, direction, side, budget, qfar):
    """1 if the orbit of (q, p) iterated in ``direction`` escapes to the
    ``side`` infinity, 0 if it turns back."""
    if q * side < qfar:
        for _ in range(budget):
            if direction > 0:
                q, p = reduced_kernel(q, p, k)
            else:
                q, p = reduced_inverse_kernel(q, p, k)
            if p * direction * side <= 0.0:
                return 0
            if q * side >= qfar:
                break
    # asymptotically 0.5 p^2 - k exp(-q^2) is conserved
    e = 0.5 * p * p - k * math.exp(-q * q)
    return 1 if e >= 0.0 else 0


@nb.njit(cache=True)
def _clenshaw(x, c):
    b1 = 0.0
    b2 = 0.0
    for j in range(c.size - 1, 0, -1):
        b1, b2 = 2.0 * x * b1 - b2 + c[j], b1
    return x * b1 - b2 + c[0]


@nb.njit(cache=True)
def _eval_seed(s, mode, qa, qb, coef, sgn, tq, tp):
    """Point on the seed at parameter s. mode 0: Chebyshev fit of log|p| over
    q in [qa, qb]; mode 1: piecewise-linear polyline (tq, tp) on a uniform
    parameter grid."""
    if mode == 0:
        q = qa + (qb - qa) * s
        return q, sgn * math.exp(_clenshaw(2.0 * s - 1.0, coef))
    m = tq.size - 1
    x = s * m
    i = int(x)
    if i >= m:
        i = m - 1
    if i < 0:
        i = 0
    t = x - i
    return tq[i] + t * (tq[i + 1] - tq[i]), tp[i] + t * (tp[i + 1] - tp[i])


@nb.njit(cache=True)
def _refine(s, q, p, n, k, direction, mode, qa, qb, coef, sgn, tq, tp,
            ds_max, a_max, ds_min, s_min, max_pts):
    """Insert midpoints (by seed parameter, re-iterated n times) until
    spacing <= ds_max and turning angle <= a_max in (tanh q, p)."""
    for _ in range(200):
        N = s.size
        if N < 2:
            return s, q, p, True
        z = np.tanh(q)
        dl = np.empty(N - 1)
        for i in range(N - 1):
            dl[i] = math.hypot(z[i + 1] - z[i], p[i + 1] - p[i])
        bad = np.zeros(N - 1, dtype=np.bool_)
        for i in range(N - 1):
            if dl[i] > ds_max:
                bad[i] = True
        for i in range(1, N - 1):
            if dl[i - 1] > 0.0 and dl[i] > 0.0:
                c = ((z[i] - z[i - 1]) * (z[i + 1] - z[i])
                     + (p[i] - p[i - 1]) * (p[i + 1] - p[i])) / (dl[i - 1] * dl[i])
                c = min(1.0, max(-1.0, c))
                if math.acos(c) > a_max:
                    if dl[i - 1] > ds_min:
                        bad[i - 1] = True
                    if dl[i] > ds_min:
                        bad[i] = True
        nb_ = 0
        for i in range(N - 1):
            if bad[i] and s[i + 1] - s[i] > s_min:
                nb_ += 1
            else:
                bad[i] = False
        if nb_ == 0:
            return s, q, p, True
        if N + nb_ > max_pts:
            return s, q, p, False
        s2 = np.empty(N + nb_)
        q2 = np.empty(N + nb_)
        p2 = np.empty(N + nb_)
        j = 0
        for i in range(N):
            s2[j] = s[i]
            q2[j] = q[i]
            p2[j] = p[i]
            j += 1
            if i < N - 1 and bad[i]:
                sm = 0.5 * (s[i] + s[i + 1])
                a, b = _eval_seed(sm, mode, qa, qb, coef, sgn, tq, tp)
                a, b = _iter(a, b, k, n, direction)
                s2[j] = sm
                q2[j] = a
                p2[j] = b
                j += 1
        s, q, p = s2, q2, p2
    return s, q, p, True


@nb.njit(cache=True)
def _iter_arrays(q, p, k, n, direction):
    qo = q.copy()
    po = p.copy()
    for i in range(q.size):
        qo[i], po[i] = _iter(q[i], p[i], k, n, direction)
    return qo, po


@nb.njit(cache=True)
def _seg_hits(z1, p1, z2, p2, cell, lo1, hi1):
    """All crossings of polyline 1 (segments lo1..hi1-1) with polyline 2.

    Returns rows (t1, t2, z, p, angle) where t1, t2 are fractional vertex
    indices and angle in [0, pi/2] is the crossing angle.
    """
    n2 = z2.size - 1
    zmin = min(z1.min(), z2.min())
    pmin = min(p1.min(), p2.min())
    zmax = max(z1.max(), z2.max())
    pmax = max(p1.max(), p2.max())
    nx = int((zmax - zmin) / cell) + 1
    ny = int((pmax - pmin) / cell) + 1
    counts = np.zeros(nx * ny + 1, np.int64)
    for j in range(n2):
        i0 = int((min(z2[j], z2[j + 1]) - zmin) / cell)
        i1 = int((max(z2[j], z2[j + 1]) - zmin) / cell)
        j0 = int((min(p2[j], p2[j + 1]) - pmin) / cell)
        j1 = int((max(p2[j], p2[j + 1]) - pmin) / cell)
        for a in range(i0, i1 + 1):
            for b in range(j0, j1 + 1):
                counts[a * ny + b + 1] += 1
    start = np.cumsum(counts)
    fill = start.copy()
    idx = np.empty(start[-1], np.int64)
    for j in range(n2):
        i0 = int((min(z2[j], z2[j + 1]) - zmin) / cell)
        i1 = int((max(z2[j], z2[j + 1]) - zmin) / cell)
        j0 = int((min(p2[j], p2[j + 1]) - pmin) / cell)
        j1 = int((max(p2[j], p2[j + 1]) - pmin) / cell)
        for a in range(i0, i1 + 1):
            for b in range(j0, j1 + 1):
                idx[fill[a * ny + b]] = j
                fill[a * ny + b] += 1
    out = []
    last = np.full(n2, -1, np.int64)
    for i in range(lo1, hi1):
        i0 = int((min(z1[i], z1[i + 1]) - zmin) / cell)
        i1 = int((max(z1[i], z1[i + 1]) - zmin) / cell)
        j0 = int((min(p1[i], p1[i + 1]) - pmin) / cell)
        j1 = int((max(p1[i], p1[i + 1]) - pmin) / cell)
        r1 = z1[i + 1] - z1[i]
        r2 = p1[i + 1] - p1[i]
        for a in range(i0, i1 + 1):
            for b in range(j0, j1 + 1):
                c = a * ny + b
                for m in range(start[c], start[c + 1]):
                    j = idx[m]
                    if last[j] == i:
                        continue
                    last[j] = i
                    s1 = z2[j + 1] - z2[j]
                    s2 = p2[j + 1] - p2[j]
                    den = r1 * s2 - r2 * s1
                    if den == 0.0:
                        continue
                    dz = z2[j] - z1[i]
                    dp = p2[j] - p1[i]
                    t = (dz * s2 - dp * s1) / den
                    u = (dz * r2 - dp * r1) / den
                    if 0.0 <= t < 1.0 and 0.0 <= u < 1.0:
                        ang = math.asin(min(1.0, abs(den) / (math.hypot(r1, r2) * math.hypot(s1, s2))))
                        out.append((i + t, j + u, z1[i] + t * r1, p1[i] + t * r2, ang))
    res = np.empty((len(out), 5))
    for r in range(len(out)):
        for c in range(5):
            res[r, c] = out[r][c]
    return res


# ---------------------------------------------------------------- types

@dataclass
class Seed:
    """Seed segment covering one fundamental domain of a branch."""

    kind: str
    side: int
    L: float
    k: float
    mode: int
    qa: float
    qb: float
    coef: np.ndarray
    sign: float
    tq: np.ndarray = field(default_factory=lambda: np.zeros(2))
    tp: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def direction(self) -> int:
        return _direction(self.kind)

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.array([_eval_seed(x, self.mode, self.qa, self.qb, self.coef,
                                   self.sign, self.tq, self.tp) for x in s])
        return out[:, 0], out[:, 1]


@dataclass
class ManifoldCurve:
    """Oriented polyline of one manifold branch.

    ``side`` is -1/+1 for the fixed point at -inf/+inf. Arrays are aligned:
    q, p the points, n the iteration index and s the seed parameter.
    """

    kind: str
    side: int
    L: float
    q: np.ndarray
    p: np.ndarray
    n: np.ndarray
    s: np.ndarray
    truncated: bool = False

    @property
    def z(self) -> np.ndarray:
        return np.tanh(self.q)

    @property
    def branch(self):
        return (self.kind, self.side)

    def arclength(self) -> float:
        z = self.z
        return float(np.hypot(np.diff(z), np.diff(self.p)).sum())

    def time_reversed(self) -> "ManifoldCurve":
        """(q, p) -> (q, -p): unstable <-> stable of the same side."""
        kind = STABLE if self.kind == UNSTABLE else UNSTABLE
        return ManifoldCurve(kind, self.side, self.L, self.q.copy(), -self.p,
                             self.n, self.s, self.truncated)

    def inverted(self) -> "ManifoldCurve":
        """(q, p) -> (-q, -p): branch of -inf <-> branch of +inf."""
        return ManifoldCurve(self.kind, -self.side, self.L, -self.q, -self.p,
                             self.n, self.s, self.truncated)


@dataclass
class LineC:
    """Line of initial conditions in the (q, p) plane. ``points`` is an
    ordered polyline; a plain segment has two points.

    When ``base`` is set the line is exactly T^base_n(base), and points
    between the samples are evaluated through that construction.
    """

    points: np.ndarray
    L: float = 0.0
    base: np.ndarray | None = None
    base_n: int = 0

    @property
    def endpoints(self):
        return self.points[0].copy(), self.points[-1].copy()

    @classmethod
    def segment(cls, a, b, L=0.0):
        return cls(np.array([a, b], dtype=float), L)


# ---------------------------------------------------------------- seeds

def separatrix_p(q, L, kind, side, params=MapParams(), budget=CLASSIFY_BUDGET,
                 qfar=8.0, tol=1e-13):
    """Momentum of the branch at fixed q, by bisection between a returning
    and an escaping initial condition."""
    k = params.L_max - L
    if k <= 0.0:
        raise FreeFlightError("L >= L_max: free flight, no returning orbits")
    direction = _direction(kind)
    cls_dir = -direction  # backward for unstable, forward for stable
    sgn = float(cls_dir * side)
    lo = 0.0
    hi = 2.0 * math.sqrt(2.0 * k * math.exp(-q * q)) + 1e-300
    for _ in range(200):
        if _classify(q, sgn * hi, k, cls_dir, side, budget, qfar):
            break
        hi *= 2.0
    else:
        raise BracketError(f"no escaping momentum found at q={q}")
    if _classify(q, 0.0, k, cls_dir, side, budget, qfar):
        raise BracketError(f"p=0 already escapes at q={q}")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if _classify(q, sgn * mid, k, cls_dir, side, budget, qfar):
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * hi:
            break
    return sgn * 0.5 * (lo + hi)


def seed_outer_manifold(side, kind, L, params=MapParams(), q_seed=Q_SEED_GROW,
                        degree=24, budget=CLASSIFY_BUDGET):
    """Seed segment of the branch of the fixed point at side*inf.

    The branch momentum is bisected on Chebyshev nodes of one fundamental
    domain [q_a, q_b] and log|p| is interpolated there.
    """
    side = 1 if side > 0 else -1
    k = params.L_max - L
    if k <= 0.0:
        raise FreeFlightError("L >= L_max: free flight, no returning orbits")
    direction = _direction(kind)
    qa = side * abs(q_seed)
    pa = separatrix_p(qa, L, kind, side, params, budget)
    qb, _ = _iter(qa, pa, k, 1, direction)
    x = np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1))
    qq = qa + (qb - qa) * (x + 1.0) / 2.0
    pp = np.array([separatrix_p(v, L, kind, side, params, budget) for v in qq])
    coef = cheb.chebfit(x, np.log(np.abs(pp)), degree)
    return Seed(kind, side, L, k, 0, qa, qb, coef, float(np.sign(pa)))


# ---------------------------------------------------------------- growth

def _grow_from(seed: Seed, budget, max_iter, ds_max, alpha_max, max_points,
               until_crossing=False, s0=None):
    k = seed.k
    d = seed.direction
    s = np.linspace(0.0, 1.0, 33) if s0 is None else np.asarray(s0, float)
    qs, ps = seed(s)
    Q, P, N, S = [], [], [], []
    total = 0.0
    npts = 0
    truncated = False
    n = 0
    while True:
        s, qs, ps, ok = _refine(s, qs, ps, n, k, d, seed.mode, seed.qa, seed.qb,
                                seed.coef, seed.sign, seed.tq, seed.tp,
                                ds_max, alpha_max, DS_MIN, S_MIN,
                                max_points - npts)
        if not ok:
            truncated = True
        z = np.tanh(qs)
        cl = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(z), np.diff(ps)))])
        last = n >= max_iter or truncated
        if total + cl[-1] >= budget:
            m = int(np.searchsorted(cl, budget - total)) + 1
            m = min(m, s.size)
            last = True
        else:
            m = s.size if last else s.size - 1
        Q.append(qs[:m])
        P.append(ps[:m])
        N.append(np.full(m, n))
        S.append(s[:m])
        npts += m
        total += cl[m - 1]
        if until_crossing and np.any(np.diff(np.sign(qs)) != 0):
            last = True
        if last:
            break
        qs, ps = _iter_arrays(qs, ps, k, 1, d)
        n += 1
    if truncated:
        warnings.warn("manifold point ceiling reached; curve truncated",
                      TruncatedCurveWarning, stacklevel=3)
    return (np.concatenate(Q), np.concatenate(P), np.concatenate(N),
            np.concatenate(S), truncated)


def grow_manifold(seed: Seed, budget=np.inf, max_iter=100_000, ds_max=DS_MAX,
                  alpha_max=ALPHA_MAX, max_points=4_000_000,
                  until_crossing=False) -> ManifoldCurve:
    """Grow a branch from its seed.

    Growth stops at the compactified arclength ``budget``, after
    ``max_iter`` fundamental domains, at the point ceiling, or (with
    ``until_crossing``) once a fundamental domain crosses q = 0.
    """
    if not np.isfinite(budget) and max_iter >= 100_000 and not until_crossing:
        raise ValueError("give a finite arclength budget or max_iter")
    q, p, n, s, tr = _grow_from(seed, budget, max_iter, ds_max, alpha_max,
                                max_points, until_crossing)
    return ManifoldCurve(seed.kind, seed.side, seed.L, q, p, n, s, tr)


def manifold(side, kind, L, params=MapParams(), **kw) -> ManifoldCurve:
    """Seed and grow in one call; keyword arguments go to grow_manifold."""
    q_seed = kw.pop("q_seed", Q_SEED_GROW)
    seed = seed_outer_manifold(side, kind, L, params, q_seed=q_seed)
    return grow_manifold(seed, **kw)


def point_on_curve(seed: Seed, n, s):
    q, p = seed(s)
    return _iter_arrays(q, p, seed.k, int(n), seed.direction)


# ---------------------------------------------------------------- intersections

def curve_intersections(z1, p1, z2, p2, cell=0.02, lo=0, hi=None):
    """Crossings between two polylines, rows (t1, t2, z, p, angle)."""
    z1 = np.ascontiguousarray(z1, float)
    p1 = np.ascontiguousarray(p1, float)
    z2 = np.ascontiguousarray(z2, float)
    p2 = np.ascontiguousarray(p2, float)
    if hi is None:
        hi = z1.size - 1
    if z1.size < 2 or z2.size < 2:
        return np.empty((0, 5))
    return _seg_hits(z1, p1, z2, p2, cell, int(lo), int(hi))


def point_polyline_distance(z, p, cz, cp):
    """Distance from points (z, p) to the polyline (cz, cp)."""
    z = np.atleast_1d(z)
    p = np.atleast_1d(p)
    az, ap = cz[:-1], cp[:-1]
    bz, bp = cz[1:] - az, cp[1:] - ap
    L2 = np.maximum(bz * bz + bp * bp, 1e-300)
    out = np.empty(z.size)
    for i in range(z.size):
        t = np.clip(((z[i] - az) * bz + (p[i] - ap) * bp) / L2, 0.0, 1.0)
        out[i] = np.sqrt(np.min((az + t * bz - z[i]) ** 2 + (ap + t * bp - p[i]) ** 2))
    return out


# ---------------------------------------------------------------- rectangle

@dataclass
class FundamentalRectangle:
    """Curvilinear quadrilateral bounded by the four outer branches up to
    their first mutual intersections on q = 0."""

    L: float
    corner_upper: tuple
    corner_lower: tuple
    arcs: dict  # branch -> (z, p) up to the corner
    corner_param: tuple  # (n, s) of the upper corner on W^u(-inf)
    seeds: dict


def _polish_corner(seed: Seed, curve: ManifoldCurve, tol=1e-14):
    """First q = 0 crossing of the curve, located by bisection in s."""
    q = curve.q
    sg = np.sign(q)
    idx = np.nonzero(sg[:-1] * sg[1:] <= 0)[0]
    for i in idx:
        if curve.n[i] == curve.n[i + 1]:
            n = int(curve.n[i])
            a, b = float(curve.s[i]), float(curve.s[i + 1])
            qa = point_on_curve(seed, n, a)[0][0]
            for _ in range(200):
                m = 0.5 * (a + b)
                qm = point_on_curve(seed, n, m)[0][0]
                if np.sign(qm) == np.sign(qa) and qm != 0.0:
                    a, qa = m, qm
                else:
                    b = m
                if b - a <= tol:
                    break
            m = 0.5 * (a + b)
            qc, pc = point_on_curve(seed, n, m)
            return n, m, float(qc[0]), float(pc[0])
    raise NoHorseshoe("no crossing of q = 0 located")


def fundamental_rectangle(L, params=MapParams(), max_iter=20_000, ds_max=DS_MAX,
                          alpha_max=ALPHA_MAX):
    """Grow the four outer branches until they first meet on q = 0."""
    arcs = {}
    seeds = {}
    corners = {}
    for kind in (UNSTABLE, STABLE):
        for side in (-1, 1):
            seed = seed_outer_manifold(side, kind, L, params)
            c = grow_manifold(seed, max_iter=max_iter, ds_max=ds_max,
                              alpha_max=alpha_max, until_crossing=True)
            if not np.any(np.sign(c.q[:-1]) != np.sign(c.q[1:])):
                raise NoHorseshoe(f"no q = 0 crossing within {max_iter} iterations")
            n, s, qc, pc = _polish_corner(seed, c)
            keep = (c.n < n) | ((c.n == n) & (c.s <= s))
            z = np.append(np.tanh(c.q[keep]), np.tanh(qc))
            p = np.append(c.p[keep], pc)
            arcs[(kind, side)] = (z, p)
            seeds[(kind, side)] = seed
            corners[(kind, side)] = (n, s, qc, pc)
    n, s, qc, pc = corners[(UNSTABLE, -1)]
    upper = (qc, pc)
    lower = (corners[(UNSTABLE, 1)][2], corners[(UNSTABLE, 1)][3])
    return FundamentalRectangle(L, upper, lower, arcs, (n, s), seeds)


# ---------------------------------------------------------------- development

@dataclass
class DevelopmentReport:
    L: float
    count: int
    hits: np.ndarray  # rows (z, p, angle)
    corner: tuple
    n_corner: int
    extra_iterations: int


def development_count(L, params=MapParams(), extra_iterations=3, min_angle=1e-3,
                      ds_max=DS_MAX, alpha_max=ALPHA_MAX, max_iter=20_000):
    """Transverse intersections of one fundamental segment of W^u(-inf)
    with the stable branches, both grown ``extra_iterations`` fundamental
    domains past the first corner of R.

    The fundamental segment runs from the preimage of the upper corner
    (excluded) to the corner (included), so each homoclinic or heteroclinic
    orbit crossing it is counted once. Crossings with angle below
    ``min_angle`` are treated as unresolved tangencies and not counted.
    """
    k = params.L_max - L
    if k <= 0.0:
        return DevelopmentReport(L, 0, np.empty((0, 3)), (np.nan, np.nan), -1,
                                 extra_iterations)
    seed = seed_outer_manifold(-1, UNSTABLE, L, params)
    first = grow_manifold(seed, max_iter=max_iter, ds_max=ds_max,
                          alpha_max=alpha_max, until_crossing=True)
    if not np.any(np.sign(first.q[:-1]) != np.sign(first.q[1:])):
        raise NoHorseshoe(f"no q = 0 crossing within {max_iter} iterations")
    nc, sc, qc, pc = _polish_corner(seed, first)
    u = grow_manifold(seed, max_iter=nc + extra_iterations, ds_max=ds_max,
                      alpha_max=alpha_max)
    z, p = u.z, u.p
    # fundamental segment from (nc - 1, sc) to (nc, sc), corner spliced in
    seg = ((u.n == nc - 1) & (u.s > sc)) | ((u.n == nc) & (u.s < sc))
    i0 = int(np.argmax(seg))
    i1 = i0 + int(seg.sum())
    qpre, ppre = point_on_curve(seed, nc - 1, sc)
    fz = np.concatenate([[math.tanh(qpre[0])], z[i0:i1], [math.tanh(qc)], z[i1:i1 + 1]])
    fp = np.concatenate([[ppre[0]], p[i0:i1], [pc], p[i1:i1 + 1]])
    ncorner = fz.size - 2  # vertex index of the corner
    hits = []
    # stable branches by the exact symmetries of the reduced map
    for sz, sp in ((-z, p), (z, -p)):
        h = curve_intersections(fz, fp, sz, sp, lo=0, hi=ncorner)
        hits.append(h)
    h = np.concatenate(hits) if hits else np.empty((0, 5))
    h = h[h[:, 0] > 1e-9]  # the preimage of the corner belongs to the corner orbit
    # the corner itself: tangent of W^u there against its mirror image
    tz, tp_ = fz[ncorner] - fz[ncorner - 1], fp[ncorner] - fp[ncorner - 1]
    ang_c = 2.0 * math.atan2(abs(tz), abs(tp_))
    ang_c = min(ang_c, math.pi - ang_c)
    rows = [(r[2], r[3], r[4]) for r in h]
    rows.append((0.0, pc, ang_c))
    rows = np.array(rows)
    # drop duplicates of the corner found by the segment test
    keep = np.ones(len(rows), bool)
    for i in range(len(rows) - 1):
        if abs(rows[i, 0]) < 1e-9 and abs(rows[i, 1] - pc) < 1e-9:
            keep[i] = False
    rows = rows[keep]
    count = int(np.sum(rows[:, 2] >= min_angle))
    return DevelopmentReport(L, count, rows, (qc, pc), nc, extra_iterations)


# ---------------------------------------------------------------- line C

def line_c_offset(L, params=MapParams(), eps=1e-3, npts=64, rect=None):
    """Line C: the fundamental segment of W^u(-inf) that ends at the upper
    corner of R, shifted outward (away from R) by ``eps`` in (z, p)."""
    if rect is None:
        rect = fundamental_rectangle(L, params)
    seed = rect.seeds[(UNSTABLE, -1)]
    n, s = rect.corner_param
    ss = np.linspace(0.0, 1.0, npts)
    # parameter path (n-1, s..1) then (n, 0..s)
    pts = []
    for t in ss:
        u = s + t  # in [s, s + 1]
        nn, uu = (n - 1, u) if u <= 1.0 else (n, u - 1.0)
        qq, pp = point_on_curve(seed, nn, uu)
        pts.append((math.tanh(qq[0]), pp[0]))
    pts = np.array(pts)
    tan = np.gradient(pts, axis=0)
    nrm = np.stack([-tan[:, 1], tan[:, 0]], axis=1)
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    # outward: away from the origin, which lies inside R
    if np.mean(np.sum(nrm * pts, axis=1)) < 0:
        nrm = -nrm
    off = pts + eps * nrm
    q = np.arctanh(np.clip(off[:, 0], -1 + 1e-16, 1 - 1e-16))
    return LineC(np.stack([q, off[:, 1]], axis=1), L)


def image_line(line: LineC, n: int, params=MapParams(), ds_max=DS_MAX,
               alpha_max=ALPHA_MAX, max_points=2_000_000):
    """T^n(C) for n of either sign, adaptively resampled. Returns (q, p)."""
    k = params.L_max - line.L
    if line.base is None:
        base, n_net = np.asarray(line.points, float), int(n)
    else:
        # T^n T^m (base) = T^(n+m) (base): iterate the base directly, which
        # avoids forward/backward round trips through the chaotic region
        base, n_net = np.asarray(line.base, float), int(n) + int(line.base_n)
    d = 1 if n_net >= 0 else -1
    tq = np.ascontiguousarray(base[:, 0])
    tp = np.ascontiguousarray(base[:, 1])
    s = np.linspace(0.0, 1.0, max(33, base.shape[0]))
    qs, ps = np.array([_eval_seed(x, 1, 0.0, 1.0, np.zeros(1), 1.0, tq, tp) for x in s]).T
    qs, ps = _iter_arrays(qs, ps, k, abs(n_net), d)
    s, qs, ps, ok = _refine(s, qs, ps, abs(n_net), k, d, 1, 0.0, 1.0, np.zeros(1), 1.0,
                            tq, tp, ds_max, alpha_max, DS_MIN, S_MIN, max_points)
    if not ok:
        warnings.warn("line point ceiling reached", TruncatedCurveWarning, stacklevel=2)
    return qs, ps


def preimage_line(line: LineC, n: int, params=MapParams(), **kw):
    """T^{-n}(C): the inverse reduced map applied n times to C."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return line.points[:, 0].copy(), line.points[:, 1].copy()
    return image_line(line, -n, params, **kw)


def asymptotic_window_line(q_range=(-6.962, -6.912), p_in=0.05, n=312, L=0.0,
                           params=MapParams(), npts=33):
    """Line whose n-th preimage is the asymptotic window {q in q_range, p = p_in}:
    the window iterated n times forward, sampled at ``npts`` parameters."""
    q0 = np.linspace(q_range[0], q_range[1], npts)
    p0 = np.full(npts, p_in)
    q1, p1 = _iter_arrays(q0, p0, params.L_max - L, n, 1)
    base = np.array([[q_range[0], p_in], [q_range[1], p_in]])
    return LineC(np.stack([q1, p1], axis=1), L, base, n)


# ---------------------------------------------------------------- stacking

def stack_tangle(L_grid, params=MapParams(), kinds=((UNSTABLE, -1), (STABLE, 1)),
                 **grow_kw):
    """Manifold curves per L value. Per-L failures are recorded, not raised."""
    grow_kw.setdefault("max_iter", 100_000)
    out = {}
    errors = {}
    for L in L_grid:
        try:
            out[float(L)] = [manifold(side, kind, float(L), params, **dict(grow_kw))
                             for kind, side in kinds]
        except (FreeFlightError, BracketError, NoHorseshoe) as e:
            errors[float(L)] = repr(e)
    return out, errors


def tangle_extrema(L_values, zeta_values):
    """L-extrema of a curve parametrised by zeta in the 3D stack, located by
    local quadratic fits. Returns (zeta*, L*) pairs."""
    L_values = np.asarray(L_values, float)
    zeta_values = np.asarray(zeta_values, float)
    out = []
    for i in range(1, L_values.size - 1):
        a, b, c = L_values[i - 1:i + 2]
        if (b - a) * (c - b) < 0:
            co = np.polyfit(zeta_values[i - 1:i + 2], L_values[i - 1:i + 2], 2)
            if co[0] != 0.0:
                zs = -co[1] / (2 * co[0])
                out.append((zs, np.polyval(co, zs)))
    return out
