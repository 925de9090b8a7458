"""Scattering functions of the kicked map on the torus of incoming phases.

Incoming asymptotes are parametrised by (chi, psi): chi runs linearly over
one fundamental window of the initial line q in [Q, Q + |p_in|) at fixed
p_in, and psi is the initial rotation angle theta. The default window is
q in [-6.962, -6.912] with p_in = 0.05.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .core import (MAP_STEP_BUDGET, Q_ASYM, TWO_PI, OutcomeClass, PhasePoint,
                   ScatteringRecord)
from .map_model import MapParams, step_kernel

Q_WINDOW = -6.962
P_IN = 0.05
DIP_TOL = 0.005
SLOW_FRACTION = 0.8
JUMP_TOL = 0.25


@dataclass(frozen=True)
class TorusGrid:
    n_chi: int
    n_psi: int
    p_in: float = P_IN
    L_in: float = 0.0
    q_window: float = Q_WINDOW

    def __post_init__(self):
        if self.n_chi < 1 or self.n_psi < 1:
            raise ValueError("grid needs at least one node per axis")
        if self.p_in == 0.0:
            raise ValueError("p_in must be nonzero")

    @property
    def chi(self):
        return TWO_PI * np.arange(self.n_chi) / self.n_chi

    @property
    def psi(self):
        return TWO_PI * np.arange(self.n_psi) / self.n_psi


@dataclass
class ScatteringField:
    """Scan results on a torus grid, arrays of shape (n_chi, n_psi)."""

    grid: TorusGrid
    p_out: np.ndarray
    delta_L: np.ndarray
    steps: np.ndarray
    outcome: np.ndarray  # OutcomeClass values
    budget: int

    def record(self, i, j) -> ScatteringRecord:
        return ScatteringRecord(float(self.grid.chi[i]), float(self.grid.psi[j]),
                                float(self.p_out[i, j]), float(self.delta_L[i, j]),
                                OutcomeClass(int(self.outcome[i, j])),
                                int(self.steps[i, j]))


def initial_condition(chi_in, psi_in, p_in=P_IN, L_in=0.0, q_window=Q_WINDOW) -> PhasePoint:
    """Phase point on the incoming line: q = Q + |p_in| chi/2pi, theta = psi."""
    if p_in == 0.0:
        raise ValueError("p_in must be nonzero")
    q = q_window + abs(p_in) * chi_in / TWO_PI
    return PhasePoint(q, p_in, psi_in, L_in)


@nb.njit(cache=True)
def _scatter(q, p, th, L, A, Lm, budget, qa):
    """Iterate until |q| >= qa moving outward. Returns (p, L, steps, code)
    with code 1 transmitted, -1 reflected, 0 trapped."""
    n = 0
    while n < budget:
        q, p, th, L = step_kernel(q, p, th, L, A, Lm)
        n += 1
        if abs(q) >= qa and q * p > 0.0:
            return p, L, n, 1 if p > 0.0 else -1
    return np.nan, np.nan, n, 0


@nb.njit(cache=True)
def _scan_line(chis, psis, q_window, p_in, L_in, A, Lm, budget, qa):
    """Scatter the pairs (chis[i], psis[i])."""
    n = chis.size
    out_p = np.empty(n)
    out_L = np.empty(n)
    out_n = np.empty(n, np.int64)
    out_c = np.empty(n, np.int8)
    ap = abs(p_in)
    for i in range(n):
        q0 = q_window + ap * chis[i] / (2.0 * math.pi)
        p, L, k, c = _scatter(q0, p_in, psis[i], L_in, A, Lm, budget, qa)
        out_p[i] = p
        out_L[i] = L - L_in
        out_n[i] = k
        out_c[i] = c
    return out_p, out_L, out_n, out_c


def scatter_one(x0: PhasePoint, params: MapParams = MapParams(), budget=MAP_STEP_BUDGET,
                chi_in=None, psi_in=None, q_window=Q_WINDOW) -> ScatteringRecord:
    """Iterate full steps until |q| >= 8 moving outward, or the budget ends."""
    p, L, n, c = _scatter(x0.q, x0.p, x0.theta, x0.L, params.A, params.L_max,
                          int(budget), Q_ASYM)
    if chi_in is None:
        chi_in = TWO_PI * (x0.q - q_window) / abs(x0.p) if x0.p != 0.0 else math.nan
    if psi_in is None:
        psi_in = x0.theta
    return ScatteringRecord(float(chi_in), float(psi_in), float(p),
                            float(L - x0.L) if c != 0 else math.nan,
                            OutcomeClass(int(c)), int(n))


def scatter_phases(chi, psi, p_in=P_IN, L_in=0.0, params: MapParams = MapParams(),
                   budget=MAP_STEP_BUDGET, q_window=Q_WINDOW):
    """Vectorised scatter over arrays of phases; returns (p_out, dL, steps, outcome)."""
    chi, psi = np.broadcast_arrays(np.asarray(chi, float), np.asarray(psi, float))
    shape = chi.shape
    r = _scan_line(np.ascontiguousarray(chi.ravel()), np.ascontiguousarray(psi.ravel()),
                   q_window, p_in, L_in, params.A, params.L_max, int(budget), Q_ASYM)
    return tuple(a.reshape(shape) for a in r)


def _scan_rows(args):
    chi, psi, grid, A, Lm, budget = args
    return scatter_phases(chi, psi, grid.p_in, grid.L_in, MapParams(A, Lm), budget,
                          grid.q_window)


def scan_torus(grid: TorusGrid, params: MapParams = MapParams(), budget=MAP_STEP_BUDGET,
               workers: int = 1) -> ScatteringField:
    """Scatter every node of the grid. Nodes are independent, so the result
    does not depend on ``workers``."""
    C, P = np.meshgrid(grid.chi, grid.psi, indexing="ij")
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        rows = np.array_split(np.arange(grid.n_chi), workers)
        jobs = [(C[r], P[r], grid, params.A, params.L_max, budget) for r in rows if r.size]
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_scan_rows, jobs))
        res = [np.concatenate([pt[k] for pt in parts]) for k in range(4)]
    else:
        res = scatter_phases(C, P, grid.p_in, grid.L_in, params, budget, grid.q_window)
    return ScatteringField(grid, res[0], res[1], res[2], res[3], int(budget))


# ---------------------------------------------------------------- 1D tree

@dataclass
class SingularNode:
    """A closed chi interval that contains singular points. Its children are
    the pieces left after removing the continuity intervals found inside."""

    lo: float
    hi: float
    depth: int
    continuity: list = field(default_factory=list)  # (lo, hi) pairs
    singular_points: list = field(default_factory=list)
    children: list = field(default_factory=list)
    partial: bool = False

    @property
    def width(self):
        return self.hi - self.lo

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


class _Line:
    """Scattering function along chi at fixed psi."""

    def __init__(self, p_in, L_in, psi, params, budget, q_window):
        self.p_in, self.L_in, self.psi = p_in, L_in, psi
        self.params, self.budget, self.q_window = params, budget, q_window
        self.calls = 0

    def __call__(self, chi):
        chi = np.atleast_1d(np.asarray(chi, float))
        self.calls += chi.size
        p, dL, n, c = scatter_phases(chi, np.full(chi.size, self.psi), self.p_in, self.L_in,
                                     self.params, self.budget, self.q_window)
        return p, n, c

    def regular(self, p, n, c):
        return (c != 0) & (np.abs(p) >= DIP_TOL) & (n <= SLOW_FRACTION * self.budget)


def _flag_brackets(f: _Line, p, n, c):
    ok = f.regular(p, n, c)
    good = ok[:-1] & ok[1:]
    good &= np.sign(p[:-1]) == np.sign(p[1:])
    good &= np.abs(np.diff(p)) <= JUMP_TOL
    return ~good


def _refine_edge(f: _Line, a, pa, b, tol):
    """Move from regular point a toward b while the branch continues;
    returns the last regular point within tol of the break."""
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        p, n, c = f(m)
        if f.regular(p, n, c)[0] and np.sign(p[0]) == np.sign(pa) and abs(p[0] - pa) <= JUMP_TOL:
            a, pa = m, p[0]
        else:
            b = m
    return a


def _bisect_sign(f: _Line, a, pa, b, tol):
    while abs(b - a) > tol:
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        p, _, _ = f(m)
        if np.isfinite(p[0]) and np.sign(p[0]) == np.sign(pa):
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _split(f: _Line, lo, hi, n_samples, min_run, tol):
    """Continuity intervals inside [lo, hi] and the sign-change points."""
    x = np.linspace(lo, hi, n_samples + 2)[1:-1]
    p, n, c = f(x)
    bad = _flag_brackets(f, p, n, c)
    runs = []
    i = 0
    m = bad.size
    while i < m:
        if bad[i]:
            i += 1
            continue
        j = i
        while j < m and not bad[j]:
            j += 1
        if j - i >= min_run:
            runs.append((i, j))  # samples i..j form a regular run
        i = j
    intervals = []
    for i, j in runs:
        a = _refine_edge(f, x[i], p[i], lo if i == 0 else x[i - 1], tol)
        b = _refine_edge(f, x[j], p[j], hi if j == m else x[j + 1], tol)
        intervals.append((a, b))
    sing = []
    for k in range(m):
        if np.isfinite(p[k]) and np.isfinite(p[k + 1]) and p[k] * p[k + 1] < 0:
            sing.append(_bisect_sign(f, x[k], p[k], x[k + 1], tol))
    return intervals, sing


def find_singularities_1d(L_in=0.0, params: MapParams = MapParams(), depth=3, psi=0.0,
                          window=(0.0, TWO_PI), p_in=P_IN, n_samples=400, min_run=4,
                          tol=1e-10, budget=MAP_STEP_BUDGET, max_nodes=2000,
                          q_window=Q_WINDOW) -> SingularNode:
    """Nested tree of chi intervals that carry singularities.

    Each node interval is sampled at ``n_samples`` points. Brackets are
    flagged by a p_out sign change, a dip |p_out| < 0.005, a slow orbit
    (steps > 0.8 budget), a trapped orbit or a jump |dp_out| > 0.25. Runs of
    at least ``min_run`` unflagged brackets are continuity intervals, their
    edges refined by bisection to ``tol``. The closed pieces left between
    and beside them become the children.
    """
    f = _Line(p_in, L_in, psi, params, budget, q_window)
    root = SingularNode(float(window[0]), float(window[1]), 0)
    queue = [root]
    count = 1
    while queue:
        node = queue.pop(0)
        if node.depth >= depth:
            continue
        if count >= max_nodes:
            node.partial = True
            root.partial = True
            continue
        intervals, sing = _split(f, node.lo, node.hi, n_samples, min_run, tol)
        node.continuity = intervals
        node.singular_points = sing
        edges = [node.lo]
        for a, b in intervals:
            edges.extend([a, b])
        edges.append(node.hi)
        for k in range(0, len(edges), 2):
            lo, hi = edges[k], edges[k + 1]
            if hi - lo > tol:
                child = SingularNode(lo, hi, node.depth + 1)
                node.children.append(child)
                queue.append(child)
                count += 1
    return root


# ---------------------------------------------------------------- strips

@nb.njit(cache=True)
def _find(parent, off, i):
    # path halving with offset accumulation
    o = 0
    while parent[i] != i:
        o += off[i]
        i = parent[i]
    return i, o


@nb.njit(cache=True)
def _label_periodic(mask, right, up):
    """Union-find over a periodic grid. right[i, j] joins (i, j)-(i+1, j)
    across chi, up[i, j] joins (i, j)-(i, j+1) across psi. Offsets count
    psi wraps so that components winding in psi can be detected."""
    nx, ny = mask.shape
    N = nx * ny
    parent = np.arange(N)
    off = np.zeros(N, np.int64)
    winds = np.zeros(N, np.bool_)
    for i in range(nx):
        for j in range(ny):
            if not mask[i, j]:
                continue
            a = i * ny + j
            for d in range(2):
                if d == 0:
                    if not right[i, j]:
                        continue
                    b = ((i + 1) % nx) * ny + j
                    w = 0
                else:
                    if not up[i, j]:
                        continue
                    jj = j + 1
                    w = 0
                    if jj == ny:
                        jj = 0
                        w = 1
                    b = i * ny + jj
                ra, oa = _find(parent, off, a)
                rb, ob = _find(parent, off, b)
                # psi offset of b relative to a along this edge is w
                if ra == rb:
                    if oa - ob != w:
                        winds[ra] = True
                else:
                    parent[rb] = ra
                    off[rb] = oa - ob - w
                    if winds[rb]:
                        winds[ra] = True
    lab = np.full(N, -1, np.int64)
    for k in range(N):
        i, j = k // ny, k % ny
        if mask[i, j]:
            r, _ = _find(parent, off, k)
            lab[k] = r
    w = np.zeros(N, np.bool_)
    for k in range(N):
        if lab[k] >= 0 and winds[lab[k]]:
            w[k] = True
    return lab.reshape(nx, ny), w.reshape(nx, ny)


@dataclass
class StripDecomposition:
    labels: np.ndarray  # -1 for excluded cells, else component index
    winds: np.ndarray  # per component: winds around psi
    sizes: np.ndarray

    @property
    def n_components(self):
        return int(self.sizes.size)

    @property
    def n_strips(self):
        return int(self.winds.sum())

    @property
    def n_rings(self):
        return int((~self.winds).sum())


def continuity_strips(fld: ScatteringField, jump_p=JUMP_TOL, jump_L=None,
                      min_size=1) -> StripDecomposition:
    """Connected regions of regular, same-sign p_out on the periodic grid,
    split wherever p_out or delta_L jumps between neighbours. A component
    is a strip if it winds around the torus in psi.

    jump_L defaults to a tenth of the largest |delta_L| on the grid.
    """
    p, dL = fld.p_out, fld.delta_L
    if jump_L is None:
        m = np.nanmax(np.abs(dL)) if np.any(np.isfinite(dL)) else 0.0
        jump_L = max(0.1 * m, 1e-9)
    ok = (fld.outcome != 0) & (np.abs(p) >= DIP_TOL) & (fld.steps <= SLOW_FRACTION * fld.budget)

    def link(p2, L2, ok2):
        return (ok & ok2 & (np.sign(p) == np.sign(p2))
                & (np.abs(p - p2) <= jump_p) & (np.abs(dL - L2) <= jump_L))

    right = link(np.roll(p, -1, 0), np.roll(dL, -1, 0), np.roll(ok, -1, 0))
    up = link(np.roll(p, -1, 1), np.roll(dL, -1, 1), np.roll(ok, -1, 1))
    # chi spans one fundamental window of the incoming line, so it is periodic
    lab, w = _label_periodic(ok, right, up)
    roots, inv, sizes = np.unique(lab[lab >= 0], return_inverse=True, return_counts=True)
    out = np.full(lab.shape, -1, np.int64)
    out[lab >= 0] = inv
    winds = np.array([w[lab == r].any() for r in roots], dtype=bool)
    if min_size > 1:
        keep = sizes >= min_size
        remap = np.full(sizes.size, -1, np.int64)
        remap[keep] = np.arange(keep.sum())
        out = np.where(out >= 0, remap[np.clip(out, 0, None)], -1)
        winds, sizes = winds[keep], sizes[keep]
    return StripDecomposition(out, winds, sizes)
