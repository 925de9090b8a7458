"""Doubly differential cross section sigma(p_out, dL): Monte-Carlo
histograms, local Jacobian weights and ridge detection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .core import MAP_STEP_BUDGET, TWO_PI
from .map_model import MapParams
from .scattering import DIP_TOL, JUMP_TOL, P_IN, Q_WINDOW, scatter_phases

CHUNK = 1 << 16
DET_MIN = 1e-12


class UndefinedWeight(ValueError):
    """A stencil point is trapped or lies in another continuity region."""


class _Caustic:
    def __repr__(self):
        return "CAUSTIC"


CAUSTIC = _Caustic()


@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.hi > self.lo or self.n < 1:
            raise ValueError("axis needs hi > lo and n >= 1")

    @property
    def width(self):
        return (self.hi - self.lo) / self.n

    @property
    def edges(self):
        return np.linspace(self.lo, self.hi, self.n + 1)

    @property
    def centers(self):
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def index(self, v):
        i = np.floor((np.asarray(v) - self.lo) / self.width).astype(np.int64)
        # the upper edge belongs to the last bin
        i = np.where(np.asarray(v) == self.hi, self.n - 1, i)
        return i


@dataclass
class Histogram2D:
    p_axis: Axis
    L_axis: Axis
    counts: np.ndarray = None  # shape (p bins, L bins), int64
    n_total: int = 0
    n_trapped: int = 0
    n_out_of_range: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.p_axis.n, self.L_axis.n), np.int64)

    def add(self, p_out, delta_L):
        p = np.asarray(p_out, float).ravel()
        L = np.asarray(delta_L, float).ravel()
        self.n_total += p.size
        ok = np.isfinite(p) & np.isfinite(L)
        self.n_trapped += int((~ok).sum())
        p, L = p[ok], L[ok]
        i = self.p_axis.index(p)
        j = self.L_axis.index(L)
        inr = (i >= 0) & (i < self.p_axis.n) & (j >= 0) & (j < self.L_axis.n)
        self.n_out_of_range += int((~inr).sum())
        np.add.at(self.counts, (i[inr], j[inr]), 1)
        return self

    def merge(self, other: "Histogram2D") -> "Histogram2D":
        if self.p_axis != other.p_axis or self.L_axis != other.L_axis:
            raise ValueError("histogram axes differ")
        return Histogram2D(self.p_axis, self.L_axis, self.counts + other.counts,
                           self.n_total + other.n_total, self.n_trapped + other.n_trapped,
                           self.n_out_of_range + other.n_out_of_range)

    @property
    def bin_area(self):
        return self.p_axis.width * self.L_axis.width

    def density(self):
        """counts / (n_total * bin area)."""
        if self.n_total == 0:
            return np.zeros(self.counts.shape)
        return self.counts / (self.n_total * self.bin_area)


def chunk_generator(seed: int, chunk: int) -> np.random.Generator:
    """Counter-based stream for one chunk, independent of scheduling."""
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), int(chunk)]))


@dataclass(frozen=True)
class MapScatteringFunction:
    """(chi, psi) -> (p_out, dL) for the kicked map; NaN when trapped.
    A plain dataclass so that worker processes can receive it."""

    params: MapParams = MapParams()
    L_in: float = 0.0
    p_in: float = P_IN
    budget: int = MAP_STEP_BUDGET
    q_window: float = Q_WINDOW

    def __call__(self, chi, psi):
        p, dL, _, c = scatter_phases(chi, psi, self.p_in, self.L_in, self.params,
                                     self.budget, self.q_window)
        return p, np.where(c != 0, dL, np.nan)


def map_scattering_function(params: MapParams = MapParams(), L_in=0.0, p_in=P_IN,
                            budget=MAP_STEP_BUDGET, q_window=Q_WINDOW):
    return MapScatteringFunction(params, L_in, p_in, budget, q_window)


def _sample_chunk(fn, seed, k, m):
    rng = chunk_generator(seed, k)
    u = rng.random((2, m)) * TWO_PI
    return fn(u[0], u[1])


def _chunk_job(args):
    fn, seed, ks, n, chunk, p_axis, L_axis = args
    h = Histogram2D(p_axis, L_axis)
    for k in ks:
        m = min(chunk, n - k * chunk)
        h.add(*_sample_chunk(fn, seed, k, m))
    return h


def auto_axes(fn, seed, n_bins=200, n_pilot=20000):
    """Axis ranges from a pilot run, symmetric about zero."""
    p, dL = _sample_chunk(fn, seed ^ 0x5EED, 0, n_pilot)
    pr = float(np.nanmax(np.abs(p))) if np.any(np.isfinite(p)) else 1.0
    Lr = float(np.nanmax(np.abs(dL))) if np.any(np.isfinite(dL)) else 0.0
    pr *= 1.05
    Lr = 1.05 * Lr if Lr > 0 else 1e-3
    return Axis(-pr, pr, n_bins), Axis(-Lr, Lr, n_bins)


def sample_cross_section(n: int, fn=None, seed: int = 0, p_axis: Axis = None,
                         L_axis: Axis = None, n_bins=200, chunk=CHUNK,
                         workers=1) -> Histogram2D:
    """Histogram of (p_out, dL) for n phases drawn uniformly on the torus.

    ``fn`` maps (chi, psi) arrays to (p_out, dL) arrays, NaN for trapped
    orbits; the default is the kicked map at A = 0. Each chunk of samples has
    its own counter-based stream, so the histogram does not depend on
    ``workers``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if fn is None:
        fn = map_scattering_function()
    if p_axis is None or L_axis is None:
        pa, La = auto_axes(fn, seed, n_bins, min(n, 20000))
        p_axis = p_axis or pa
        L_axis = L_axis or La
    n_chunks = -(-n // chunk)
    ks = np.arange(n_chunks)
    if workers > 1 and n_chunks > 1:
        from concurrent.futures import ProcessPoolExecutor

        parts = [(fn, seed, part, n, chunk, p_axis, L_axis)
                 for part in np.array_split(ks, workers) if part.size]
        with ProcessPoolExecutor(workers) as ex:
            hs = list(ex.map(_chunk_job, parts))
        h = hs[0]
        for o in hs[1:]:
            h = h.merge(o)
        return h
    return _chunk_job((fn, seed, ks, n, chunk, p_axis, L_axis))


def local_weight(chi, psi, fn, h=1e-6, jump=JUMP_TOL):
    """g = 1/|det d(p_out, dL)/d(chi, psi)| by central differences.

    Returns CAUSTIC when |det| < 1e-12. Raises UndefinedWeight when a
    stencil point is trapped or on another branch.
    """
    c = np.array([chi + h, chi - h, chi, chi])
    s = np.array([psi, psi, psi + h, psi - h])
    p, L = fn(np.append(c, chi), np.append(s, psi))
    p = np.asarray(p, float)
    L = np.asarray(L, float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(L))):
        raise UndefinedWeight("trapped stencil point")
    if np.any(np.sign(p) != np.sign(p[4])) or np.any(np.abs(p - p[4]) > jump) \
            or np.any(np.abs(p) < DIP_TOL):
        raise UndefinedWeight("stencil crosses a singular bracket")
    J = np.array([[p[0] - p[1], p[2] - p[3]], [L[0] - L[1], L[2] - L[3]]]) / (2.0 * h)
    det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if abs(det) < DET_MIN:
        return CAUSTIC
    return 1.0 / abs(det)


def sum_preimage_weights(p_out, delta_L, preimages, fn=None, h=1e-6, tol=1e-6):
    """sigma = sum of g_k over the preimages.

    ``preimages`` holds weights, or (chi, psi) points when ``fn`` is given;
    points are checked to map onto (p_out, delta_L) within ``tol``. Caustic
    preimages make sigma infinite.
    """
    total = 0.0
    for pt in preimages:
        if fn is None:
            g = float(pt)
        else:
            chi, psi = pt
            pp, LL = fn(np.array([chi]), np.array([psi]))
            if abs(pp[0] - p_out) > tol or abs(LL[0] - delta_L) > tol:
                raise ValueError("point is not a preimage of the target")
            g = local_weight(chi, psi, fn, h)
            if g is CAUSTIC:
                return math.inf
        total += g
    return total


# ---------------------------------------------------------------- ridges

@dataclass
class RidgeSet:
    mask: np.ndarray  # flagged cells
    labels: np.ndarray  # 0 background, 1..n linked components
    sizes: np.ndarray  # flagged cells per component
    closed: np.ndarray  # per component: encloses a hole
    p_axis: Axis
    L_axis: Axis
    components: list = field(default_factory=list)  # cell index arrays

    @property
    def n_ridges(self):
        return int(self.sizes.size)

    @property
    def n_closed(self):
        return int(self.closed.sum())

    @property
    def n_open(self):
        return int((~self.closed).sum())

    def extents(self):
        """(p bins, dL bins) spanned by each component."""
        return np.array([[np.ptp(c[:, 0]) + 1, np.ptp(c[:, 1]) + 1] for c in self.components],
                        int).reshape(-1, 2)

    def hierarchy_levels(self, min_size=20):
        """Distinct size classes (octaves of the p extent) among the
        larger components."""
        ext = self.extents()
        big = self.sizes >= min_size
        if not big.any():
            return 0
        return int(np.unique(np.floor(np.log2(ext[big, 0]))).size)

    def cell_centers(self, k=None):
        idx = np.argwhere(self.mask if k is None else (self.labels == k) & self.mask)
        return np.column_stack([self.p_axis.centers[idx[:, 0]], self.L_axis.centers[idx[:, 1]]])


def neighbour_median(counts):
    """Median of the 8 neighbours of each cell (edges reflected)."""
    c = np.pad(counts.astype(float), 1, mode="reflect")
    n0, n1 = counts.shape
    stack = [c[1 + di:1 + di + n0, 1 + dj:1 + dj + n1]
             for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj]
    return np.median(np.stack(stack), axis=0)


def ridge_mask(counts, threshold=1.5, rule="gated", z=3.0):
    """Cells with a count well above their neighbours.

    rule "median3": count > threshold * max(median, 1).
    rule "gated": the same and also count - median > z * sqrt(max(median, 1)).
    """
    med = np.maximum(neighbour_median(counts), 1.0)
    m = counts > threshold * med
    if rule == "gated":
        m &= (counts - med) > z * np.sqrt(med)
    elif rule != "median3":
        raise ValueError(f"unknown rule {rule!r}")
    return m


def detect_ridges(h: Histogram2D, threshold=1.5, rule="gated", z=3.0, link=1,
                  min_size=4, min_hole=4) -> RidgeSet:
    """Flag ridge cells and link them into curves.

    Flagged cells within ``link`` cells of each other (Chebyshev distance)
    join the same curve; link=1 is plain 8-connectivity. A curve is closed
    when the linked cells enclose a hole of at least ``min_hole`` cells.
    """
    m = ridge_mask(h.counts, threshold, rule, z)
    joined = ndimage.binary_dilation(m, np.ones((2 * link - 1,) * 2, bool)) if link > 1 else m
    lab, n = ndimage.label(joined, structure=np.ones((3, 3), int))
    lab = np.where(joined, lab, 0)
    sizes = np.bincount(lab[m], minlength=n + 1)
    new = np.zeros_like(lab)
    comps, closed, kept = [], [], []
    k = 0
    for old in range(1, n + 1):
        if sizes[old] < min_size:
            continue
        k += 1
        cm = lab == old
        new[cm] = k
        comps.append(np.argwhere(cm & m))
        kept.append(sizes[old])
        holes = ndimage.binary_fill_holes(cm) & ~cm
        hl, nh = ndimage.label(holes)
        closed.append(bool(nh and np.bincount(hl.ravel())[1:].max() >= min_hole))
    return RidgeSet(m & (new > 0), new, np.array(kept, int), np.array(closed, bool),
                    h.p_axis, h.L_axis, comps)
