"""Acceptance criteria, each at its stated tolerance and runtime limit.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script;
either way one PASS/FAIL line is printed per criterion.
"""
import math
import sys
import time

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.spatial import cKDTree

from chaoscatter.billiard_model import (BilliardState, BottleParams, boundary_radius,
                                        bounce, reflect, scatter_billiard)
from chaoscatter.channel_model import (AsymptoticLabel, ChannelParams, ChannelState,
                                       integrate_to_section, scatter_channel)
from chaoscatter.core import angle_diff
from chaoscatter.cross_section import Axis, detect_ridges, map_scattering_function, \
    sample_cross_section
from chaoscatter.manifolds import asymptotic_window_line, development_count
from chaoscatter.map_model import (SYMPLECTIC_FORM, MapParams, PhasePoint, full_step,
                                   inverse_step, jacobian_fd, reduced_step, step_array)
from chaoscatter.rainbow import (NormalFormParams, QuarticCoeffs, count_region_map, dis6,
                                 dis6_curves, fold_location, model_scattering,
                                 quartic_coeffs, quartic_discriminant,
                                 root_product_discriminant, semi_analytic_sigma)
from chaoscatter.scattering import TorusGrid, find_singularities_1d, scan_torus

L_MAX = 6.23


def _phase_sample(seed=11, n=1000):
    g = np.random.default_rng(seed)
    return np.column_stack([g.uniform(-3, 3, n), g.uniform(-2, 2, n),
                            g.uniform(0, 2 * math.pi, n), g.uniform(0, L_MAX, n)])


def c1_symplectic():
    det_err = omega_err = 0.0
    for A in (0.0, 0.01, 0.02):
        for x in _phase_sample():
            J = jacobian_fd(PhasePoint(*x), MapParams(A))
            det_err = max(det_err, abs(np.linalg.det(J) - 1.0))
            omega_err = max(omega_err, np.abs(J.T @ SYMPLECTIC_FORM @ J - SYMPLECTIC_FORM).max())
    ok = det_err <= 1e-7 and omega_err <= 1e-7
    return ok, f"max|detJ-1|={det_err:.1e} max|JtOJ-O|={omega_err:.1e}"


def c2_invertibility():
    err = 0.0
    for A in (0.0, 0.01, 0.02):
        for x in _phase_sample():
            P = MapParams(A)
            y = inverse_step(full_step(PhasePoint(*x), P), P)
            err = max(err, abs(y.q - x[0]), abs(y.p - x[1]), abs(y.L - x[3]),
                      abs(float(angle_diff(y.theta, x[2]))))
    return err <= 1e-10, f"max round-trip error={err:.1e}"


def c3_symmetric_conservation():
    fld = scan_torus(TorusGrid(256, 128, L_in=1.0383), MapParams(0.0), workers=1)
    esc = fld.outcome != 0
    m = float(np.max(np.abs(fld.delta_L[esc])))
    return m <= 1e-12, f"max|dL|={m:.1e} over {int(esc.sum())} escaping orbits"


def c4_reduced_equivalence():
    g = np.random.default_rng(12)
    n = 100_000
    x = np.column_stack([g.uniform(-3, 3, n), g.uniform(-2, 2, n),
                         g.uniform(0, 2 * math.pi, n), g.uniform(0, L_MAX, n)])
    y = step_array(x, MapParams(0.0))
    qr, pr = reduced_step(x[:, 0], x[:, 1], x[:, 3])
    agree = max(np.abs(y[:, 0] - qr).max(), np.abs(y[:, 1] - pr).max(),
                np.abs(y[:, 3] - x[:, 3]).max())
    qm, pm = reduced_step(-x[:, 0], -x[:, 1], x[:, 3])
    odd = max(np.abs(qm + qr).max(), np.abs(pm + pr).max())
    return agree <= 1e-12 and odd <= 1e-14, f"full vs reduced={agree:.1e} oddness={odd:.1e}"


def c5_horseshoe_development():
    counts = {L: development_count(L).count for L in (0.0, 2.6, 5.71)}
    tail = {L: development_count(L).count for L in (L_MAX - 0.1, L_MAX - 0.05)}
    seq = list(counts.values())
    ok = (all(a >= b for a, b in zip(seq, seq[1:])) and seq[0] == max(seq)
          and all(v == 0 for v in tail.values()))
    show = ", ".join(f"L={L:g}:{c}" for L, c in {**counts, **tail}.items())
    return ok, f"counts {show}"


def c6_line_c_preimage():
    line = asymptotic_window_line(n=312)
    a, b = line.endpoints
    ends = np.array([[a[0], a[1], 0.0, 0.0], [b[0], b[1], 0.0, 0.0]])
    back = step_array(ends, MapParams(0.0), -312)
    q, p = back[:, 0], back[:, 1]
    ok_q = np.all((q >= -6.962 - 0.002) & (q <= -6.912 + 0.002))
    dp = float(np.abs(p - 0.05).max())
    return bool(ok_q and dp <= 1e-6), f"T^-312 endpoints q={q[0]:.6f},{q[1]:.6f} max|p-0.05|={dp:.1e}"


def c7_discriminant_oracle():
    g = np.random.default_rng(13)
    worst = 0.0
    for A, B, C in g.uniform(-2, 2, (10_000, 3)):
        qc = QuarticCoeffs(A, B, C, 0.0)
        d1 = quartic_discriminant(qc)
        d2 = root_product_discriminant(qc.roots())
        if abs(d1) < 1e-8 and abs(d2) < 1e-8:
            continue
        worst = max(worst, abs(d1 - d2) / abs(d2))
    return worst <= 1e-6, f"max relative error={worst:.1e}"


def c8_region_counts():
    nf = NormalFormParams()
    P = np.linspace(-0.2, 1.2, 101)
    Lg = np.linspace(-1.3, 1.3, 101)
    M = count_region_map(nf, P, Lg)
    values = set(np.unique(M).tolist())
    scale = np.array([P[1] - P[0], Lg[1] - Lg[0]])
    curves = dis6_curves(nf, p_range=(-0.5, 1.5), L_range=(-1.5, 1.5), n=1200)
    tree = cKDTree(np.vstack([c.points for c in curves]) / scale)
    s = np.linspace(0.0, 1.0, 65)
    n_tr = bad_step = off_curve = strict = 0
    worst = 0.0
    for i in range(101):
        for j in range(101):
            for i2, j2 in ((i + 1, j), (i, j + 1)):
                if i2 > 100 or j2 > 100 or M[i, j] == M[i2, j2]:
                    continue
                p1, L1, p2, L2 = P[j], Lg[i], P[j2], Lg[i2]
                if (p1 > 0) != (p2 > 0):
                    continue  # the strip boundary p_out = 0
                n_tr += 1
                if abs(int(M[i, j]) - int(M[i2, j2])) != 2:
                    bad_step += 1
                v = dis6(p1 + s * (p2 - p1), L1 + s * (L2 - L1), nf)
                if not np.any(np.sign(v[:-1]) != np.sign(v[1:])):
                    strict += 1
                d, _ = tree.query(np.array([(p1 + p2) / 2, (L1 + L2) / 2]) / scale, p=np.inf)
                worst = max(worst, d)
                if d > 1.0:
                    off_curve += 1
    small = NormalFormParams(b=1e-3, c=1e-3)
    pts = np.vstack([c.points for c in dis6_curves(small, (-0.5, 1.5), (-1.5, 1.5), n=800)])
    dist = np.minimum(np.abs(pts[:, 0] - 1.0),
                      np.minimum(np.abs(pts[:, 1] - 1.0), np.abs(pts[:, 1] + 1.0)))
    ok = values <= {0, 2, 4} and bad_step == 0 and off_curve == 0 and dist.max() <= 1e-2
    return ok, (f"counts {sorted(values)}; {n_tr} transitions, {bad_step} not +-2, "
                f"{off_curve} farther than one lattice cell from Dis6=0 (max {worst:.2f} cells, "
                f"{strict} without a sign change on the segment itself); "
                f"small-eps distance to lines {dist.max():.1e}")


def _bin_sigma(nf, p_lo, p_hi, L_lo, L_hi):
    """Bin average of the semi-analytic sigma: Gauss-Legendre in p, adaptive
    quadrature in dL with the fold positions as break points."""
    x, w = np.polynomial.legendre.leggauss(12)
    total = 0.0
    for t, wt in zip(x, w):
        p = 0.5 * (p_lo + p_hi) + 0.5 * (p_hi - p_lo) * t
        folds = [fold_location(p, 0.8, 1.0, nf), fold_location(p, 1.0, 1.3, nf)]
        pts = [L for L in folds if L_lo < L < L_hi] or None
        v, _ = quad(lambda L: semi_analytic_sigma(p, L, nf), L_lo, L_hi, points=pts, limit=200)
        total += 0.5 * wt * v / (L_hi - L_lo)
    return total


def c9_fold_law():
    nf = NormalFormParams()
    p = 0.5
    Lf = fold_location(p, 1.0, 1.2, nf)
    d = np.logspace(-6, -4, 9)
    sig = np.array([semi_analytic_sigma(p, Lf - x, nf) for x in d])
    slope = np.polyfit(np.log(d), np.log(sig), 1)[0]
    pa, La = Axis(0.4, 0.6, 1), Axis(0.5, 1.1, 12)
    h = sample_cross_section(10**7, lambda c, s: model_scattering(c, s, nf), seed=7,
                             p_axis=pa, L_axis=La, chunk=1 << 20)
    dens = h.density()[0]
    e = La.edges
    # the fold curves sweep these dL ranges across the p band
    swept = [(fold_location(pa.hi, 0.8, 1.0, nf), fold_location(pa.lo, 0.8, 1.0, nf)),
             (fold_location(pa.hi, 1.0, 1.3, nf), fold_location(pa.lo, 1.0, 1.3, nf))]
    worst, n_used = 0.0, 0
    for j in range(La.n):
        lo, hi = e[j], e[j + 1]
        if any(lo <= b and a <= hi for a, b in swept):
            continue  # singular bins
        s = _bin_sigma(nf, pa.lo, pa.hi, lo, hi)
        worst = max(worst, abs(dens[j] / s - 1.0))
        n_used += 1
    ok = abs(slope + 0.5) <= 0.1 and worst <= 0.05 and n_used >= 6
    return ok, (f"slope={slope:.4f} (fold dL={Lf:.6f}); max MC/semi-analytic deviation="
                f"{worst:.4f} over {n_used} regular bins")


def c10_cross_section_structure():
    fn = map_scattering_function(MapParams(0.01), L_in=1.0383)
    h = sample_cross_section(10**6, fn, seed=1, n_bins=200)
    r = detect_ridges(h, link=3)
    levels = r.hierarchy_levels()
    ok = r.n_closed >= 1 and r.n_open >= 2 and levels >= 2
    return ok, (f"{r.n_ridges} ridge curves: {r.n_closed} closed, {r.n_open} open; "
                f"{levels} hierarchy levels")


def c11_channel_physics():
    drift = dL = 0.0
    for A in (0.0, 0.3):
        for chi, psi in ((0.3, 1.0), (2.0, 4.0), (4.5, 2.5)):
            r = scatter_channel(AsymptoticLabel(2.0, 1.0, 0.2, chi, psi), ChannelParams(A))
            drift = max(drift, r.energy_drift)
            if A == 0.0:
                dL = max(dL, abs(r.record.delta_L))
    u0 = ChannelState(0.0, 0.5, 1.2, 0.0, 0.3, 0.4).to_cartesian()
    _, t = integrate_to_section(u0, ChannelParams(obstacle=False))
    ok = drift <= 1e-8 and dL <= 1e-8 and abs(t - math.pi) <= 1e-8
    return ok, f"energy drift={drift:.1e} |dL|(A=0)={dL:.1e} |T-pi|={abs(t - math.pi):.1e}"


def c12_billiard_physics():
    speed = resid = 0.0
    Ldrift = 0.0
    for A in (0.0, 0.02):
        P = BottleParams(A=A)
        s = BilliardState((0.0, 0.3, 0.0), (0.0, math.cos(1.1), math.sin(1.1)))
        L0 = s.L
        for _ in range(1000):
            s, _ = bounce(s, P)
            resid = max(resid, abs(math.hypot(s.pos[1], s.pos[2])
                                   - boundary_radius(s.q, s.theta, P)))
            speed = max(speed, abs(np.linalg.norm(s.vel) - 1.0))
            if A == 0.0:
                Ldrift = max(Ldrift, abs(s.L - L0))
    for chi in (2.5, 4.0, 5.5):
        rec = scatter_billiard(chi, 0.7, 0.5, 0.2, BottleParams(A=0.0))
        Ldrift = max(Ldrift, abs(rec.delta_L))
    g = np.random.default_rng(14)
    inv = 0.0
    for _ in range(1000):
        v = g.normal(size=3)
        n = g.normal(size=3)
        v /= np.linalg.norm(v)
        n /= np.linalg.norm(n)
        inv = max(inv, np.abs(reflect(reflect(v, n), n) - v).max())
    ok = speed <= 1e-12 and resid <= 1e-9 and Ldrift <= 1e-10 and inv <= 1e-14
    return ok, (f"speed error={speed:.1e} wall residual={resid:.1e} "
                f"L drift(A=0)={Ldrift:.1e} involution={inv:.1e}")


def c13_cantor_tree():
    root = find_singularities_1d(0.0, MapParams(0.0), depth=3)
    nodes = list(root.walk())
    per = [sum(1 for nd in nodes if nd.depth == d) for d in range(4)]
    branching = all(len(nd.children) >= 2 for nd in nodes if nd.depth < 3)
    nested = True
    for nd in nodes:
        prev = nd.lo
        for ch in nd.children:
            nested &= nd.lo <= ch.lo < ch.hi <= nd.hi and ch.lo >= prev and ch.width < nd.width
            prev = ch.hi
    ok = branching and nested and not root.partial
    return ok, f"nodes per depth {per}; branching>=2: {branching}; strictly nested: {nested}"


CRITERIA = [
    (1, "symplecticity", c1_symplectic, 5),
    (2, "invertibility", c2_invertibility, 5),
    (3, "symmetric-case L conservation", c3_symmetric_conservation, 60),
    (4, "reduced-map equivalence", c4_reduced_equivalence, 5),
    (5, "horseshoe development", c5_horseshoe_development, 120),
    (6, "line C preimage", c6_line_c_preimage, 10),
    (7, "quartic discriminant oracle", c7_discriminant_oracle, 5),
    (8, "normal-form region counts", c8_region_counts, 120),
    (9, "rainbow fold law", c9_fold_law, 180),
    (10, "cross-section structure", c10_cross_section_structure, 300),
    (11, "channel model physics", c11_channel_physics, 60),
    (12, "billiard model physics", c12_billiard_physics, 60),
    (13, "Cantor self-similarity", c13_cantor_tree, 180),
]


def evaluate(fn, limit):
    t = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t
    ok = bool(ok) and dt < limit
    return ok, f"{detail}; {dt:.1f} s (limit {limit} s)"


def line(num, name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {num:2d} {name}: {detail}"


@pytest.mark.parametrize("num,name,fn,limit", CRITERIA, ids=[f"c{c[0]:02d}" for c in CRITERIA])
def test_criterion(num, name, fn, limit, capsys):
    ok, detail = evaluate(fn, limit)
    with capsys.disabled():
        print("\n" + line(num, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for num, name, fn, limit in CRITERIA:
        ok, detail = evaluate(fn, limit)
        failed += not ok
        print(line(num, name, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
