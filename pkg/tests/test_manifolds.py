import math

import numpy as np
import pytest

from chaoscatter.manifolds import (STABLE, UNSTABLE, FreeFlightError, LineC,
                                   asymptotic_window_line, curve_intersections,
                                   development_count, fundamental_rectangle, image_line,
                                   manifold, point_on_curve, point_polyline_distance,
                                   preimage_line, seed_outer_manifold, separatrix_p,
                                   stack_tangle, tangle_extrema)
from chaoscatter.map_model import MapParams, reduced_inverse, reduced_step


@pytest.fixture(scope="module")
def seed0():
    return seed_outer_manifold(-1, UNSTABLE, 0.0)


def test_free_flight_rejected():
    with pytest.raises(FreeFlightError):
        separatrix_p(-4.0, 6.23, UNSTABLE, -1)
    with pytest.raises(FreeFlightError):
        seed_outer_manifold(-1, UNSTABLE, 7.0)


def test_separatrix_close_to_asymptotic_invariant():
    # far out, the branch follows 0.5 p^2 = k exp(-q^2) to leading order
    k = 6.23
    p = separatrix_p(-4.0, 0.0, UNSTABLE, -1)
    assert p > 0
    assert p == pytest.approx(math.sqrt(2 * k) * math.exp(-8.0), rel=0.05)


def test_unstable_points_go_back_to_minus_infinity(seed0):
    q, p = point_on_curve(seed0, 3, 0.4)
    q, p = float(q[0]), float(p[0])
    ps = []
    for _ in range(3 + 300):
        q, p = reduced_inverse(q, p, 0.0)
        ps.append(p)
    # parabolic approach: p decays like 1/t, monotonically, and stays positive
    assert q < -4.0 and 0.0 < p < 1e-3
    assert np.all(np.diff(ps[-100:]) < 0)


def test_seed_spans_one_fundamental_domain(seed0):
    q0, p0 = seed0(0.0)
    q1, p1 = seed0(1.0)
    qn, pn = reduced_step(q0[0], p0[0], 0.0)
    assert qn == pytest.approx(q1[0], abs=1e-10)
    assert pn == pytest.approx(p1[0], rel=1e-8)


def test_stable_branch_is_time_reversed_unstable():
    u = manifold(-1, UNSTABLE, 2.6, budget=3.0)
    s = manifold(-1, STABLE, 2.6, budget=3.0)
    r = u.time_reversed()
    d = point_polyline_distance(s.z[::20], s.p[::20], r.z, r.p)
    assert d.max() < 1e-6


def test_inverted_branch_symmetry():
    u = manifold(-1, UNSTABLE, 2.6, budget=3.0)
    v = manifold(1, UNSTABLE, 2.6, budget=3.0)
    w = u.inverted()
    d = point_polyline_distance(v.z[::20], v.p[::20], w.z, w.p)
    assert d.max() < 1e-6


def test_curve_arclength_budget():
    c = manifold(-1, UNSTABLE, 0.0, budget=2.0)
    assert 2.0 <= c.arclength() < 2.01
    assert np.all(np.diff(c.n) >= 0)


def test_fundamental_rectangle_symmetric():
    R = fundamental_rectangle(2.6)
    (qu, pu), (ql, pl) = R.corner_upper, R.corner_lower
    assert abs(qu) < 1e-10 and abs(ql) < 1e-10
    assert pl == pytest.approx(-pu, abs=1e-10)
    assert pu > 0


def test_curve_intersections_analytic():
    # two straight lines crossing at (0.25, 0.5) at right angles
    h = curve_intersections(np.array([0.0, 0.5]), np.array([0.5, 0.5]),
                            np.array([0.25, 0.25]), np.array([0.0, 1.0]))
    assert h.shape[0] == 1
    assert h[0, 2] == pytest.approx(0.25) and h[0, 3] == pytest.approx(0.5)
    assert h[0, 4] == pytest.approx(math.pi / 2)


def test_development_zero_near_parabolic_limit():
    assert development_count(6.2).count == 0
    assert development_count(6.23).count == 0


def test_window_line_preimage_is_window():
    C = asymptotic_window_line(n=40)
    q, p = preimage_line(C, 40)
    assert q.min() == pytest.approx(-6.962, abs=1e-9)
    assert q.max() == pytest.approx(-6.912, abs=1e-9)
    assert np.allclose(p, 0.05, atol=1e-12)


def test_image_line_plain_segment_matches_pointwise_iteration():
    line = LineC.segment((-3.0, 0.5), (-2.9, 0.5))
    q, p = image_line(line, 3)
    a = np.array([-3.0, 0.5])
    for _ in range(3):
        a = np.array(reduced_step(a[0], a[1], 0.0))
    assert q[0] == pytest.approx(a[0], abs=1e-12) and p[0] == pytest.approx(a[1], abs=1e-12)


def test_stack_tangle_records_failures():
    out, err = stack_tangle([2.6, 7.0], budget=1.0, max_iter=1000)
    assert 2.6 in out and 7.0 in err


def test_tangle_extrema_quadratic():
    z = np.linspace(-1, 1, 11)
    L = 3.0 - (z - 0.13) ** 2
    ext = tangle_extrema(L, z)
    assert len(ext) == 1
    assert ext[0][0] == pytest.approx(0.13) and ext[0][1] == pytest.approx(3.0)
