import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from chaoscatter.core import PhasePoint, angle_diff
from chaoscatter.map_model import (SYMPLECTIC_FORM, MapParams, NewtonError,
                                   SingularKickError, full_step, inverse_step,
                                   jacobian_fd, kick_fields, reduced_inverse,
                                   reduced_step, step_array)

# ---------------------------------------------------------------- oracle
# Independent route: differentiate the generating function symbolically and
# solve its implicit equations with mpmath, no shared code with the kernel.
_th, _Lt, _q, _pt, _A, _Lm = sp.symbols("th Lt q pt A Lm", real=True)
_G = _q * _pt + _th * _Lt + (_Lm - _Lt) * (1 + _A * sp.cos(_th)) * (-sp.exp(-_q ** 2))
_dG_dth = sp.diff(_G, _th)
_dG_dLt = sp.diff(_G, _Lt)
_dG_dq = sp.diff(_G, _q)


def oracle_step(q, p, th, L, A, Lm):
    q1 = q + p / 2
    th1 = th + L / 2
    subs = {_th: th1, _q: q1, _A: A, _Lm: Lm}
    Lt = sp.nsolve(_dG_dth.subs(subs) - L, _Lt, L, prec=30)
    subs[_Lt] = Lt
    th2 = float(_dG_dLt.subs(subs))
    pt = sp.nsolve(_dG_dq.subs(subs) - p, _pt, p, prec=30)
    L2, p2 = float(Lt), float(pt)
    return q1 + p2 / 2, p2, th2 + L2 / 2, L2


def _rand_points(rng, n, Lmax=6.23):
    return np.column_stack([rng.uniform(-3, 3, n), rng.uniform(-3, 3, n),
                            rng.uniform(0, 2 * np.pi, n), rng.uniform(0, Lmax, n)])


@pytest.mark.parametrize("A", [0.0, 0.01, 0.2])
def test_full_step_matches_generating_function_oracle(rng, A):
    pts = _rand_points(rng, 12)
    for x in pts:
        got = full_step(PhasePoint(*x), MapParams(A)).as_array()
        want = oracle_step(*x, A, 6.23)
        assert got[0] == pytest.approx(want[0], abs=1e-12)
        assert got[1] == pytest.approx(want[1], abs=1e-12)
        assert abs(angle_diff(got[2], want[2])) < 1e-12
        assert got[3] == pytest.approx(want[3], abs=1e-12)


def test_kick_fields():
    V, F = kick_fields(0.7)
    assert V == pytest.approx(-math.exp(-0.49))
    assert F == pytest.approx(-1.4 * math.exp(-0.49))


def test_params_validation():
    with pytest.raises(ValueError):
        MapParams(A=-0.1)
    with pytest.raises(ValueError):
        MapParams(L_max=0.0)


def test_free_flight_far_out():
    x = PhasePoint(30.0, 0.5, 1.0, 2.0)
    y = full_step(x, MapParams(0.3))
    assert (y.q, y.p, y.L) == (30.5, 0.5, 2.0)
    assert y.theta == pytest.approx(3.0)


def test_singular_kick_detected():
    # den = 1 + A V(q') sin(th') = 0 needs A e^{-q'^2} = 1
    x = PhasePoint(0.0, 0.0, math.pi / 2, 0.0)
    with pytest.raises(SingularKickError):
        full_step(x, MapParams(A=1.0))


def test_symplectic_and_volume(rng):
    for A in (0.0, 0.05):
        for x in _rand_points(rng, 50):
            J = jacobian_fd(PhasePoint(*x), MapParams(A))
            assert abs(np.linalg.det(J) - 1) < 1e-7
            assert np.abs(J.T @ SYMPLECTIC_FORM @ J - SYMPLECTIC_FORM).max() < 1e-7


@settings(max_examples=200, deadline=None)
@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(0, 6.28), st.floats(0, 6.23),
       st.sampled_from([0.0, 0.01, 0.02, 0.1]))
def test_inverse_roundtrip_property(q, p, th, L, A):
    x = PhasePoint(q, p, th, L)
    y = inverse_step(full_step(x, MapParams(A)), MapParams(A))
    assert abs(y.q - q) < 1e-10 and abs(y.p - p) < 1e-10 and abs(y.L - L) < 1e-10
    assert abs(angle_diff(y.theta, x.theta)) < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 6.2))
def test_reduced_map_odd_and_invertible(q, p, L):
    a = reduced_step(q, p, L)
    b = reduced_step(-q, -p, L)
    assert b[0] == -a[0] and b[1] == -a[1]
    back = reduced_inverse(*a, L)
    assert back[0] == pytest.approx(q, abs=1e-12) and back[1] == pytest.approx(p, abs=1e-12)


def test_reduced_equals_full_at_A0(rng):
    pts = _rand_points(rng, 2000)
    y = step_array(pts, MapParams(0.0))
    qr, pr = reduced_step(pts[:, 0], pts[:, 1], pts[:, 3])
    assert np.abs(y[:, 0] - qr).max() <= 1e-12
    assert np.abs(y[:, 1] - pr).max() <= 1e-12
    assert np.array_equal(y[:, 3], pts[:, 3])


def test_step_array_backward_undoes_forward(rng):
    pts = _rand_points(rng, 100)
    y = step_array(step_array(pts, MapParams(0.02), 5), MapParams(0.02), -5)
    assert np.abs(y[:, [0, 1, 3]] - pts[:, [0, 1, 3]]).max() < 1e-8
    assert np.abs(angle_diff(y[:, 2], pts[:, 2])).max() < 1e-8
