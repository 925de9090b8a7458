import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoscatter.core import (TWO_PI, AsymptoticLabel, OutcomeClass, PhasePoint,
                              ScatteringRecord, angle_diff, compactify, decompactify,
                              map_phase_label, reduced_phases, wrap_angle)

finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(finite)
def test_wrap_angle_range(x):
    w = wrap_angle(x)
    assert 0.0 <= w < TWO_PI
    assert abs(math.sin(w) - math.sin(x)) < 1e-9 * max(1.0, abs(x))


def test_wrap_angle_edge_cases():
    assert wrap_angle(TWO_PI) == 0.0
    assert wrap_angle(-1e-18) == 0.0
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        wrap_angle(float("nan"))


def test_angle_diff_signed():
    assert angle_diff(0.1, TWO_PI - 0.1) == pytest.approx(0.2)
    assert angle_diff(TWO_PI - 0.1, 0.1) == pytest.approx(-0.2)


@given(st.floats(-0.999999, 0.999999))
def test_compactify_roundtrip(z):
    assert compactify(decompactify(z)) == pytest.approx(z, abs=1e-12)


def test_decompactify_rejects_boundary():
    with pytest.raises(ValueError):
        decompactify(1.0)


def test_reduced_phases_free_motion_invariant():
    # under free motion q -> q + p t, theta -> theta + sign(L) t, phi -> phi + 2t
    q, p, th, phi, sL = -8.0, 0.7, 1.0, 2.0, -1.0
    a = reduced_phases(q, p, th, phi, sL)
    t = 3.3
    b = reduced_phases(q + p * t, p, th + sL * t, phi + 2 * t, sL)
    assert angle_diff(a[0], b[0]) == pytest.approx(0.0, abs=1e-12)
    assert angle_diff(a[1], b[1]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        reduced_phases(1.0, 0.0, 0.0, 0.0, 1.0)


def test_map_phase_label_window():
    assert map_phase_label(-8.0, 0.05) == 0.0
    assert map_phase_label(8.025, -0.05) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        map_phase_label(-8.06, 0.05)
    with pytest.raises(ValueError):
        map_phase_label(-8.0, 0.0)


def test_phase_point_wraps_and_validates():
    x = PhasePoint(1.0, 2.0, -1.0, 0.5)
    assert x.theta == pytest.approx(TWO_PI - 1.0)
    assert np.allclose(PhasePoint.from_array(x.as_array()).as_array(), x.as_array())
    with pytest.raises(ValueError):
        PhasePoint(float("inf"), 0.0, 0.0, 0.0)


def test_label_wraps_angles():
    lab = AsymptoticLabel(2.0, 1.0, 0.1, 7.0, -1.0)
    assert 0 <= lab.chi < TWO_PI and 0 <= lab.psi < TWO_PI


def test_outcome_from_p():
    assert OutcomeClass.from_p(0.3) is OutcomeClass.TRANSMITTED
    assert OutcomeClass.from_p(-0.3) is OutcomeClass.REFLECTED
    assert OutcomeClass.from_p(float("nan")) is OutcomeClass.TRAPPED
    r = ScatteringRecord(0.0, 0.0, math.nan, math.nan, OutcomeClass.TRAPPED, 10)
    assert not r.valid
