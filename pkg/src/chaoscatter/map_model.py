"""Kicked 4D symplectic map: drift/kick/drift, exact inverse, reduced 2D map.

The kick comes from the generating function
    q~ p + theta L~ + (L_max - L~)(1 + A cos theta) V(q),
with V(q) = -exp(-q^2). At A = 0 the angular momentum decouples and the
(q, p) motion is the reduced map of ``reduced_step``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .core import TWO_PI, PhasePoint, wrap_angle

L_MAX_DEFAULT = 6.23
NEWTON_TOL = 1e-13
NEWTON_MAXIT = 100


class SingularKickError(ArithmeticError):
    pass


class NewtonError(ArithmeticError):
    pass


@dataclass(frozen=True)
class MapParams:
    A: float = 0.0
    L_max: float = L_MAX_DEFAULT

    def __post_init__(self):
        if not (self.A >= 0.0):
            raise ValueError("A must be >= 0")
        if not (self.L_max > 0.0):
            raise ValueError("L_max must be > 0")


def kick_fields(q):
    """V(q) = -exp(-q^2) and F(q) = -V'(q) = -2q exp(-q^2)."""
    e = np.exp(-np.square(q))
    return -e, -2.0 * np.asarray(q) * e


# ---------------------------------------------------------------- kernels

@nb.njit(cache=True)
def step_kernel(q, p, th, L, A, Lm):
    """One drift-kick-drift step with theta left unwrapped."""
    q1 = q + 0.5 * p
    th1 = th + 0.5 * L
    e = math.exp(-q1 * q1)
    V = -e
    F = -2.0 * q1 * e
    s = math.sin(th1)
    c = math.cos(th1)
    den = 1.0 + A * V * s
    th2 = th1 - (1.0 + A * c) * V
    p2 = p + (Lm - L) * (1.0 + A * c) * F / den
    L2 = (L + Lm * A * V * s) / den
    return q1 + 0.5 * p2, p2, th2 + 0.5 * L2, L2


@nb.njit(cache=True)
def inverse_kernel(q, p, th, L, A, Lm):
    """Exact inverse of step_kernel. Returns (q, p, th, L, newton_iterations);
    the iteration count is -1 when Newton fails."""
    q1 = q - 0.5 * p  # q'' = q'
    th2 = th - 0.5 * L
    e = math.exp(-q1 * q1)
    V = -e
    F = -2.0 * q1 * e
    # solve th2 = th1 - (1 + A cos th1) V for th1
    th1 = th2 + V
    it = 0
    if A != 0.0:
        ok = False
        for it in range(1, NEWTON_MAXIT + 1):
            g = th1 - (1.0 + A * math.cos(th1)) * V - th2
            if abs(g) <= NEWTON_TOL:
                ok = True
                break
            dg = 1.0 + A * math.sin(th1) * V
            d = g / dg
            # damping: never move by more than 1 rad
            if d > 1.0:
                d = 1.0
            elif d < -1.0:
                d = -1.0
            th1 -= d
        if not ok:
            return q1, p, th1, L, -1
    else:
        it = 1
    s = math.sin(th1)
    c = math.cos(th1)
    den = 1.0 + A * V * s
    L1 = L * den - Lm * A * V * s
    p1 = p - (Lm - L1) * (1.0 + A * c) * F / den
    return q1 - 0.5 * p1, p1, th1 - 0.5 * L1, L1, it


@nb.njit(cache=True)
def reduced_kernel(q, p, k):
    """Reduced map at A = 0 with force factor k = L_max - L."""
    h = q + 0.5 * p
    f = h * math.exp(-h * h) * k
    return q + p - f, p - 2.0 * f


@nb.njit(cache=True)
def reduced_inverse_kernel(q, p, k):
    h = q - 0.5 * p
    f = h * math.exp(-h * h) * k
    p0 = p + 2.0 * f
    return h - 0.5 * p0, p0


@nb.njit(cache=True)
def iterate_kernel(x, A, Lm, n):
    """Iterate an (N, 4) array of states n steps forward (n >= 0) or
    backward (n < 0). Theta is wrapped at the end."""
    out = x.copy()
    for i in range(out.shape[0]):
        q, p, th, L = out[i, 0], out[i, 1], out[i, 2], out[i, 3]
        if n >= 0:
            for _ in range(n):
                q, p, th, L = step_kernel(q, p, th, L, A, Lm)
        else:
            for _ in range(-n):
                q, p, th, L, it = inverse_kernel(q, p, th, L, A, Lm)
                if it < 0:
                    q = np.nan
                    break
        out[i, 0] = q
        out[i, 1] = p
        out[i, 2] = th % TWO_PI
        out[i, 3] = L
    return out


@nb.njit(cache=True)
def reduced_iterate_kernel(q, p, k, n):
    """Iterate arrays of (q, p) under the reduced map n times (sign = direction)."""
    qo = q.copy()
    po = p.copy()
    for i in range(qo.size):
        a = qo[i]
        b = po[i]
        if n >= 0:
            for _ in range(n):
                a, b = reduced_kernel(a, b, k)
        else:
            for _ in range(-n):
                a, b = reduced_inverse_kernel(a, b, k)
        qo[i] = a
        po[i] = b
    return qo, po


# ---------------------------------------------------------------- wrappers

def _check_den(q, p, th, L, A):
    q1 = q + 0.5 * p
    den = 1.0 + A * (-math.exp(-q1 * q1)) * math.sin(th + 0.5 * L)
    if abs(den) < 1e-12:
        raise SingularKickError(f"kick denominator {den:.3e} at q'={q1}")


def full_step(x: PhasePoint, params: MapParams = MapParams()) -> PhasePoint:
    """Advance a phase point by one map step."""
    _check_den(x.q, x.p, x.theta, x.L, params.A)
    q, p, th, L = step_kernel(x.q, x.p, x.theta, x.L, params.A, params.L_max)
    return PhasePoint(q, p, wrap_angle(th), L)


def inverse_step(x: PhasePoint, params: MapParams = MapParams()) -> PhasePoint:
    """Exact inverse of full_step (Newton on the implicit angle equation)."""
    q, p, th, L, it = inverse_kernel(x.q, x.p, x.theta, x.L, params.A, params.L_max)
    if it < 0:
        raise NewtonError(
            f"kick inversion did not converge (q'={x.q - 0.5 * x.p}, "
            f"theta''={x.theta - 0.5 * x.L})"
        )
    return PhasePoint(q, p, wrap_angle(th), L)


def reduced_step(q, p, L, params: MapParams = MapParams()):
    """Reduced map at A = 0:
    q -> q + p - h exp(-h^2)(L_max - L),  p -> p - 2 h exp(-h^2)(L_max - L),
    with h = q + p/2. Accepts scalars or arrays."""
    k = params.L_max - L
    h = np.asarray(q) + 0.5 * np.asarray(p)
    f = h * np.exp(-h * h) * k
    qn = np.asarray(q) + np.asarray(p) - f
    pn = np.asarray(p) - 2.0 * f
    if qn.ndim == 0:
        return float(qn), float(pn)
    return qn, pn


def reduced_inverse(q, p, L, params: MapParams = MapParams()):
    k = params.L_max - L
    h = np.asarray(q) - 0.5 * np.asarray(p)
    f = h * np.exp(-h * h) * k
    p0 = np.asarray(p) + 2.0 * f
    q0 = h - 0.5 * p0
    if q0.ndim == 0:
        return float(q0), float(p0)
    return q0, p0


def step_array(x, params: MapParams = MapParams(), n: int = 1):
    """Iterate an (N, 4) array of states by n steps (negative n goes back)."""
    x = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
    return iterate_kernel(x, params.A, params.L_max, int(n))


def jacobian_fd(x: PhasePoint, params: MapParams = MapParams(), h: float = 1e-6):
    """Central-difference Jacobian of full_step in (q, p, theta, L) order.

    Theta is left unwrapped so that no 2pi jumps enter the differences.
    """
    x0 = x.as_array()
    J = np.empty((4, 4))
    for j in range(4):
        xp = x0.copy()
        xm = x0.copy()
        xp[j] += h
        xm[j] -= h
        fp = np.array(step_kernel(*xp, params.A, params.L_max))
        fm = np.array(step_kernel(*xm, params.A, params.L_max))
        J[:, j] = (fp - fm) / (2.0 * h)
    return J


SYMPLECTIC_FORM = np.array(
    [[0.0, 1.0, 0.0, 0.0],
     [-1.0, 0.0, 0.0, 0.0],
     [0.0, 0.0, 0.0, 1.0],
     [0.0, 0.0, -1.0, 0.0]]
)
