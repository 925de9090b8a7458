"""Bottle billiard: free flight inside a rotationally deformed bottle with
elastic reflection at the wall.

Wall radius rho(q, th) = r(q, th) f(q) with
    f(q) = 1.4 sqrt(1 - q^2)                  q <= 0
    f(q) = a0 q^2.5 + a1 q^2 + 1.4            q > 0
    r(q, th) = 1 + A cos(th) cos(q pi / (2 q0))^2
The neck (minimum of f) sits at q0. A particle crossing the neck plane
outward has escaped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import OutcomeClass, ScatteringRecord, wrap_angle

GRAZE_TOL = 1e-10
MARCH_FLOOR = 1e-4


class Escaped(Exception):
    """The particle left through the neck."""

    def __init__(self, state):
        super().__init__("escaped through the neck")
        self.state = state


class GrazingCollision(Exception):
    pass


@dataclass(frozen=True)
class BottleParams:
    A: float = 0.0
    a0: float = 14.0 / 25.0 * 3.49 ** -0.25
    a1: float = -0.7
    q0: float = 3.49 ** 0.5


@dataclass(frozen=True)
class BilliardState:
    pos: tuple  # (q, x, y)
    vel: tuple  # (vq, vx, vy), unit

    @property
    def q(self):
        return self.pos[0]

    @property
    def L(self):
        return self.pos[1] * self.vel[2] - self.pos[2] * self.vel[1]

    @property
    def theta(self):
        return wrap_angle(math.atan2(self.pos[2], self.pos[1]))

    @property
    def rho(self):
        return math.hypot(self.pos[1], self.pos[2])


def wall_profile(q, params: BottleParams = BottleParams()):
    q = np.asarray(q, dtype=float)
    if np.any(q < -1.0):
        raise ValueError("profile defined for q >= -1")
    neg = 1.4 * np.sqrt(np.clip(1.0 - q * q, 0.0, None))
    qp = np.clip(q, 0.0, None)
    pos = params.a0 * qp ** 2.5 + params.a1 * qp ** 2 + 1.4
    out = np.where(q <= 0.0, neg, pos)
    return float(out) if out.ndim == 0 else out


def _f2_and_deriv(q, params):
    """f^2 and d(f^2)/dq; finite at the pole q = -1."""
    if q <= 0.0:
        return 1.96 * (1.0 - q * q), -3.92 * q
    f = params.a0 * q ** 2.5 + params.a1 * q * q + 1.4
    fp = 2.5 * params.a0 * q ** 1.5 + 2.0 * params.a1 * q
    return f * f, 2.0 * f * fp


def _fprime(q, params):
    if q <= 0.0:
        d = math.sqrt(max(1.0 - q * q, 1e-300))
        return -1.4 * q / d
    return 2.5 * params.a0 * q ** 1.5 + 2.0 * params.a1 * q


def _modulation(q, params):
    u = q * math.pi / (2.0 * params.q0)
    c = math.cos(u) ** 2
    dc = -math.sin(2.0 * u) * math.pi / (2.0 * params.q0)
    return c, dc


def boundary_radius(q, theta, params: BottleParams = BottleParams()):
    f = wall_profile(q, params)
    r = 1.0 + params.A * np.cos(theta) * np.cos(np.asarray(q) * math.pi / (2.0 * params.q0)) ** 2
    out = r * f
    return float(out) if np.ndim(out) == 0 else out


def _G(pos, params):
    """Signed radial gap: negative inside, positive outside."""
    q, x, y = pos
    rho = math.hypot(x, y)
    if q < -1.0:
        return rho + (-1.0 - q)
    th = math.atan2(y, x)
    return rho - boundary_radius(q, th, params)


def _lipschitz(pos, params):
    q, x, y = pos
    rho = max(math.hypot(x, y), 1e-3)
    if q < -1.0:
        return 2.0
    fp = min(abs(_fprime(max(q, -1.0 + 1e-12), params)), 1e3)
    f = wall_profile(max(q, -1.0), params)
    return 1.0 + (1.0 + params.A) * fp + params.A * f * (1.0 + 1.0 / rho)


def surface_normal(pos, params: BottleParams = BottleParams()):
    """Outward unit normal from the gradient of rho^2 - (r f)^2."""
    q, x, y = pos
    rho = math.hypot(x, y)
    f2, df2 = _f2_and_deriv(q, params)
    c, dc = _modulation(q, params)
    if rho > 1e-300:
        ct = x / rho
        rx = params.A * c * (y * y) / rho ** 3
        ry = -params.A * c * x * y / rho ** 3
    else:
        ct, rx, ry = 1.0, 0.0, 0.0
    r = 1.0 + params.A * ct * c
    rq = params.A * ct * dc
    g = np.array([-(2.0 * r * rq * f2 + r * r * df2),
                  2.0 * x - 2.0 * r * f2 * rx,
                  2.0 * y - 2.0 * r * f2 * ry])
    return g / np.linalg.norm(g)


def reflect(v, n):
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > 1e-9 or abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError("reflect needs unit vectors")
    return v - 2.0 * np.dot(v, n) * n


def next_collision(s: BilliardState, params: BottleParams = BottleParams(),
                   t_max: float = 100.0):
    """Fly straight to the first wall crossing. Returns (state at the wall
    with the incoming velocity, flight time)."""
    p0 = np.asarray(s.pos, float)
    v = np.asarray(s.vel, float)
    q0 = params.q0

    def G(t):
        return _G(p0 + t * v, params)

    t = 0.0
    g = G(t)
    while t < t_max:
        pos = p0 + t * v
        if pos[0] >= q0 and v[0] > 0.0:
            raise Escaped(BilliardState(tuple(pos), tuple(v)))
        h = max(0.5 * abs(g) / _lipschitz(pos, params), MARCH_FLOOR)
        tn = t + h
        gn = G(tn)
        if g <= 0.0 < gn:
            tc = brentq(G, t, tn, xtol=1e-15, rtol=1e-15)
            if v[0] > 0.0:
                t_neck = (q0 - p0[0]) / v[0]
                if 0.0 <= t_neck < tc:
                    raise Escaped(BilliardState(tuple(p0 + t_neck * v), tuple(v)))
            pc = p0 + tc * v
            n = surface_normal(pc, params)
            if abs(np.dot(v, n)) < GRAZE_TOL:
                raise GrazingCollision(f"grazing hit at {pc}")
            return BilliardState(tuple(pc), tuple(v)), tc
        t, g = tn, gn
    raise RuntimeError("no collision within flight budget")


def bounce(s: BilliardState, params: BottleParams = BottleParams()):
    """Flight plus reflection. Returns (post-reflection state, flight time)."""
    hit, t = next_collision(s, params)
    n = surface_normal(hit.pos, params)
    v = reflect(hit.vel, n)
    v /= np.linalg.norm(v)
    return BilliardState(hit.pos, tuple(v)), t


def birkhoff_step(s: BilliardState, params: BottleParams = BottleParams()):
    """Next bounce in map coordinates (q, p, theta, L). Along a chord rho^2
    is convex in time, so every bounce is a maximum of rho."""
    nxt, _ = bounce(s, params)
    return (nxt.q, nxt.vel[0], nxt.theta, nxt.L), nxt


def launch_state(chi_in, psi_in, p_in, L_in, params: BottleParams = BottleParams(),
                 margin=1e-6):
    """Entry through the neck plane q = q0 moving inward (p_in < 0 in q).

    chi sets the launch radius rho = (chi / 2pi) * f(q0); psi is the
    azimuth. The transverse velocity carries angular momentum L_in and
    points inward radially.
    """
    p = -abs(p_in)
    if abs(p) >= 1.0:
        raise ValueError("|p_in| must be < 1 for unit speed")
    vt = math.sqrt(1.0 - p * p)
    # r = 1 on the neck plane, so the opening radius is f(q0) for every th
    rn = wall_profile(params.q0, params)
    rho = max(chi_in / (2.0 * math.pi), 1e-6) * rn
    vth = L_in / rho
    if abs(vth) > vt:
        raise ValueError("L_in too large for this launch radius")
    vr = -math.sqrt(vt * vt - vth * vth)
    c, s = math.cos(psi_in), math.sin(psi_in)
    pos = (params.q0 - margin, rho * c, rho * s)
    vel = (p, vr * c - vth * s, vr * s + vth * c)
    return BilliardState(pos, vel)


def scatter_billiard(chi_in, psi_in, p_in, L_in, params: BottleParams = BottleParams(),
                     max_bounces=10_000):
    """Launch through the neck and bounce until the particle leaves."""
    s = launch_state(chi_in, psi_in, p_in, L_in, params)
    L0 = s.L
    for n in range(max_bounces):
        try:
            s, _ = bounce(s, params)
        except Escaped as e:
            out = e.state
            return ScatteringRecord(chi_in, psi_in, float(out.vel[0]), float(out.L - L0),
                                    OutcomeClass.from_p(out.vel[0]), n)
    return ScatteringRecord(chi_in, psi_in, math.nan, math.nan, OutcomeClass.TRAPPED,
                            max_bounces)
