"""Channel with an obstacle: harmonic transverse confinement plus a
localized potential W = -exp(-D)/D.

    H = p^2/2 + p_rho^2/2 + L^2/(2 rho^2) + rho^2/2 + W
    D^2 = q^2 + rho^2 (sin^2 th + (1+A)^2 cos^2 th) + 1

Trajectories are integrated in Cartesian transverse coordinates
(x, y) = rho (cos th, sin th), which removes the 1/rho^2 singularity.
The Poincare section is a maximum of rho: x px + y py = 0 going negative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import (FLOW_TIME_BUDGET, Q_ASYM, AsymptoticLabel, OutcomeClass,
                   ScatteringRecord, wrap_angle)

RTOL = 1e-12
ATOL = 1e-12
RHO_MIN = 1e-8
E_DEFAULT = 2.0


class RegularizationError(ArithmeticError):
    pass


class NoCrossing(RuntimeError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    A: float = 0.0
    E: float = E_DEFAULT
    obstacle: bool = True  # False gives the empty channel H_0

    def __post_init__(self):
        if not (self.A >= 0.0):
            raise ValueError("A must be >= 0")


@dataclass(frozen=True)
class ChannelState:
    q: float
    p: float
    rho: float
    p_rho: float
    theta: float
    L: float

    def to_cartesian(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        x, y = self.rho * c, self.rho * s
        vt = self.L / self.rho if self.rho > 0 else 0.0
        px = self.p_rho * c - vt * s
        py = self.p_rho * s + vt * c
        return np.array([self.q, x, y, self.p, px, py])

    @classmethod
    def from_cartesian(cls, u) -> "ChannelState":
        q, x, y, p, px, py = (float(v) for v in u)
        rho = math.hypot(x, y)
        if rho <= RHO_MIN:
            raise RegularizationError(f"rho = {rho:.3e} below the floor")
        return cls(q, p, rho, (x * px + y * py) / rho,
                   wrap_angle(math.atan2(y, x)), x * py - y * px)

    @property
    def phi(self) -> float:
        return transverse_actions(self.to_cartesian())[3]


def potential_W(q, rho, theta, A=0.0):
    g = np.sin(theta) ** 2 + (1.0 + A) ** 2 * np.cos(theta) ** 2
    D = np.sqrt(np.square(q) + np.square(rho) * g + 1.0)
    return -np.exp(-D) / D


def _W_cart(q, x, y, A):
    D = math.sqrt(q * q + y * y + (1.0 + A) ** 2 * x * x + 1.0)
    return -math.exp(-D) / D


def _gradW_cart(q, x, y, A):
    a2 = (1.0 + A) ** 2
    D = math.sqrt(q * q + y * y + a2 * x * x + 1.0)
    dWdD = math.exp(-D) * (1.0 / D + 1.0 / (D * D))
    f = dWdD / D
    return f * q, f * a2 * x, f * y


def hamiltonian(s: ChannelState, params: ChannelParams = ChannelParams()) -> float:
    h0 = 0.5 * s.p ** 2 + 0.5 * s.p_rho ** 2 + s.L ** 2 / (2.0 * s.rho ** 2) + 0.5 * s.rho ** 2
    if not params.obstacle:
        return h0
    return h0 + float(potential_W(s.q, s.rho, s.theta, params.A))


def hamiltonian_cart(u, params: ChannelParams = ChannelParams()) -> float:
    q, x, y, p, px, py = u
    h = 0.5 * (p * p + px * px + py * py) + 0.5 * (x * x + y * y)
    if params.obstacle:
        h += _W_cart(q, x, y, params.A)
    return h


def flow_derivatives(s: ChannelState, params: ChannelParams = ChannelParams()):
    """Time derivatives of (q, p, rho, p_rho, theta, L)."""
    if s.rho <= RHO_MIN:
        raise RegularizationError(f"rho = {s.rho:.3e} below the floor")
    Wq = Wr = Wt = 0.0
    if params.obstacle:
        a2 = (1.0 + params.A) ** 2
        sn, cs = math.sin(s.theta), math.cos(s.theta)
        g = sn * sn + a2 * cs * cs
        D = math.sqrt(s.q ** 2 + s.rho ** 2 * g + 1.0)
        dWdD = math.exp(-D) * (1.0 / D + 1.0 / (D * D))
        Wq = dWdD * s.q / D
        Wr = dWdD * s.rho * g / D
        Wt = dWdD * s.rho ** 2 * 2.0 * sn * cs * (1.0 - a2) / (2.0 * D)
    return (s.p, -Wq, s.p_rho, s.L ** 2 / s.rho ** 3 - s.rho - Wr,
            s.L / s.rho ** 2, -Wt)


def _rhs(params: ChannelParams):
    A = params.A
    obstacle = params.obstacle

    def f(t, u):
        q, x, y, p, px, py = u
        if obstacle:
            gq, gx, gy = _gradW_cart(q, x, y, A)
        else:
            gq = gx = gy = 0.0
        return [p, px, py, -gq, -x - gx, -y - gy]

    return f


def transverse_actions(u):
    """(E_t, L, I, phi, th_aa) of the transverse oscillator from Cartesian
    state u. th_aa is the rotation angle variable (rate sign(L))."""
    _, x, y, _, px, py = u
    z = complex(x, y)
    zd = complex(px, py)
    cp = 0.5 * (z - 1j * zd)
    cm = 0.5 * (z + 1j * zd)
    Jp, Jm = abs(cp) ** 2, abs(cm) ** 2
    Et = Jp + Jm
    L = Jp - Jm
    phi = wrap_angle(np.angle(cp) - np.angle(cm))
    th = wrap_angle(np.angle(cp) if L >= 0 else np.angle(cm))
    return Et, L, min(Jp, Jm), phi, th


def label_state(u, params: ChannelParams = ChannelParams()) -> AsymptoticLabel:
    """Asymptotic label of a Cartesian state with p != 0 (W neglected)."""
    q, p = u[0], u[3]
    if p == 0.0:
        raise ValueError("p = 0: asymptote undefined")
    Et, L, _, phi, th = transverse_actions(u)
    sgn = 1.0 if L >= 0 else -1.0
    t = q / p
    return AsymptoticLabel(0.5 * p * p + Et, p, L, phi - 2.0 * t, th - sgn * t)


def state_from_label(lab: AsymptoticLabel, q: float) -> np.ndarray:
    """Free-channel Cartesian state at longitudinal position q with the given
    asymptotic label. Needs E - p^2/2 >= |L|."""
    if lab.p == 0.0:
        raise ValueError("p must be nonzero")
    Et = lab.E - 0.5 * lab.p ** 2
    if Et < abs(lab.L) - 1e-14:
        raise ValueError("energy partition inconsistent: E - p^2/2 < |L|")
    Et = max(Et, abs(lab.L))
    t = q / lab.p
    phi = lab.chi + 2.0 * t
    sgn = 1.0 if lab.L >= 0 else -1.0
    th = lab.psi + sgn * t
    ap = math.sqrt(max(0.5 * (Et + lab.L), 0.0))
    am = math.sqrt(max(0.5 * (Et - lab.L), 0.0))
    if lab.L >= 0:
        gp, gm = th, th - phi
    else:
        gm, gp = th, th + phi
    cp = ap * complex(math.cos(gp), math.sin(gp))
    cm = am * complex(math.cos(gm), math.sin(gm))
    z = cp + cm
    zd = 1j * (cp - cm)
    return np.array([q, z.real, z.imag, lab.p, zd.real, zd.imag])


def _section_event(t, u):
    return u[1] * u[4] + u[2] * u[5]


_section_event.direction = -1


def integrate_to_section(s: ChannelState | np.ndarray, params: ChannelParams = ChannelParams(),
                         t_max: float = 100.0, t_skip: float = 1e-6):
    """Integrate to the next maximum of rho. Returns (Cartesian state, time).

    Crossings within ``t_skip`` of the start are ignored so that a state
    already on the section advances to the next one.
    """
    u0 = s.to_cartesian() if isinstance(s, ChannelState) else np.asarray(s, float)
    f = _rhs(params)
    t0 = 0.0
    chunk = 10.0
    u = u0
    while t0 < t_max:
        t1 = min(t0 + chunk, t_max)
        sol = solve_ivp(f, (t0, t1), u, method="DOP853", rtol=RTOL, atol=ATOL,
                        events=_section_event, dense_output=False)
        te = sol.t_events[0]
        ye = sol.y_events[0]
        ok = te > t_skip
        if np.any(ok):
            i = int(np.argmax(ok))
            return ye[i], float(te[i])
        u = sol.y[:, -1]
        t0 = t1
    raise NoCrossing(f"no section crossing within t = {t_max}")


def poincare_map(s: ChannelState, params: ChannelParams = ChannelParams(), **kw):
    """Section-to-section map in (q, p, theta, L)."""
    u, t = integrate_to_section(s, params, **kw)
    st = ChannelState.from_cartesian(u)
    return (st.q, st.p, st.theta, st.L), st, t


@dataclass(frozen=True)
class ChannelScatter:
    record: ScatteringRecord
    label_out: AsymptoticLabel | None
    energy_drift: float
    time: float
    W_in: float
    W_out: float


def scatter_channel(lab: AsymptoticLabel, params: ChannelParams = ChannelParams(),
                    q_launch: float = Q_ASYM, t_max: float = FLOW_TIME_BUDGET) -> ChannelScatter:
    """Launch at q = -q_launch (p > 0) or +q_launch (p < 0) and integrate
    until |q| >= q_launch moving outward."""
    if lab.p == 0.0:
        raise ValueError("p_in must be nonzero")
    q0 = -abs(q_launch) if lab.p > 0 else abs(q_launch)
    u0 = state_from_label(lab, q0)
    f = _rhs(params)
    H0 = hamiltonian_cart(u0, params)
    ev = lambda t, u: u[0] * u[0] - q_launch * q_launch  # noqa: E731
    ev.terminal = True
    ev.direction = 1
    sol = solve_ivp(f, (0.0, t_max), u0, method="DOP853", rtol=RTOL, atol=ATOL,
                    events=ev)
    uf = sol.y[:, -1]
    drift = abs(hamiltonian_cart(uf, params) - H0) / max(abs(H0), 1e-300)
    W_in = _W_cart(u0[0], u0[1], u0[2], params.A) if params.obstacle else 0.0
    if sol.status != 1:
        rec = ScatteringRecord(lab.chi, lab.psi, math.nan, math.nan,
                               OutcomeClass.TRAPPED, len(sol.t))
        return ChannelScatter(rec, None, drift, float(sol.t[-1]), W_in, math.nan)
    uf = sol.y_events[0][0]
    out = label_state(uf, params)
    W_out = _W_cart(uf[0], uf[1], uf[2], params.A) if params.obstacle else 0.0
    rec = ScatteringRecord(lab.chi, lab.psi, float(uf[3]), out.L - lab.L,
                           OutcomeClass.from_p(uf[3]), len(sol.t))
    return ChannelScatter(rec, out, drift, float(sol.t_events[0][0]), W_in, W_out)


def radial_action(Et: float, L: float) -> float:
    """I = (1/pi) * integral of p_rho over [rho_min, rho_max] for the
    transverse oscillator with energy Et and angular momentum L."""
    from scipy.integrate import quad

    disc = Et * Et - L * L
    if disc <= 0:
        return 0.0
    r2lo = Et - math.sqrt(disc)
    r2hi = Et + math.sqrt(disc)
    lo, hi = math.sqrt(r2lo), math.sqrt(r2hi)

    def pr(r):
        v = 2.0 * Et - L * L / (r * r) - r * r
        return math.sqrt(max(v, 0.0))

    val, _ = quad(pr, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-13)
    return val / math.pi
