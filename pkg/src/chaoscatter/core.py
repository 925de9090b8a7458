"""Shared types, angle arithmetic and asymptotic labels."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi

# asymptotic region |q| >= Q_ASYM, shared by every model
Q_ASYM = 8.0
MAP_STEP_BUDGET = 10_000
FLOW_TIME_BUDGET = 10_000.0


class OutcomeClass(enum.IntEnum):
    """Fate of a scattering trajectory."""

    TRAPPED = 0
    TRANSMITTED = 1
    REFLECTED = -1

    @classmethod
    def from_p(cls, p_out: float) -> "OutcomeClass":
        if not math.isfinite(p_out):
            return cls.TRAPPED
        return cls.TRANSMITTED if p_out > 0 else cls.REFLECTED


def _check_finite(x, name="x"):
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be finite")


def wrap_angle(x):
    """Reduce an angle (scalar or array) to [0, 2pi)."""
    _check_finite(x)
    r = np.mod(x, TWO_PI)
    # np.mod can round up to exactly 2pi for tiny negative inputs
    r = np.where(r >= TWO_PI, 0.0, r)
    if np.ndim(r) == 0:
        return float(r)
    return r


def angle_diff(a, b):
    """Signed circular difference a - b in [-pi, pi)."""
    return np.mod(np.asarray(a) - np.asarray(b) + math.pi, TWO_PI) - math.pi


def compactify(q):
    """z = tanh(q), mapping the real line onto (-1, 1)."""
    return np.tanh(q)


def decompactify(z):
    z = np.asarray(z, dtype=float)
    if np.any(np.abs(z) >= 1.0):
        raise ValueError("decompactify needs |z| < 1")
    out = np.arctanh(z)
    return float(out) if out.ndim == 0 else out


def reduced_phases(q, p, theta, phi, sign_L):
    """Asymptotic phases (psi, chi) that stay constant under free motion.

    psi = theta - sign(L) q/p and chi = phi - 2 q/p, both wrapped.
    """
    p = np.asarray(p, dtype=float)
    if np.any(p == 0.0):
        raise ValueError("reduced phases are undefined at p = 0")
    sign_L = np.where(np.asarray(sign_L) < 0, -1.0, 1.0)
    t = np.asarray(q) / p
    psi = wrap_angle(np.asarray(theta) - sign_L * t)
    chi = wrap_angle(np.asarray(phi) - 2.0 * t)
    return psi, chi


def map_phase_label(q, p, Q=Q_ASYM):
    """chi = 2pi(|q| - Q)/|p| for |q| in the fundamental window [Q, Q + |p|)."""
    aq = np.abs(np.asarray(q, dtype=float))
    ap = np.abs(np.asarray(p, dtype=float))
    if np.any(ap == 0.0):
        raise ValueError("p must be nonzero")
    frac = (aq - Q) / ap
    if np.any(frac < 0.0) or np.any(frac >= 1.0):
        raise ValueError("|q| outside the window [Q, Q + |p|)")
    chi = TWO_PI * frac
    return float(chi) if np.ndim(chi) == 0 else chi


@dataclass(frozen=True)
class PhasePoint:
    """Point (q, p, theta, L) in the domain of the 4D map."""

    q: float
    p: float
    theta: float
    L: float

    def __post_init__(self):
        vals = (self.q, self.p, self.theta, self.L)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("PhasePoint fields must be finite")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.p, self.theta, self.L])

    @classmethod
    def from_array(cls, a) -> "PhasePoint":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


@dataclass(frozen=True)
class AsymptoticLabel:
    """Free-motion label (E, p, L, chi, psi) of an asymptote."""

    E: float
    p: float
    L: float
    chi: float
    psi: float

    def __post_init__(self):
        object.__setattr__(self, "chi", wrap_angle(self.chi))
        object.__setattr__(self, "psi", wrap_angle(self.psi))


@dataclass(frozen=True)
class ScatteringRecord:
    """One scattering event. For TRAPPED outcomes p_out and delta_L are NaN."""

    chi_in: float
    psi_in: float
    p_out: float
    delta_L: float
    outcome: OutcomeClass
    steps: int

    @property
    def valid(self) -> bool:
        return self.outcome != OutcomeClass.TRAPPED
