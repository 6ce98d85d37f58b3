"""Stationary current-voltage characteristic and its derived quantities."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._cubic import solve_cubic
from .model import CODATA, PhysicalConstants, PhysicalParams, nondimensionalize

__all__ = [
    "CharacteristicExtrema",
    "FixedPoint",
    "i_of_v",
    "di_dv",
    "characteristic_dimensional",
    "extrema",
    "critical_current",
    "stewart_mccumber",
    "squid_effective_alpha",
    "squid_period",
    "fixed_point",
    "zeta_equilibrium",
]

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class CharacteristicExtrema:
    i_c: float
    v_minus: Optional[float] = None
    v_plus: Optional[float] = None
    i_r: Optional[float] = None

    @property
    def hysteretic(self) -> bool:
        return self.i_r is not None and self.i_c > self.i_r


@dataclass(frozen=True)
class FixedPoint:
    v0: float
    zeta0: complex
    multiplicity: int = 1

    @property
    def i_j0(self) -> float:
        return self.zeta0.imag

    @property
    def i_s0(self) -> float:
        return self.zeta0.real

    def state(self):
        from .model import State3

        return State3(self.v0, self.i_j0, self.i_s0)


def i_of_v(alpha, v):
    """Dimensionless bias current ``v (1 + 4 alpha / (1 + v^2))``; odd in ``v``."""
    v = np.asarray(v, dtype=float) if not np.isscalar(v) else float(v)
    return v * (1.0 + 4.0 * alpha / (1.0 + v * v))


def di_dv(alpha, v):
    """Slope of the characteristic (differential conductance, dimensionless)."""
    v2 = np.asarray(v, dtype=float) ** 2 if not np.isscalar(v) else float(v) ** 2
    return 1.0 + 4.0 * alpha * (1.0 - v2) / (1.0 + v2) ** 2


def characteristic_dimensional(
    p: PhysicalParams, k: PhysicalConstants, V
):
    """Stationary current in amperes at junction voltage ``V`` (volts)."""
    V = np.asarray(V, dtype=float) if not np.isscalar(V) else float(V)
    omega_j = 2.0 * k.e * V / k.hbar
    lorentz = 4.0 * abs(p.K) ** 2 / (omega_j**2 + (p.R * p.C) ** -2)
    return V * (1.0 + lorentz) / p.R


def extrema(alpha: float) -> CharacteristicExtrema:
    """Critical (and, for ``alpha > 2``, retrapping) current.

    For ``alpha <= 2`` the characteristic is monotone and ``i_c`` is taken at
    the inflection point ``v = sqrt(3)``; that is a convention, there is no
    local maximum to point at.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha <= 2.0:
        if alpha == 2.0:
            i_c = 3.0 * SQRT3
            return CharacteristicExtrema(i_c=i_c, v_minus=SQRT3, v_plus=SQRT3, i_r=i_c)
        return CharacteristicExtrema(i_c=SQRT3 * (1.0 + alpha))
    root = 2.0 * math.sqrt(alpha * (alpha - 2.0))
    v_minus = math.sqrt(2.0 * alpha - 1.0 - root)
    v_plus = math.sqrt(2.0 * alpha - 1.0 + root)
    return CharacteristicExtrema(
        i_c=i_of_v(alpha, v_minus),
        v_minus=v_minus,
        v_plus=v_plus,
        i_r=i_of_v(alpha, v_plus),
    )


def critical_current(alpha: float) -> float:
    return extrema(alpha).i_c


def stewart_mccumber(p: PhysicalParams, k: PhysicalConstants = CODATA) -> float:
    """``beta_c = 2 e R^2 C I_c / hbar``, which reduces to the dimensionless ``i_c``."""
    dp, scales = nondimensionalize(p, k)
    I_c = critical_current(dp.alpha) * scales.I_tilde
    return 2.0 * k.e * p.R**2 * p.C * I_c / k.hbar


def squid_period(k: PhysicalConstants = CODATA) -> float:
    """Flux period ``pi hbar / e`` (one superconducting flux quantum)."""
    return math.pi * k.hbar / k.e


def squid_effective_alpha(K_A, K_B, Phi, gamma, k: PhysicalConstants = CODATA):
    """Effective ``alpha`` of a two-channel interferometer threaded by flux ``Phi``."""
    if K_A < 0 or K_B < 0:
        raise ValueError("tunneling rates must be >= 0")
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    phase = 2.0 * k.e * np.asarray(Phi, dtype=float) / k.hbar
    K2 = K_A**2 + K_B**2 + 2.0 * K_A * K_B * np.cos(phase)
    # clip round-off below zero at full destructive interference
    out = np.maximum(K2, 0.0) / gamma**2
    return float(out) if np.ndim(out) == 0 else out


def zeta_equilibrium(alpha: float, v0: float) -> complex:
    """Equilibrium coherence ``4 alpha / (1 - i / v0)``; zero at ``v0 = 0`` by continuity."""
    if v0 == 0.0:
        return 0j
    return 4.0 * alpha / (1.0 - 1j / v0)


def fixed_point(alpha: float, i_tot: float) -> list[FixedPoint]:
    """All equilibria at bias ``i_tot``, sorted by voltage.

    Solves ``v^3 - i v^2 + (1 + 4 alpha) v - i = 0``. A root at the edge of
    the hysteretic window (discriminant ~ 0) is returned once with
    ``multiplicity=2``.
    """
    roots = solve_cubic(-i_tot, 1.0 + 4.0 * alpha, -i_tot)
    return [
        FixedPoint(v0=v, zeta0=zeta_equilibrium(alpha, v), multiplicity=min(m, 3))
        for v, m in zip(roots.real, roots.multiplicity)
    ]
