"""Superradiant emission and radiation-efficiency estimates (SI units)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numba
import numpy as np

from .model import CODATA, PhysicalConstants, PhysicalParams

__all__ = [
    "RadiationParams",
    "DickeState",
    "dicke_kernel",
    "superradiant_kernel",
    "rhs_dicke",
    "rhs_superradiant_jj",
    "superradiant_kernel_params",
    "radiated_power",
    "pure_dicke_state",
    "logistic_excited_population",
    "josephson_frequency",
    "dipole_moment",
    "spontaneous_rate",
    "purcell_rate",
    "stationary_coherence_sq",
    "weak_damping_coherence_sq",
    "efficiency_from_rate",
    "efficiency_open_space",
    "efficiency_cavity",
]


def josephson_frequency(V, k: PhysicalConstants = CODATA):
    """Angular frequency ``2 e V / hbar`` in rad/s."""
    return 2.0 * k.e * V / k.hbar


def dipole_moment(ell: float, k: PhysicalConstants = CODATA) -> float:
    """Dipole of one Cooper pair across a gap ``ell`` (C m)."""
    return 2.0 * k.e * ell


@dataclass(frozen=True)
class RadiationParams:
    gamma_e: float
    omega_A: float
    ell: Optional[float] = None
    Q: Optional[float] = None
    L: Optional[float] = None
    k: PhysicalConstants = CODATA

    def __post_init__(self):
        for name in ("gamma_e", "omega_A", "ell", "Q", "L"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def d(self) -> Optional[float]:
        return None if self.ell is None else dipole_moment(self.ell, self.k)

    @property
    def lambda_A(self) -> float:
        return 2.0 * math.pi * self.k.c / self.omega_A

    @classmethod
    def from_voltage(cls, V, ell, Q=None, L=None, k: PhysicalConstants = CODATA):
        omega = josephson_frequency(V, k)
        return cls(spontaneous_rate(dipole_moment(ell, k), omega, k), omega, ell, Q, L, k)


class DickeState(NamedTuple):
    n: float  # n1 - n2
    z: complex
    N: float

    @property
    def n1(self) -> float:
        return 0.5 * (self.N + self.n)

    @property
    def n2(self) -> float:
        return 0.5 * (self.N - self.n)

    def purity_defect(self) -> float:
        """``|z|^2 - n1 n2``; zero for a pure state, negative for mixed."""
        return abs(self.z) ** 2 - self.n1 * self.n2

    def as_array(self) -> np.ndarray:
        return np.array([self.n, self.z.real, self.z.imag])


@numba.njit(cache=True, nogil=True)
def dicke_kernel(t, y, p, out):
    omega, g = p[0], p[1]
    n, x, yy = y[0], y[1], y[2]
    out[0] = -2.0 * g * (x * x + yy * yy)
    out[1] = omega * yy + 0.5 * g * n * x
    out[2] = -omega * x + 0.5 * g * n * yy


@numba.njit(cache=True, nogil=True)
def superradiant_kernel(t, y, p, out):
    # p = [gamma, |K|, e, C, hbar, I, gamma_e, time unit in s]
    gamma, K, e, C, hbar, I, ge, unit = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    V, x, yy = y[0], y[1], y[2]
    damp = gamma + 0.5 * ge * C * V / e
    w = 2.0 * e * V / hbar
    out[0] = unit * (-gamma * V - 4.0 * K * e / C * yy + (I - 2.0 * e * ge * (x * x + yy * yy)) / C)
    out[1] = unit * (-damp * x + w * yy)
    out[2] = unit * (-damp * yy - w * x + K * C / (2.0 * e) * V)


def rhs_dicke(omega_A: float, gamma_e: float, s: DickeState) -> DickeState:
    """Mean-field superradiance derivative; ``N`` is conserved (``dN = 0``).

    The coherence grows as ``+gamma_e n z / 2``, the sign that keeps pure
    states pure and reproduces ``dn1/dt = -gamma_e (N - n1) n1``.
    """
    out = np.empty(3)
    dicke_kernel(0.0, s.as_array(), np.array([omega_A, gamma_e]), out)
    return DickeState(out[0], complex(out[1], out[2]), 0.0)


def radiated_power(s: DickeState, omega_A: float, gamma_e: float, k: PhysicalConstants = CODATA):
    return k.hbar * gamma_e * omega_A * abs(s.z) ** 2


def pure_dicke_state(N: float, n1: float, phase: float = 0.0) -> DickeState:
    if not 0.0 <= n1 <= N:
        raise ValueError("need 0 <= n1 <= N")
    z = math.sqrt(n1 * (N - n1)) * complex(math.cos(phase), math.sin(phase))
    return DickeState(2.0 * n1 - N, z, N)


def logistic_excited_population(N, n1_0, gamma_e, t):
    """Closed-form ``n1(t)`` solving ``dn1/dt = -gamma_e (N - n1) n1``."""
    t = np.asarray(t, dtype=float)
    return N / (1.0 + (N - n1_0) / n1_0 * np.exp(gamma_e * N * t))


def superradiant_kernel_params(
    p: PhysicalParams, gamma_e: float, k: PhysicalConstants = CODATA, time_unit: float = 1.0
) -> np.ndarray:
    if gamma_e < 0:
        raise ValueError("gamma_e must be >= 0")
    return np.array([p.rate, abs(p.K), k.e, p.C, k.hbar, p.I, gamma_e, time_unit])


def rhs_superradiant_jj(
    p: PhysicalParams, k: PhysicalConstants, gamma_e: float, V: float, z: complex
) -> tuple[float, complex]:
    """``(dV/dt, dz/dt)`` of the junction with the superradiant loss term.

    The coherence source term is ``i K C V / (2e)``, half of the one in the
    plain junction equations; both are kept as published.
    """
    out = np.empty(3)
    superradiant_kernel(
        0.0, np.array([V, z.real, z.imag]), superradiant_kernel_params(p, gamma_e, k), out
    )
    return float(out[0]), complex(out[1], out[2])


def stationary_coherence_sq(p: PhysicalParams, V: float, k: PhysicalConstants = CODATA) -> float:
    """``|z0|^2`` from the coherence equation at fixed ``V`` with no emission."""
    w = josephson_frequency(V, k)
    src = abs(p.K) * p.C * V / (2.0 * k.e)
    return src**2 / (p.rate**2 + w**2)


def weak_damping_coherence_sq(C: float, I_c: float, k: PhysicalConstants = CODATA) -> float:
    """Order-of-magnitude stationary coherence ``hbar C I_c / (8 e^3)``."""
    return k.hbar * C * I_c / (8.0 * k.e**3)


def spontaneous_rate(d, omega_A, k: PhysicalConstants = CODATA):
    """Free-space emission rate of a dipole ``d`` at ``omega_A`` (1/s)."""
    if np.any(np.asarray(d) < 0) or np.any(np.asarray(omega_A) < 0):
        raise ValueError("d and omega_A must be >= 0")
    return 4.0 * math.pi * k.mu0 * d**2 * omega_A**3 / (3.0 * k.hbar * k.c)


def purcell_rate(gamma_e, Q, lambda_A, L):
    """Cavity-enhanced rate ``gamma_e * 3Q/(4 pi^2) * (lambda_A/L)^3``."""
    for name, val in (("gamma_e", gamma_e), ("Q", Q), ("lambda_A", lambda_A), ("L", L)):
        if not val > 0:
            raise ValueError(f"{name} must be > 0")
    return gamma_e * 3.0 * Q / (4.0 * math.pi**2) * (lambda_A / L) ** 3


def efficiency_from_rate(gamma_e, C, I_c, I, k: PhysicalConstants = CODATA):
    """``eta = 2 e gamma_e |z0|^2 / I`` with the weak-damping ``|z0|^2``."""
    return 2.0 * k.e * gamma_e * weak_damping_coherence_sq(C, I_c, k) / I


def efficiency_open_space(
    p: PhysicalParams, k: PhysicalConstants, V: float, ell: float, I_c: float
) -> float:
    """Radiated over supplied power for a junction emitting into free space.

    ``p.I`` is the bias current and ``p.C`` the junction capacitance.
    """
    for name, val in (("I", p.I), ("V", V), ("ell", ell), ("I_c", I_c)):
        if not val > 0:
            raise ValueError(f"{name} must be > 0")
    pref = 32.0 * math.pi * k.mu0 * k.e**3 / (3.0 * k.hbar**3 * k.c)
    return (I_c / p.I) * pref * p.C * V**3 * ell**2


def efficiency_cavity(eta_rad: float, Q: float) -> float:
    """Cavity efficiency for ``L ~ lambda_A``: ``0.1 * eta_rad * Q``."""
    if not Q > 0:
        raise ValueError("Q must be > 0")
    if eta_rad < 0:
        raise ValueError("eta_rad must be >= 0")
    return 0.1 * eta_rad * Q
