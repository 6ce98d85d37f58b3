"""State and parameter types plus the right-hand sides of every ODE system.

Two layers live here. The public functions (``rhs_autonomous``,
``rhs_driven``, ...) take and return the typed values below and are meant
for interactive use and tests. Each of them wraps a numba kernel with the
signature ``kernel(t, y, params, out)`` operating on flat float64 arrays;
the kernels are what :mod:`jjsim.integrate` steps.

Variable conventions
--------------------
Dimensionless state is ``(v, i_j, i_s)`` with complex coherence
``zeta = i_s + 1j * i_j``. Dimensionless time is ``tau = gamma * t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numba
import numpy as np
import scipy.constants as sc

__all__ = [
    "PhysicalConstants",
    "PhysicalParams",
    "Drive",
    "DimensionlessParams",
    "Scales",
    "State3",
    "MdmState",
    "nondimensionalize",
    "rhs_autonomous",
    "rhs_driven",
    "rhs_mdm_full",
    "external_current_from_rates",
    "total_number_relaxation",
    "mdm_to_dimensionless",
    "dimensionless_to_mdm",
    "autonomous_kernel",
    "driven_kernel",
    "mdm_kernel",
    "mdm_kernel_params",
    "rhs_vz",
]


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA constants in SI units."""

    e: float = sc.e
    hbar: float = sc.hbar
    mu0: float = sc.mu_0
    c: float = sc.c

    def __post_init__(self):
        for name in ("e", "hbar", "mu0", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class PhysicalParams:
    """SI junction parameters.

    ``gamma`` defaults to ``1/(R*C)``; if given explicitly it must agree
    with that value (relative tolerance 1e-9). ``K`` may be complex, only
    its modulus enters the characteristic.
    """

    R: float
    C: float
    K: complex = 0.0
    I: float = 0.0
    gamma: Optional[float] = None
    gamma_up_1: Optional[float] = None
    gamma_up_2: Optional[float] = None

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be > 0")
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if self.gamma is not None:
            if not self.gamma > 0:
                raise ValueError("gamma must be > 0")
            expected = 1.0 / (self.R * self.C)
            if not math.isclose(self.gamma, expected, rel_tol=1e-9):
                raise ValueError(
                    f"gamma={self.gamma!r} inconsistent with 1/(R*C)={expected!r}"
                )
        for name in ("gamma_up_1", "gamma_up_2"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def rate(self) -> float:
        """Relaxation rate gamma in 1/s."""
        return self.gamma if self.gamma is not None else 1.0 / (self.R * self.C)


@dataclass(frozen=True)
class Drive:
    v_f: float
    omega_f: float

    def __post_init__(self):
        if not self.omega_f > 0:
            raise ValueError("omega_f must be > 0")


@dataclass(frozen=True)
class DimensionlessParams:
    alpha: float
    i_tot: float = 0.0
    drive: Optional[Drive] = None

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError("alpha must be >= 0")

    def kernel_params(self) -> np.ndarray:
        if self.drive is None:
            return np.array([self.alpha, self.i_tot], dtype=np.float64)
        return np.array(
            [self.alpha, self.i_tot, self.drive.v_f, self.drive.omega_f],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class Scales:
    V_tilde: float
    I_tilde: float
    t_scale: float


class State3(NamedTuple):
    v: float
    i_j: float
    i_s: float

    @property
    def zeta(self) -> complex:
        return complex(self.i_s, self.i_j)

    @classmethod
    def from_zeta(cls, v: float, zeta: complex) -> "State3":
        return cls(float(v), float(zeta.imag), float(zeta.real))

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=np.float64)


class MdmState(NamedTuple):
    """Populations and coherence of the 2x2 macroscopic density matrix."""

    n1: float
    n2: float
    z: complex

    @property
    def n(self) -> float:
        return self.n1 - self.n2

    @property
    def N(self) -> float:
        return self.n1 + self.n2

    @property
    def phi(self) -> float:
        return float(np.angle(self.z))

    def energy_difference(self, C: float, k: PhysicalConstants = CODATA) -> float:
        """U = 2 e^2 n / C, the work to move one pair across the junction."""
        return 2.0 * k.e**2 * self.n / C

    def is_physical(self, rtol: float = 1e-12) -> bool:
        if self.n1 < 0 or self.n2 < 0:
            return False
        return abs(self.z) ** 2 <= self.n1 * self.n2 * (1 + rtol)

    def as_array(self) -> np.ndarray:
        return np.array([self.n1, self.n2, self.z.real, self.z.imag])

    @classmethod
    def from_array(cls, y) -> "MdmState":
        return cls(float(y[0]), float(y[1]), complex(y[2], y[3]))


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def autonomous_kernel(t, y, p, out):
    alpha, i_tot = p[0], p[1]
    v, i_j, i_s = y[0], y[1], y[2]
    out[0] = i_tot - v - i_j
    out[1] = -i_j - i_s * v + 4.0 * alpha * v
    out[2] = -i_s + i_j * v


@numba.njit(cache=True, nogil=True)
def driven_kernel(t, y, p, out):
    alpha, i_tot, v_f, omega_f = p[0], p[1], p[2], p[3]
    v, i_j, i_s = y[0], y[1], y[2]
    v_eff = v + v_f * math.cos(omega_f * t)
    out[0] = i_tot - v - i_j
    out[1] = -i_j - i_s * v_eff + 4.0 * alpha * v
    out[2] = -i_s + i_j * v_eff


@numba.njit(cache=True, nogil=True)
def mdm_kernel(t, y, p, out):
    # p = [gamma, Re K, Im K, nbar1, nbar2, 2 e^2 / (C hbar), time unit in s]
    gamma, kr, ki, nb1, nb2, w_per_n, unit = p[0], p[1], p[2], p[3], p[4], p[5], p[6]
    n1, n2, x, yy = y[0], y[1], y[2], y[3]
    n = n1 - n2
    w = w_per_n * n
    flow = 2.0 * (kr * yy - ki * x)
    out[0] = unit * (-gamma * (n1 - nb1) + flow)
    out[1] = unit * (-gamma * (n2 - nb2) - flow)
    out[2] = unit * (-gamma * x - w * yy + ki * n)
    out[3] = unit * (w * x - gamma * yy - kr * n)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def nondimensionalize(
    p: PhysicalParams, k: PhysicalConstants = CODATA
) -> tuple[DimensionlessParams, Scales]:
    """Map SI parameters onto ``(alpha, i_tot)`` and the unit scales.

    Examples
    --------
    >>> dp, sc_ = nondimensionalize(PhysicalParams(R=1.0, C=1.0))
    >>> dp.alpha, dp.i_tot
    (0.0, 0.0)
    """
    gamma = p.rate
    V_tilde = k.hbar / (2.0 * k.e * p.R * p.C)
    I_tilde = V_tilde / p.R
    alpha = abs(p.K) ** 2 / gamma**2
    scales = Scales(V_tilde=V_tilde, I_tilde=I_tilde, t_scale=1.0 / gamma)
    return DimensionlessParams(alpha=alpha, i_tot=p.I / I_tilde), scales


def _deriv3(kernel, params, s, t=0.0) -> State3:
    out = np.empty(3)
    kernel(t, np.asarray(s, dtype=np.float64), params, out)
    return State3(*out)


def rhs_autonomous(p: DimensionlessParams, s: State3) -> State3:
    """Time derivative of ``(v, i_j, i_s)`` at constant bias."""
    return _deriv3(autonomous_kernel, np.array([p.alpha, p.i_tot]), s)


def rhs_driven(p: DimensionlessParams, s: State3, tau: float) -> State3:
    """Derivative under the AC field; the drive enters only the coherence equations."""
    if p.drive is None:
        raise ValueError("rhs_driven requires a drive")
    return _deriv3(driven_kernel, p.kernel_params(), s, float(tau))


def mdm_kernel_params(
    p: PhysicalParams,
    nbar1: float,
    nbar2: float,
    k: PhysicalConstants = CODATA,
    time_unit: float = 1.0,
) -> np.ndarray:
    """Parameter vector for :func:`mdm_kernel`.

    ``time_unit`` is the length in seconds of one unit of integration time;
    pass ``1/gamma`` to step the dimensional system in ``tau``.
    """
    K = complex(p.K)
    return np.array(
        [p.rate, K.real, K.imag, nbar1, nbar2, 2.0 * k.e**2 / (p.C * k.hbar), time_unit],
        dtype=np.float64,
    )


def rhs_mdm_full(
    p: PhysicalParams,
    k: PhysicalConstants,
    m: MdmState,
    nbar1: float,
    nbar2: float,
) -> MdmState:
    """Dimensional populations/coherence derivative with equal relaxation rates.

    Returns the derivative packed as an :class:`MdmState`
    ``(dn1/dt, dn2/dt, dz/dt)``.
    """
    if m.n1 < 0 or m.n2 < 0:
        raise ValueError("populations must be non-negative")
    out = np.empty(4)
    mdm_kernel(0.0, m.as_array(), mdm_kernel_params(p, nbar1, nbar2, k), out)
    return MdmState.from_array(out)


def external_current_from_rates(
    gamma_up_1: float, gamma_up_2: float, k: PhysicalConstants = CODATA
) -> float:
    """Bias current in amperes set by the two pumping rates."""
    if gamma_up_1 < 0 or gamma_up_2 < 0:
        raise ValueError("pumping rates must be >= 0")
    return -k.e * (gamma_up_1 - gamma_up_2)


def total_number_relaxation(N0, Nbar, gamma, t):
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    return Nbar + (N0 - Nbar) * np.exp(-gamma * np.asarray(t))


def mdm_to_dimensionless(
    m: MdmState, p: PhysicalParams, k: PhysicalConstants = CODATA
) -> State3:
    """Project an MDM state onto ``(v, i_j, i_s)``.

    Uses ``V = -e n / C`` and ``zeta = 4 e conj(K) z / I_tilde``; the phase
    of ``K`` is absorbed so that only ``|K|`` survives, as in the
    dimensionless equations.
    """
    _, scales = nondimensionalize(p, k)
    V = -k.e * m.n / p.C
    zeta = 4.0 * k.e * np.conj(complex(p.K)) * m.z / scales.I_tilde
    return State3.from_zeta(V / scales.V_tilde, zeta)


def dimensionless_to_mdm(
    s: State3, N: float, p: PhysicalParams, k: PhysicalConstants = CODATA
) -> MdmState:
    """Inverse of :func:`mdm_to_dimensionless` for a given total pair number."""
    K = complex(p.K)
    if K == 0:
        raise ValueError("coherence is not recoverable when K == 0")
    _, scales = nondimensionalize(p, k)
    n = -s.v * scales.V_tilde * p.C / k.e
    z = s.zeta * scales.I_tilde / (4.0 * k.e * np.conj(K))
    return MdmState((N + n) / 2.0, (N - n) / 2.0, complex(z))


def rhs_vz(
    p: PhysicalParams, k: PhysicalConstants, V: float, z: complex
) -> tuple[float, complex]:
    """``(dV/dt, dz/dt)`` of the dimensional junction in voltage/coherence form."""
    K = complex(p.K)
    z = complex(z)
    dV = -p.rate * V + p.I / p.C + (2j * k.e / p.C * (K.conjugate() * z - K * z.conjugate())).real
    dz = (-2j * k.e * V / k.hbar - p.rate) * z + 1j * K * p.C * V / k.e
    return float(dV), complex(dz)
