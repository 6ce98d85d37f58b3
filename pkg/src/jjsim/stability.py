"""Linear stability of the equilibria of the autonomous system."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._cubic import solve_cubic
from .characteristic import di_dv

__all__ = [
    "StabilityReport",
    "jacobian",
    "char_poly_coeffs",
    "eigenvalues",
    "is_unstable",
]


@dataclass(frozen=True)
class StabilityReport:
    """Spectrum of the Jacobian at one equilibrium.

    ``lambda0`` is the real eigenvalue and ``kappa +/- i eta`` the
    conjugate pair (``eta >= 0``). If all three roots happen to be real,
    ``lambda0`` is the largest and ``kappa`` the mean of the other two
    with ``eta = 0``; ``roots`` always holds the exact triple.
    """

    v0: float
    lambda0: float
    kappa: float
    eta: float
    unstable: bool
    slope: float
    roots: tuple[complex, complex, complex]

    @property
    def max_real(self) -> float:
        return max(r.real for r in self.roots)


def jacobian(alpha: float, v0: float) -> np.ndarray:
    """3x3 linearization in the ``(v, i_j, i_s)`` basis."""
    d = 1.0 + v0 * v0
    return np.array(
        [
            [-1.0, -1.0, 0.0],
            [4.0 * alpha / d, -1.0, -v0],
            [4.0 * alpha * v0 / d, v0, -1.0],
        ]
    )


def char_poly_coeffs(alpha: float, v0: float) -> tuple[float, float, float]:
    """``(c2, c1, c0)`` of ``lambda^3 + c2 lambda^2 + c1 lambda + c0``."""
    v2 = v0 * v0
    d = 1.0 + v2
    return 3.0, v2 + 4.0 * alpha / d + 3.0, v2 + 4.0 * alpha * (1.0 - v2) / d + 1.0


def is_unstable(alpha: float, v0: float) -> bool:
    # marginal c0 == 0 counts as not unstable
    return char_poly_coeffs(alpha, v0)[2] < 0.0


def eigenvalues(alpha: float, v0: float) -> StabilityReport:
    c2, c1, c0 = char_poly_coeffs(alpha, v0)
    res = solve_cubic(c2, c1, c0)
    if res.pair is not None:
        lam0 = res.real[0]
        kappa, eta = res.pair.real, res.pair.imag
        roots = (complex(lam0), res.pair, res.pair.conjugate())
    else:
        reals = [r for r, m in zip(res.real, res.multiplicity) for _ in range(m)]
        reals.sort()
        lam0 = reals[-1]
        kappa, eta = 0.5 * (reals[0] + reals[1]), 0.0
        roots = (complex(lam0), complex(reals[1]), complex(reals[0]))
    return StabilityReport(
        v0=v0,
        lambda0=lam0,
        kappa=kappa,
        eta=eta,
        unstable=c0 < 0.0,
        slope=float(di_dv(alpha, v0)),
        roots=roots,
    )
