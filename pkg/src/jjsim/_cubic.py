"""Closed-form roots of monic real cubics ``x^3 + b x^2 + c x + d``."""
from __future__ import annotations

import math
from typing import NamedTuple, Optional

# Relative discriminant below which two roots are merged into a double root.
DEGENERACY_TOL = 1e-12


class CubicRoots(NamedTuple):
    real: tuple[float, ...]
    multiplicity: tuple[int, ...]
    pair: Optional[complex]  # upper member (imag >= 0) of a conjugate pair


def _polish_real(x, b, c, d, iters=3):
    for _ in range(iters):
        f = ((x + b) * x + c) * x + d
        df = (3.0 * x + 2.0 * b) * x + c
        if df == 0.0:
            break
        step = f / df
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    return x


def _polish_complex(z, b, c, d, iters=3):
    for _ in range(iters):
        f = ((z + b) * z + c) * z + d
        df = (3.0 * z + 2.0 * b) * z + c
        if df == 0:
            break
        step = f / df
        z -= step
        if abs(step) <= 1e-16 * max(1.0, abs(z)):
            break
    return z


def _cbrt(x):
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def solve_cubic(b: float, c: float, d: float) -> CubicRoots:
    """Roots of ``x^3 + b x^2 + c x + d``.

    Trigonometric form for three real roots, Cardano otherwise, each
    followed by at most three Newton steps. A discriminant within
    ``DEGENERACY_TOL`` (relative) of zero is reported as a double root, so
    the distinct real roots come back with multiplicity 2 on the merged one.
    Real roots are sorted ascending.
    """
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + d
    disc = 4.0 * p**3 + 27.0 * q * q  # negative <=> three distinct real roots
    scale = 4.0 * abs(p) ** 3 + 27.0 * q * q

    if scale == 0.0 or abs(disc) <= DEGENERACY_TOL * scale:
        if abs(p) <= 1e-9 * max(1.0, b * b, abs(c)):
            return CubicRoots((-shift,), (3,), None)
        simple = 3.0 * q / p - shift
        double = -1.5 * q / p - shift
        simple = _polish_real(simple, b, c, d)
        pairs = sorted([(simple, 1), (double, 2)])
        return CubicRoots(tuple(r for r, _ in pairs), tuple(m for _, m in pairs), None)

    if disc < 0.0:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]
        roots = sorted(_polish_real(r, b, c, d) for r in roots)
        return CubicRoots(tuple(roots), (1, 1, 1), None)

    # one real root and a complex pair
    sq = math.sqrt(q * q / 4.0 + p**3 / 27.0)
    A = -math.copysign(_cbrt(abs(q) / 2.0 + sq), q)
    B = -p / (3.0 * A) if A != 0.0 else 0.0
    r = _polish_real(A + B - shift, b, c, d)
    # deflate: x^2 + (b + r) x + (c + (b + r) r)
    bb = b + r
    cc = c + bb * r
    re = -bb / 2.0
    im2 = cc - re * re
    z = complex(re, math.sqrt(max(im2, 0.0)))
    z = _polish_complex(z, b, c, d)
    if z.imag < 0:
        z = z.conjugate()
    return CubicRoots((r,), (1,), z)
