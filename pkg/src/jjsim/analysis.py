"""Measurements on trajectories: spectra, attractor probes, harmonic balance, Shapiro steps."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.signal import windows

from .characteristic import fixed_point, i_of_v, zeta_equilibrium
from .integrate import IntegratorConfig, Trajectory, integrate
from .model import State3, autonomous_kernel, driven_kernel
from .stability import is_unstable

__all__ = [
    "Spectrum",
    "AttractorVerdict",
    "BasinBracket",
    "NoAttractorFound",
    "HarmonicBalance",
    "Plateau",
    "ShapiroResult",
    "power_spectrum",
    "dominant_frequency",
    "detect_attractor",
    "basin_threshold",
    "harmonic_balance",
    "shapiro_staircase",
    "find_plateaus",
    "energy_decay_rate",
    "parallel_map",
    "ATTRACTOR_CONFIG",
    "SWEEP_CONFIG",
]

ATTRACTOR_CONFIG = IntegratorConfig(rtol=1e-9, atol=1e-9, dt_out=1e-3)
SWEEP_CONFIG = IntegratorConfig(rtol=1e-9, atol=1e-9, dt_out=0.1)

AMPLITUDE_THRESHOLD = 1e-3
DECAY_RATIO_MIN = 0.99


def _threads() -> int:
    env = os.environ.get("JJSIM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn: Callable, items: Iterable, threads: Optional[int] = None) -> list:
    """Ordered map over a thread pool capped by ``JJSIM_THREADS``.

    The compiled steppers release the GIL, so independent trajectories
    actually run concurrently.
    """
    items = list(items)
    n = min(threads or _threads(), len(items)) or 1
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Spectrum:
    omega: np.ndarray
    power: np.ndarray

    @property
    def binwidth(self) -> float:
        return float(self.omega[1] - self.omega[0])

    @property
    def total_power(self) -> float:
        return float(self.power.sum())


def power_spectrum(traj: Trajectory, field="i_j", window: str = "hann") -> Spectrum:
    """One-sided power spectrum of one state component.

    The signal is mean-subtracted and multiplied by the window before the
    FFT. Powers are normalized so that they sum to the mean square of the
    windowed signal. Bins sit at ``2 pi k / span`` in angular frequency.
    """
    t = np.asarray(traj.t)
    if len(t) < 64:
        raise ValueError("need at least 64 samples")
    dt = np.diff(t)
    step = (t[-1] - t[0]) / (len(t) - 1)
    if np.max(np.abs(dt - step)) > 1e-9 * max(step, abs(t[-1])) + 1e-12:
        raise ValueError("trajectory is not uniformly sampled")
    x = np.asarray(traj.column(field), dtype=float)
    x = x - x.mean()
    n = len(x)
    if window == "hann":
        x = x * windows.hann(n, sym=False)
    elif window != "rectangular":
        raise ValueError(f"unknown window {window!r}")
    X = np.fft.rfft(x)
    power = np.abs(X) ** 2 / n**2
    power[1 : (n + 1) // 2] *= 2.0  # fold negative frequencies (Nyquist bin stays single)
    omega = 2.0 * np.pi * np.fft.rfftfreq(n, d=step)
    return Spectrum(omega=omega, power=power)


def dominant_frequency(spec: Spectrum) -> float:
    """Peak angular frequency, refined by a parabola through three log-power bins."""
    p = spec.power
    if p.size < 3 or not np.any(p[1:] > 0):
        raise ValueError("spectrum is empty or all zero")
    k = int(np.argmax(p[1:])) + 1
    if k + 1 >= p.size:
        return float(spec.omega[k])
    a, b, c = p[k - 1], p[k], p[k + 1]
    if a > 0 and c > 0:
        a, b, c = np.log(a), np.log(b), np.log(c)
    denom = a - 2.0 * b + c
    shift = 0.0 if denom == 0 else 0.5 * (a - c) / denom
    shift = max(-0.5, min(0.5, shift))
    return float(spec.omega[k] + shift * spec.binwidth)


# ---------------------------------------------------------------------------
# Attractors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttractorVerdict:
    persistent: bool
    amplitude: float
    omega_fund: float
    decay_ratio: float
    i_tot: float = math.nan
    stats: dict = field(default_factory=dict, compare=False)


class NoAttractorFound(RuntimeError):
    pass


def energy_decay_rate(alpha: float, v0: float) -> Optional[float]:
    """Guaranteed exponential decay rate of ``|zeta - zeta0|^2 + (v - v0)^2``.

    With ``w = zeta - zeta0`` and ``u = v - v0`` the cubic term of the
    coherence equation is orthogonal to ``w``, which leaves
    ``dE/dtau <= -(1 - c) E`` for ``E = (|w|^2 + u^2)/2`` and
    ``c = 4 alpha / sqrt(1 + v0^2)``. When ``c < 1`` the equilibrium
    attracts every initial condition, so no other attractor can coexist
    with it. Returns ``1 - c``, or ``None`` when the bound says nothing.
    """
    c = 4.0 * alpha / math.sqrt(1.0 + v0 * v0)
    return 1.0 - c if c < 1.0 else None


def _perturbed_start(alpha: float, v0: float, delta) -> np.ndarray:
    z0 = zeta_equilibrium(alpha, v0)
    return np.array([v0, z0.imag, z0.real]) + np.asarray(delta, dtype=float)


def detect_attractor(
    alpha: float,
    v0: float,
    delta=(0.0, 0.0, -0.1),
    horizon_tau: float = 5000.0,
    cfg: IntegratorConfig = ATTRACTOR_CONFIG,
    *,
    window: float = 150.0,
    threshold: float = AMPLITUDE_THRESHOLD,
) -> AttractorVerdict:
    """Kick a stable equilibrium and see whether the oscillation survives.

    Starts at the equilibrium with voltage ``v0`` displaced by ``delta``
    (a ``(dv, di_j, di_s)`` triple) and integrates to ``horizon_tau``. The
    last two windows of length ``window`` decide: the orbit counts as
    persistent when the peak-to-peak of ``i_j`` in the final window exceeds
    ``threshold`` and has not shrunk by more than 1% relative to the window
    before it.
    """
    if is_unstable(alpha, v0):
        raise ValueError(f"equilibrium at v0={v0} is linearly unstable for alpha={alpha}")
    if horizon_tau < 2 * window:
        raise ValueError("horizon_tau must cover two analysis windows")
    i_tot = float(i_of_v(alpha, v0))
    y0 = _perturbed_start(alpha, v0, delta)
    tr = integrate(
        autonomous_kernel, y0, (0.0, horizon_tau), cfg, np.array([alpha, i_tot]),
        record_from=horizon_tau - 2.0 * window,
    )
    split = horizon_tau - window
    prev = tr.t < split - 1e-9 * cfg.dt_out
    last = ~prev
    amp_prev = float(np.ptp(tr.states[prev, 1]))
    amp_last = float(np.ptp(tr.states[last, 1]))
    ratio = amp_last / amp_prev if amp_prev > 0 else 0.0
    omega = math.nan
    if amp_last > 0:
        final = Trajectory(t=tr.t[last], states=tr.states[last], y_end=tr.y_end, t_end=tr.t_end)
        try:
            omega = dominant_frequency(power_spectrum(final, "i_j", "hann"))
        except ValueError:
            pass
    return AttractorVerdict(
        persistent=bool(amp_last > threshold and ratio >= DECAY_RATIO_MIN),
        amplitude=amp_last,
        omega_fund=omega,
        decay_ratio=ratio,
        i_tot=i_tot,
        stats=tr.stats,
    )


@dataclass(frozen=True)
class BasinBracket:
    lower: float  # largest magnitude seen to decay
    upper: float  # smallest magnitude seen to persist
    evaluations: int


def basin_threshold(
    alpha: float,
    v0: float,
    direction,
    cfg: IntegratorConfig = ATTRACTOR_CONFIG,
    *,
    horizon_tau: float = 5000.0,
    smallest: float = 1e-8,
    largest: float = 1.0,
    resolution: float = 10.0,
) -> BasinBracket:
    """Bracket the perturbation size at which orbits stop returning to the equilibrium.

    Bisects ``log |delta|`` along ``direction`` until the bracket ratio is at
    most ``resolution``. Raises :class:`NoAttractorFound` if even
    ``largest`` decays.
    """
    d = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(d))
    if not norm > 0:
        raise ValueError("direction must be non-zero")
    d = d / norm

    evals = 0

    def persists(mag):
        nonlocal evals
        evals += 1
        return detect_attractor(alpha, v0, mag * d, horizon_tau, cfg).persistent

    if not persists(largest):
        raise NoAttractorFound(
            f"no attractor found in direction {tuple(d)} up to |delta|={largest:g}"
        )
    lo, hi = smallest, largest
    if persists(lo):
        return BasinBracket(0.0, lo, evals)
    while hi / lo > resolution:
        mid = math.sqrt(lo * hi)
        if persists(mid):
            hi = mid
        else:
            lo = mid
    return BasinBracket(lo, hi, evals)


@dataclass(frozen=True)
class HarmonicBalance:
    v0: float
    omega_est: float
    zeta0: complex
    v1_consistency: bool
    in_regime: bool
    coupling: complex  # zeta_1 / v_1 from the first-harmonic balance at omega = v0


def harmonic_balance(alpha: float, i_tot: float) -> HarmonicBalance:
    """First-harmonic estimate of the self-oscillation frequency.

    Keeps only the mean and the fundamental of ``v`` and ``zeta``. The mean
    balance puts ``v0`` on the ohmic branch (largest root) and the
    first-harmonic balance at ``omega = v0`` reduces to
    ``zeta_1 = i (4 alpha - zeta0) v_1``. ``v1_consistency`` is true when
    that relation admits nonzero pairs inside the truncation's validity
    range (``|v0| > 1``, ``4 alpha > 1``).
    """
    roots = fixed_point(alpha, i_tot)
    fp = max(roots, key=lambda r: abs(r.v0))
    v0 = fp.v0
    zeta0 = fp.zeta0
    in_regime = abs(v0) > 1.0
    coupling = 1j * (4.0 * alpha - zeta0)
    consistent = bool(in_regime and 4.0 * alpha > 1.0 and abs(coupling) > 0.0)
    return HarmonicBalance(v0, v0, zeta0, consistent, in_regime, coupling)


# ---------------------------------------------------------------------------
# Shapiro steps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Plateau:
    n: int
    i_lo: float
    i_hi: float
    count: int
    v_mean: float
    max_rel_dev: float


@dataclass
class ShapiroResult:
    i_tot: np.ndarray
    v_mean: np.ndarray
    plateaus: list
    omega_f: float
    stats: dict = field(default_factory=dict)

    def rows(self):
        return list(zip(self.i_tot.tolist(), self.v_mean.tolist()))


def find_plateaus(i_tot, v_mean, omega_f: float, tol: float = 0.01, min_points: int = 2) -> list[Plateau]:
    """Maximal runs of consecutive points within ``tol`` of the same ``n * omega_f``, ``n >= 1``."""
    i_tot = np.asarray(i_tot, dtype=float)
    v_mean = np.asarray(v_mean, dtype=float)
    labels = []
    for v in v_mean:
        n = int(round(v / omega_f))
        ok = n >= 1 and abs(v - n * omega_f) <= tol * n * omega_f
        labels.append(n if ok else 0)
    out = []
    start = 0
    for j in range(1, len(labels) + 1):
        if j == len(labels) or labels[j] != labels[start]:
            n = labels[start]
            if n and j - start >= min_points:
                seg = v_mean[start:j]
                out.append(Plateau(
                    n=n, i_lo=float(i_tot[start]), i_hi=float(i_tot[j - 1]), count=j - start,
                    v_mean=float(seg.mean()),
                    max_rel_dev=float(np.max(np.abs(seg - n * omega_f)) / (n * omega_f)),
                ))
            start = j
    return out


def shapiro_staircase(
    alpha: float,
    omega_f: float,
    v_f: float,
    i_grid: Sequence[float],
    cfg: Optional[IntegratorConfig] = None,
    *,
    transient: float = 200.0,
    n_periods: int = 100,
    samples_per_period: int = 200,
    tol: float = 0.01,
    min_points: int = 2,
    s0=(0.0, 0.0, 0.0),
) -> ShapiroResult:
    """Time-averaged voltage under AC drive along an increasing bias grid.

    Each grid point continues from the previous endpoint (and the drive
    phase keeps running), discards ``transient`` (rounded up to whole drive
    periods) and averages ``v`` over ``n_periods`` periods with the
    trapezoid rule.
    """
    if not omega_f > 0 or v_f < 0:
        raise ValueError("need omega_f > 0 and v_f >= 0")
    period = 2.0 * math.pi / omega_f
    n_trans = int(math.ceil(transient / period))
    if cfg is None:
        cfg = IntegratorConfig(rtol=1e-8, atol=1e-8, dt_out=period / samples_per_period)
    y = np.asarray(s0, dtype=float)
    t = 0.0
    means = []
    rhs_evals = 0
    for i in i_grid:
        params = np.array([alpha, float(i), v_f, omega_f])
        t_avg = t + n_trans * period
        tr = integrate(driven_kernel, y, (t, t_avg), cfg, params, record_from=t_avg + 1.0)
        rhs_evals += tr.stats["rhs_evaluations"]
        y = tr.y_end
        t_end = t_avg + n_periods * period
        tr = integrate(driven_kernel, y, (t_avg, t_end), cfg, params)
        rhs_evals += tr.stats["rhs_evaluations"]
        y, t = tr.y_end, t_end
        tt = np.append(tr.t, t_end) if tr.t[-1] < t_end - 1e-9 * period else tr.t
        vv = tr.states[:, 0] if len(tt) == len(tr.t) else np.append(tr.states[:, 0], y[0])
        means.append(float(np.trapezoid(vv, tt) / (tt[-1] - tt[0])))
    i_arr = np.asarray(i_grid, dtype=float)
    v_arr = np.asarray(means)
    return ShapiroResult(
        i_tot=i_arr, v_mean=v_arr,
        plateaus=find_plateaus(i_arr, v_arr, omega_f, tol, min_points),
        omega_f=omega_f, stats={"rhs_evaluations": rhs_evals},
    )
