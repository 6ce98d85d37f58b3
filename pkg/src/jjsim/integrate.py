"""Time integration: an embedded Dormand-Prince 5(4) stepper and classical RK4.

Both steppers are numba-compiled and take a kernel ``f(t, y, params, out)``
(see :mod:`jjsim.model`). Plain Python callables ``f(t, y) -> dy`` are also
accepted and run through the uncompiled twin of the same code, which is
slow but handy for one-off systems in tests.

Output is always on the uniform grid ``t0 + k * dt_out``. The adaptive
method fills it by cubic Hermite interpolation inside each accepted step;
RK4 picks its substep so grid points are hit exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numba
import numpy as np
from numba.core.registry import CPUDispatcher

from .characteristic import extrema, i_of_v
from .model import autonomous_kernel

__all__ = [
    "IntegrationError",
    "IntegratorConfig",
    "Trajectory",
    "RampSpec",
    "RampResult",
    "SettledPoint",
    "integrate",
    "ramp_sweep",
    "locate_jumps",
    "continuation_sweep",
    "ramp_kernel",
]

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_NONFINITE = 2
STATUS_MAX_STEPS = 3

MIN_STEP = 1e-14

_STATUS_TEXT = {
    STATUS_UNDERFLOW: "step size underflow (dt < 1e-14)",
    STATUS_NONFINITE: "non-finite value in state",
    STATUS_MAX_STEPS: "maximum number of steps exceeded",
}

STATE3_FIELDS = ("v", "i_j", "i_s")


class IntegrationError(RuntimeError):
    """Integrator gave up; ``diagnostic`` says where and why."""

    def __init__(self, message: str, diagnostic: dict):
        super().__init__(message)
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class IntegratorConfig:
    """Solver settings.

    ``method`` is ``"adaptive"`` (Dormand-Prince 5(4)) or ``"rk4"``. For RK4,
    ``dt_fixed`` is the nominal step and must not exceed ``dt_out``.
    ``atol`` may be a scalar or one value per state component.
    """

    method: str = "adaptive"
    rtol: float = 1e-9
    atol: float | Sequence[float] = 1e-9
    dt_init: float = 0.0
    dt_max: float = math.inf
    dt_out: float = 0.1
    dt_fixed: Optional[float] = None
    max_steps: int = 200_000_000

    def __post_init__(self):
        if self.method not in ("adaptive", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.rtol > 0:
            raise ValueError("rtol must be > 0")
        if not np.all(np.asarray(self.atol, dtype=float) > 0):
            raise ValueError("atol must be > 0")
        if not self.dt_out > 0:
            raise ValueError("dt_out must be > 0")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be > 0")
        if self.method == "rk4":
            if self.dt_fixed is None or not self.dt_fixed > 0:
                raise ValueError("rk4 requires a positive dt_fixed")
            if self.dt_fixed > self.dt_out * (1 + 1e-12):
                raise ValueError("dt_fixed must not exceed dt_out")

    def replace(self, **kw) -> "IntegratorConfig":
        from dataclasses import replace

        return replace(self, **kw)


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray
    y_end: np.ndarray
    t_end: float
    stats: dict = field(default_factory=dict)
    fields: tuple = STATE3_FIELDS

    def __len__(self):
        return len(self.t)

    def column(self, name_or_index) -> np.ndarray:
        if isinstance(name_or_index, str):
            return self.states[:, self.fields.index(name_or_index)]
        return self.states[:, name_or_index]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else math.nan


# ---------------------------------------------------------------------------
# Steppers
# ---------------------------------------------------------------------------

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# fifth minus embedded fourth order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


@numba.njit(nogil=True)
def _grid(t0, t1, dt_out, rec_from):
    n_total = int(math.floor((t1 - t0) / dt_out + 1e-9)) + 1
    k_start = int(math.ceil((rec_from - t0) / dt_out - 1e-9))
    if k_start < 0:
        k_start = 0
    if k_start > n_total:
        k_start = n_total
    return n_total, k_start


@numba.njit(nogil=True)
def _all_finite(y):
    for i in range(y.shape[0]):
        if not math.isfinite(y[i]):
            return False
    return True


@numba.njit(nogil=True)
def _dopri5(f, params, t0, t1, y0, rtol, atol, h_init, h_max, dt_out, rec_from, max_steps):
    n = y0.shape[0]
    n_total, k_start = _grid(t0, t1, dt_out, rec_from)
    n_rec = n_total - k_start
    t_out = np.empty(n_rec)
    y_out = np.empty((n_rec, n))
    counts = np.zeros(4, dtype=np.int64)  # accepted, rejected, fev, status

    y = y0.copy()
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    ytmp = np.empty(n)
    ynew = np.empty(n)

    t = t0
    f(t, y, params, k1)
    counts[2] += 1

    k_next = k_start
    if k_next == 0:
        t_out[0] = t0
        y_out[0, :] = y
        k_next = 1

    span = t1 - t0
    if h_init > 0.0:
        h = h_init
    else:
        # Hairer-Wanner starting step
        d0 = 0.0
        d1 = 0.0
        for i in range(n):
            sc = atol[i] + rtol * abs(y[i])
            d0 += (y[i] / sc) ** 2
            d1 += (k1[i] / sc) ** 2
        d0 = math.sqrt(d0 / n)
        d1 = math.sqrt(d1 / n)
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h = min(h, 0.1 * span)
    h = min(h, h_max, span)

    last_rejected = False
    saw_nonfinite = False
    steps = 0
    while t < t1:
        if steps >= max_steps:
            counts[3] = 3
            break
        steps += 1
        if t1 - t <= 1e-13 * max(1.0, abs(t1)):
            t = t1
            break
        if t + h > t1 or t + 1.01 * h >= t1:
            h = t1 - t
        if h < 1e-14:
            counts[3] = 2 if saw_nonfinite else 1
            break

        for i in range(n):
            ytmp[i] = y[i] + h * _A21 * k1[i]
        f(t + _C2 * h, ytmp, params, k2)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        f(t + _C3 * h, ytmp, params, k3)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        f(t + _C4 * h, ytmp, params, k4)
        for i in range(n):
            ytmp[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        f(t + _C5 * h, ytmp, params, k5)
        for i in range(n):
            ytmp[i] = y[i] + h * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        f(t + h, ytmp, params, k6)
        for i in range(n):
            ynew[i] = y[i] + h * (
                _B1 * k1[i] + _B3 * k3[i] + _B4 * k4[i] + _B5 * k5[i] + _B6 * k6[i]
            )
        f(t + h, ynew, params, k7)
        counts[2] += 6

        err = 0.0
        for i in range(n):
            e = h * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            )
            sc = atol[i] + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (e / sc) ** 2
        err = math.sqrt(err / n)

        if not math.isfinite(err):
            saw_nonfinite = True
            h *= 0.2
            last_rejected = True
            counts[1] += 1
            continue

        if err <= 1.0:
            t_new = t + h
            if not _all_finite(ynew):
                counts[3] = 2
                break
            # dense output on grid points inside (t, t_new]
            while k_next < n_total:
                ts = t0 + k_next * dt_out
                if ts > t_new + 1e-9 * dt_out:
                    break
                if ts > t_new:
                    ts = t_new
                th = (ts - t) / h
                j = k_next - k_start
                t_out[j] = t0 + k_next * dt_out
                for i in range(n):
                    dy = ynew[i] - y[i]
                    y_out[j, i] = (
                        (1.0 - th) * y[i]
                        + th * ynew[i]
                        + th * (th - 1.0) * ((1.0 - 2.0 * th) * dy + (th - 1.0) * h * k1[i] + th * h * k7[i])
                    )
                k_next += 1
            t = t_new
            for i in range(n):
                y[i] = ynew[i]
                k1[i] = k7[i]
            counts[0] += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * err ** -0.2
                fac = min(5.0, max(0.2, fac))
            if last_rejected:
                fac = min(fac, 1.0)
            last_rejected = False
            h = min(h * fac, h_max)
        else:
            counts[1] += 1
            fac = max(0.2, 0.9 * err ** -0.2)
            h *= fac
            last_rejected = True

    return t_out[: max(k_next - k_start, 0)], y_out[: max(k_next - k_start, 0)], y, t, counts


@numba.njit(nogil=True)
def _rk4_advance(f, params, t, y, h, nsteps, k1, k2, k3, k4, ytmp):
    for _ in range(nsteps):
        f(t, y, params, k1)
        for i in range(y.shape[0]):
            ytmp[i] = y[i] + 0.5 * h * k1[i]
        f(t + 0.5 * h, ytmp, params, k2)
        for i in range(y.shape[0]):
            ytmp[i] = y[i] + 0.5 * h * k2[i]
        f(t + 0.5 * h, ytmp, params, k3)
        for i in range(y.shape[0]):
            ytmp[i] = y[i] + h * k3[i]
        f(t + h, ytmp, params, k4)
        for i in range(y.shape[0]):
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t += h
    return t


@numba.njit(nogil=True)
def _rk4(f, advance, params, t0, t1, y0, dt_fixed, dt_out, rec_from):
    n = y0.shape[0]
    n_total, k_start = _grid(t0, t1, dt_out, rec_from)
    n_rec = n_total - k_start
    t_out = np.empty(n_rec)
    y_out = np.empty((n_rec, n))
    counts = np.zeros(4, dtype=np.int64)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    ytmp = np.empty(n)
    y = y0.copy()

    m = int(math.ceil(dt_out / dt_fixed - 1e-9))
    h = dt_out / m
    if k_start == 0:
        t_out[0] = t0
        y_out[0, :] = y
    t = t0
    for k in range(1, n_total):
        advance(f, params, t0 + (k - 1) * dt_out, y, h, m, k1, k2, k3, k4, ytmp)
        counts[0] += m
        counts[2] += 4 * m
        if not _all_finite(y):
            counts[3] = 2
            return t_out[: max(k - k_start, 0)], y_out[: max(k - k_start, 0)], y, t0 + k * dt_out, counts
        if k >= k_start:
            t_out[k - k_start] = t0 + k * dt_out
            y_out[k - k_start, :] = y
    t = t0 + (n_total - 1) * dt_out
    rest = t1 - t
    if rest > 1e-12 * max(1.0, abs(t1)):
        mr = int(math.ceil(rest / dt_fixed - 1e-9))
        advance(f, params, t, y, rest / mr, mr, k1, k2, k3, k4, ytmp)
        counts[0] += mr
        counts[2] += 4 * mr
        if not _all_finite(y):
            counts[3] = 2
    return t_out, y_out, y, t1, counts


def _as_kernel(rhs: Callable):
    """Return ``(kernel, compiled)`` for a numba kernel or an ``f(t, y)`` callable."""
    if isinstance(rhs, CPUDispatcher):
        return rhs, True

    def kernel(t, y, params, out):
        out[:] = rhs(t, y)

    return kernel, False


def integrate(
    rhs: Callable,
    s0,
    tau_span: tuple[float, float],
    cfg: IntegratorConfig,
    params=None,
    *,
    record_from: Optional[float] = None,
    fields: tuple = STATE3_FIELDS,
) -> Trajectory:
    """Integrate ``rhs`` from ``s0`` over ``tau_span``.

    Parameters
    ----------
    rhs : callable
        A compiled kernel ``f(t, y, params, out)`` or a plain
        ``f(t, y) -> dy``.
    s0 : array-like
        Initial state.
    tau_span : (float, float)
        Start and end time, ``t1 > t0``.
    cfg : IntegratorConfig
    params : array-like, optional
        Parameter vector handed to a compiled kernel.
    record_from : float, optional
        Only grid points at or after this time are stored. Long runs use it
        to keep just the analysis window in memory.

    Returns
    -------
    Trajectory
        Samples on ``t0 + k * dt_out``. ``y_end``/``t_end`` hold the exact
        final state even when ``t1`` is off-grid.

    Raises
    ------
    IntegrationError
        On step-size underflow, non-finite state, or step budget exhaustion.
    """
    t0, t1 = float(tau_span[0]), float(tau_span[1])
    if not t1 > t0:
        raise ValueError("tau_span must be increasing")
    y0 = np.array(s0, dtype=np.float64).ravel()
    p = np.zeros(1) if params is None else np.asarray(params, dtype=np.float64)
    kernel, compiled = _as_kernel(rhs)
    rec = t0 if record_from is None else float(record_from)
    if cfg.method == "adaptive":
        atol = np.broadcast_to(np.asarray(cfg.atol, dtype=np.float64), y0.shape).copy()
        fn = _dopri5 if compiled else _dopri5.py_func
        t_out, y_out, y_end, t_end, counts = fn(
            kernel, p, t0, t1, y0, cfg.rtol, atol, cfg.dt_init, cfg.dt_max,
            cfg.dt_out, rec, cfg.max_steps,
        )
    else:
        fn, adv = (_rk4, _rk4_advance) if compiled else (_rk4.py_func, _rk4_advance.py_func)
        t_out, y_out, y_end, t_end, counts = fn(
            kernel, adv, p, t0, t1, y0, cfg.dt_fixed, cfg.dt_out, rec
        )
    stats = {
        "method": cfg.method,
        "accepted_steps": int(counts[0]),
        "rejected_steps": int(counts[1]),
        "rhs_evaluations": int(counts[2]),
    }
    status = int(counts[3])
    if status != STATUS_OK:
        diag = dict(stats, status=_STATUS_TEXT[status], t_fail=float(t_end),
                    state=[float(x) for x in y_end])
        raise IntegrationError(
            f"integration aborted at t={t_end:.6g}: {_STATUS_TEXT[status]}", diag
        )
    return Trajectory(
        t=np.asarray(t_out), states=np.asarray(y_out), y_end=np.asarray(y_end),
        t_end=float(t_end), stats=stats, fields=fields,
    )


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RampSpec:
    """Piecewise-linear bias: ``i_start -> i_peak -> i_end`` at ``|di/dtau| = rate``."""

    i_start: float
    i_peak: float
    i_end: float
    rate: float = 0.01

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be > 0")

    @property
    def t_turn(self) -> float:
        return abs(self.i_peak - self.i_start) / self.rate

    @property
    def duration(self) -> float:
        return self.t_turn + abs(self.i_end - self.i_peak) / self.rate

    def kernel_params(self, alpha: float) -> np.ndarray:
        return np.array([alpha, self.i_start, self.i_peak, self.i_end, self.rate])

    def current(self, tau):
        return _ramp_current(np.asarray(tau, dtype=float), self.i_start, self.i_peak, self.i_end, self.rate)


@numba.njit(nogil=True)
def _ramp_scalar(t, i0, ip, i1, rate):
    t_turn = abs(ip - i0) / rate
    if t <= t_turn:
        return i0 + math.copysign(rate, ip - i0) * t
    t_end = t_turn + abs(i1 - ip) / rate
    if t >= t_end:
        return i1
    return ip + math.copysign(rate, i1 - ip) * (t - t_turn)


def _ramp_current(tau, i0, ip, i1, rate):
    return np.vectorize(lambda t: _ramp_scalar(t, i0, ip, i1, rate), otypes=[float])(tau)


@numba.njit(cache=True, nogil=True)
def ramp_kernel(t, y, p, out):
    alpha = p[0]
    i_tot = _ramp_scalar(t, p[1], p[2], p[3], p[4])
    v, i_j, i_s = y[0], y[1], y[2]
    out[0] = i_tot - v - i_j
    out[1] = -i_j - i_s * v + 4.0 * alpha * v
    out[2] = -i_s + i_j * v


@dataclass
class RampResult:
    tau: np.ndarray
    i_tot: np.ndarray
    v: np.ndarray
    i_j: np.ndarray
    i_res: np.ndarray
    i_cap: np.ndarray
    rising: np.ndarray  # True on the first leg of the ramp
    stats: dict = field(default_factory=dict)
    alpha: float = math.nan

    COLUMNS = ("tau", "i_tot", "v", "i_j", "i_res", "i_cap")

    def rows(self):
        return list(zip(self.i_tot, self.v, self.i_j, self.i_res, self.i_cap))

    def table(self) -> np.ndarray:
        return np.column_stack([getattr(self, c) for c in self.COLUMNS])


def ramp_sweep(
    alpha: float, ramp: RampSpec, cfg: IntegratorConfig, s0=(0.0, 0.0, 0.0)
) -> RampResult:
    """Integrate under a linearly ramped bias and split the current.

    ``i_res = v`` and ``i_cap = dv/dtau`` are read off the state and the
    vector field at each sample, so ``i_j + i_res + i_cap = i_tot`` holds to
    rounding.
    """
    params = ramp.kernel_params(alpha)
    traj = integrate(ramp_kernel, s0, (0.0, ramp.duration), cfg, params)
    i_tot = ramp.current(traj.t)
    v = traj.states[:, 0]
    i_j = traj.states[:, 1]
    i_cap = i_tot - v - i_j
    return RampResult(
        tau=traj.t, i_tot=i_tot, v=v.copy(), i_j=i_j.copy(), i_res=v.copy(),
        i_cap=i_cap, rising=traj.t <= ramp.t_turn, stats=traj.stats, alpha=alpha,
    )


def locate_jumps(res: RampResult, method: str = "exit") -> tuple[float, float]:
    """Bias at the upward (first leg) and downward (second leg) voltage jumps.

    ``method="exit"`` returns the bias where the trajectory leaves its
    branch, i.e. first crosses the fold voltage ``v_minus`` going up and
    ``v_plus`` coming down. ``method="steepest"`` returns the bias of the
    largest and smallest ``i_cap``, the middle of the jump; a finite ramp
    rate delays it past the static fold by an amount scaling as
    ``rate**(2/3)``.
    """
    up = np.flatnonzero(res.rising)
    down = np.flatnonzero(~res.rising)
    if up.size == 0 or down.size == 0:
        raise ValueError("ramp has no rising or no falling leg")
    if method == "steepest":
        i_up = res.i_tot[up[np.argmax(res.i_cap[up])]]
        i_down = res.i_tot[down[np.argmin(res.i_cap[down])]]
        return float(i_up), float(i_down)
    if method != "exit":
        raise ValueError(f"unknown method {method!r}")
    ext = extrema(res.alpha)
    if not ext.hysteretic:
        raise ValueError("exit locator needs a hysteretic characteristic (alpha > 2)")
    hit_up = up[res.v[up] > ext.v_minus]
    hit_down = down[res.v[down] < ext.v_plus]
    if hit_up.size == 0 or hit_down.size == 0:
        raise ValueError("ramp never left a branch")
    return float(res.i_tot[hit_up[0]]), float(res.i_tot[hit_down[0]])


@dataclass(frozen=True)
class SettledPoint:
    i_tot: float
    v: float
    settled: bool
    state: tuple
    residual: float  # |i_of_v(alpha, v) - i_tot|


def continuation_sweep(
    alpha: float,
    i_values: Sequence[float],
    cfg: IntegratorConfig,
    s0=(0.0, 0.0, 0.0),
    *,
    window: float = 20.0,
    amp_tol: float = 1e-7,
    max_windows: int = 100,
) -> list[SettledPoint]:
    """Quasi-static sweep: settle at each bias, starting from the last endpoint.

    A point is settled once the peak-to-peak of ``v`` over a window of
    length ``window`` falls below ``amp_tol`` in two consecutive windows.
    Points that never settle within ``max_windows`` come back with
    ``settled=False`` and their last instantaneous voltage.
    """
    out = []
    y = np.array(s0, dtype=float)
    for i_tot in i_values:
        params = np.array([alpha, float(i_tot)])
        calm = 0
        settled = False
        for _ in range(max_windows):
            tr = integrate(autonomous_kernel, y, (0.0, window), cfg, params)
            y = tr.y_end
            amp = float(np.ptp(tr.states[:, 0])) if len(tr) else math.inf
            calm = calm + 1 if amp < amp_tol else 0
            if calm >= 2:
                settled = True
                break
        v = float(y[0])
        out.append(SettledPoint(
            i_tot=float(i_tot), v=v, settled=settled, state=tuple(float(x) for x in y),
            residual=abs(float(i_of_v(alpha, v)) - float(i_tot)),
        ))
    return out

