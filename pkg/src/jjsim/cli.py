"""Command-line entry point: ``jjsim <experiment> [options]``.

Each run writes ``<out>.csv`` (or ``<out>.json`` with ``--format json``)
holding the data table, plus ``<out>.summary.json`` with the resolved
parameters, derived quantities, wall-clock time and integrator statistics.

Exit codes
----------
0 success, 2 unknown key or invalid value, 3 numerical failure,
4 no result, 5 type mismatch, 6 missing required field.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import analysis as an
from . import characteristic as ch
from . import radiation as rad
from .integrate import (
    IntegrationError,
    IntegratorConfig,
    RampSpec,
    integrate,
    locate_jumps,
    ramp_sweep,
)
from .model import CODATA, PhysicalParams, autonomous_kernel, driven_kernel
from .stability import eigenvalues

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NO_RESULT = 4
EXIT_TYPE = 5
EXIT_MISSING = 6

EXPERIMENTS = (
    "characteristic", "stability", "sweep", "shapiro", "attractor", "basin",
    "spectrum", "harmonic-balance", "squid", "radiation", "simulate",
)

REQUIRED = object()


class ConfigError(Exception):
    def __init__(self, message: str, code: int = EXIT_CONFIG):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class Key:
    type: type
    default: Any
    help: str
    experiments: tuple = EXPERIMENTS


_DYN = ("sweep", "shapiro", "attractor", "basin", "spectrum", "simulate")
_PROBE = ("attractor", "basin", "spectrum")

# One flat namespace; every key is valid only for the listed experiments.
SCHEMA: dict[str, Key] = {
    "alpha": Key(float, REQUIRED, "coupling alpha = |K|^2/gamma^2",
                 tuple(e for e in EXPERIMENTS if e not in ("squid", "radiation"))),
    "i_tot": Key(float, REQUIRED, "bias current", ("harmonic-balance", "simulate")),
    "v0": Key(float, 30.0, "equilibrium voltage to perturb", _PROBE),
    "delta_v": Key(float, 0.0, "perturbation of v", _PROBE),
    "delta_ij": Key(float, 0.0, "perturbation of i_j", _PROBE),
    "delta_is": Key(float, -0.1, "perturbation of i_s", _PROBE),
    "tau_max": Key(float, 5000.0, "integration horizon", _PROBE + ("simulate",)),
    "window": Key(float, 150.0, "analysis window length", ("attractor", "basin")),
    "t_start": Key(float, 3500.0, "spectrum window start", ("spectrum",)),
    "t_end": Key(float, 3650.0, "spectrum window end", ("spectrum",)),
    "spectrum_window": Key(str, "hann", "hann or rectangular", ("spectrum",)),
    "v_min": Key(float, 0.0, "lowest voltage", ("characteristic", "stability")),
    "v_max": Key(float, 10.0, "highest voltage", ("characteristic", "stability")),
    "n_points": Key(int, 1000, "number of grid points", ("characteristic", "stability", "squid")),
    "i_start": Key(float, 0.0, "ramp start current", ("sweep",)),
    "i_peak": Key(float, math.nan, "ramp turning current (default 1.25 i_c)", ("sweep",)),
    "i_end": Key(float, 0.0, "ramp end current", ("sweep",)),
    "rate": Key(float, 0.01, "ramp rate |di/dtau|", ("sweep",)),
    "omega_f": Key(float, 20.0, "drive angular frequency", ("shapiro", "simulate")),
    "v_f": Key(float, 300.0, "drive amplitude", ("shapiro",)),
    "i_min": Key(float, 25.0, "first bias of the staircase", ("shapiro",)),
    "i_max": Key(float, 115.0, "last bias of the staircase", ("shapiro",)),
    "i_step": Key(float, 0.5, "bias spacing", ("shapiro",)),
    "transient": Key(float, 200.0, "discarded transient", ("shapiro",)),
    "n_periods": Key(int, 100, "averaging periods", ("shapiro",)),
    "drive_v_f": Key(float, 0.0, "drive amplitude (0 = autonomous)", ("simulate",)),
    "v_init": Key(float, 0.0, "initial v", ("simulate",)),
    "ij_init": Key(float, 0.0, "initial i_j", ("simulate",)),
    "is_init": Key(float, 0.0, "initial i_s", ("simulate",)),
    "K_A_si": Key(float, 1e12, "tunneling rate of arm A (1/s)", ("squid",)),
    "K_B_si": Key(float, 1e12, "tunneling rate of arm B (1/s)", ("squid",)),
    "gamma_si": Key(float, 1e12, "relaxation rate (1/s)", ("squid",)),
    "flux_periods": Key(float, 2.0, "flux range in periods", ("squid",)),
    "I_si": Key(float, 1e-3, "bias current (A)", ("radiation",)),
    "I_c_si": Key(float, 1e-3, "critical current (A)", ("radiation",)),
    "C_si": Key(float, 3e-13, "capacitance (F)", ("radiation",)),
    "V_si": Key(float, 1e-3, "voltage (V)", ("radiation",)),
    "ell_si": Key(float, 1e-9, "electrode separation (m)", ("radiation",)),
    "Q": Key(float, 1e4, "cavity quality factor", ("radiation",)),
    "method": Key(str, "adaptive", "adaptive or rk4", _DYN),
    "rtol": Key(float, 1e-9, "relative tolerance", _DYN),
    "atol": Key(float, 1e-9, "absolute tolerance", _DYN),
    "dt_out": Key(float, math.nan, "output spacing (experiment default if unset)", _DYN),
    "dt_fixed": Key(float, 1e-3, "RK4 step", _DYN),
}

_NON_NEGATIVE = {"alpha", "v_f", "drive_v_f", "tau_max", "Q"}
_POSITIVE = {
    "rate", "omega_f", "rtol", "atol", "dt_fixed", "n_points", "i_step", "n_periods",
    "window", "K_A_si", "K_B_si", "gamma_si", "flux_periods", "I_si", "I_c_si", "C_si",
    "V_si", "ell_si",
}
_CHOICES = {"method": ("adaptive", "rk4"), "spectrum_window": ("hann", "rectangular")}


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    experiment: str
    params: dict
    out: str = "jjsim_out"
    format: str = "csv"

    def integrator(self, dt_out_default: float) -> IntegratorConfig:
        p = self.params
        dt_out = p["dt_out"] if not math.isnan(p["dt_out"]) else dt_out_default
        dt_fixed = min(p["dt_fixed"], dt_out) if p["method"] == "rk4" else None
        return IntegratorConfig(method=p["method"], rtol=p["rtol"], atol=p["atol"],
                                dt_out=dt_out, dt_fixed=dt_fixed)


def _coerce(key: str, value: Any, from_text: bool):
    want = SCHEMA[key].type
    if from_text:
        try:
            return want(value)
        except ValueError:
            raise ConfigError(f"{key}: expected {want.__name__}, got {value!r}", EXIT_TYPE)
    if want is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if want is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if want is str and isinstance(value, str):
        return value
    raise ConfigError(f"{key}: expected {want.__name__}, got {type(value).__name__}", EXIT_TYPE)


def _validate(params: dict):
    for k, v in params.items():
        if k in _NON_NEGATIVE and not v >= 0:
            raise ConfigError(f"{k} must be >= 0")
        if k in _POSITIVE and not v > 0:
            raise ConfigError(f"{k} must be > 0")
        if k in _CHOICES and v not in _CHOICES[k]:
            raise ConfigError(f"{k} must be one of {', '.join(_CHOICES[k])}")


def parse_config(experiment: str, file_values: dict, flag_values: dict,
                 out: str = "jjsim_out", fmt: str = "csv") -> RunConfig:
    """Merge file and flag values (flags win), apply defaults, check types and ranges."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    merged = {}
    for source, from_text in ((file_values, False), (flag_values, True)):
        for key, value in source.items():
            if key not in SCHEMA or experiment not in SCHEMA[key].experiments:
                raise ConfigError(f"unknown key {key!r} for experiment {experiment}")
            merged[key] = _coerce(key, value, from_text)
    params = {}
    for key, spec in SCHEMA.items():
        if experiment not in spec.experiments:
            continue
        if key in merged:
            params[key] = merged[key]
        elif spec.default is REQUIRED:
            raise ConfigError(f"missing required field {key!r}", EXIT_MISSING)
        else:
            params[key] = spec.default
    _validate(params)
    return RunConfig(experiment, params, out, fmt)


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config must be a flat JSON object")
    data = dict(data)
    data.pop("experiment", None)
    for k, v in data.items():
        if isinstance(v, (dict, list)):
            raise ConfigError(f"{k}: nested values are not allowed")
    return data


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass
class Result:
    columns: list
    rows: list
    derived: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    code: int = EXIT_OK


def _grid(lo, hi, n):
    return np.linspace(lo, hi, n)


def _exp_characteristic(c: RunConfig) -> Result:
    p = c.params
    v = _grid(p["v_min"], p["v_max"], p["n_points"])
    ext = ch.extrema(p["alpha"])
    return Result(["v", "i_tot"], np.column_stack([v, ch.i_of_v(p["alpha"], v)]).tolist(),
                  {"extrema": asdict(ext), "hysteretic": ext.hysteretic})


def _exp_stability(c: RunConfig) -> Result:
    p = c.params
    rows = []
    n_unstable = 0
    for v0 in _grid(p["v_min"], p["v_max"], p["n_points"]):
        r = eigenvalues(p["alpha"], float(v0))
        n_unstable += r.unstable
        rows.append([v0, float(ch.i_of_v(p["alpha"], v0)), r.lambda0, r.kappa, r.eta, int(r.unstable)])
    return Result(["v0", "i_tot", "lambda0", "kappa", "eta", "unstable"], rows,
                  {"unstable_points": n_unstable, "max_kappa": max(r[3] for r in rows)})


def _exp_sweep(c: RunConfig) -> Result:
    p = c.params
    alpha = p["alpha"]
    ext = ch.extrema(alpha)
    i_peak = p["i_peak"] if not math.isnan(p["i_peak"]) else 1.25 * ext.i_c
    ramp = RampSpec(p["i_start"], i_peak, p["i_end"], p["rate"])
    res = ramp_sweep(alpha, ramp, c.integrator(0.1))
    i_up, i_down = locate_jumps(res)
    return Result(list(res.COLUMNS), res.table().tolist(),
                  {"i_peak": i_peak, "jump_up": i_up, "jump_down": i_down,
                   "extrema": asdict(ext)}, res.stats)


def _exp_shapiro(c: RunConfig) -> Result:
    p = c.params
    grid = np.arange(p["i_min"], p["i_max"] + 0.5 * p["i_step"], p["i_step"])
    period = 2.0 * math.pi / p["omega_f"]
    cfg = c.integrator(period / 200.0)
    if c.params["method"] == "adaptive" and math.isnan(p["dt_out"]):
        cfg = cfg.replace(rtol=max(cfg.rtol, 1e-8), atol=max(np.max(cfg.atol), 1e-8))
    res = an.shapiro_staircase(p["alpha"], p["omega_f"], p["v_f"], grid, cfg,
                               transient=p["transient"], n_periods=p["n_periods"])
    return Result(["i_tot", "v_mean"], [list(r) for r in res.rows()],
                  {"plateaus": [asdict(x) for x in res.plateaus]}, res.stats)


def _delta(p):
    return (p["delta_v"], p["delta_ij"], p["delta_is"])


def _exp_attractor(c: RunConfig) -> Result:
    p = c.params
    cfg = c.integrator(1e-3)
    v = an.detect_attractor(p["alpha"], p["v0"], _delta(p), p["tau_max"], cfg, window=p["window"])
    derived = {k: val for k, val in asdict(v).items() if k != "stats"}
    bound = an.energy_decay_rate(p["alpha"], p["v0"])
    derived["energy_decay_rate"] = bound
    return Result(["persistent", "amplitude", "omega_fund", "decay_ratio"],
                  [[int(v.persistent), v.amplitude, v.omega_fund, v.decay_ratio]],
                  derived, v.stats)


def _exp_basin(c: RunConfig) -> Result:
    p = c.params
    try:
        b = an.basin_threshold(p["alpha"], p["v0"], _delta(p), c.integrator(1e-3),
                               horizon_tau=p["tau_max"])
    except an.NoAttractorFound as exc:
        return Result(["lower", "upper"], [], {"message": str(exc)}, code=EXIT_NO_RESULT)
    return Result(["lower", "upper"], [[b.lower, b.upper]], asdict(b))


def _exp_spectrum(c: RunConfig) -> Result:
    p = c.params
    if not p["t_start"] < p["t_end"] <= p["tau_max"]:
        raise ConfigError("need t_start < t_end <= tau_max")
    alpha, v0 = p["alpha"], p["v0"]
    i_tot = float(ch.i_of_v(alpha, v0))
    z0 = ch.zeta_equilibrium(alpha, v0)
    y0 = np.array([v0, z0.imag, z0.real]) + np.array(_delta(p))
    cfg = c.integrator(1e-3)
    tr = integrate(autonomous_kernel, y0, (0.0, p["t_end"]), cfg, np.array([alpha, i_tot]),
                   record_from=p["t_start"])
    spec = an.power_spectrum(tr, "i_j", p["spectrum_window"])
    omega = an.dominant_frequency(spec)
    return Result(["omega", "power"], np.column_stack([spec.omega, spec.power]).tolist(),
                  {"omega_fund": omega, "i_tot": i_tot}, tr.stats)


def _exp_harmonic(c: RunConfig) -> Result:
    p = c.params
    hb = an.harmonic_balance(p["alpha"], p["i_tot"])
    return Result(["i_tot", "v0", "omega_est", "zeta0_re", "zeta0_im"],
                  [[p["i_tot"], hb.v0, hb.omega_est, hb.zeta0.real, hb.zeta0.imag]],
                  {"v1_consistency": hb.v1_consistency, "in_regime": hb.in_regime})


def _exp_squid(c: RunConfig) -> Result:
    p = c.params
    period = ch.squid_period(CODATA)
    phi = np.linspace(0.0, p["flux_periods"] * period, p["n_points"])
    a = np.atleast_1d(ch.squid_effective_alpha(p["K_A_si"], p["K_B_si"], phi, p["gamma_si"]))
    ic = np.array([ch.critical_current(float(x)) for x in a])
    return Result(["Phi_si", "alpha_eff", "i_c"], np.column_stack([phi, a, ic]).tolist(),
                  {"period_si": period, "i_c_max": float(ic.max()), "i_c_min": float(ic.min())})


def _exp_radiation(c: RunConfig) -> Result:
    p = c.params
    jp = PhysicalParams(R=1.0, C=p["C_si"], I=p["I_si"])
    rp = rad.RadiationParams.from_voltage(p["V_si"], p["ell_si"])
    eta = rad.efficiency_open_space(jp, CODATA, p["V_si"], p["ell_si"], p["I_c_si"])
    eta_cav = rad.efficiency_cavity(eta, p["Q"]) if p["Q"] > 0 else math.nan
    row = [rp.gamma_e, rp.omega_A, rp.lambda_A, eta, eta_cav]
    return Result(["gamma_e_si", "omega_A_si", "lambda_A_si", "eta_rad", "eta_cav"], [row],
                  dict(zip(["gamma_e_si", "omega_A_si", "lambda_A_si", "eta_rad", "eta_cav"], row)))


def _exp_simulate(c: RunConfig) -> Result:
    p = c.params
    y0 = (p["v_init"], p["ij_init"], p["is_init"])
    cfg = c.integrator(0.01)
    if p["drive_v_f"] > 0:
        kern, par = driven_kernel, [p["alpha"], p["i_tot"], p["drive_v_f"], p["omega_f"]]
    else:
        kern, par = autonomous_kernel, [p["alpha"], p["i_tot"]]
    tr = integrate(kern, y0, (0.0, p["tau_max"]), cfg, np.array(par))
    table = np.column_stack([tr.t, tr.states])
    return Result(["tau", "v", "i_j", "i_s"], table.tolist(),
                  {"final_state": tr.y_end.tolist(), "t_end": tr.t_end}, tr.stats)


RUNNERS: dict[str, Callable[[RunConfig], Result]] = {
    "characteristic": _exp_characteristic,
    "stability": _exp_stability,
    "sweep": _exp_sweep,
    "shapiro": _exp_shapiro,
    "attractor": _exp_attractor,
    "basin": _exp_basin,
    "spectrum": _exp_spectrum,
    "harmonic-balance": _exp_harmonic,
    "squid": _exp_squid,
    "radiation": _exp_radiation,
    "simulate": _exp_simulate,
}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.12g}"


def format_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


def run(cfg: RunConfig) -> int:
    """Execute one experiment and write its artifacts; returns the exit code."""
    out = Path(cfg.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    summary = {"experiment": cfg.experiment, "parameters": cfg.params}
    t0 = time.perf_counter()
    try:
        res = RUNNERS[cfg.experiment](cfg)
    except IntegrationError as exc:
        summary.update(status="numerical failure", error=str(exc), diagnostic=exc.diagnostic,
                       wall_clock_s=time.perf_counter() - t0)
        _write_json(out.with_name(out.name + ".summary.json"), summary)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    summary.update(
        status="ok" if res.code == EXIT_OK else "no result",
        derived=res.derived,
        integrator_stats=res.stats,
        wall_clock_s=time.perf_counter() - t0,
        columns=res.columns,
    )
    if cfg.format == "csv":
        out.with_name(out.name + ".csv").write_text(format_csv(res.columns, res.rows))
    else:
        _write_json(out.with_name(out.name + ".json"), {"columns": res.columns, "rows": res.rows})
    _write_json(out.with_name(out.name + ".summary.json"), summary)
    if res.code != EXIT_OK:
        print(f"no result: {res.derived.get('message', '')}", file=sys.stderr)
    return res.code


def _write_json(path: Path, obj):
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

# Dedicated flags; every other key is reachable through --set KEY=VALUE.
_FLAGS = {
    "alpha": "--alpha", "i_tot": "--i-tot", "v0": "--v0", "delta_is": "--delta-is",
    "tau_max": "--tau-max", "dt_out": "--dt-out", "rtol": "--rtol", "atol": "--atol",
    "method": "--method",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="jjsim",
        description="Josephson-junction density-matrix model: simulations and analyses.",
        epilog="Exit codes: 0 ok, 2 unknown key/invalid value, 3 numerical failure, "
               "4 no result, 5 type mismatch, 6 missing required field.",
    )
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="flat JSON file of key/value pairs")
    for key, flag in _FLAGS.items():
        spec = SCHEMA[key]
        default = "required" if spec.default is REQUIRED else spec.default
        ap.add_argument(flag, dest=key, default=None, metavar=key.upper(),
                        help=f"{spec.help} (default: {default})")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="set any other config key; see --list-keys")
    ap.add_argument("--out", default="jjsim_out", help="output path prefix")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--list-keys", action="store_true",
                    help="print the keys accepted by the experiment and exit")
    return ap


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_keys:
        for key, spec in SCHEMA.items():
            if args.experiment in spec.experiments:
                default = "required" if spec.default is REQUIRED else spec.default
                print(f"{key:16s} {spec.type.__name__:6s} {default!s:>10s}  {spec.help}")
        return EXIT_OK
    try:
        file_values = load_config_file(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in _FLAGS if getattr(args, k) is not None}
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            flags[k.strip().replace("-", "_")] = v.strip()
        cfg = parse_config(args.experiment, file_values, flags, args.out, args.format)
        return run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
