import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from jjsim import cli


def run(tmp_path, *args, name="out"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float) if len(rows) > 1 else np.empty((0, len(rows[0])))


def summary(out):
    return json.loads(out.with_name(out.name + ".summary.json").read_text())


class TestConfig:
    def test_defaults(self):
        c = cli.parse_config("characteristic", {}, {"alpha": "4"})
        assert c.params == {"alpha": 4.0, "v_min": 0.0, "v_max": 10.0, "n_points": 1000}

    def test_negative_alpha(self, capsys):
        assert cli.main(["characteristic", "--alpha", "-1"]) == cli.EXIT_CONFIG
        assert "alpha must be >= 0" in capsys.readouterr().err

    def test_flag_wins(self, tmp_path):
        f = tmp_path / "c.json"
        f.write_text(json.dumps({"alpha": 2.0, "n_points": 11}))
        c = cli.parse_config("characteristic", cli.load_config_file(str(f)), {"alpha": "3.5"})
        assert c.params["alpha"] == 3.5 and c.params["n_points"] == 11

    @pytest.mark.parametrize("file_values,flags,code,needle", [
        ({"alpah": 1.0}, {}, cli.EXIT_CONFIG, "alpah"),
        ({"alpha": "big"}, {}, cli.EXIT_TYPE, "alpha"),
        ({"alpha": 1.0, "n_points": 2.5}, {}, cli.EXIT_TYPE, "n_points"),
        ({}, {"n_points": "x"}, cli.EXIT_TYPE, "n_points"),
        ({}, {}, cli.EXIT_MISSING, "alpha"),
        ({"alpha": 1.0, "v0": 3.0}, {}, cli.EXIT_CONFIG, "v0"),
    ])
    def test_errors_name_key(self, file_values, flags, code, needle):
        with pytest.raises(cli.ConfigError) as exc:
            cli.parse_config("characteristic", file_values, flags)
        assert exc.value.code == code and needle in str(exc.value)

    def test_bad_file(self, tmp_path, capsys):
        f = tmp_path / "c.json"
        f.write_text("[1, 2]")
        assert cli.main(["characteristic", "--config", str(f)]) == cli.EXIT_CONFIG
        f.write_text('{"alpha": {"x": 1}}')
        assert cli.main(["characteristic", "--config", str(f)]) == cli.EXIT_CONFIG

    def test_choices(self):
        with pytest.raises(cli.ConfigError):
            cli.parse_config("simulate", {}, {"alpha": "1", "i_tot": "1", "method": "euler"})


class TestRuns:
    def test_characteristic(self, tmp_path):
        code, out = run(tmp_path, "characteristic", "--alpha", "4")
        assert code == 0
        header, data = read_csv(out.with_suffix(".csv"))
        assert header == ["v", "i_tot"] and data.shape == (1000, 2)
        assert np.all(np.diff(data[:, 0]) > 0)
        s = summary(out)
        assert s["derived"]["extrema"]["i_c"] == pytest.approx(9.073, abs=1e-3)
        assert "wall_clock_s" in s

    def test_deterministic(self, tmp_path):
        _, a = run(tmp_path, "stability", "--alpha", "6", "--set", "n_points=50", name="a")
        _, b = run(tmp_path, "stability", "--alpha", "6", "--set", "n_points=50", name="b")
        assert a.with_suffix(".csv").read_bytes() == b.with_suffix(".csv").read_bytes()

    def test_sweep_columns(self, tmp_path):
        code, out = run(tmp_path, "sweep", "--alpha", "4")
        assert code == 0
        header, data = read_csv(out.with_suffix(".csv"))
        assert header == ["tau", "i_tot", "v", "i_j", "i_res", "i_cap"]
        d = summary(out)["derived"]
        assert abs(d["jump_up"] - 9.073) / 9.073 < 0.02
        assert summary(out)["integrator_stats"]["accepted_steps"] > 0

    def test_attractor_summary(self, tmp_path):
        code, out = run(tmp_path, "attractor", "--alpha", "2.2", "--v0", "30", "--delta-is", "-0.1",
                        "--tau-max", "1000")
        assert code == 0
        d = summary(out)["derived"]
        assert set(d) >= {"persistent", "amplitude", "omega_fund", "decay_ratio"}
        assert d["omega_fund"] == pytest.approx(30.0, rel=0.03)

    def test_basin_no_result(self, tmp_path):
        code, out = run(tmp_path, "basin", "--alpha", "0.8", "--v0", "5", "--tau-max", "400")
        assert code == cli.EXIT_NO_RESULT
        assert summary(out)["status"] == "no result"

    def test_numerical_failure(self, tmp_path):
        code, out = run(tmp_path, "simulate", "--alpha", "5", "--i-tot", "1e3", "--method", "rk4",
                        "--dt-out", "0.5", "--set", "dt_fixed=0.5", "--tau-max", "50")
        assert code == cli.EXIT_NUMERICAL
        s = summary(out)
        assert s["status"] == "numerical failure" and "t_fail" in s["diagnostic"]

    def test_unstable_probe_rejected(self, tmp_path):
        code, _ = run(tmp_path, "attractor", "--alpha", "6", "--v0", "2")
        assert code == cli.EXIT_CONFIG

    @pytest.mark.parametrize("args,columns", [
        (["harmonic-balance", "--alpha", "2.2", "--i-tot", "30.293"],
         ["i_tot", "v0", "omega_est", "zeta0_re", "zeta0_im"]),
        (["squid", "--set", "n_points=9"], ["Phi_si", "alpha_eff", "i_c"]),
        (["radiation"], ["gamma_e_si", "omega_A_si", "lambda_A_si", "eta_rad", "eta_cav"]),
        (["simulate", "--alpha", "1", "--i-tot", "2", "--tau-max", "5"], ["tau", "v", "i_j", "i_s"]),
        (["spectrum", "--alpha", "2.2", "--tau-max", "300", "--set", "t_start=100", "--set", "t_end=250"],
         ["omega", "power"]),
        (["shapiro", "--alpha", "3", "--set", "i_min=20", "--set", "i_max=21", "--set", "n_periods=10"],
         ["i_tot", "v_mean"]),
    ])
    def test_experiments(self, tmp_path, args, columns):
        code, out = run(tmp_path, *args)
        assert code == 0
        header, data = read_csv(out.with_suffix(".csv"))
        assert header == columns and data.shape[0] >= 1

    def test_json_format(self, tmp_path):
        code, out = run(tmp_path, "characteristic", "--alpha", "1", "--format", "json", "--set", "n_points=3")
        assert code == 0
        d = json.loads(out.with_suffix(".json").read_text())
        assert d["columns"] == ["v", "i_tot"] and len(d["rows"]) == 3

    def test_list_keys(self, capsys):
        assert cli.main(["sweep", "--list-keys"]) == 0
        assert "rate" in capsys.readouterr().out


def test_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "jjsim.cli", "characteristic", "--alpha", "2",
                        "--out", str(tmp_path / "x")], capture_output=True, text=True)
    assert r.returncode == 0 and (tmp_path / "x.csv").exists()
