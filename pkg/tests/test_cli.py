import json
import os
import subprocess
import sys

import numpy as np
import pytest

from memchua import cli
from memchua.dynamics import Trajectory

SHORT = ["--set", "integrator.t_end=0.005", "--set", "integrator.transient_skip=0.001"]
FAST_ANALYZE = SHORT + ["--set", "analysis.lyapunov=false", "--set", "analysis.compare_profile=null"]


def run(tmp_path, *args, sub="out"):
    out = tmp_path / sub
    code = cli.main([*args, "--out", str(out)])
    return code, out


def read_json(path):
    return json.loads(path.read_text())


def constant_trajectory(path, n=20001, dt=1e-6, value=0.3):
    samples = np.zeros((n, 4))
    samples[:, 1] = value
    path.write_text(Trajectory(0.0, dt, samples).to_csv())
    return path


class TestSimulate:
    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "simulate", *SHORT)
        assert code == 0
        for name in ("trajectory.csv", "v1_v2.csv", "il_v2.csv", "summary.json", "config.json"):
            assert (out / name).is_file()
        summary = read_json(out / "summary.json")
        # record_every 10 over 4 ms at dt 1 us
        assert summary["n_samples"] == summary["expected_samples"] == 401
        assert (out / "v1_v2.csv").read_text().splitlines()[0] == "v1,v2"
        assert (out / "il_v2.csv").read_text().splitlines()[0] == "v2,iL"
        assert len((out / "trajectory.csv").read_text().splitlines()) == 402

    def test_origin_stays_zero(self, tmp_path):
        code, out = run(tmp_path, "simulate", *SHORT, "--set", "initial_state.v1=0")
        assert code == 0
        traj = Trajectory.from_csv((out / "trajectory.csv").read_text())
        assert not traj.samples.any()

    def test_byte_identical_reruns(self, tmp_path):
        names = ("trajectory.csv", "v1_v2.csv", "il_v2.csv", "summary.json", "config.json")
        _, out = run(tmp_path, "simulate", *SHORT)
        first = {n: (out / n).read_bytes() for n in names}
        run(tmp_path, "simulate", *SHORT)
        assert {n: (out / n).read_bytes() for n in names} == first

    def test_gst_writes_state(self, tmp_path):
        code, out = run(tmp_path, "simulate", "--profile", "gst-emulator", "--set", "integrator.t_end=0.001")
        assert code == 0
        assert (out / "gst_state.csv").read_text().startswith("t,m,w\n")

    def test_config_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"profile": "pwl-original", "integrator": {"t_end": 0.002, "transient_skip": 0.0}}))
        code, out = run(tmp_path, "simulate", "--config", str(path))
        assert code == 0
        assert read_json(out / "config.json")["profile"] == "pwl-original"

    def test_numerical_fault(self, tmp_path):
        code, _ = run(tmp_path, "simulate", "--set", "circuit.nonlinearity.theta=-5e-3",
                      "--set", "circuit.nonlinearity.sigma=0", "--set", "integrator.transient_skip=0")
        assert code == cli.EXIT_NUMERIC


class TestUsage:
    @pytest.mark.parametrize("args", [
        ["simulate", "--set", "circuit.unknown=1"],
        ["simulate", "--profile", "nope"],
        ["simulate", "--set", "integrator.dt=-1"],
        ["simulate", "--config", "/nonexistent/config.json"],
        ["frobnicate"],
        [],
    ])
    def test_exit_2(self, tmp_path, args):
        assert cli.main([*args, "--out", str(tmp_path)] if args and args[0] != "frobnicate" else args) == 2

    def test_nothing_written_on_usage_error(self, tmp_path):
        out = tmp_path / "o"
        cli.main(["simulate", "--set", "circuit.unknown=1", "--out", str(out)])
        assert not out.exists()

    def test_analyze_needs_input(self, tmp_path):
        code, _ = run(tmp_path, "analyze", "--set", "analysis.simulate=false")
        assert code == 2

    def test_missing_trajectory_file(self, tmp_path):
        code, _ = run(tmp_path, "analyze", "--set", f"analysis.trajectory={tmp_path / 'missing.csv'}")
        assert code == 2

    def test_module_entry_point(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "memchua", "simulate", "--set", "bogus=1"],
                             capture_output=True, text=True, cwd=tmp_path)
        assert res.returncode == 2
        assert "unknown configuration key" in res.stderr
        assert res.stdout == ""


class TestAnalyze:
    def test_metrics(self, tmp_path):
        code, out = run(tmp_path, "analyze", *FAST_ANALYZE)
        assert code == 0
        m = read_json(out / "metrics.json")
        assert set(m) >= {"spectrum", "lobes", "states", "area", "power", "lyapunov", "origin_eigenvalues_real"}
        assert m["lyapunov"] is None
        assert m["spectrum"]["parseval_rel_error"] < 1e-9
        assert (out / "spectrum.csv").is_file()

    def test_lyapunov_and_power(self, tmp_path):
        code, out = run(tmp_path, "analyze", *SHORT, "--set", "analysis.lyapunov_t_end=0.01")
        assert code == 0
        m = read_json(out / "metrics.json")
        ly = m["lyapunov"]
        assert len(ly["exponents"]) == 4
        assert ly["sum_vs_trace_rel"] < 0.05
        assert set(m["power"]["variants"]) == {"memristive-chaotic", "pwl-original"}
        assert (out / "lyapunov.csv").is_file()

    def test_from_trajectory_file(self, tmp_path):
        _, sim = run(tmp_path, "simulate", *SHORT, sub="sim")
        code, out = run(tmp_path, "analyze", *FAST_ANALYZE,
                        "--set", f"analysis.trajectory={sim / 'trajectory.csv'}")
        assert code == 0
        assert read_json(out / "metrics.json")["states"] == read_json(sim / "summary.json")["states"]

    def test_byte_identical_reruns(self, tmp_path):
        names = ("metrics.json", "spectrum.csv", "config.json")
        _, out = run(tmp_path, "analyze", *FAST_ANALYZE)
        first = {n: (out / n).read_bytes() for n in names}
        run(tmp_path, "analyze", *FAST_ANALYZE)
        assert {n: (out / n).read_bytes() for n in names} == first


class TestBits:
    def test_constant_trajectory_fails_monobit(self, tmp_path):
        path = constant_trajectory(tmp_path / "flat.csv")
        code, out = run(tmp_path, "bits", "--set", f"trng.trajectory={path}", "--set", "trng.debias=false",
                        "--set", "trng.sample_period=1e-5")
        assert code == 1
        rep = read_json(out / "report.json")
        monobit = next(t for t in rep["tests"] if t["name"] == "monobit")
        assert not monobit["pass"] and not rep["all_passed"]
        side = read_json(out / "bits.json")
        assert side["n_bits"] == 2000 and side["packing"] == "msb-first"
        assert (out / "bits.bin").read_bytes() == bytes(250)

    def test_insufficient_simulated_length(self, tmp_path):
        code, _ = run(tmp_path, "bits", "--set", "trng.t_end=0.06")
        assert code == 2

    def test_small_run(self, tmp_path):
        code, out = run(tmp_path, "bits", "--set", "trng.t_end=2", "--set", "trng.n_bits=2000")
        assert code in (0, 1)
        side = read_json(out / "bits.json")
        assert side["n_bits"] == 2000 and side["debiased"] is True
        assert len((out / "bits.bin").read_bytes()) == 250


class TestSmallsignal:
    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "smallsignal")
        assert code == 0
        rows = (out / "impedance_sweep.csv").read_text().splitlines()
        assert rows[0] == "freq_hz,re_ohm,im_ohm,mag_ohm,phase_deg"
        assert rows[1].split(",")[:2] == ["0", "26280"]
        rep = read_json(out / "smallsignal.json")
        assert rep["input_resistance_ohm"] < 0
        assert rep["mna_crosscheck"]["pass"]


class TestSweep:
    def test_identical_values_give_zero_diff(self, tmp_path):
        code, out = run(tmp_path, "sweep", *SHORT, "--param", "circuit.r1", "--values", "1800,1800")
        assert code == 0
        rep = read_json(out / "sweep.json")
        assert rep["pairs"][0]["max_abs_dv1"] == 0.0
        lines = (out / "sweep_metrics.csv").read_text().splitlines()
        assert lines[0] == ",".join(cli.SWEEP_COLUMNS)
        assert lines[1].split(",")[1:] == lines[2].split(",")[1:]

    def test_default_sweep_changes_trajectory(self, tmp_path):
        code, out = run(tmp_path, "sweep", *SHORT)
        assert code == 0
        rep = read_json(out / "sweep.json")
        assert rep["parameter"] == "circuit.emulator.r_g"
        assert rep["pairs"][0]["max_abs_dv1"] > 0
        assert (out / "sweep_diff_0.csv").read_text().startswith("t,dv1\n")

    @pytest.mark.parametrize("extra", [
        ["--param", "circuit.nope", "--values", "1,2"],
        ["--param", "circuit", "--values", "1,2"],
        ["--param", "circuit.r1", "--values", "1800"],
    ])
    def test_bad_sweep(self, tmp_path, extra):
        code, _ = run(tmp_path, "sweep", *SHORT, *extra)
        assert code == 2


def test_files_not_group_writable_tempfiles_cleaned(tmp_path):
    _, out = run(tmp_path, "smallsignal")
    assert not [f for f in os.listdir(out) if f.startswith(".tmp-")]
    assert oct(os.stat(out / "smallsignal.json").st_mode & 0o777) == "0o644"
