"""Command-line entry point: ``memchua {simulate,analyze,bits,smallsignal,sweep}``.

Exit codes: 0 success, 1 a statistical/consistency test failed, 2 usage or
configuration error, 3 numerical fault. Only files in ``--out`` are written;
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
import tempfile
from typing import Optional, Sequence

import numpy as np

from . import config as cfgmod
from .analysis import (
    COMPONENTS,
    QUOTED_POWER_MW,
    area_report,
    average_power,
    lobe_transitions,
    lyapunov_spectrum,
    power_spectrum,
    resample,
    spectral_flatness,
)
from .circuit import GstNonlinearity
from .config import RunConfig
from .dynamics import ORIGIN, Trajectory, integrate, jacobian, params_digest
from .errors import InsufficientDataError, MemchuaError, UsageError
from .smallsignal import (
    crosscheck,
    emulator_impedance,
    impedance_sweep,
    log_frequencies,
    nr_input_resistance,
    nr_output_resistance_approx,
    nr_output_resistance_full,
    relative_error,
    sweep_csv,
)
from .trng import evaluate, extract_bits, von_neumann_debias

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
MNA_TOLERANCE = 1e-6
STATE_NAMES = ("phi", "v1", "v2", "i_l")


def log(msg: str) -> None:
    print(f"memchua: {msg}", file=sys.stderr)


def write_atomic(path: str, data) -> None:
    """Write to a temp file in the same directory, then rename over ``path``."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def columns_csv(header: Sequence[str], *cols) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in zip(*cols):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


class Outputs:
    def __init__(self, out_dir: str):
        self.out_dir = out_dir

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def write(self, name: str, data) -> None:
        write_atomic(self.path(name), data)


def state_stats(traj: Trajectory) -> dict:
    out = {}
    for k, name in enumerate(STATE_NAMES):
        col = traj.samples[:, k]
        out[name] = {"min": float(col.min()), "max": float(col.max()), "std": float(col.std())}
    if traj.aux is not None:
        for k, name in enumerate(("gst_m", "gst_w")):
            col = traj.aux[:, k]
            out[name] = {"min": float(col.min()), "max": float(col.max()), "std": float(col.std())}
    return out


def load_trajectory(path: str) -> Trajectory:
    try:
        with open(path, encoding="utf-8") as fh:
            return Trajectory.from_csv(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read trajectory {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"malformed trajectory {path}: {exc}") from exc


# -- simulate ---------------------------------------------------------------

def cmd_simulate(cfg: RunConfig) -> int:
    out = Outputs(cfg.out_dir)
    traj = integrate(cfg.initial_state, cfg.circuit, cfg.integrator)
    out.write("trajectory.csv", traj.to_csv())
    out.write("v1_v2.csv", columns_csv(("v1", "v2"), traj.v1, traj.v2))
    out.write("il_v2.csv", columns_csv(("v2", "iL"), traj.v2, traj.i_l))
    if traj.aux is not None:
        out.write("gst_state.csv", columns_csv(("t", "m", "w"), traj.t, traj.aux[:, 0], traj.aux[:, 1]))
    summary = {
        "profile": cfg.profile,
        "params_digest": traj.params_digest,
        "n_samples": len(traj),
        "expected_samples": cfg.integrator.n_samples,
        "t_first": traj.t0,
        "sample_dt": traj.dt,
        "states": state_stats(traj),
    }
    out.write("summary.json", dump_json(summary))
    out.write("config.json", cfg.to_json())
    log(f"simulate: {len(traj)} samples -> {cfg.out_dir}")
    return EXIT_OK


# -- analyze ----------------------------------------------------------------

def _trajectory_for_analysis(cfg: RunConfig) -> Trajectory:
    a = cfg.analysis
    if a["trajectory"]:
        return load_trajectory(a["trajectory"])
    if not a["simulate"]:
        raise UsageError("analysis.trajectory is not set and analysis.simulate is false; nothing to analyze")
    return integrate(cfg.initial_state, cfg.circuit, cfg.integrator)


def power_table(traj: Trajectory, circuit) -> dict:
    return {c: average_power(traj, circuit, c) for c in COMPONENTS}


def _compare_config(cfg: RunConfig) -> RunConfig:
    doc = cfg.document
    over = [("integrator", doc["integrator"]), ("initial_state", doc["initial_state"]),
            ("circuit.emulator", doc["circuit"]["emulator"])]
    return cfgmod.from_document(cfgmod.resolve(cfg.analysis["compare_profile"], None, over))


def cmd_analyze(cfg: RunConfig) -> int:
    a = cfg.analysis
    out = Outputs(cfg.out_dir)
    traj = _trajectory_for_analysis(cfg)
    x, dts = resample(traj, a["fft_sample_period"])
    spec = power_spectrum(x, dts, a["window"])
    n = len(spec.power) * 2 - 2
    energy = float(np.sum(x[:n] ** 2))
    parseval = abs(float(spec.power.sum()) - energy) / energy if energy > 0 else abs(float(spec.power.sum()))
    out.write("spectrum.csv", spec.to_csv())
    lobes = lobe_transitions(traj, a["hysteresis"]) if np.std(traj.v1) > 0 else None

    metrics = {
        "profile": cfg.profile,
        "params_digest": params_digest(cfg.circuit),
        "spectrum": {
            "sample_period": dts,
            "n_bins": len(spec.power),
            "df": spec.df,
            "flatness": spectral_flatness(spec),
            "parseval_rel_error": parseval if a["window"] == "rect" else None,
            "peak_freq_hz": float(spec.freqs[1:][np.argmax(spec.power[1:])]) if len(spec.power) > 1 else 0.0,
        },
        "lobes": None if lobes is None else {"lobe_a": lobes.lobe_a, "lobe_b": lobes.lobe_b,
                                              "transitions": lobes.transitions},
        "states": state_stats(traj),
        "area": area_report(),
    }

    power = {"quoted_mw": dict(QUOTED_POWER_MW), "units": "W", "variants": {}}
    power["variants"][cfg.profile] = power_table(traj, cfg.circuit)
    if a["compare_profile"] and a["compare_profile"] != cfg.profile:
        other = _compare_config(cfg)
        other_traj = integrate(other.initial_state, other.circuit, other.integrator)
        power["variants"][other.profile] = power_table(other_traj, other.circuit)
    metrics["power"] = power

    jac = jacobian(ORIGIN, cfg.circuit).matrix
    metrics["origin_eigenvalues_real"] = sorted(np.linalg.eigvals(jac).real.tolist(), reverse=True)

    if a["lyapunov"] and not isinstance(cfg.circuit.nonlinearity, GstNonlinearity):
        lcfg = cfgmod.build_integrator(cfg.document["integrator"], t_end=a["lyapunov_t_end"], record_every=1)
        res = lyapunov_spectrum(cfg.initial_state, cfg.circuit, lcfg, int(a["renorm_steps"]) * lcfg.dt)
        out.write("lyapunov.csv", res.history_csv())
        metrics["lyapunov"] = {
            "exponents": res.exponents,
            "largest": res.largest,
            "sum": res.sum,
            "trace_mean": res.trace_mean,
            "sum_vs_trace_rel": abs(res.sum - res.trace_mean) / abs(res.trace_mean) if res.trace_mean else None,
            "t_total": res.t_total,
            "renorm_interval": res.renorm_interval,
            "last_quarter_spread": res.last_quarter_spread,
            "chaotic": bool(res.largest > 0 and res.exponents[-1] < 0),
        }
    else:
        metrics["lyapunov"] = None
    out.write("metrics.json", dump_json(metrics))
    out.write("config.json", cfg.to_json())
    lam = metrics["lyapunov"]["largest"] if metrics["lyapunov"] else float("nan")
    log(f"analyze: flatness={metrics['spectrum']['flatness']:.4g} lambda1={lam:.6g} -> {cfg.out_dir}")
    return EXIT_OK


# -- bits -------------------------------------------------------------------

def cmd_bits(cfg: RunConfig) -> int:
    t = cfg.trng
    out = Outputs(cfg.out_dir)
    n_bits = int(t["n_bits"])
    if t["trajectory"]:
        traj, simulated = load_trajectory(t["trajectory"]), False
    else:
        icfg = cfgmod.build_integrator(cfg.document["integrator"], t_end=t["t_end"], record_every=t["record_every"])
        traj, simulated = integrate(cfg.initial_state, cfg.circuit, icfg), True
    stream = extract_bits(traj, t["sample_period"], t["policy"], t["quantum_fraction"])
    if t["debias"]:
        stream = von_neumann_debias(stream)
    if simulated and len(stream) < n_bits:
        duration = float(t["t_end"]) - cfg.integrator.transient_skip
        if len(stream) == 0:
            raise InsufficientDataError(
                f"{duration:g} s of signal produced no usable bits; the trajectory is not varying")
        need = cfg.integrator.transient_skip + duration * n_bits / len(stream) * 1.1
        raise InsufficientDataError(
            f"only {len(stream)} of {n_bits} bits from {duration:g} s of signal; "
            f"set trng.t_end to at least {need:.3g} s")
    stream = type(stream)(stream.bits[:n_bits], stream.source_digest, stream.extraction_meta)
    report = evaluate(stream, float(t["alpha"]), tuple(t["lags"]))
    out.write("bits.bin", stream.packed())
    out.write("bits.json", dump_json(stream.sidecar()))
    out.write("report.json", report.to_json())
    out.write("config.json", cfg.to_json())
    failed = [r.name for r in report.tests if not r.passed]
    log(f"bits: {len(stream)} bits, " + ("all tests passed" if not failed else f"failed: {', '.join(failed)}"))
    return EXIT_OK if report.all_passed else EXIT_FAIL


# -- smallsignal ------------------------------------------------------------

def cmd_smallsignal(cfg: RunConfig) -> int:
    s = cfg.smallsignal
    out = Outputs(cfg.out_dir)
    em = cfgmod.build_emulator(cfg.document)
    freqs = log_frequencies(s["f_start"], s["f_stop"], int(s["points_per_decade"]))
    out.write("impedance_sweep.csv", sweep_csv(impedance_sweep(em, freqs)))
    nr = cfgmod.build_negres(cfg.document)
    check = crosscheck(cfgmod.build_negres(cfg.document, s["mna_gain"]), em)
    worst = max(v["rel_error"] for v in check.values())
    approx = cfgmod.build_negres(cfg.document, s["approx_gain"])
    r_full, r_approx = nr_output_resistance_full(approx), nr_output_resistance_approx(approx)
    report = {
        "dc_impedance_ohm": emulator_impedance(0.0, em).real,
        "input_resistance_ohm": nr_input_resistance(nr),
        "output_resistance": {
            "gain": approx.gain_a,
            "full_ohm": r_full,
            "approx_ohm": r_approx,
            "rel_gap": relative_error(r_approx, r_full),
        },
        "mna_crosscheck": {"gain": s["mna_gain"], "entries": check, "max_rel_error": worst,
                           "tolerance": MNA_TOLERANCE, "pass": worst < MNA_TOLERANCE},
    }
    out.write("smallsignal.json", dump_json(report))
    out.write("config.json", cfg.to_json())
    log(f"smallsignal: max formula/MNA rel error {worst:.3g}")
    return EXIT_OK if worst < MNA_TOLERANCE else EXIT_FAIL


# -- sweep ------------------------------------------------------------------

SWEEP_COLUMNS = ("value", "v1_min", "v1_max", "v1_std", "lobe_a", "lobe_b", "transitions", "flatness")


def _run_metrics(rc: RunConfig) -> tuple[Trajectory, dict]:
    traj = integrate(rc.initial_state, rc.circuit, rc.integrator)
    v1 = traj.v1
    lobes = lobe_transitions(traj, rc.analysis["hysteresis"]) if np.std(v1) > 0 else None
    x, dts = resample(traj, rc.analysis["fft_sample_period"])
    return traj, {
        "v1_min": float(v1.min()),
        "v1_max": float(v1.max()),
        "v1_std": float(v1.std()),
        "lobe_a": lobes.lobe_a if lobes else 0,
        "lobe_b": lobes.lobe_b if lobes else 0,
        "transitions": lobes.transitions if lobes else 0,
        "flatness": spectral_flatness(power_spectrum(x, dts)),
    }


def cmd_sweep(cfg: RunConfig, parameter: Optional[str] = None, values: Optional[list] = None) -> int:
    parameter = parameter or cfg.sweep["parameter"]
    values = list(values if values is not None else cfg.sweep["values"])
    current = cfgmod.get_key(cfg.document, parameter)
    if isinstance(current, dict):
        raise UsageError(f"sweep parameter {parameter!r} names a section, not a value")
    if len(values) < 2:
        raise UsageError(f"sweep needs at least 2 values, got {len(values)}")
    out = Outputs(cfg.out_dir)
    runs = []
    for v in values:
        rc = cfg.with_override(parameter, v)
        traj, m = _run_metrics(rc)
        runs.append((v, traj, m))
    buf = io.StringIO()
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for v, _, m in runs:
        buf.write(",".join([f"{float(v):.17g}"] + [f"{m[c]:.17g}" if isinstance(m[c], float) else str(m[c])
                                                    for c in SWEEP_COLUMNS[1:]]) + "\n")
    out.write("sweep_metrics.csv", buf.getvalue())
    pairs = []
    for i in range(len(runs) - 1):
        (va, ta, ma), (vb, tb, mb) = runs[i], runs[i + 1]
        diff = tb.v1 - ta.v1
        out.write(f"sweep_diff_{i}.csv", columns_csv(("t", "dv1"), ta.t, diff))
        pairs.append({
            "from": va, "to": vb, "file": f"sweep_diff_{i}.csv",
            "max_abs_dv1": float(np.max(np.abs(diff))),
            "rms_dv1": float(math.sqrt(np.mean(diff ** 2))),
            "metric_deltas": {c: mb[c] - ma[c] for c in SWEEP_COLUMNS[1:]},
        })
    out.write("sweep.json", dump_json({"parameter": parameter, "values": values, "pairs": pairs}))
    out.write("config.json", cfg.to_json())
    log(f"sweep: {parameter} over {len(values)} values -> {cfg.out_dir}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration document")
    common.add_argument("--profile", help=f"named profile: {', '.join(sorted(cfgmod.PROFILES))}")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a dotted configuration key; VALUE is parsed as JSON")
    parser = argparse.ArgumentParser(prog="memchua", description="Memristive Chua circuit toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate and write the trajectory")
    sub.add_parser("analyze", parents=[common], help="spectrum, Lyapunov exponents, lobes, power, area")
    sub.add_parser("bits", parents=[common], help="extract bits and run the randomness tests")
    sub.add_parser("smallsignal", parents=[common], help="emulator impedance sweep and MNA cross-check")
    sw = sub.add_parser("sweep", parents=[common], help="rerun over values of one configuration key")
    sw.add_argument("--param", help="dotted configuration key to sweep")
    sw.add_argument("--values", help="comma-separated values (JSON scalars)")
    return parser


def _parse_values(text: str) -> list:
    vals = []
    for item in text.split(","):
        item = item.strip()
        try:
            vals.append(json.loads(item))
        except json.JSONDecodeError:
            vals.append(item)
    return vals


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "bits": cmd_bits,
    "smallsignal": cmd_smallsignal,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = cfgmod.load(args.profile, args.config, args.overrides, args.out)
        if args.command == "sweep":
            values = _parse_values(args.values) if args.values else None
            return cmd_sweep(cfg, args.param, values)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        log(f"error: {exc}")
        return EXIT_USAGE
    except (MemchuaError, ArithmeticError) as exc:
        log(f"numerical fault: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
