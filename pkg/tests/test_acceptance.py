"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line; the lines are echoed in the
pytest terminal summary (see conftest.py) and printed immediately under -s.
"""

import math
import time

import numpy as np
import pytest

from memchua import cli, config
from memchua.analysis import (
    CHIP_RESISTOR,
    DIODE_BODY,
    DIODE_WIRE,
    GST_DEVICE,
    area_report,
    average_power,
    footprint_area,
    lobe_transitions,
    lyapunov_spectrum,
    power_spectrum,
    resample,
    spectral_flatness,
)
from memchua.circuit import CubicNonlinearity, CircuitParams, EmulatorParams, back_solve_r_c, derive_sigma, derive_theta
from memchua.dynamics import IntegratorConfig, StateVector, Trajectory, fd_jacobian, integrate, jacobian, rhs, rk4_step
from memchua.smallsignal import (
    NegResistorParams,
    crosscheck,
    emulator_impedance,
    nr_input_resistance,
    nr_output_resistance_approx,
    nr_output_resistance_full,
)
from memchua.trng import BitStream, evaluate, extract_bits, von_neumann_debias

LINES: list[str] = []


def record(n: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def lyapunov_runs(chaotic_cfg):
    """Fallback chaotic profile at dt and dt/2, with wall time."""
    start = time.perf_counter()
    out = {}
    for dt in (1e-6, 5e-7):
        cfg = IntegratorConfig(dt=dt, t_end=0.55, transient_skip=0.05)
        out[dt] = lyapunov_spectrum(chaotic_cfg.initial_state, chaotic_cfg.circuit, cfg, 100e-6)
    return out, time.perf_counter() - start


def test_criterion_01_chaos(lyapunov_runs):
    runs, elapsed = lyapunov_runs
    l1, l1_half = runs[1e-6].largest, runs[5e-7].largest
    drift = abs(l1_half - l1) / abs(l1)
    ok = l1 > 0 and l1_half > 0 and drift <= 0.2 and elapsed < 60
    record(1, "largest Lyapunov exponent", ok,
           f"lambda1={l1:.1f}/s (dt/2: {l1_half:.1f}/s, drift {drift:.1%}), {elapsed:.1f} s")


def test_criterion_02_exponent_sum(lyapunov_runs):
    res = lyapunov_runs[0][1e-6]
    rel = abs(res.sum - res.trace_mean) / abs(res.trace_mean)
    record(2, "exponent sum vs mean trace", rel < 0.05,
           f"sum={res.sum:.2f}, trace={res.trace_mean:.2f}, rel {rel:.2e}")


def test_criterion_03_jacobian(chaotic_cfg):
    p = chaotic_cfg.circuit
    # per-component attractor scale (phi, v1, v2, i_l)
    scale = np.array([6.7, 1.1e5, 4.9e4, 1.4e2])
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=4) * scale
        a = jacobian(StateVector(*x), p).matrix
        fd = fd_jacobian(lambda y: np.array(rhs(0.0, StateVector.from_array(y), p)), x, scale=scale)
        nz = np.abs(a) > 0
        worst = max(worst, float(np.max(np.abs(fd[nz] - a[nz]) / np.abs(a[nz]))),
                    float(np.max(np.abs(fd[~nz]), initial=0.0)))
    elapsed = time.perf_counter() - start
    record(3, "analytic Jacobian vs central differences", worst < 1e-5 and elapsed < 1.0,
           f"max rel error {worst:.2e} over 20 states, {elapsed * 1e3:.0f} ms")


def test_criterion_04_rk4_order():
    def f(t, y):
        return np.array([y[1], -y[0]])

    def error(n):
        dt, y = 2 * math.pi / n, np.array([1.0, 0.0])
        for i in range(n):
            y = rk4_step(f, i * dt, y, dt)
        return float(np.max(np.abs(y - np.array([1.0, 0.0]))))

    start = time.perf_counter()
    ratio = error(50) / error(100)
    elapsed = time.perf_counter() - start
    record(4, "RK4 global error ratio", 12 <= ratio <= 20 and elapsed < 5, f"ratio {ratio:.3f}, {elapsed:.2f} s")


def test_criterion_05_spectrum(chaotic_cfg, chaotic_traj):
    period = chaotic_cfg.analysis["fft_sample_period"]
    x, dts = resample(chaotic_traj, period)
    tone = np.sin(2 * np.pi * 1e3 * dts * np.arange(len(x)))

    def parseval(sig):
        s = power_spectrum(sig, dts)
        n = 2 * len(s.power) - 2
        energy = float(np.sum(np.asarray(sig)[:n] ** 2))
        return abs(float(s.power.sum()) - energy) / energy, spectral_flatness(s)

    err_c, flat_c = parseval(x)
    err_t, flat_t = parseval(tone)
    ratio = flat_c / flat_t
    ok = max(err_c, err_t) < 1e-9 and ratio >= 10
    record(5, "spectral flatness vs 1 kHz tone", ok,
           f"flatness {flat_c:.4f} vs {flat_t:.2e} (x{ratio:.0f}), Parseval {max(err_c, err_t):.1e}")


def test_criterion_06_double_scroll(chaotic_traj):
    lobes = lobe_transitions(chaotic_traj)
    span = chaotic_traj.duration
    ok = lobes.lobe_a >= 10 and lobes.lobe_b >= 10 and lobes.transitions >= 20 and span >= 0.15 - 1e-9
    record(6, "double-scroll lobe visits", ok,
           f"{lobes.lobe_a}/{lobes.lobe_b} dwell episodes, {lobes.transitions} transitions in {span:.3f} s")


def test_criterion_07_smallsignal():
    em = EmulatorParams()
    dc = emulator_impedance(0.0, em)
    r_in = nr_input_resistance(NegResistorParams(250.0, 230.0, 2500.0))
    worst = max(v["rel_error"] for v in crosscheck(NegResistorParams(gain_a=1e9), em).values())
    p6 = NegResistorParams(gain_a=1e6)
    full = nr_output_resistance_full(p6)
    gap = abs(nr_output_resistance_approx(p6) - full) / abs(full)
    ok = dc == complex(26280.0, 0.0) and abs(r_in / -2717.39 - 1) < 1e-4 and worst < 1e-6 and gap < 1e-4
    record(7, "small-signal exactness", ok,
           f"Z(0)={dc.real:g}, R_in={r_in:.2f}, MNA max rel {worst:.1e}, R_out gap {gap:.1e}")


def test_criterion_08_theta_sigma():
    theta = derive_theta(2500.0)
    r_c = back_solve_r_c(1.35e-6, 25.9e3, 280.0, 2500.0)
    rel = abs(derive_sigma(25.9e3, 280.0, 2500.0, r_c) / 1.35e-6 - 1)
    record(8, "theta/sigma round trip", theta == -4.0e-4 and rel < 1e-9,
           f"theta={theta:g}, r_c={r_c:.6f}, sigma rel error {rel:.1e}")


def test_criterion_09_trng(chaotic_cfg):
    t = chaotic_cfg.trng
    start = time.perf_counter()
    icfg = config.build_integrator(chaotic_cfg.document["integrator"], t_end=t["t_end"],
                                   record_every=t["record_every"])
    traj = integrate(chaotic_cfg.initial_state, chaotic_cfg.circuit, icfg)
    stream = von_neumann_debias(extract_bits(traj, t["sample_period"], t["policy"], t["quantum_fraction"]))
    n = int(t["n_bits"])
    enough = len(stream) >= n
    report = evaluate(BitStream(stream.bits[:n]), 0.01, (1, 2, 8))

    rng = np.random.default_rng(7)
    biased = BitStream((rng.random(1_000_000) < 0.7).astype(np.uint8))
    raw_pass = evaluate(biased)["monobit"].passed
    clean_pass = evaluate(von_neumann_debias(biased))["monobit"].passed
    elapsed = time.perf_counter() - start

    ok = enough and report.all_passed and not raw_pass and clean_pass and elapsed < 120
    ps = ", ".join(f"{r.name.replace('serial_correlation_', '')} p={r.p_value:.3f}" for r in report.tests)
    record(9, "TRNG battery", ok,
           f"{min(len(stream), n)} bits: {ps}; biased source monobit raw={'pass' if raw_pass else 'fail'} "
           f"debiased={'pass' if clean_pass else 'fail'}; {elapsed:.1f} s")


def test_criterion_10_power():
    p = CircuitParams(r1=1000.0, nonlinearity=CubicNonlinearity(0.0, 0.0))

    def across_r1(v, dt):
        z = np.zeros_like(v)
        return Trajectory(0.0, dt, np.column_stack([z, v, z, z]))

    dt = 1e-6
    dc = average_power(across_r1(np.ones(1001), dt), p, "r1")
    sine = average_power(across_r1(np.sin(2 * np.pi * 1e3 * dt * np.arange(10_001)), dt), p, "r1")
    ok = abs(dc - 1e-3) <= 1e-9 and abs(sine - 0.5e-3) <= 1e-9
    record(10, "power validation cases", ok, f"DC {dc * 1e3:.6f} mW, sinusoid {sine * 1e3:.6f} mW")


def test_criterion_11_area():
    parts = {
        "resistor": (footprint_area([CHIP_RESISTOR]), 0.18),
        "diode": (footprint_area([DIODE_BODY, DIODE_WIRE]), 19.92),
        "device": (footprint_area([GST_DEVICE]), 1e-6),
    }
    ok = all(math.isclose(got, want, rel_tol=1e-12) for got, want in parts.values())
    rep = area_report()
    flagged = [k for k, v in rep.items() if isinstance(v, dict) and v.get("discrepancy")]
    record(11, "footprint per-part products", ok,
           ", ".join(f"{k} {got:g} mm2" for k, (got, _) in parts.items())
           + f"; totals flagged: {', '.join(flagged) or 'none'}")


def test_criterion_12_determinism(tmp_path):
    short = ["--set", "integrator.t_end=0.01", "--set", "integrator.transient_skip=0.002"]
    commands = {
        "simulate": short,
        "analyze": short + ["--set", "analysis.lyapunov_t_end=0.02"],
        "bits": ["--set", "trng.t_end=2", "--set", "trng.n_bits=2000"],
        "smallsignal": [],
        "sweep": short,
    }
    mismatched, codes = [], {}
    for name, extra in commands.items():
        out = tmp_path / name
        snapshots = []
        for _ in range(2):
            codes[name] = cli.main([name, *extra, "--out", str(out)])
            snapshots.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
        if snapshots[0] != snapshots[1]:
            mismatched.append(name)
    ran = all(c in (0, 1) for c in codes.values())
    record(12, "byte-identical reruns", ran and not mismatched,
           f"{len(commands)} commands, exit codes {codes}, mismatched: {mismatched or 'none'}")
