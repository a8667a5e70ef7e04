"""Chaos diagnostics and circuit figures of merit.

Spectra use a one-sided periodogram normalised so that the bin powers sum
to the time-domain energy sum(x**2) (Parseval), not to the mean square.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .circuit import CircuitParams, CubicNonlinearity, GstNonlinearity, memductance, pwl_current
from .dynamics import (
    BLOWUP_LIMIT,
    IntegratorConfig,
    StateVector,
    Trajectory,
    pack_params,
    raise_for_status,
    rk4_step,
)
from .errors import InsufficientDataError, UsageError


@dataclass(frozen=True)
class Spectrum:
    df: float
    freqs: np.ndarray
    power: np.ndarray

    @property
    def bins(self) -> list[tuple[float, float]]:
        return list(zip(self.freqs.tolist(), self.power.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("freq_hz,power\n")
        for f, pw in zip(self.freqs, self.power):
            buf.write(f"{f:.17g},{pw:.17g}\n")
        return buf.getvalue()


def _pow2_floor(n: int) -> int:
    return 1 << (n.bit_length() - 1)


def power_spectrum(samples: Sequence[float], dt: float, window: str = "rect") -> Spectrum:
    """Periodogram of a uniformly sampled series.

    The series is truncated to its leading power-of-two length. With the
    default rectangular window, ``power.sum() == (x**2).sum()`` on the
    truncated series. ``window="hann"`` is for display only.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise UsageError("power_spectrum needs at least 2 samples")
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt}")
    n = _pow2_floor(len(x))
    x = x[:n]
    if window == "hann":
        x = x * np.hanning(n)
    elif window != "rect":
        raise UsageError(f"unknown window {window!r}")
    X = np.fft.rfft(x)
    p = np.abs(X) ** 2 / n
    # one-sided: fold negative frequencies except DC and Nyquist
    p[1:-1] *= 2.0
    freqs = np.fft.rfftfreq(n, dt)
    return Spectrum(df=1.0 / (n * dt), freqs=freqs, power=p)


def spectral_flatness(s: Spectrum) -> float:
    """Geometric over arithmetic mean of the non-DC bin powers, in [0, 1]."""
    p = s.power[1:]
    if len(p) < 8:
        raise InsufficientDataError(f"spectral flatness needs >= 8 non-DC bins, got {len(p)}")
    am = p.mean()
    if am <= 0:
        return 0.0
    if np.any(p <= 0):
        return 0.0
    gm = math.exp(np.mean(np.log(p)))
    return float(min(max(gm / am, 0.0), 1.0))


def resample(traj: Trajectory, sample_period: float) -> tuple[np.ndarray, float]:
    """Take every k-th v1 sample so the spacing is ``sample_period`` (rounded to whole steps)."""
    k = max(1, int(round(sample_period / traj.dt)))
    return traj.v1[::k], traj.dt * k


@dataclass(frozen=True)
class LyapunovResult:
    exponents: np.ndarray
    history: np.ndarray
    dt: float
    t_total: float
    renorm_interval: float
    trace_mean: float
    last_quarter_spread: np.ndarray

    @property
    def largest(self) -> float:
        return float(self.exponents[0])

    @property
    def sum(self) -> float:
        return float(np.sum(self.exponents))

    def history_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,l1,l2,l3,l4\n")
        for row in self.history:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()


def _spread(history: np.ndarray) -> np.ndarray:
    tail = history[-max(1, len(history) // 4):, 1:]
    return tail.max(axis=0) - tail.min(axis=0)


def lyapunov_spectrum(x0: StateVector, p: CircuitParams, cfg: IntegratorConfig,
                      renorm_interval: Optional[float] = None) -> LyapunovResult:
    """Full Lyapunov spectrum of the cubic/PWL circuit by the Benettin method.

    The transient ``cfg.transient_skip`` is discarded; exponents average over
    the remaining ``t_end - transient_skip`` seconds, truncated to whole
    renormalisation intervals. Default interval is 100 steps.
    """
    if isinstance(p.nonlinearity, GstNonlinearity):
        raise UsageError("Lyapunov spectrum needs the cubic or PWL variant (analytic Jacobian)")
    if renorm_interval is None:
        renorm_interval = 100 * cfg.dt
    if renorm_interval < cfg.dt:
        raise UsageError(f"renorm_interval {renorm_interval} shorter than dt {cfg.dt}")
    renorm = int(round(renorm_interval / cfg.dt))
    n_blocks = (cfg.n_total - cfg.n_skip) // renorm
    if n_blocks < 1:
        raise UsageError("integration window shorter than one renormalisation interval")
    pv, kind = pack_params(p)
    sums, hist, trace_int, _, status, t_fail = _kernels.lyapunov(
        np.array(x0, dtype=float), 0.0, cfg.dt, cfg.n_skip, n_blocks, renorm, pv, kind, BLOWUP_LIMIT
    )
    raise_for_status(status, t_fail)
    t_total = n_blocks * renorm * cfg.dt
    return LyapunovResult(
        exponents=np.sort(sums / t_total)[::-1],
        history=hist,
        dt=cfg.dt,
        t_total=t_total,
        renorm_interval=renorm * cfg.dt,
        trace_mean=trace_int / t_total,
        last_quarter_spread=_spread(hist),
    )


def benettin(f: Callable[[float, np.ndarray], np.ndarray], jac: Callable[[float, np.ndarray], np.ndarray],
             x0: Sequence[float], dt: float, n_steps: int, renorm_every: int = 10, t0: float = 0.0) -> np.ndarray:
    """Generic (slow) Benettin estimate for any flow, used as a cross-check.

    State and tangent vectors are advanced together as one RK4 system.
    Returns exponents sorted descending.
    """
    x = np.asarray(x0, dtype=float)
    n = len(x)

    def aug(t, y):
        xs, q = y[:n], y[n:].reshape(n, n)
        return np.concatenate([f(t, xs), (jac(t, xs) @ q).ravel()])

    y = np.concatenate([x, np.eye(n).ravel()])
    sums = np.zeros(n)
    blocks = n_steps // renorm_every
    t = t0
    for _ in range(blocks):
        for _ in range(renorm_every):
            y = rk4_step(aug, t, y, dt)
            t += dt
        q, r = np.linalg.qr(y[n:].reshape(n, n))
        d = np.diag(r)
        sums += np.log(np.abs(d))
        y[n:] = (q * np.sign(d)).ravel()
    return np.sort(sums / (blocks * renorm_every * dt))[::-1]


COMPONENTS = ("r1", "c1", "c2", "l", "memristor")


def instantaneous_power(traj: Trajectory, p: CircuitParams, component: str) -> np.ndarray:
    """v*i absorbed by one element (passive sign convention), per sample.

    Capacitor currents come from the state derivative, so the reactive
    elements report net stored-energy exchange, which averages to ~0.
    """
    if component not in COMPONENTS:
        raise UsageError(f"unknown component {component!r}; choose from {COMPONENTS}")
    phi, v1, v2, il = traj.phi, traj.v1, traj.v2, traj.i_l
    t = traj.t
    if component == "r1":
        return (v1 - v2) ** 2 / p.r1
    if component == "l":
        return v2 * il
    if component == "c2":
        return v2 * ((v1 - v2) / p.r1 - il)
    vm = v1 - p.drive.amplitude * np.sin(2 * np.pi * p.drive.frequency * t) if p.drive is not None else v1
    nl = p.nonlinearity
    if isinstance(nl, CubicNonlinearity):
        i_m = memductance(phi, nl) * vm
    elif isinstance(nl, GstNonlinearity):
        if traj.aux is None:
            raise UsageError("GST trajectory lacks the (M, W) columns needed for branch current")
        i_m = vm / traj.aux[:, 0] + nl.shunt_conductance * vm
    else:
        i_m = pwl_current(vm, nl)
    if component == "memristor":
        return vm * i_m
    # C1 current = (v2 - v1)/R1 - i_m
    return v1 * ((v2 - v1) / p.r1 - i_m)


def time_average(y: np.ndarray, dt: float) -> float:
    if len(y) < 2:
        return float(y[0])
    return float(np.trapezoid(y, dx=dt) / (dt * (len(y) - 1)))


def average_power(traj: Trajectory, p: CircuitParams, component: str) -> float:
    """Trapezoidal time average of absorbed power over the trajectory, in W."""
    return time_average(instantaneous_power(traj, p, component), traj.dt)


@dataclass(frozen=True)
class LobeStats:
    lobe_a: int
    lobe_b: int
    transitions: int


def lobe_transitions(traj_or_v1, hysteresis: Optional[float] = None) -> LobeStats:
    """Dwell episodes on each side of v1 = 0 and switches between them.

    A sample joins lobe A when v1 > +h and lobe B when v1 < -h; samples in
    the dead band keep the previous classification. Default h is 5% of
    std(v1).
    """
    v = traj_or_v1.v1 if isinstance(traj_or_v1, Trajectory) else np.asarray(traj_or_v1, dtype=float)
    if hysteresis is None:
        hysteresis = 0.05 * float(np.std(v))
    if not hysteresis > 0:
        raise UsageError(f"hysteresis must be positive, got {hysteresis}")
    side = np.zeros(len(v), dtype=np.int8)
    side[v > hysteresis] = 1
    side[v < -hysteresis] = -1
    labelled = side[side != 0]
    if len(labelled) == 0:
        return LobeStats(0, 0, 0)
    starts = np.concatenate([[True], labelled[1:] != labelled[:-1]])
    episodes = labelled[starts]
    return LobeStats(
        lobe_a=int(np.sum(episodes == 1)),
        lobe_b=int(np.sum(episodes == -1)),
        transitions=int(len(episodes) - 1),
    )


@dataclass(frozen=True)
class BomEntry:
    name: str
    width: float
    height: float
    count: int = 1

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise UsageError(f"{self.name}: width and height must be positive")
        if int(self.count) != self.count or self.count < 1:
            raise UsageError(f"{self.name}: count must be a positive integer")


def footprint_area(bom: Iterable[BomEntry]) -> float:
    """Sum of count*width*height in mm^2."""
    bom = list(bom)
    if not bom:
        raise UsageError("empty bill of materials")
    return float(sum(e.count * e.width * e.height for e in bom))


# Part dimensions in mm as quoted for the two nonlinear-element builds.
DIODE_BODY = BomEntry("1N4148 body", 3.4, 1.75)
DIODE_WIRE = BomEntry("1N4148 wire", 25.4, 0.55)
CHIP_RESISTOR = BomEntry("chip resistor", 0.6, 0.3)
CHIP_CAPACITOR = BomEntry("chip capacitor", 0.51, 0.25)
GST_DEVICE = BomEntry("GST device 1x1 um", 1e-3, 1e-3)

ORIGINAL_NONLINEAR_BOM = (
    BomEntry(DIODE_BODY.name, DIODE_BODY.width, DIODE_BODY.height, 2),
    BomEntry(DIODE_WIRE.name, DIODE_WIRE.width, DIODE_WIRE.height, 2),
    BomEntry(CHIP_RESISTOR.name, CHIP_RESISTOR.width, CHIP_RESISTOR.height, 4),
)
EMULATOR_BOM = (
    BomEntry(CHIP_RESISTOR.name, CHIP_RESISTOR.width, CHIP_RESISTOR.height, 3),
    BomEntry(CHIP_CAPACITOR.name, CHIP_CAPACITOR.width, CHIP_CAPACITOR.height, 2),
)
DEVICE_BOM = (GST_DEVICE,)

QUOTED_AREA_MM2 = {"original_nonlinear_resistor": 162.0, "gst_emulator": 1.155, "gst_device": 1e-6}
QUOTED_POWER_MW = {"original": 5.02, "gst_emulator": 4.47, "difference": 0.55}


def area_report() -> dict:
    """Computed BOM sums next to the quoted totals; mismatches are flagged, not fixed."""
    computed = {
        "original_nonlinear_resistor": footprint_area(ORIGINAL_NONLINEAR_BOM),
        "gst_emulator": footprint_area(EMULATOR_BOM),
        "gst_device": footprint_area(DEVICE_BOM),
    }
    out = {}
    for key, value in computed.items():
        quoted = QUOTED_AREA_MM2[key]
        out[key] = {
            "computed_mm2": value,
            "quoted_mm2": quoted,
            "discrepancy": not math.isclose(value, quoted, rel_tol=0.01),
        }
    out["ratio_original_over_emulator"] = {
        "computed": computed["original_nonlinear_resistor"] / computed["gst_emulator"],
        "quoted": 140.0,
    }
    out["ratio_original_over_device"] = {
        "computed": computed["original_nonlinear_resistor"] / computed["gst_device"],
        "quoted": 162000.0,
    }
    return out
