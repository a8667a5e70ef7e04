"""Device models and parameter records for the memristive Chua oscillator.

Three interchangeable nonlinear elements can sit across the first capacitor:

* ``CubicNonlinearity``: flux-controlled memristor, q(phi) = theta*phi + sigma*phi**3.
* ``PwlNonlinearity``: three-segment Chua diode (the diode/resistor variant).
* ``GstNonlinearity``: threshold-type GST memristor with memristance M and
  phase W as extra state, plus the component values of its RC emulator.

Values are SI throughout (ohm, farad, henry, volt, weber, second).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ContractViolation, DomainError, UsageError

__all__ = [
    "EmulatorParams",
    "CubicNonlinearity",
    "PwlNonlinearity",
    "GstParams",
    "GstState",
    "GstNonlinearity",
    "Drive",
    "CircuitParams",
    "Nonlinearity",
    "PHASE_MAPS",
    "memductance",
    "charge",
    "derive_theta",
    "derive_sigma",
    "back_solve_r_c",
    "pwl_current",
    "pwl_slope",
    "gst_f",
    "gst_rates",
    "gst_step",
    "nonlinearity_current",
]


def _check_positive(**values: float) -> None:
    for name, v in values.items():
        if not (math.isfinite(v) and v > 0):
            raise DomainError(f"{name} must be positive and finite, got {v!r}")


def _check_finite(x) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainError(f"non-finite input: {x!r}")


@dataclass(frozen=True)
class EmulatorParams:
    """RC ladder standing in for the GST device: R_s + (R_g || C_g) + (R_gb || C_gb)."""

    r_s: float = 100.0
    r_g: float = 25.9e3
    c_g: float = 5e-12
    r_gb: float = 280.0
    c_gb: float = 30.6e-12

    def __post_init__(self):
        _check_positive(r_s=self.r_s, r_g=self.r_g, c_g=self.c_g, r_gb=self.r_gb, c_gb=self.c_gb)

    @property
    def dc_resistance(self) -> float:
        return self.r_s + self.r_g + self.r_gb


@dataclass(frozen=True)
class CubicNonlinearity:
    theta: float
    sigma: float

    def __post_init__(self):
        _check_finite([self.theta, self.sigma])


@dataclass(frozen=True)
class PwlNonlinearity:
    inner_slope: float = -0.76e-3
    outer_slope: float = -0.41e-3
    breakpoint: float = 1.0

    def __post_init__(self):
        _check_finite([self.inner_slope, self.outer_slope])
        _check_positive(breakpoint=self.breakpoint)


# phi(W) variants for the phase equation; the identity is the default.
PHASE_MAPS = {
    "identity": lambda w, w_t: w,
    "logistic": lambda w, w_t: 1.0 / (1.0 + math.exp(-10.0 * (w - w_t))),
}


@dataclass(frozen=True)
class GstParams:
    """Threshold-memristor constants.

    None of these numbers are measured; the defaults are a plausible
    profile chosen so the device switches at ~1 V between the emulator's
    low-resistance (R_s + R_gb) and high-resistance (DC total) levels.
    """

    alpha: float = 1e4
    beta: float = 1e6
    v_l: float = 1.0
    v_r: float = 1.0
    gamma: float = 1.0
    w_t: float = 0.5
    r_low: float = 380.0
    r_high: float = 26280.0
    phase_map: str = "identity"

    def __post_init__(self):
        _check_finite([self.alpha, self.beta, self.w_t])
        _check_positive(v_l=self.v_l, v_r=self.v_r, gamma=self.gamma, r_low=self.r_low)
        if not self.r_low < self.r_high:
            raise DomainError(f"need r_low < r_high, got {self.r_low} >= {self.r_high}")
        if self.phase_map not in PHASE_MAPS:
            raise UsageError(f"unknown phase_map {self.phase_map!r}; choose from {sorted(PHASE_MAPS)}")


@dataclass(frozen=True)
class GstState:
    m: float
    w: float

    def check(self, p: GstParams) -> None:
        if not (p.r_low <= self.m <= p.r_high) or not math.isfinite(self.w):
            raise ContractViolation(
                f"GST state M={self.m!r} outside [{p.r_low}, {p.r_high}] or bad W={self.w!r}"
            )


@dataclass(frozen=True)
class GstNonlinearity:
    """GST device in the memristor slot.

    ``shunt_conductance`` is an optional linear conductance in parallel with
    the device (use it to place the op-amp negative resistor across it).
    """

    gst: GstParams = field(default_factory=GstParams)
    emulator: EmulatorParams = field(default_factory=EmulatorParams)
    initial: GstState = GstState(m=26280.0, w=0.5)
    shunt_conductance: float = 0.0

    def __post_init__(self):
        self.initial.check(self.gst)
        _check_finite([self.shunt_conductance])


Nonlinearity = Union[CubicNonlinearity, PwlNonlinearity, GstNonlinearity]


@dataclass(frozen=True)
class Drive:
    """Sinusoidal source in series with the memristor branch."""

    amplitude: float = 11.0
    frequency: float = 1e3

    def __post_init__(self):
        _check_finite([self.amplitude])
        _check_positive(frequency=self.frequency)

    def voltage(self, t: float) -> float:
        return self.amplitude * math.sin(2.0 * math.pi * self.frequency * t)


@dataclass(frozen=True)
class CircuitParams:
    r1: float = 2e3
    c1: float = 10e-9
    c2: float = 100e-9
    l: float = 18e-3
    nonlinearity: Nonlinearity = CubicNonlinearity(theta=-4e-4, sigma=1.35e-6)
    drive: Optional[Drive] = None

    def __post_init__(self):
        _check_positive(r1=self.r1, c1=self.c1, c2=self.c2, l=self.l)
        if not isinstance(self.nonlinearity, (CubicNonlinearity, PwlNonlinearity, GstNonlinearity)):
            raise UsageError(f"unsupported nonlinearity {type(self.nonlinearity).__name__}")


def memductance(phi, nl: CubicNonlinearity):
    """W(phi) = dq/dphi = theta + sigma*phi**2."""
    _check_finite(phi)
    return nl.theta + nl.sigma * phi * phi


def charge(phi, nl: CubicNonlinearity):
    """q(phi) = theta*phi + sigma*phi**3.

    Note dq/dphi = theta + 3*sigma*phi**2, which is ``memductance`` with sigma
    tripled; the circuit equations only ever use ``memductance``.
    """
    _check_finite(phi)
    return nl.theta * phi + nl.sigma * phi**3


def derive_theta(r_load: float) -> float:
    """Linear memductance term from the negative-resistor load: -1/R_load."""
    _check_positive(r_load=r_load)
    return -1.0 / r_load


def derive_sigma(r_g: float, r_gb: float, r_load: float, r_c: float) -> float:
    """Cubic memductance coefficient (1/3)(R_g + R_gb)/(R_gb R_load R_c)."""
    _check_positive(r_g=r_g, r_gb=r_gb, r_load=r_load, r_c=r_c)
    return (r_g + r_gb) / (r_gb * r_load * r_c) / 3.0


def back_solve_r_c(sigma: float, r_g: float, r_gb: float, r_load: float) -> float:
    """The R_c that makes ``derive_sigma`` return ``sigma``."""
    _check_positive(sigma=sigma, r_g=r_g, r_gb=r_gb, r_load=r_load)
    return (r_g + r_gb) / (3.0 * r_gb * r_load * sigma)


def pwl_current(v, nl: PwlNonlinearity):
    """Odd three-segment characteristic, continuous at +/-breakpoint."""
    _check_finite(v)
    ga, gb, e = nl.inner_slope, nl.outer_slope, nl.breakpoint
    return gb * v + 0.5 * (ga - gb) * (abs(v + e) - abs(v - e))


def pwl_slope(v: float, nl: PwlNonlinearity) -> float:
    return nl.inner_slope if abs(v) < nl.breakpoint else nl.outer_slope


def gst_f(v: float, p: GstParams) -> float:
    """Threshold rate function f(V); equals -alpha*V for -v_l < V < v_r."""
    _check_finite(v)
    # grouped so that f(0) is exactly 0
    return -p.beta * v + 0.5 * (p.beta - p.alpha) * ((abs(v + p.v_l) - p.v_l) - (abs(v - p.v_r) - p.v_r))


def _step(x: float) -> float:
    # theta(0) = 0 so the gates are closed exactly at the bounds
    return 1.0 if x > 0.0 else 0.0


def gst_rates(state: GstState, v_m: float, p: GstParams) -> tuple[float, float]:
    """(dM/dt, dW/dt) of the GST device at memristor voltage ``v_m``."""
    m, w = state.m, state.w
    gate = _step(v_m) * _step(m / p.r_low - 1.0) + _step(-v_m) * _step(1.0 - m / p.r_high)
    dm = gst_f(v_m, p) * gate * p.gamma * (1.0 + w)
    dw = w * PHASE_MAPS[p.phase_map](w, p.w_t) * (w - p.w_t)
    return dm, dw


def gst_step(state: GstState, v_m: float, dt: float, p: GstParams) -> GstState:
    """Advance (M, W) by one explicit step of length ``dt``.

    M is clamped to [r_low, r_high]; W is treated as a crystalline fraction
    and clamped to [0, 1].
    """
    state.check(p)
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    dm, dw = gst_rates(state, v_m, p)
    m = min(max(state.m + dt * dm, p.r_low), p.r_high)
    w = min(max(state.w + dt * dw, 0.0), 1.0)
    return GstState(m=m, w=w)


def nonlinearity_current(v_or_phi, nl: Nonlinearity, *, v1: Optional[float] = None, state: Optional[GstState] = None) -> float:
    """Current drawn by the nonlinear branch.

    cubic: ``v_or_phi`` is the flux and ``v1`` the branch voltage, i = W(phi)*v1.
    PWL:   ``v_or_phi`` is the branch voltage.
    GST:   ``v_or_phi`` is the branch voltage and ``state`` the device state, i = V/M.
    """
    if isinstance(nl, CubicNonlinearity):
        if v1 is None:
            raise UsageError("cubic nonlinearity needs the branch voltage v1")
        return memductance(v_or_phi, nl) * v1
    if isinstance(nl, PwlNonlinearity):
        if state is not None:
            raise UsageError("PWL nonlinearity takes no device state")
        return pwl_current(v_or_phi, nl)
    if isinstance(nl, GstNonlinearity):
        if state is None:
            raise UsageError("GST nonlinearity needs a GstState")
        _check_finite(v_or_phi)
        return v_or_phi / state.m + nl.shunt_conductance * v_or_phi
    raise UsageError(f"unsupported nonlinearity {type(nl).__name__}")
