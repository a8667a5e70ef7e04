"""Four-state ODE of the memristive Chua circuit and its time integration.

State (phi, v1, v2, i_l):

    dphi/dt = v_m
    dv1/dt  = ((v2 - v1)/R1 - i(t)) / C1
    dv2/dt  = ((v1 - v2)/R1 - i_l) / C2
    di_l/dt = v2 / L

where v_m = v1 (autonomous) or v1 - V_s(t) when a series drive is present,
and i(t) is the nonlinear branch current. The sign of i_l is kept as
written above; the more common convention (+i_l, -v2/L) is the same
flow under i_l -> -i_l.

Cubic and PWL variants are integrated by compiled kernels (``_kernels``);
``rhs``/``jacobian``/``step_rk4`` here are the plain-Python reference and
also drive the GST variant, which carries (M, W) alongside the state.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import _kernels
from .circuit import (
    CircuitParams,
    CubicNonlinearity,
    GstNonlinearity,
    GstState,
    PwlNonlinearity,
    gst_step,
    memductance,
    nonlinearity_current,
    pwl_slope,
)
from .errors import IntegrationFault, UsageError

BLOWUP_LIMIT = 1e9
CSV_HEADER = ("t", "phi", "v1", "v2", "iL")


class StateVector(NamedTuple):
    phi: float
    v1: float
    v2: float
    i_l: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, a) -> "StateVector":
        return cls(*(float(v) for v in a))


ORIGIN = StateVector(0.0, 0.0, 0.0, 0.0)


class Jacobian(NamedTuple):
    matrix: np.ndarray
    finite_difference: bool


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-6
    t_end: float = 0.2
    transient_skip: float = 0.05
    method: str = "rk4"
    record_every: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and self.dt <= self.t_end):
            raise UsageError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        if not (0 <= self.transient_skip < self.t_end):
            raise UsageError(f"need 0 <= transient_skip < t_end, got {self.transient_skip}")
        if self.method != "rk4":
            raise UsageError(f"only the fixed-step 'rk4' method is available, got {self.method!r}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise UsageError(f"record_every must be a positive integer, got {self.record_every!r}")

    @property
    def n_skip(self) -> int:
        return int(round(self.transient_skip / self.dt))

    @property
    def n_total(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def n_samples(self) -> int:
        return (self.n_total - self.n_skip) // self.record_every + 1


@dataclass
class Trajectory:
    """Uniformly sampled run. ``samples`` has one row per record, columns phi, v1, v2, i_l.

    ``aux`` holds the GST (M, W) columns when that variant was integrated.
    ``times`` is kept verbatim when a trajectory is read back from CSV so
    that re-export is byte-identical.
    """

    t0: float
    dt: float
    samples: np.ndarray
    params_digest: str = ""
    aux: Optional[np.ndarray] = None
    times: Optional[np.ndarray] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[1] != 4 or len(self.samples) == 0:
            raise UsageError(f"samples must be a non-empty (n, 4) array, got shape {self.samples.shape}")
        if not self.dt > 0:
            raise UsageError(f"dt must be positive, got {self.dt}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def t(self) -> np.ndarray:
        if self.times is not None:
            return self.times
        return self.t0 + self.dt * np.arange(len(self.samples))

    @property
    def phi(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def v1(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def v2(self) -> np.ndarray:
        return self.samples[:, 2]

    @property
    def i_l(self) -> np.ndarray:
        return self.samples[:, 3]

    @property
    def duration(self) -> float:
        return (len(self.samples) - 1) * self.dt

    def state(self, k: int) -> StateVector:
        return StateVector.from_array(self.samples[k])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_HEADER) + "\n")
        rows = np.column_stack([self.t, self.samples])
        for row in rows:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, params_digest: str = "") -> "Trajectory":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise UsageError(f"expected trajectory header {','.join(CSV_HEADER)}, got {','.join(header)}")
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        if len(data) == 0:
            raise UsageError("trajectory CSV has no rows")
        t = data[:, 0]
        dt = (t[-1] - t[0]) / (len(t) - 1) if len(t) > 1 else 1.0
        return cls(t0=float(t[0]), dt=float(dt), samples=data[:, 1:], params_digest=params_digest, times=t)


def params_digest(p: CircuitParams) -> str:
    return hashlib.sha256(repr(p).encode()).hexdigest()[:16]


def _branch_voltage(t: float, v1: float, p: CircuitParams) -> float:
    return v1 - p.drive.voltage(t) if p.drive is not None else v1


def rhs(t: float, x: StateVector, p: CircuitParams, gst_state: Optional[GstState] = None) -> StateVector:
    """Time derivative of the circuit state."""
    phi, v1, v2, i_l = x
    if not all(math.isfinite(v) for v in x):
        raise IntegrationFault("non-finite state", t)
    vm = _branch_voltage(t, v1, p)
    nl = p.nonlinearity
    if isinstance(nl, CubicNonlinearity):
        i = nonlinearity_current(phi, nl, v1=vm)
    elif isinstance(nl, GstNonlinearity):
        i = nonlinearity_current(vm, nl, state=gst_state if gst_state is not None else nl.initial)
    else:
        i = nonlinearity_current(vm, nl)
    return StateVector(
        vm,
        ((v2 - v1) / p.r1 - i) / p.c1,
        ((v1 - v2) / p.r1 - i_l) / p.c2,
        v2 / p.l,
    )


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, rel_step: float = 1e-6,
                scale: Optional[np.ndarray] = None) -> np.ndarray:
    """Central-difference Jacobian; column j uses step rel_step*scale[j]."""
    x = np.asarray(x, dtype=float)
    if scale is None:
        scale = np.maximum(np.abs(x), 1.0)
    n = len(x)
    out = np.empty((len(f(x)), n))
    for j in range(n):
        h = rel_step * scale[j]
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        out[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2.0 * h)
    return out


def jacobian(x: StateVector, p: CircuitParams, t: float = 0.0,
             gst_state: Optional[GstState] = None) -> Jacobian:
    """Partial derivatives of ``rhs`` with respect to (phi, v1, v2, i_l).

    Analytic for the cubic and PWL variants. The GST variant falls back to
    central differences (with M, W frozen) and sets ``finite_difference``.
    """
    nl = p.nonlinearity
    if isinstance(nl, GstNonlinearity):
        m = fd_jacobian(lambda y: np.array(rhs(t, StateVector.from_array(y), p, gst_state)), np.array(x))
        return Jacobian(m, True)
    phi, v1, _, _ = x
    vm = _branch_voltage(t, v1, p)
    if isinstance(nl, CubicNonlinearity):
        di_dphi = 2.0 * nl.sigma * phi * vm
        di_dv1 = memductance(phi, nl)
    else:
        di_dphi = 0.0
        di_dv1 = pwl_slope(vm, nl)
    r1, c1, c2 = p.r1, p.c1, p.c2
    m = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-di_dphi / c1, (-1.0 / r1 - di_dv1) / c1, 1.0 / (r1 * c1), 0.0],
        [0.0, 1.0 / (r1 * c2), -1.0 / (r1 * c2), -1.0 / c2],
        [0.0, 0.0, 1.0 / p.l, 0.0],
    ])
    return Jacobian(m, False)


def rk4_step(f: Callable[[float, np.ndarray], np.ndarray], t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step for y' = f(t, y)."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(t: float, x: StateVector, dt: float, p: CircuitParams,
             gst_state: Optional[GstState] = None) -> StateVector:
    """Advance the circuit state by ``dt``; the GST device state is held fixed over the step."""
    if not dt > 0:
        raise UsageError(f"dt must be positive, got {dt!r}")
    y = rk4_step(lambda tt, yy: np.array(rhs(tt, StateVector.from_array(yy), p, gst_state)), t, np.array(x, dtype=float), dt)
    if not np.all(np.isfinite(y)):
        raise IntegrationFault("non-finite state", t + dt)
    return StateVector.from_array(y)


def pack_params(p: CircuitParams) -> tuple[np.ndarray, int]:
    """Flatten a cubic/PWL circuit into the kernel parameter layout."""
    nl = p.nonlinearity
    amp, omega = (p.drive.amplitude, 2.0 * math.pi * p.drive.frequency) if p.drive is not None else (0.0, 0.0)
    if isinstance(nl, CubicNonlinearity):
        return np.array([p.r1, p.c1, p.c2, p.l, nl.theta, nl.sigma, 0.0, amp, omega]), _kernels.CUBIC
    if isinstance(nl, PwlNonlinearity):
        return np.array([p.r1, p.c1, p.c2, p.l, nl.inner_slope, nl.outer_slope, nl.breakpoint, amp, omega]), _kernels.PWL
    raise UsageError(f"no compiled kernel for {type(nl).__name__}")


def raise_for_status(status: int, t: float) -> None:
    if status == _kernels.NONFINITE:
        raise IntegrationFault("non-finite state", t)
    if status == _kernels.RUNAWAY:
        raise IntegrationFault(f"state magnitude exceeded {BLOWUP_LIMIT:g}", t)


def integrate(x0: StateVector, p: CircuitParams, cfg: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate from t=0, drop ``transient_skip`` seconds, record every ``record_every`` steps."""
    x0 = StateVector(*x0)
    if not all(math.isfinite(v) for v in x0):
        raise IntegrationFault("non-finite initial state", 0.0)
    every = int(cfg.record_every)
    t_first = cfg.n_skip * cfg.dt
    if isinstance(p.nonlinearity, GstNonlinearity):
        return _integrate_gst(x0, p, cfg)
    pv, kind = pack_params(p)
    out, k, status, t_fail = _kernels.integrate(
        np.array(x0, dtype=float), 0.0, cfg.dt, cfg.n_skip, cfg.n_samples, every, pv, kind, BLOWUP_LIMIT
    )
    raise_for_status(status, t_fail)
    return Trajectory(t0=t_first, dt=cfg.dt * every, samples=out[:k], params_digest=params_digest(p))


def _integrate_gst(x0: StateVector, p: CircuitParams, cfg: IntegratorConfig) -> Trajectory:
    # Lie splitting: RK4 on the circuit with (M, W) frozen, then one gst_step
    # driven by the branch voltage at the end of the step.
    nl = p.nonlinearity
    every = int(cfg.record_every)
    n_skip, n_rec = cfg.n_skip, cfg.n_samples
    last = n_skip + (n_rec - 1) * every
    out = np.empty((n_rec, 4))
    aux = np.empty((n_rec, 2))
    x, g = x0, nl.initial
    k = 0
    for i in range(last + 1):
        if i >= n_skip and (i - n_skip) % every == 0:
            out[k] = x
            aux[k] = (g.m, g.w)
            k += 1
        if i == last:
            break
        t = i * cfg.dt
        x = step_rk4(t, x, cfg.dt, p, g)
        if max(abs(v) for v in x) > BLOWUP_LIMIT:
            raise IntegrationFault(f"state magnitude exceeded {BLOWUP_LIMIT:g}", t + cfg.dt)
        g = gst_step(g, _branch_voltage(t + cfg.dt, x.v1, p), cfg.dt, nl.gst)
    return Trajectory(t0=n_skip * cfg.dt, dt=cfg.dt * every, samples=out, params_digest=params_digest(p), aux=aux)
