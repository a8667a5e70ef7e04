"""Bit extraction from chaotic trajectories and a small statistical test battery.

The battery is the frequency (monobit) and runs tests of NIST SP 800-22
plus lagged serial correlation with a normal-approximation p-value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .dynamics import Trajectory
from .errors import InsufficientDataError, UsageError

DEFAULT_LAGS = (1, 2, 8)


@dataclass(frozen=True)
class BitStream:
    """Unpacked bits (uint8 0/1) plus provenance."""

    bits: np.ndarray
    source_digest: str = ""
    extraction_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=np.uint8)
        if b.ndim != 1 or np.any(b > 1):
            raise UsageError("bits must be a 1-D sequence of 0/1")
        object.__setattr__(self, "bits", b)

    def __len__(self) -> int:
        return len(self.bits)

    @classmethod
    def from_string(cls, s: str, **kw) -> "BitStream":
        return cls(np.array([int(c) for c in s], dtype=np.uint8), **kw)

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def packed(self) -> bytes:
        """MSB-first packing; the final partial byte is zero padded."""
        return np.packbits(self.bits, bitorder="big").tobytes()

    def sidecar(self) -> dict:
        return {"n_bits": len(self), "packing": "msb-first", "source_digest": self.source_digest,
                **self.extraction_meta}

    @classmethod
    def from_packed(cls, data: bytes, n_bits: int, **kw) -> "BitStream":
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="big")[:n_bits]
        return cls(bits, **kw)

    def complement(self) -> "BitStream":
        return BitStream(1 - self.bits, self.source_digest, dict(self.extraction_meta))


def _median_policy(x: np.ndarray) -> np.ndarray:
    # strict '>' so ties (and constant input) map to 0
    return (x > np.median(x)).astype(np.uint8)


def lsb_policy(quantum_fraction: float = 1e-3) -> Callable[[np.ndarray], np.ndarray]:
    """Parity of the sample quantised in steps of quantum_fraction * std."""

    def policy(x: np.ndarray) -> np.ndarray:
        s = float(np.std(x))
        if s == 0:
            return np.zeros(len(x), dtype=np.uint8)
        q = quantum_fraction * s
        return (np.floor(x / q).astype(np.int64) & 1).astype(np.uint8)

    return policy


Policy = Union[str, Callable[[np.ndarray], np.ndarray]]


def _resolve(policy: Policy, quantum_fraction: float) -> tuple[Callable, str]:
    if callable(policy):
        return policy, getattr(policy, "__name__", "custom")
    if policy == "median":
        return _median_policy, "median"
    if policy == "lsb":
        return lsb_policy(quantum_fraction), f"lsb(q={quantum_fraction:g}*std)"
    if policy == "zero":
        return (lambda x: (x > 0).astype(np.uint8)), "zero"
    raise UsageError(f"unknown threshold policy {policy!r}")


def extract_bits(traj: Trajectory, sample_period: float = 1e-4, policy: Policy = "median",
                 quantum_fraction: float = 1e-3) -> BitStream:
    """Sample v1 every ``sample_period`` (after the first sample) and threshold it.

    Yields floor(duration / sample_period) bits. ``policy`` is "median"
    (bit = v > median), "lsb" (parity of a fine quantisation), "zero", or a
    callable mapping the sample array to bits.
    """
    if sample_period < traj.dt * (1 - 1e-9):
        raise UsageError(f"sample_period {sample_period} shorter than trajectory dt {traj.dt}")
    if traj.duration <= 2 * sample_period:
        raise UsageError(
            f"trajectory of {traj.duration:g} s is too short for sample_period {sample_period:g} s"
        )
    k = max(1, int(round(sample_period / traj.dt)))
    n = int(math.floor(traj.duration / sample_period + 1e-9))
    x = traj.v1[k::k][:n]
    fn, name = _resolve(policy, quantum_fraction)
    bits = np.asarray(fn(x), dtype=np.uint8)
    return BitStream(bits, traj.params_digest, {
        "sample_period": k * traj.dt,
        "threshold_policy": name,
        "debiased": False,
    })


def von_neumann_debias(b: BitStream) -> BitStream:
    """Non-overlapping pairs: 01 -> 0, 10 -> 1, 00/11 dropped."""
    x = b.bits[: len(b) // 2 * 2].reshape(-1, 2)
    keep = x[:, 0] != x[:, 1]
    meta = dict(b.extraction_meta)
    meta["debiased"] = True
    return BitStream(x[keep, 0].copy(), b.source_digest, meta)


def _require(b: BitStream, min_bits: int) -> int:
    n = len(b)
    if n < min_bits:
        raise InsufficientDataError(f"need at least {min_bits} bits, got {n}")
    return n


def monobit_test(b: BitStream, min_bits: int = 100) -> tuple[float, float]:
    """Frequency test: S = sum(2b - 1), p = erfc(|S| / sqrt(2n))."""
    n = _require(b, min_bits)
    s = float(2 * int(b.bits.sum()) - n)
    return s, math.erfc(abs(s) / math.sqrt(2.0 * n))


class PrerequisiteFailed(InsufficientDataError):
    pass


def runs_test(b: BitStream, min_bits: int = 100) -> tuple[float, float]:
    """Runs test: V = number of runs, p = erfc(|V - 2n pi(1-pi)| / (2 sqrt(2n) pi(1-pi))).

    Raises ``PrerequisiteFailed`` when the ones proportion is too far from 1/2
    for the test to apply.
    """
    n = _require(b, min_bits)
    pi = float(b.bits.mean())
    if abs(pi - 0.5) >= 2.0 / math.sqrt(n):
        raise PrerequisiteFailed(f"ones proportion {pi:.4f} fails the runs-test prerequisite")
    v = 1 + int(np.count_nonzero(b.bits[1:] != b.bits[:-1]))
    num = abs(v - 2.0 * n * pi * (1.0 - pi))
    den = 2.0 * math.sqrt(2.0 * n) * pi * (1.0 - pi)
    return float(v), math.erfc(num / den)


@dataclass(frozen=True)
class Correlation:
    value: float
    p_value: float
    n_pairs: int
    degenerate: bool = False


def serial_correlation(b: BitStream, lag: int) -> Correlation:
    """Pearson correlation of the stream with itself shifted by ``lag``.

    p-value uses r*sqrt(n_pairs) ~ N(0, 1). A constant stream (or constant
    shifted copy) has undefined correlation: reported as 0 with
    ``degenerate`` set and p = 0.
    """
    n = len(b)
    if lag < 0 or n <= lag + 1:
        raise InsufficientDataError(f"need more than lag+1={lag + 1} bits, got {n}")
    x = b.bits.astype(float)
    a, c = x[: n - lag], x[lag:]
    sa, sc = a.std(), c.std()
    m = len(a)
    if sa == 0 or sc == 0:
        return Correlation(0.0, 0.0, m, True)
    r = float(np.mean((a - a.mean()) * (c - c.mean())) / (sa * sc))
    r = max(-1.0, min(1.0, r))
    return Correlation(r, math.erfc(abs(r) * math.sqrt(m) / math.sqrt(2.0)), m)


@dataclass(frozen=True)
class TestRecord:
    name: str
    statistic: float
    p_value: float
    passed: bool
    note: str = ""


@dataclass(frozen=True)
class RandomnessReport:
    n_bits: int
    alpha: float
    tests: tuple

    @property
    def all_passed(self) -> bool:
        return all(t.passed for t in self.tests)

    def __getitem__(self, name: str) -> TestRecord:
        for t in self.tests:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "n_bits": self.n_bits,
            "alpha": self.alpha,
            "all_passed": self.all_passed,
            "tests": [
                {"name": t.name, "statistic": t.statistic, "p_value": t.p_value, "pass": t.passed, "note": t.note}
                for t in self.tests
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def evaluate(b: BitStream, alpha: float = 0.01, lags=DEFAULT_LAGS) -> RandomnessReport:
    """Run the battery; a failing prerequisite or too-short input fails that test only."""
    if not 0 < alpha < 1:
        raise UsageError(f"alpha must lie in (0, 1), got {alpha}")
    records = []

    def record(name, fn):
        try:
            stat, p = fn()
            records.append(TestRecord(name, float(stat), float(p), p >= alpha))
        except InsufficientDataError as exc:
            records.append(TestRecord(name, float("nan"), 0.0, False, str(exc)))

    record("monobit", lambda: monobit_test(b))
    record("runs", lambda: runs_test(b))
    for lag in lags:
        def corr(lag=lag):
            _require(b, 100)
            c = serial_correlation(b, lag)
            if c.degenerate:
                raise InsufficientDataError("constant sequence: correlation undefined")
            return c.value, c.p_value
        record(f"serial_correlation_lag{lag}", corr)
    return RandomnessReport(len(b), alpha, tuple(records))
