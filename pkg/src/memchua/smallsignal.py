"""Closed-form small-signal results and a small complex MNA solver to check them.

Negative resistor: an op-amp with positive feedback through R_plus and a
feedback divider R_minus (output to inverting input) over R_load
(inverting input to ground). Its input looks like -R_plus*R_load/R_minus.

The op-amp small-signal model is a VCVS of gain A behind r_out, with r_in
across the inputs (omitted when infinite).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .circuit import EmulatorParams
from .errors import DomainError, IllPosedNetworkError, SingularityError, UsageError

GROUND = "0"


@dataclass(frozen=True)
class NegResistorParams:
    r_plus: float = 250.0
    r_minus: float = 230.0
    r_load: float = 2500.0
    gain_a: float = 1e5
    r_out_internal: float = 75.0
    r_in_internal: float = math.inf

    def __post_init__(self):
        for name in ("r_plus", "r_minus", "r_load", "gain_a", "r_in_internal"):
            v = getattr(self, name)
            if not v > 0:
                raise DomainError(f"{name} must be positive, got {v!r}")
        if not self.r_out_internal >= 0:
            raise DomainError(f"r_out_internal must be >= 0, got {self.r_out_internal!r}")


def emulator_impedance(omega: float, e: EmulatorParams) -> complex:
    """R_s + R_g/(1 + j w R_g C_g) + R_gb/(1 + j w R_gb C_gb)."""
    if not omega >= 0:
        raise DomainError(f"omega must be >= 0, got {omega!r}")
    return e.r_s + e.r_g / (1 + 1j * omega * e.r_g * e.c_g) + e.r_gb / (1 + 1j * omega * e.r_gb * e.c_gb)


def nr_input_current(v_s: float, p: NegResistorParams) -> float:
    """Current delivered by the source into R_plus (ideal op-amp)."""
    return -v_s * p.r_minus / (p.r_plus * p.r_load)


def nr_input_resistance(p: NegResistorParams) -> float:
    return -p.r_plus * p.r_load / p.r_minus


def nr_open_loop_vout(v_s: float, p: NegResistorParams) -> float:
    """Ideal op-amp output, V_s (1 + R_minus/R_load)."""
    return v_s * (1.0 + p.r_minus / p.r_load)


def nr_open_circuit_vout(v_s: float, p: NegResistorParams) -> float:
    """Finite-gain open-circuit output A V_s (R_load + R_minus) / (R_load (1 - A) + R_minus + r_out)."""
    den = p.r_load * (1.0 - p.gain_a) + p.r_minus + p.r_out_internal
    scale = p.r_load * (1.0 + abs(p.gain_a)) + p.r_minus + p.r_out_internal
    if abs(den) <= 1e-12 * scale:
        raise SingularityError("open-circuit output: R_load(1-A) + R_minus + r_out = 0")
    return p.gain_a * v_s * (p.r_load + p.r_minus) / den


def nr_short_circuit_current(v_s: float, p: NegResistorParams) -> float:
    if not p.r_out_internal > 0:
        raise SingularityError("short-circuit current is unbounded for r_out = 0")
    return v_s * (p.gain_a / p.r_out_internal + 1.0 / p.r_plus)


def nr_output_resistance_full(p: NegResistorParams) -> float:
    """V_oc / i_sc with V_s cancelled."""
    return nr_open_circuit_vout(1.0, p) / nr_short_circuit_current(1.0, p)


def nr_output_resistance_approx(p: NegResistorParams) -> float:
    """Large-gain limit -(R_load + R_minus) r_out R_plus / (A R_plus R_load)."""
    return -(p.r_load + p.r_minus) * p.r_out_internal * p.r_plus / (p.gain_a * p.r_plus * p.r_load)


# ---------------------------------------------------------------------------
# Modified nodal analysis


@dataclass(frozen=True)
class Element:
    """One network element.

    kind: "R", "C", "V" (independent voltage source), "I" (current source
    from nodes[0] to nodes[1] through the source) or "E" (VCVS with nodes
    (out+, out-, ctrl+, ctrl-) and ``value`` = gain).
    """

    kind: str
    name: str
    nodes: tuple
    value: complex

    def __post_init__(self):
        expected = {"R": 2, "C": 2, "V": 2, "I": 2, "E": 4}
        if self.kind not in expected:
            raise UsageError(f"unknown element kind {self.kind!r}")
        if len(self.nodes) != expected[self.kind]:
            raise UsageError(f"{self.name}: {self.kind} needs {expected[self.kind]} nodes")
        if self.kind in ("R", "C") and not self.value.real > 0:
            raise UsageError(f"{self.name}: value must be positive")


@dataclass
class LinearNetwork:
    elements: list = field(default_factory=list)
    ground: str = GROUND

    def add(self, kind: str, name: str, *nodes, value) -> "LinearNetwork":
        if any(e.name == name for e in self.elements):
            raise UsageError(f"duplicate element name {name!r}")
        self.elements.append(Element(kind, name, tuple(str(n) for n in nodes), value))
        return self

    def resistor(self, name, a, b, r):
        return self.add("R", name, a, b, value=r)

    def capacitor(self, name, a, b, c):
        return self.add("C", name, a, b, value=c)

    def vsource(self, name, plus, minus, v):
        return self.add("V", name, plus, minus, value=v)

    def isource(self, name, frm, to, i):
        return self.add("I", name, frm, to, value=i)

    def vcvs(self, name, out_p, out_m, ctrl_p, ctrl_m, gain):
        return self.add("E", name, out_p, out_m, ctrl_p, ctrl_m, value=gain)

    @property
    def nodes(self) -> list[str]:
        seen = []
        for e in self.elements:
            for n in e.nodes:
                if n != self.ground and n not in seen:
                    seen.append(n)
        return seen

    def check_connected(self) -> None:
        """Every node must reach ground through element branches (VCVS control pins excluded)."""
        parent = {n: n for n in self.nodes + [self.ground]}

        def find(n):
            while parent[n] != n:
                parent[n] = parent[parent[n]]
                n = parent[n]
            return n

        for e in self.elements:
            a, b = e.nodes[0], e.nodes[1]
            parent[find(a)] = find(b)
        floating = [n for n in self.nodes if find(n) != find(self.ground)]
        if floating:
            raise IllPosedNetworkError(f"nodes not connected to ground: {floating}")


@dataclass(frozen=True)
class MnaSolution:
    voltages: dict
    currents: dict

    def v(self, node: str) -> complex:
        return 0j if node == GROUND else self.voltages[node]

    def delivered(self, source: str) -> complex:
        """Current a voltage source pushes out of its + terminal into the network."""
        return -self.currents[source]


def mna_solve(net: LinearNetwork, omega: float = 0.0) -> MnaSolution:
    """Solve the network at angular frequency ``omega`` (0 = DC).

    Unknowns are the non-ground node voltages followed by one branch
    current per voltage-defined element (V and E), taken as the current
    entering the element at its + terminal.
    """
    net.check_connected()
    nodes = net.nodes
    idx = {n: i for i, n in enumerate(nodes)}
    branches = [e for e in net.elements if e.kind in ("V", "E")]
    nn, nb = len(nodes), len(branches)
    a = np.zeros((nn + nb, nn + nb), dtype=complex)
    z = np.zeros(nn + nb, dtype=complex)

    def stamp_y(n1, n2, y):
        i, j = idx.get(n1), idx.get(n2)
        if i is not None:
            a[i, i] += y
        if j is not None:
            a[j, j] += y
        if i is not None and j is not None:
            a[i, j] -= y
            a[j, i] -= y

    for e in net.elements:
        if e.kind == "R":
            stamp_y(*e.nodes, 1.0 / e.value)
        elif e.kind == "C":
            stamp_y(*e.nodes, 1j * omega * e.value)
        elif e.kind == "I":
            i, j = idx.get(e.nodes[0]), idx.get(e.nodes[1])
            if i is not None:
                z[i] -= e.value
            if j is not None:
                z[j] += e.value
    for k, e in enumerate(branches):
        row = nn + k
        p, m = idx.get(e.nodes[0]), idx.get(e.nodes[1])
        if p is not None:
            a[p, row] += 1.0
            a[row, p] += 1.0
        if m is not None:
            a[m, row] -= 1.0
            a[row, m] -= 1.0
        if e.kind == "V":
            z[row] = e.value
        else:
            cp, cm = idx.get(e.nodes[2]), idx.get(e.nodes[3])
            if cp is not None:
                a[row, cp] -= e.value
            if cm is not None:
                a[row, cm] += e.value
    # equilibrate before the conditioning test: gains of 1e9 next to
    # millisiemens conductances are badly scaled, not singular
    r = 1.0 / np.maximum(np.abs(a).max(axis=1), 1e-300)
    c = 1.0 / np.maximum(np.abs(a * r[:, None]).max(axis=0), 1e-300)
    scaled = a * r[:, None] * c[None, :]
    if not np.isfinite(scaled).all() or np.linalg.cond(scaled) > 1e-2 / np.finfo(float).eps:
        raise IllPosedNetworkError("MNA matrix is singular")
    try:
        y = np.linalg.solve(scaled, z * r)
    except np.linalg.LinAlgError as exc:
        raise IllPosedNetworkError(f"MNA matrix is singular: {exc}") from exc
    x = y * c
    return MnaSolution(
        voltages={n: complex(x[idx[n]]) for n in nodes},
        currents={e.name: complex(x[nn + k]) for k, e in enumerate(branches)},
    )


def _op_amp(net: LinearNetwork, out: str, plus: str, minus: str, p: NegResistorParams) -> None:
    if p.r_out_internal > 0:
        net.vcvs("A", "opx", GROUND, plus, minus, p.gain_a)
        net.resistor("r_out", "opx", out, p.r_out_internal)
    else:
        net.vcvs("A", out, GROUND, plus, minus, p.gain_a)
    if math.isfinite(p.r_in_internal):
        net.resistor("r_in", plus, minus, p.r_in_internal)


def emulator_network(e: EmulatorParams, v: complex = 1.0) -> LinearNetwork:
    net = LinearNetwork()
    net.vsource("vin", "in", GROUND, v)
    net.resistor("R_s", "in", "a", e.r_s)
    net.resistor("R_g", "a", "b", e.r_g)
    net.capacitor("C_g", "a", "b", e.c_g)
    net.resistor("R_gb", "b", GROUND, e.r_gb)
    net.capacitor("C_gb", "b", GROUND, e.c_gb)
    return net


def mna_emulator_impedance(omega: float, e: EmulatorParams) -> complex:
    sol = mna_solve(emulator_network(e), omega)
    return 1.0 / sol.delivered("vin")


def negative_resistor_network(p: NegResistorParams, v_s: float = 1.0) -> LinearNetwork:
    """Source at the non-inverting input, R_plus to the output, R_minus/R_load divider."""
    net = LinearNetwork()
    net.vsource("vs", "pos", GROUND, v_s)
    net.resistor("R_plus", "pos", "out", p.r_plus)
    net.resistor("R_minus", "out", "neg", p.r_minus)
    net.resistor("R_load", "neg", GROUND, p.r_load)
    _op_amp(net, "out", "pos", "neg", p)
    return net


def open_circuit_network(p: NegResistorParams, v_s: float = 1.0) -> LinearNetwork:
    """Network behind the finite-gain open-circuit output formula.

    The source sits between the output and the non-inverting input
    (V+ = V_out + V_s, R_plus across it) and the divider is R_load on top,
    R_minus to ground, so the output node sees only r_out and the divider.
    """
    net = LinearNetwork()
    net.vsource("vs", "pos", "out", v_s)
    net.resistor("R_plus", "pos", "out", p.r_plus)
    net.resistor("R_load", "out", "neg", p.r_load)
    net.resistor("R_minus", "neg", GROUND, p.r_minus)
    _op_amp(net, "out", "pos", "neg", p)
    return net


def short_circuit_network(p: NegResistorParams, v_s: float = 1.0) -> LinearNetwork:
    """Negative-resistor network with the output tied to ground through a 0 V ammeter."""
    net = negative_resistor_network(p, v_s)
    net.vsource("short", "out", GROUND, 0.0)
    return net


def mna_negative_resistor(p: NegResistorParams, v_s: float = 1.0) -> dict:
    """MNA counterparts of every closed form above."""
    sol = mna_solve(negative_resistor_network(p, v_s))
    i_in = sol.delivered("vs").real
    out = {
        "input_current": i_in,
        "input_resistance": v_s / i_in,
        "vout": sol.v("out").real,
    }
    oc = mna_solve(open_circuit_network(p, v_s))
    out["open_circuit_vout"] = oc.v("out").real
    if p.r_out_internal > 0:
        sc = mna_solve(short_circuit_network(p, v_s))
        # current entering the ammeter's + terminal flows from the output to ground
        out["short_circuit_current"] = sc.currents["short"].real
        out["output_resistance"] = out["open_circuit_vout"] / out["short_circuit_current"]
    return out


def thevenin_output_resistance(p: NegResistorParams) -> float:
    """Output resistance of the physical network with the source held (informational)."""
    oc = mna_solve(negative_resistor_network(p, 1.0)).v("out").real
    if not p.r_out_internal > 0:
        return 0.0
    isc = mna_solve(short_circuit_network(p, 1.0)).currents["short"].real
    return oc / isc


def impedance_sweep(e: EmulatorParams, freqs: Iterable[float]) -> np.ndarray:
    """Rows of (freq_hz, re, im, |Z|, phase_deg)."""
    rows = []
    for f in freqs:
        z = emulator_impedance(2.0 * math.pi * f, e)
        rows.append((f, z.real, z.imag, abs(z), math.degrees(math.atan2(z.imag, z.real))))
    return np.array(rows)


def sweep_csv(rows: np.ndarray) -> str:
    buf = io.StringIO()
    buf.write("freq_hz,re_ohm,im_ohm,mag_ohm,phase_deg\n")
    for r in rows:
        buf.write(",".join(f"{v:.17g}" for v in r) + "\n")
    return buf.getvalue()


def log_frequencies(f_start: float, f_stop: float, points_per_decade: int, include_dc: bool = True) -> list[float]:
    if not (0 < f_start < f_stop):
        raise UsageError("need 0 < f_start < f_stop")
    n = int(round(math.log10(f_stop / f_start) * points_per_decade)) + 1
    freqs = [float(f) for f in np.logspace(math.log10(f_start), math.log10(f_stop), n)]
    return ([0.0] if include_dc else []) + freqs


def relative_error(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a - b)


def crosscheck(p: NegResistorParams, e: EmulatorParams, omegas: Optional[Iterable[float]] = None) -> dict:
    """Closed form vs MNA for every small-signal quantity, with relative deltas."""
    mna = mna_negative_resistor(p)
    closed = {
        "input_current": nr_input_current(1.0, p),
        "input_resistance": nr_input_resistance(p),
        "vout": nr_open_loop_vout(1.0, p),
        "open_circuit_vout": nr_open_circuit_vout(1.0, p),
    }
    if p.r_out_internal > 0:
        closed["short_circuit_current"] = nr_short_circuit_current(1.0, p)
        closed["output_resistance"] = nr_output_resistance_full(p)
    report = {
        k: {"formula": closed[k], "mna": mna[k], "rel_error": relative_error(closed[k], mna[k])}
        for k in closed
    }
    for w in (omegas if omegas is not None else (0.0, 2 * math.pi * 1e3, 2 * math.pi * 1e6, 2 * math.pi * 1e9)):
        zf, zm = emulator_impedance(w, e), mna_emulator_impedance(w, e)
        report[f"emulator_impedance@{w:.6g}rad/s"] = {
            "formula": [zf.real, zf.imag],
            "mna": [zm.real, zm.imag],
            "rel_error": abs(zf - zm) / abs(zm),
        }
    return report
