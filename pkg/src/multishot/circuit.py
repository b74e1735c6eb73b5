"""Circuit representation, validation, QFT generator and (de)serialization.

Qubit 0 is the least-significant bit of a basis-state index.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


class GateKind(enum.Enum):
    ID = ("id", 1, 0)
    X = ("x", 1, 0)
    Y = ("y", 1, 0)
    Z = ("z", 1, 0)
    H = ("h", 1, 0)
    S = ("s", 1, 0)
    SDG = ("sdg", 1, 0)
    T = ("t", 1, 0)
    TDG = ("tdg", 1, 0)
    P = ("p", 1, 1)
    U = ("u", 1, 3)
    CX = ("cx", 2, 0)
    CP = ("cp", 2, 1)
    SWAP = ("swap", 2, 0)
    MEASURE = ("measure", None, 0)
    RESET = ("reset", None, 0)
    BARRIER = ("barrier", None, 0)

    def __init__(self, label, arity, num_params):
        self.label = label
        # None: variable arity (at least one qubit)
        self.arity = arity
        self.num_params = num_params

    @classmethod
    def from_label(cls, label: str) -> "GateKind":
        try:
            return _BY_LABEL[label.lower()]
        except KeyError:
            raise ValueError(f"unknown gate {label!r}") from None

    @property
    def is_unitary(self) -> bool:
        return self not in (GateKind.MEASURE, GateKind.RESET, GateKind.BARRIER)


_BY_LABEL = {k.label: k for k in GateKind}


@dataclass(frozen=True)
class Condition:
    """Gate fires iff ``(clreg & clbit_mask) == value``."""

    clbit_mask: int
    value: int

    def holds(self, clreg: int) -> bool:
        return (clreg & self.clbit_mask) == self.value


@dataclass(frozen=True)
class Instruction:
    kind: GateKind
    qubits: tuple[int, ...]
    clbits: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    condition: Optional[Condition] = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "clbits", tuple(int(c) for c in self.clbits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    num_clbits: int = 0
    instructions: tuple[Instruction, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))

    def __len__(self):
        return len(self.instructions)

    def append(self, kind: GateKind, qubits, clbits=(), params=(), condition=None) -> "Circuit":
        """Return a new circuit with one more instruction."""
        inst = Instruction(kind, tuple(qubits), tuple(clbits), tuple(params), condition)
        return replace(self, instructions=self.instructions + (inst,))

    def validate(self) -> list[str]:
        return validate(self)


class CircuitError(ValueError):
    pass


def validate(circuit: Circuit) -> list[str]:
    """Return every invariant violation as ``"<what> at instruction <i>"``."""
    out = []
    nq, nc = circuit.num_qubits, circuit.num_clbits
    for i, inst in enumerate(circuit.instructions):
        kind = inst.kind
        if kind.arity is not None and len(inst.qubits) != kind.arity:
            out.append(f"arity mismatch ({kind.label} takes {kind.arity} qubits) at instruction {i}")
        if kind.arity is None and kind is not GateKind.BARRIER and not inst.qubits:
            out.append(f"no qubits at instruction {i}")
        if len(inst.params) != kind.num_params:
            out.append(f"parameter count mismatch at instruction {i}")
        if len(set(inst.qubits)) != len(inst.qubits):
            out.append(f"duplicate qubit at instruction {i}")
        if any(q < 0 or q >= nq for q in inst.qubits):
            out.append(f"qubit out of range at instruction {i}")
        if kind is GateKind.MEASURE:
            if len(inst.clbits) != len(inst.qubits):
                out.append(f"measure needs one clbit per qubit at instruction {i}")
        elif inst.clbits:
            out.append(f"clbits only allowed on measure at instruction {i}")
        if any(c < 0 or c >= nc for c in inst.clbits):
            out.append(f"clbit out of range at instruction {i}")
        cond = inst.condition
        if cond is not None:
            if cond.value & ~cond.clbit_mask:
                out.append(f"condition value outside mask at instruction {i}")
            if cond.clbit_mask < 0 or cond.clbit_mask >> nc:
                out.append(f"condition mask beyond clbits at instruction {i}")
    return out


def check(circuit: Circuit) -> Circuit:
    errors = validate(circuit)
    if errors:
        raise CircuitError("; ".join(errors))
    return circuit


def qft_circuit(n: int) -> Circuit:
    """Quantum Fourier transform on ``n`` qubits (no measurement)."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= 30:
        raise ValueError(f"qft_circuit needs 1 <= n <= 30, got {n!r}")
    insts = []
    for k in range(n - 1, -1, -1):
        insts.append(Instruction(GateKind.H, (k,)))
        for j in range(k):
            insts.append(Instruction(GateKind.CP, (j, k), params=(math.pi / 2 ** (k - j),)))
    for j in range(n // 2):
        insts.append(Instruction(GateKind.SWAP, (j, n - 1 - j)))
    return Circuit(n, 0, tuple(insts))


def measure_all(circuit: Circuit) -> Circuit:
    n = circuit.num_qubits
    measures = tuple(Instruction(GateKind.MEASURE, (k,), (k,)) for k in range(n))
    return Circuit(n, max(circuit.num_clbits, n), circuit.instructions + measures)


# ---------------------------------------------------------------------------
# gate matrices; index convention: qubits[0] is the LSB of the matrix index

_SQ2 = 1 / math.sqrt(2)


def gate_matrix(kind: GateKind, params: Sequence[float] = ()) -> np.ndarray:
    if kind is GateKind.ID:
        return np.eye(2, dtype=complex)
    if kind is GateKind.X:
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if kind is GateKind.Y:
        return np.array([[0, -1j], [1j, 0]], dtype=complex)
    if kind is GateKind.Z:
        return np.array([[1, 0], [0, -1]], dtype=complex)
    if kind is GateKind.H:
        return np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
    if kind is GateKind.S:
        return np.diag([1, 1j])
    if kind is GateKind.SDG:
        return np.diag([1, -1j])
    if kind is GateKind.T:
        return np.diag([1, np.exp(1j * math.pi / 4)])
    if kind is GateKind.TDG:
        return np.diag([1, np.exp(-1j * math.pi / 4)])
    if kind is GateKind.P:
        return np.diag([1, np.exp(1j * params[0])])
    if kind is GateKind.U:
        theta, phi, lam = params
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        return np.array(
            [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]],
            dtype=complex,
        )
    if kind is GateKind.CX:
        # control = qubits[0] (LSB), target = qubits[1]
        m = np.zeros((4, 4), dtype=complex)
        m[0, 0] = m[2, 2] = m[3, 1] = m[1, 3] = 1
        return m
    if kind is GateKind.CP:
        return np.diag([1, 1, 1, np.exp(1j * params[0])])
    if kind is GateKind.SWAP:
        m = np.zeros((4, 4), dtype=complex)
        m[0, 0] = m[3, 3] = m[1, 2] = m[2, 1] = 1
        return m
    raise ValueError(f"{kind.label} has no matrix")


# ---------------------------------------------------------------------------
# serialization


def _fmt_params(params):
    return ",".join(repr(p) for p in params)


def to_text(circuit: Circuit) -> str:
    """Line format: ``GATE q0[,q1] [param,...] [-> c0] [if mask==value]``."""
    lines = [f"qreg {circuit.num_qubits}", f"creg {circuit.num_clbits}"]
    for inst in circuit.instructions:
        parts = [inst.kind.label]
        if inst.qubits:
            parts.append(",".join(map(str, inst.qubits)))
        if inst.params:
            parts.append(_fmt_params(inst.params))
        if inst.clbits:
            parts += ["->", ",".join(map(str, inst.clbits))]
        if inst.condition is not None:
            parts.append(f"if {inst.condition.clbit_mask}=={inst.condition.value}")
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Circuit:
    nq = nc = None
    insts = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        cond = None
        if " if " in f" {line} ":
            line, _, cexpr = line.partition(" if ")
            mask, _, value = cexpr.partition("==")
            cond = Condition(int(mask, 0), int(value, 0))
        clbits: tuple[int, ...] = ()
        if "->" in line:
            line, _, cl = line.partition("->")
            clbits = tuple(int(c) for c in cl.split(","))
        tokens = line.split()
        head = tokens[0].lower()
        if head == "qreg":
            nq = int(tokens[1])
            continue
        if head == "creg":
            nc = int(tokens[1])
            continue
        kind = GateKind.from_label(head)
        qubits = tuple(int(q) for q in tokens[1].split(",")) if len(tokens) > 1 else ()
        params = tuple(float(p) for p in tokens[2].split(",")) if len(tokens) > 2 else ()
        if len(tokens) > 3:
            raise CircuitError(f"line {lineno}: unexpected tokens {tokens[3:]}")
        insts.append(Instruction(kind, qubits, clbits, params, cond))
    if nq is None:
        raise CircuitError("missing 'qreg' line")
    return Circuit(nq, nc or 0, tuple(insts))


def to_json(circuit: Circuit) -> dict:
    return {
        "num_qubits": circuit.num_qubits,
        "num_clbits": circuit.num_clbits,
        "instructions": [
            {
                "kind": inst.kind.label,
                "qubits": list(inst.qubits),
                "clbits": list(inst.clbits),
                "params": list(inst.params),
                "condition": None
                if inst.condition is None
                else {"clbit_mask": inst.condition.clbit_mask, "value": inst.condition.value},
            }
            for inst in circuit.instructions
        ],
    }


def from_json(data) -> Circuit:
    if isinstance(data, str):
        data = json.loads(data)
    insts = []
    for d in data["instructions"]:
        cond = d.get("condition")
        insts.append(
            Instruction(
                GateKind.from_label(d["kind"]),
                tuple(d["qubits"]),
                tuple(d.get("clbits", ())),
                tuple(d.get("params", ())),
                None if cond is None else Condition(cond["clbit_mask"], cond["value"]),
            )
        )
    return Circuit(data["num_qubits"], data.get("num_clbits", 0), tuple(insts))
