"""Pauli and Kraus error channels, noise models and circuit instrumentation."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Optional, Sequence, Union

import numpy as np

from .circuit import Circuit, Condition, GateKind, check, gate_matrix
from .statevector import PauliMasks

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": gate_matrix(GateKind.X),
    "Y": gate_matrix(GateKind.Y),
    "Z": gate_matrix(GateKind.Z),
}


class NoiseConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PauliString:
    """Letters over ``targets``; ``letters[j]`` acts on ``targets[j]``."""

    letters: str
    targets: tuple[int, ...] = None

    def __post_init__(self):
        letters = self.letters.upper()
        object.__setattr__(self, "letters", letters)
        if self.targets is None:
            object.__setattr__(self, "targets", tuple(range(len(letters))))
        else:
            object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != len(letters):
            raise ValueError("one target per letter required")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("Pauli targets must be distinct")
        if set(letters) - set("IXYZ"):
            raise ValueError(f"bad Pauli letters {letters!r}")

    @property
    def is_identity(self) -> bool:
        return set(self.letters) <= {"I"}

    def matrix(self) -> np.ndarray:
        """Dense matrix over the targets, ``targets[0]`` as least-significant."""
        return reduce(np.kron, [_PAULI[c] for c in reversed(self.letters)], np.eye(1, dtype=complex))


def pauli_to_masks(pauli: PauliString, qubits: Optional[Sequence[int]] = None) -> PauliMasks:
    """Bit masks for the fused kernel; ``qubits`` relabels local targets."""
    x = z = ny = 0
    for letter, t in zip(pauli.letters, pauli.targets):
        q = qubits[t] if qubits is not None else t
        if letter in "XY":
            x |= 1 << q
        if letter in "ZY":
            z |= 1 << q
        if letter == "Y":
            ny += 1
    return PauliMasks(x, z, ny)


@dataclass(frozen=True)
class PauliError:
    """Cumulative table of ``(cumulative_prob, PauliString)`` terms."""

    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((float(c), p) for c, p in self.terms))
        if not self.terms:
            raise ValueError("PauliError needs at least one term")
        cums = [c for c, _ in self.terms]
        if any(b <= a for a, b in zip(cums, cums[1:])) or cums[0] <= 0:
            raise ValueError("cumulative probabilities must be strictly increasing and positive")
        if abs(cums[-1] - 1.0) > 1e-12:
            raise ValueError(f"final cumulative probability {cums[-1]} != 1")
        k = {len(p.letters) for _, p in self.terms}
        if len(k) != 1:
            raise ValueError("all Pauli strings must act on the same number of qubits")

    @classmethod
    def from_probs(cls, pairs: Sequence[tuple[float, Union[str, PauliString]]]) -> "PauliError":
        """Build from individual probabilities; zero-probability terms are dropped."""
        cum = 0.0
        terms = []
        for p, s in pairs:
            if p < 0:
                raise ValueError("negative probability")
            if p == 0:
                continue
            cum += p
            terms.append((cum, s if isinstance(s, PauliString) else PauliString(s)))
        if terms and abs(cum - 1.0) <= 1e-12:
            terms[-1] = (1.0, terms[-1][1])
        return cls(tuple(terms))

    @property
    def num_qubits(self) -> int:
        return len(self.terms[0][1].letters)

    @cached_property
    def probs(self) -> np.ndarray:
        return np.diff(self.cumulative, prepend=0.0)

    @cached_property
    def cumulative(self) -> np.ndarray:
        return np.array([c for c, _ in self.terms])

    @property
    def paulis(self) -> list[PauliString]:
        return [p for _, p in self.terms]


def sample_pauli(error: PauliError, u: float) -> PauliString:
    """First term whose cumulative probability exceeds ``u``."""
    for cum, pauli in error.terms:
        if u < cum:
            return pauli
    return error.terms[-1][1]


def bit_flip_error(p: float) -> PauliError:
    """``X`` with probability ``p``, identity otherwise."""
    if not 0 <= p <= 1:
        raise ValueError(f"bit-flip probability must be in [0, 1], got {p}")
    return PauliError.from_probs([(1 - p, "I"), (p, "X")])


def depolarizing_error(p: float, k: int = 1) -> PauliError:
    """Depolarizing channel as a Pauli mixture: each non-identity string gets ``p / 4**k``."""
    if not 0 <= p <= 1:
        raise ValueError(f"depolarizing probability must be in [0, 1], got {p}")
    if k not in (1, 2):
        raise ValueError("only 1- and 2-qubit depolarizing errors are supported")
    dim = 4**k
    pairs = [(1 - p * (dim - 1) / dim, "I" * k)]
    for letters in itertools.product("IXYZ", repeat=k):
        s = "".join(letters)
        if s != "I" * k:
            pairs.append((p / dim, s))
    return PauliError.from_probs(pairs)


@dataclass(frozen=True, eq=False)
class KrausError:
    matrices: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(np.array(m, dtype=np.complex128) for m in self.matrices)
        object.__setattr__(self, "matrices", mats)
        if not mats:
            raise ValueError("KrausError needs at least one matrix")
        d = mats[0].shape[0]
        if d & (d - 1) or any(m.shape != (d, d) for m in mats):
            raise ValueError("Kraus matrices must share one square power-of-two shape")
        total = sum(m.conj().T @ m for m in mats)
        if not np.allclose(total, np.eye(d), atol=1e-10, rtol=0):
            raise ValueError("Kraus matrices violate completeness")

    @property
    def num_qubits(self) -> int:
        return self.matrices[0].shape[0].bit_length() - 1

    @cached_property
    def stack(self) -> np.ndarray:
        return np.ascontiguousarray(np.stack(self.matrices))


def pauli_as_kraus(error: PauliError) -> KrausError:
    return KrausError(tuple(np.sqrt(p) * s.matrix() for p, s in zip(error.probs, error.paulis)))


Channel = Union[PauliError, KrausError]


@dataclass(frozen=True, eq=False)
class NoiseRule:
    gates: frozenset
    channel: Channel

    def __post_init__(self):
        object.__setattr__(self, "gates", frozenset(self.gates))


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Channels attached after every gate whose kind appears in a rule."""

    rules: tuple[NoiseRule, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        seen = set()
        for rule in self.rules:
            for g in rule.gates:
                if g in seen:
                    raise NoiseConfigError(f"gate {g.label} appears in two rules")
                if not g.is_unitary:
                    raise NoiseConfigError(f"cannot attach noise to {g.label}")
                if g.arity != rule.channel.num_qubits:
                    raise NoiseConfigError(
                        f"{rule.channel.num_qubits}-qubit channel attached to {g.arity}-qubit gate {g.label}"
                    )
                seen.add(g)

    def channel_for(self, kind: GateKind) -> Optional[Channel]:
        for rule in self.rules:
            if kind in rule.gates:
                return rule.channel
        return None


ONE_QUBIT_NOISY = frozenset({GateKind.U, GateKind.P, GateKind.X, GateKind.H})
TWO_QUBIT_NOISY = frozenset({GateKind.CX, GateKind.CP, GateKind.SWAP})


def depolarizing_model(p: float, kraus: bool = False) -> NoiseModel:
    """Depolarizing noise on u/p/x/h (1-qubit) and cx/cp/swap (2-qubit)."""
    e1, e2 = depolarizing_error(p, 1), depolarizing_error(p, 2)
    if kraus:
        e1, e2 = pauli_as_kraus(e1), pauli_as_kraus(e2)
    return NoiseModel((NoiseRule(ONE_QUBIT_NOISY, e1), NoiseRule(TWO_QUBIT_NOISY, e2)))


# ---------------------------------------------------------------------------
# JSON


def _channel_to_json(ch: Channel) -> dict:
    if isinstance(ch, PauliError):
        return {"type": "pauli", "terms": [[float(p), s.letters] for p, s in zip(ch.probs, ch.paulis)]}
    return {
        "type": "kraus",
        "matrices": [[[[float(z.real), float(z.imag)] for z in row] for row in m] for m in ch.matrices],
    }


def _channel_from_json(d: dict) -> Channel:
    kind = d.get("type")
    if kind == "pauli":
        return PauliError.from_probs([(p, s) for p, s in d["terms"]])
    if kind == "kraus":
        return KrausError(tuple(np.array([[complex(re, im) for re, im in row] for row in m]) for m in d["matrices"]))
    raise NoiseConfigError(f"unknown channel type {kind!r}")


def noise_model_to_json(model: NoiseModel) -> dict:
    return {
        "rules": [
            {
                "gates": sorted(g.label for g in rule.gates),
                "arity": rule.channel.num_qubits,
                "channel": _channel_to_json(rule.channel),
            }
            for rule in model.rules
        ]
    }


def noise_model_from_json(data) -> NoiseModel:
    if isinstance(data, str):
        data = json.loads(data)
    rules = []
    for r in data.get("rules", []):
        ch = _channel_from_json(r["channel"])
        if "arity" in r and r["arity"] != ch.num_qubits:
            raise NoiseConfigError(f"rule arity {r['arity']} does not match channel")
        rules.append(NoiseRule(frozenset(GateKind.from_label(g) for g in r["gates"]), ch))
    return NoiseModel(tuple(rules))


# ---------------------------------------------------------------------------
# instrumented program


@dataclass(frozen=True, eq=False)
class Op:
    """One step of an instrumented program.

    ``kind`` is one of ``gate``, ``pauli``, ``kraus``, ``measure``, ``reset``,
    ``barrier``. Randomness-consuming ops carry their RNG ``event`` index.
    """

    kind: str
    qubits: tuple[int, ...]
    clbits: tuple[int, ...] = ()
    matrix: Optional[np.ndarray] = None
    channel: Optional[Channel] = None
    condition: Optional[Condition] = None
    event: Optional[int] = None
    source: int = -1

    @cached_property
    def qubit_array(self) -> np.ndarray:
        return np.array(self.qubits, dtype=np.int64)

    @cached_property
    def pauli_table(self):
        """Per-term ``(x_mask, z_mask, num_y)`` arrays over the site's qubits."""
        masks = [pauli_to_masks(p, self.qubits) for p in self.channel.paulis]
        return (
            np.array([m.x_mask for m in masks], dtype=np.int64),
            np.array([m.z_mask for m in masks], dtype=np.int64),
            np.array([m.num_y for m in masks], dtype=np.int64),
            np.array([m.is_identity for m in masks]),
        )


@dataclass(frozen=True, eq=False)
class NoisyCircuit:
    num_qubits: int
    num_clbits: int
    ops: tuple[Op, ...]
    num_events: int
    noise_sites: int
    has_measure: bool
    # index of the first op of the terminal-sampling tail, or None
    terminal_start: Optional[int] = None
    terminal_qubits: tuple[int, ...] = ()
    terminal_clbits: tuple[int, ...] = ()
    circuit: Optional[Circuit] = field(default=None, repr=False)

    @property
    def sampling_event(self) -> int:
        """Reserved event index for terminal sampling."""
        return self.num_events

    @property
    def terminal_sampling(self) -> bool:
        return self.terminal_start is not None

    @property
    def body(self) -> tuple[Op, ...]:
        """Ops executed op-by-op (everything before the terminal tail)."""
        return self.ops if self.terminal_start is None else self.ops[: self.terminal_start]


def _terminal_tail(ops: Sequence[Op]):
    """Start of a trailing run of unconditional MEASUREs on distinct qubits."""
    start = len(ops)
    while start > 0 and ops[start - 1].kind in ("measure", "barrier"):
        start -= 1
    tail = [op for op in ops[start:] if op.kind == "measure"]
    if not tail:
        return None, (), ()
    if any(op.condition is not None for op in tail):
        return None, (), ()
    if any(op.kind == "measure" for op in ops[:start]):
        return None, (), ()
    qubits = tuple(q for op in tail for q in op.qubits)
    if len(set(qubits)) != len(qubits):
        return None, (), ()
    return start, qubits, tuple(c for op in tail for c in op.clbits)


def instrument(circuit: Circuit, model: Optional[NoiseModel] = None) -> NoisyCircuit:
    """Insert a noise site after each matching gate and number every random event.

    Noise sites inherit the gate's qubits and condition. Events are numbered in
    program order over noise sites, MEASUREs and RESETs.
    """
    check(circuit)
    model = model or NoiseModel()
    ops = []
    event = 0
    sites = 0
    for i, inst in enumerate(circuit.instructions):
        kind = inst.kind
        if kind is GateKind.BARRIER:
            ops.append(Op("barrier", inst.qubits, source=i))
            continue
        if kind in (GateKind.MEASURE, GateKind.RESET):
            ops.append(
                Op(kind.label, inst.qubits, inst.clbits, condition=inst.condition, event=event, source=i)
            )
            event += 1
            continue
        ops.append(Op("gate", inst.qubits, matrix=gate_matrix(kind, inst.params), condition=inst.condition, source=i))
        ch = model.channel_for(kind)
        if ch is None:
            continue
        if ch.num_qubits != len(inst.qubits):
            raise NoiseConfigError(f"channel arity {ch.num_qubits} does not match {kind.label} at instruction {i}")
        ops.append(
            Op(
                "pauli" if isinstance(ch, PauliError) else "kraus",
                inst.qubits,
                channel=ch,
                condition=inst.condition,
                event=event,
                source=i,
            )
        )
        event += 1
        sites += 1
    start, tq, tc = _terminal_tail(ops)
    return NoisyCircuit(
        num_qubits=circuit.num_qubits,
        num_clbits=circuit.num_clbits,
        ops=tuple(ops),
        num_events=event,
        noise_sites=sites,
        has_measure=any(op.kind == "measure" for op in ops),
        terminal_start=start,
        terminal_qubits=tq,
        terminal_clbits=tc,
        circuit=circuit,
    )
