"""Exact density-matrix evolution for small registers.

Used as the reference distribution for the Monte Carlo executors. It shares
nothing with the state-vector kernels: operators are contracted with
``np.tensordot`` against a ``(2,) * 2n`` view of rho.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .execution import CapacityError
from .noise import Channel, KrausError, NoisyCircuit, PauliError

MAX_QUBITS = 10
MAX_INTERMEDIATE_MEASURES = 2


@dataclass
class DensityMatrix:
    n: int
    data: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "DensityMatrix":
        if n > MAX_QUBITS:
            raise CapacityError(f"density matrices are capped at {MAX_QUBITS} qubits, got {n}")
        if n < 0:
            raise ValueError("negative qubit count")
        rho = np.zeros((1 << n, 1 << n), dtype=np.complex128)
        rho[0, 0] = 1.0
        return cls(n, rho)

    @classmethod
    def from_statevector(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
        n = psi.size.bit_length() - 1
        if n > MAX_QUBITS:
            raise CapacityError(f"density matrices are capped at {MAX_QUBITS} qubits, got {n}")
        return cls(n, np.outer(psi, psi.conj()))

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def check(self, atol: float = 1e-10, psd_tol: float = 1e-8) -> None:
        """Raise ``ValueError`` unless Hermitian, unit trace and PSD."""
        if not np.allclose(self.data, self.data.conj().T, atol=atol, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        if abs(self.trace - 1) > atol:
            raise ValueError(f"trace {self.trace} != 1")
        if np.linalg.eigvalsh(self.data).min() < -psd_tol:
            raise ValueError("density matrix is not positive semidefinite")


RhoLike = Union[DensityMatrix, np.ndarray]


def _array(rho: RhoLike) -> np.ndarray:
    return rho.data if isinstance(rho, DensityMatrix) else rho


def _contract(t: np.ndarray, m: np.ndarray, axes: list[int]) -> np.ndarray:
    """Contract operator ``m`` (as a ``(2,)*2k`` tensor) into tensor axes ``axes``."""
    k = len(axes)
    mt = m.reshape((2,) * (2 * k))
    out = np.tensordot(mt, t, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the new axes first; send them back where they came from
    return np.moveaxis(out, list(range(k)), axes)


def _axes(n: int, qubits: Sequence[int], offset: int) -> list[int]:
    # reshape is C-ordered: qubit q is axis n - 1 - q; operator axes run MSB first
    return [offset + n - 1 - q for q in reversed(qubits)]


def _sandwich(a: np.ndarray, n: int, m: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    t = a.reshape((2,) * (2 * n))
    t = _contract(t, m, _axes(n, qubits, 0))
    t = _contract(t, m.conj(), _axes(n, qubits, n))
    return t.reshape(a.shape)


def _check_operator(a: np.ndarray, m: np.ndarray, qubits: Sequence[int]) -> int:
    n = a.shape[0].bit_length() - 1
    k = len(qubits)
    if m.shape != (1 << k, 1 << k):
        raise ValueError(f"operator of shape {m.shape} does not act on {k} qubits")
    if len(set(qubits)) != k or any(not 0 <= q < n for q in qubits):
        raise ValueError(f"bad qubits {list(qubits)} for {n} qubits")
    return n


def evolve_unitary(rho: RhoLike, m: np.ndarray, qubits: Sequence[int]) -> RhoLike:
    a = _array(rho)
    m = np.asarray(m, dtype=np.complex128)
    n = _check_operator(a, m, qubits)
    a[...] = _sandwich(a, n, m, qubits)
    return rho


def evolve_channel(rho: RhoLike, channel: Channel, qubits: Sequence[int]) -> RhoLike:
    """Apply a Pauli mixture (individual term probabilities) or a Kraus set."""
    a = _array(rho)
    if isinstance(channel, PauliError):
        ops = [(p, s.matrix()) for p, s in zip(channel.probs, channel.paulis)]
    elif isinstance(channel, KrausError):
        ops = [(1.0, k) for k in channel.matrices]
    else:
        raise TypeError(f"unsupported channel {type(channel).__name__}")
    n = _check_operator(a, ops[0][1], qubits)
    out = np.zeros_like(a)
    for w, k in ops:
        out += w * _sandwich(a, n, k, qubits)
    a[...] = out
    return rho


def reset_channel(k: int) -> KrausError:
    """Kraus form of resetting ``k`` qubits: ``|0><j|`` for every basis j."""
    d = 1 << k
    mats = []
    for j in range(d):
        m = np.zeros((d, d), dtype=np.complex128)
        m[0, j] = 1.0
        mats.append(m)
    return KrausError(tuple(mats))


def marginal(rho: RhoLike, qubits: Sequence[int]) -> np.ndarray:
    """Diagonal marginal over ``qubits``; entry ``j`` has bit ``i`` of ``j`` on ``qubits[i]``."""
    a = _array(rho)
    diag = np.real(np.diagonal(a)).copy()
    idx = np.arange(diag.size)
    out_idx = np.zeros_like(idx)
    for i, q in enumerate(qubits):
        out_idx |= ((idx >> q) & 1) << i
    return np.bincount(out_idx, weights=diag, minlength=1 << len(qubits))


def _project(a: np.ndarray, qubits: Sequence[int], outcome: int) -> tuple[float, np.ndarray]:
    idx = np.arange(a.shape[0])
    keep = np.ones(a.shape[0], dtype=bool)
    for i, q in enumerate(qubits):
        keep &= ((idx >> q) & 1) == ((outcome >> i) & 1)
    out = np.where(np.outer(keep, keep), a, 0)
    p = float(np.real(np.trace(out)))
    return p, out / p if p > 0 else out


def _trailing_measures(ops):
    """Index where a trailing run of unconditional measures on distinct qubits begins."""
    start = len(ops)
    seen: set[int] = set()
    while start > 0:
        op = ops[start - 1]
        if op.kind == "barrier":
            start -= 1
            continue
        if op.kind != "measure" or op.condition is not None or seen & set(op.qubits):
            break
        seen |= set(op.qubits)
        start -= 1
    return start


def _write(clreg: int, clbits: Sequence[int], outcome: int) -> int:
    for j, c in enumerate(clbits):
        clreg = (clreg & ~(1 << c)) | (((outcome >> j) & 1) << c)
    return clreg


def exact_distribution(program: NoisyCircuit, tol: float = 0.0) -> dict:
    """Exact classical-register distribution of ``program``.

    Keys match the executors' counts keys (clbit 0 rightmost). Intermediate
    measurements are enumerated explicitly (at most two sites); the trailing
    block of measurements is read off the final diagonal. Outcomes with
    probability ``<= tol`` are dropped.
    """
    n = program.num_qubits
    ops = program.ops
    tail = _trailing_measures(ops)
    n_mid = sum(op.kind == "measure" for op in ops[:tail])
    if n_mid > MAX_INTERMEDIATE_MEASURES:
        raise ValueError(f"{n_mid} intermediate measurements; at most {MAX_INTERMEDIATE_MEASURES} are enumerated")
    # (weight, clreg, rho)
    branches = [(1.0, 0, DensityMatrix.zero(n).data)]
    for op in ops[:tail]:
        nxt = []
        for w, clreg, a in branches:
            if op.condition is not None and not op.condition.holds(clreg):
                nxt.append((w, clreg, a))
                continue
            if op.kind == "gate":
                evolve_unitary(a, op.matrix, op.qubits)
            elif op.kind in ("pauli", "kraus"):
                evolve_channel(a, op.channel, op.qubits)
            elif op.kind == "reset":
                evolve_channel(a, reset_channel(len(op.qubits)), op.qubits)
            elif op.kind == "measure":
                for o in range(1 << len(op.qubits)):
                    p, proj = _project(a, op.qubits, o)
                    if p > 0:
                        nxt.append((w * p, _write(clreg, op.clbits, o), proj))
                continue
            nxt.append((w, clreg, a))
        branches = nxt
    tail_ops = [op for op in ops[tail:] if op.kind == "measure"]
    qubits = [q for op in tail_ops for q in op.qubits]
    clbits = [c for op in tail_ops for c in op.clbits]
    has_measure = any(op.kind == "measure" for op in ops)
    dist: dict[int, float] = {}
    for w, clreg, a in branches:
        probs = marginal(a, qubits) if qubits else np.ones(1)
        for o, p in enumerate(probs):
            key = _write(clreg, clbits, o)
            dist[key] = dist.get(key, 0.0) + w * float(p)
    if not has_measure:
        return {"": 1.0}
    width = program.num_clbits
    return {format(k, f"0{width}b"): p for k, p in sorted(dist.items()) if p > tol}


def total_variation(counts: dict, dist: dict) -> float:
    """Half the L1 distance between normalized ``counts`` and ``dist``."""
    total = sum(counts.values())
    if total <= 0:
        raise ValueError("empty counts")
    keys = set(counts) | set(dist)
    return 0.5 * sum(abs(counts.get(k, 0) / total - dist.get(k, 0.0)) for k in keys)
