"""State-vector kernels shared by every executor.

Kernels act in place on a C-contiguous ``(rows, 2**n)`` complex128 array and
touch only the listed rows. Each row is handled by the same compiled loop with
a fixed evaluation order (no reassociation, no BLAS), so a row ends up bitwise
identical whether it is simulated alone or as one segment of a batch. 1-D
arrays are accepted as a single row.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from numba import njit


class DegenerateMeasurementError(ArithmeticError):
    """A selected outcome or Kraus branch has zero probability."""


# ---------------------------------------------------------------------------
# compiled row kernels


@njit(cache=True, nogil=True)
def _insert_zeros(b, sorted_qubits):
    for q in sorted_qubits:
        b = ((b >> q) << (q + 1)) | (b & ((1 << q) - 1))
    return b


@njit(cache=True, nogil=True)
def _offsets(qubits):
    k = qubits.shape[0]
    offs = np.zeros(1 << k, np.int64)
    for c in range(1 << k):
        o = 0
        for j in range(k):
            if (c >> j) & 1:
                o |= 1 << qubits[j]
        offs[c] = o
    return offs


@njit(cache=True, nogil=True)
def _nonzeros(m):
    # row-major sparse view; zero entries contribute nothing to a row sum
    d = m.shape[0]
    start = np.zeros(d + 1, np.int64)
    cols = np.zeros(d * d, np.int64)
    mre = np.zeros(d * d)
    mim = np.zeros(d * d)
    e = 0
    for o in range(d):
        for c in range(d):
            v = m[o, c]
            if v.real != 0.0 or v.imag != 0.0:
                cols[e] = c
                mre[e] = v.real
                mim[e] = v.imag
                e += 1
        start[o + 1] = e
    return start, cols, mre, mim


@njit(cache=True, nogil=True)
def _apply_matrix_rows(psi, rows, m, qubits):
    k = qubits.shape[0]
    d = 1 << k
    sq = np.sort(qubits)
    offs = _offsets(qubits)
    start, cols, mre, mim = _nonzeros(m)
    vr = np.empty(d)
    vi = np.empty(d)
    for rr in range(rows.shape[0]):
        r = rows[rr]
        for b in range(psi.shape[1] >> k):
            base = _insert_zeros(b, sq)
            for c in range(d):
                a = psi[r, base | offs[c]]
                vr[c] = a.real
                vi[c] = a.imag
            for o in range(d):
                sr = 0.0
                si = 0.0
                for e in range(start[o], start[o + 1]):
                    c = cols[e]
                    sr += mre[e] * vr[c] - mim[e] * vi[c]
                    si += mre[e] * vi[c] + mim[e] * vr[c]
                psi[r, base | offs[o]] = complex(sr, si)


@njit(cache=True, nogil=True)
def _expval_rows(psi, rows, m, qubits):
    k = qubits.shape[0]
    d = 1 << k
    sq = np.sort(qubits)
    offs = _offsets(qubits)
    start, cols, mre, mim = _nonzeros(m)
    vr = np.empty(d)
    vi = np.empty(d)
    out = np.zeros(rows.shape[0])
    for rr in range(rows.shape[0]):
        r = rows[rr]
        tot = 0.0
        for b in range(psi.shape[1] >> k):
            base = _insert_zeros(b, sq)
            for c in range(d):
                a = psi[r, base | offs[c]]
                vr[c] = a.real
                vi[c] = a.imag
            for o in range(d):
                if start[o] == start[o + 1]:
                    continue
                sr = 0.0
                si = 0.0
                for e in range(start[o], start[o + 1]):
                    c = cols[e]
                    sr += mre[e] * vr[c] - mim[e] * vi[c]
                    si += mre[e] * vi[c] + mim[e] * vr[c]
                tot += sr * sr + si * si
        out[rr] = tot
    return out


@njit(cache=True, nogil=True)
def _kraus_scan(psi, rows, mats, qubits, u_max):
    """Expectations of ``mats[0], mats[1], ...`` on one row until the running
    sum exceeds ``u_max``; returns (expectations, running sums)."""
    n_mats = mats.shape[0]
    ps = np.zeros(n_mats)
    cum = np.zeros(n_mats)
    acc = 0.0
    count = 0
    for i in range(n_mats):
        ps[i] = _expval_rows(psi, rows, mats[i], qubits)[0]
        acc += ps[i]
        cum[i] = acc
        count = i + 1
        if u_max < acc:
            break
    return ps[:count], cum[:count]


@njit(cache=True, nogil=True)
def _probabilities_rows(psi, rows, outcome_map, k):
    out = np.zeros((rows.shape[0], 1 << k))
    for rr in range(rows.shape[0]):
        r = rows[rr]
        for j in range(psi.shape[1]):
            a = psi[r, j]
            out[rr, outcome_map[j]] += a.real * a.real + a.imag * a.imag
    return out


@njit(cache=True, nogil=True)
def _collapse_rows(psi, rows, outcome_map, outcomes, probs):
    for rr in range(rows.shape[0]):
        r = rows[rr]
        s = np.sqrt(probs[rr])
        o = outcomes[rr]
        for j in range(psi.shape[1]):
            if outcome_map[j] == o:
                a = psi[r, j]
                psi[r, j] = complex(a.real / s, a.imag / s)
            else:
                psi[r, j] = 0.0


@njit(cache=True, nogil=True)
def _scale_rows(psi, rows, probs):
    for rr in range(rows.shape[0]):
        r = rows[rr]
        s = np.sqrt(probs[rr])
        for j in range(psi.shape[1]):
            a = psi[r, j]
            psi[r, j] = complex(a.real / s, a.imag / s)


@njit(cache=True, nogil=True)
def _parity(v):
    p = 0
    while v:
        v &= v - 1
        p ^= 1
    return p


@njit(cache=True, nogil=True)
def _times_minus_i_pow(a, k):
    k &= 3
    if k == 0:
        return a
    if k == 1:
        return complex(a.imag, -a.real)
    if k == 2:
        return complex(-a.real, -a.imag)
    return complex(-a.imag, a.real)


@njit(cache=True, nogil=True)
def _pauli_rows(psi, rows, x_masks, z_masks, num_ys):
    dim = psi.shape[1]
    for rr in range(rows.shape[0]):
        r = rows[rr]
        x = x_masks[rr]
        z = z_masks[rr]
        ny = num_ys[rr] & 3
        if x == 0 and z == 0 and ny == 0:
            continue
        if x == 0:
            for j in range(dim):
                psi[r, j] = _times_minus_i_pow(psi[r, j], ny + 2 * _parity(j & z))
            continue
        x_max = 0
        while (x >> (x_max + 1)) != 0:
            x_max += 1
        mask_l = (1 << x_max) - 1
        mask_u = ~((1 << (x_max + 1)) - 1)
        for i in range(dim >> 1):
            i0 = ((i << 1) & mask_u) | (i & mask_l)
            i1 = i0 ^ x
            a0 = psi[r, i0]
            a1 = psi[r, i1]
            psi[r, i0] = _times_minus_i_pow(a1, ny + 2 * _parity(i0 & z))
            psi[r, i1] = _times_minus_i_pow(a0, ny + 2 * _parity(i1 & z))


# ---------------------------------------------------------------------------
# python-facing wrappers

_ROW0 = np.zeros(1, dtype=np.int64)


def zero_state(n: int, rows: int = 1) -> np.ndarray:
    psi = np.zeros((rows, 1 << n), dtype=np.complex128)
    psi[:, 0] = 1.0
    return psi


def _as_rows(state: np.ndarray, rows=None):
    if state.ndim == 1:
        psi = state.reshape(1, -1)
    elif state.ndim == 2:
        psi = state
    else:
        raise ValueError("state must be 1-D or 2-D")
    if not psi.flags.c_contiguous or psi.dtype != np.complex128:
        raise ValueError("state must be a C-contiguous complex128 array")
    if rows is None:
        rows = _ROW0 if psi.shape[0] == 1 else np.arange(psi.shape[0], dtype=np.int64)
    else:
        rows = np.asarray(rows, dtype=np.int64)
    return psi, rows


def num_qubits(psi: np.ndarray) -> int:
    dim = psi.shape[-1]
    n = dim.bit_length() - 1
    if 1 << n != dim:
        raise ValueError(f"state length {dim} is not a power of two")
    return n


@lru_cache(maxsize=4096)
def _qubit_array(qubits: tuple, n: int) -> np.ndarray:
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"duplicate qubits {list(qubits)}")
    for q in qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit {q} out of range for {n} qubits")
    arr = np.array(qubits, dtype=np.int64)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=4096)
def outcome_map(n: int, qubits: tuple) -> np.ndarray:
    """For each basis index, the outcome integer spelled by its bits at ``qubits``."""
    j = np.arange(1 << n, dtype=np.int64)
    m = np.zeros_like(j)
    for pos, q in enumerate(qubits):
        m |= ((j >> q) & 1) << pos
    m.setflags(write=False)
    return m


def _matrix(m, k: int) -> np.ndarray:
    m = np.ascontiguousarray(m, dtype=np.complex128)
    if m.shape != (1 << k, 1 << k):
        raise ValueError(f"matrix shape {m.shape} does not fit {k} qubits")
    return m


def apply_matrix(state: np.ndarray, m: np.ndarray, qubits: Sequence[int], rows=None) -> np.ndarray:
    """Apply ``m`` on ``qubits`` (``qubits[0]`` = LSB of m's index) in place."""
    psi, rows = _as_rows(state, rows)
    q = _qubit_array(tuple(qubits), num_qubits(psi))
    _apply_matrix_rows(psi, rows, _matrix(m, len(q)), q)
    return state


def expval_matrix(state: np.ndarray, m: np.ndarray, qubits: Sequence[int], rows=None):
    """``<psi|M^dag M|psi>`` per row: float for a 1-D state, array otherwise."""
    psi, r = _as_rows(state, rows)
    q = _qubit_array(tuple(qubits), num_qubits(psi))
    out = _expval_rows(psi, r, _matrix(m, len(q)), q)
    return float(out[0]) if state.ndim == 1 and rows is None else out


def kraus_scan(state: np.ndarray, stack: np.ndarray, qubits: Sequence[int], u_max: float):
    """Running Kraus expectations on a single state, stopping once past ``u_max``.

    Returns ``(p, cumulative)`` arrays covering the scanned prefix.
    """
    psi, r = _as_rows(state)
    q = _qubit_array(tuple(qubits), num_qubits(psi))
    return _kraus_scan(psi, r[:1], stack, q, float(u_max))


def probabilities(state: np.ndarray, qubits: Sequence[int], rows=None) -> np.ndarray:
    """Outcome probabilities over ``qubits`` (``qubits[0]`` = LSB of the outcome).

    Shape ``(2**k,)`` for a 1-D state, ``(rows, 2**k)`` otherwise.
    """
    psi, r = _as_rows(state, rows)
    n = num_qubits(psi)
    qubits = tuple(qubits)
    _qubit_array(qubits, n)
    out = _probabilities_rows(psi, r, outcome_map(n, qubits), len(qubits))
    return out[0] if state.ndim == 1 and rows is None else out


def collapse_rows(state: np.ndarray, qubits: Sequence[int], outcomes, probs, rows=None) -> None:
    """Project each listed row onto its outcome and divide survivors by sqrt(prob)."""
    psi, r = _as_rows(state, rows)
    n = num_qubits(psi)
    qubits = tuple(qubits)
    _qubit_array(qubits, n)
    _collapse_rows(
        psi,
        r,
        outcome_map(n, qubits),
        np.asarray(outcomes, dtype=np.int64).reshape(-1),
        np.asarray(probs, dtype=np.float64).reshape(-1),
    )


def project_and_renormalize(state: np.ndarray, qubits: Sequence[int], outcome: int, prob: float) -> np.ndarray:
    if not prob > 0:
        raise DegenerateMeasurementError(f"cannot collapse onto outcome {outcome} with probability {prob}")
    psi, r = _as_rows(state)
    collapse_rows(psi, qubits, np.full(len(r), outcome), np.full(len(r), prob), r)
    return state


def scale_rows(state: np.ndarray, probs, rows=None) -> None:
    """Divide each listed row by sqrt of its probability."""
    psi, r = _as_rows(state, rows)
    _scale_rows(psi, r, np.asarray(probs, dtype=np.float64).reshape(-1))


@dataclass(frozen=True)
class PauliMasks:
    x_mask: int = 0
    z_mask: int = 0
    num_y: int = 0

    @property
    def x_max(self) -> Optional[int]:
        return self.x_mask.bit_length() - 1 if self.x_mask else None

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0 and self.num_y % 4 == 0


def apply_pauli_rows(state: np.ndarray, x_mask, z_mask, num_y, rows=None) -> None:
    """Fused Pauli kernel with per-row masks, one pass over every listed row.

    For ``x_mask != 0`` pairs ``i0 = ((i << 1) & mask_u) | (i & mask_l)`` and
    ``i1 = i0 ^ x_mask`` and writes
    ``new[i0] = (-i)**num_y * (-1)**popcount(i0 & z_mask) * old[i1]`` and the
    mirror for ``i1``; with ``x_mask == 0`` only the phases apply.
    """
    psi, r = _as_rows(state, rows)
    count = len(r)

    def per_row(v):
        return np.broadcast_to(np.asarray(v, dtype=np.int64), (count,)).copy()

    _pauli_rows(psi, r, per_row(x_mask), per_row(z_mask), per_row(num_y))


def apply_pauli_fused(state: np.ndarray, masks: PauliMasks) -> np.ndarray:
    psi, _ = _as_rows(state)
    n = num_qubits(psi)
    if masks.x_mask >> n or masks.z_mask >> n:
        raise ValueError("Pauli masks exceed the register")
    apply_pauli_rows(state, masks.x_mask, masks.z_mask, masks.num_y)
    return state


# ---------------------------------------------------------------------------
# inverse-CDF selection and sampling


def select_outcome(probs: np.ndarray, u) -> np.ndarray:
    """First index with ``u < cumulative`` (strict); float slack falls back to
    the last index with positive probability.

    ``probs`` is ``(K,)`` or ``(rows, K)``; ``u`` is scalar or ``(rows,)``.
    """
    probs = np.atleast_2d(probs)
    u = np.asarray(u, dtype=np.float64).reshape(-1, 1)
    cum = np.cumsum(probs, axis=1)
    idx = np.sum(cum <= u, axis=1)
    over = idx >= probs.shape[1]
    if np.any(over):
        positive = np.broadcast_to(probs > 0, (idx.shape[0], probs.shape[1]))
        if not positive[over].any(axis=1).all():
            raise DegenerateMeasurementError("distribution sums to zero")
        last = probs.shape[1] - 1 - np.argmax(positive[:, ::-1], axis=1)
        idx = np.where(over, last, idx)
    return idx


def format_outcome(m: int, width: int) -> str:
    return format(int(m), f"0{width}b") if width else ""


def sample_counts(state: np.ndarray, qubits: Sequence[int], shots: int, seed: int, event: int) -> dict:
    """Histogram of ``shots`` outcomes drawn from one state.

    Shot ``s`` reads ``uniform(seed, s, event)``; the state is not modified.
    Keys are bitstrings with ``qubits[0]`` rightmost.
    """
    from .rng import uniform

    if shots < 1:
        raise ValueError("shots must be >= 1")
    psi, _ = _as_rows(state)
    probs = probabilities(psi, qubits, rows=_ROW0)[0]
    u = uniform(seed, np.arange(shots, dtype=np.uint64), event)
    picks = select_outcome(probs, u)
    vals, cnt = np.unique(picks, return_counts=True)
    return {format_outcome(v, len(qubits)): int(c) for v, c in zip(vals, cnt)}
