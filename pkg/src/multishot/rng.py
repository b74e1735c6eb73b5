"""Counter-based uniform draws keyed by (seed, shot, event).

Philox4x32-10 (Salmon et al., SC'11). Every random decision in every executor
reads ``uniform(seed, shot, t)``, so the order in which shots and events are
visited never changes the outcome of a run.
"""
from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_LO = np.uint64(0xFFFFFFFF)
_32 = np.uint64(32)
_ROUNDS = 10


def philox4x32(counter, key):
    """Run Philox4x32-10 on broadcastable uint32 words.

    ``counter`` is a 4-tuple and ``key`` a 2-tuple of integer arrays (or ints).
    Returns the four output words as uint64 arrays holding 32-bit values.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _LO for c in counter)
    k0, k1 = (np.asarray(k, dtype=np.uint64) & _LO for k in key)
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & _LO
            k1 = (k1 + _W1) & _LO
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _32) ^ c1 ^ k0,
            p1 & _LO,
            (p0 >> _32) ^ c3 ^ k1,
            p0 & _LO,
        )
    return c0, c1, c2, c3


def uniform(seed, shot, t):
    """Uniform double in [0, 1) for key ``(seed, shot, t)``.

    Pure function; ``shot`` and ``t`` may be integer arrays (broadcast).
    The 53 high bits of the first two output words are scaled by 2**-53.
    """
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    shot = np.asarray(shot, dtype=np.uint64)
    t = np.asarray(t, dtype=np.uint64)
    x0, x1, _, _ = philox4x32(
        (t & _LO, t >> _32, shot & _LO, shot >> _32),
        (seed & 0xFFFFFFFF, seed >> 32),
    )
    bits = (x0 << _32) | x1
    out = (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)
    if out.ndim == 0:
        return float(out)
    return out


class ShotRng:
    """Stream view of :func:`uniform` for one ``(seed, shot)`` pair."""

    def __init__(self, seed: int, shot: int):
        self.seed = seed
        self.shot = shot

    def __call__(self, t):
        return uniform(self.seed, self.shot, t)

    def draws(self, n_events: int) -> np.ndarray:
        return uniform(self.seed, self.shot, np.arange(n_events, dtype=np.uint64))


class DrawTable:
    """Precomputed ``uniform(seed, shot, t)`` for a fixed set of shots and events.

    Falls back to evaluating on demand when the table would exceed ``max_bytes``.
    """

    def __init__(self, seed: int, shot_ids, n_events: int, max_bytes: int = 1 << 28):
        self.seed = seed
        self.shot_ids = np.sort(np.asarray(shot_ids, dtype=np.int64))
        self.n_events = n_events
        self.table = None
        if len(self.shot_ids) * n_events * 8 <= max_bytes:
            self.table = uniform(
                seed,
                self.shot_ids.astype(np.uint64)[:, None],
                np.arange(n_events, dtype=np.uint64)[None, :],
            ).reshape(len(self.shot_ids), n_events)

    def __call__(self, shot_ids, t: int) -> np.ndarray:
        shot_ids = np.asarray(shot_ids, dtype=np.int64)
        if self.table is None:
            return uniform(self.seed, shot_ids.astype(np.uint64), t)
        return self.table[np.searchsorted(self.shot_ids, shot_ids), t]

    def row(self, shot: int) -> np.ndarray:
        if self.table is None:
            return uniform(self.seed, shot, np.arange(self.n_events, dtype=np.uint64))
        return self.table[np.searchsorted(self.shot_ids, shot)]
