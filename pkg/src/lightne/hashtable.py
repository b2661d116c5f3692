"""Open-addressing accumulator table for sampled vertex pairs.

Keys pack a canonical pair (min id in the high 32 bits, max in the low 32).
Values are 64-bit fixed-point weights at scale 2**-20, so concurrent
accumulation is plain integer addition: associative, exact, and independent
of thread interleaving.  Collisions resolve by linear probing; the all-ones
key marks an empty slot (vertex ids are capped below 2**32 - 1, so no real
pair can collide with it).  No deletions.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import CapacityError
from .rng import _mix64_np, mix64

EMPTY_KEY = (1 << 64) - 1
FIXED_POINT_SCALE = 1 << 20
MAX_LOAD = 0.75


def pack_pair(u: int, v: int) -> int:
    """Canonical (min, max) pair packed to one uint64 key."""
    a, b = (u, v) if u <= v else (v, u)
    return (a << 32) | b


def unpack_pair(key: int) -> tuple[int, int]:
    return key >> 32, key & 0xFFFFFFFF


def to_fixed_point(w: float) -> int:
    return int(round(w * FIXED_POINT_SCALE))


def next_pow2(x: int) -> int:
    return 1 << max(4, (int(x) - 1).bit_length())


class SparsifierTable:
    """Fixed-capacity concurrent accumulator from packed pair to weight."""

    def __init__(self, capacity: int):
        if capacity < 1 or capacity & (capacity - 1):
            raise ValueError(f"capacity must be a power of two, got {capacity}")
        self.capacity = capacity
        self._mask = capacity - 1
        self._keys = np.full(capacity, EMPTY_KEY, dtype=np.uint64)
        self._values = np.zeros(capacity, dtype=np.int64)
        self.count = 0
        self._lock = threading.Lock()

    @classmethod
    def for_expected_entries(cls, entries: int, multiplier: float = 2.0) -> "SparsifierTable":
        """Size so ``entries`` distinct keys fit under the load limit."""
        return cls(next_pow2(int(np.ceil(multiplier * max(1, entries)))))

    def _full_error(self) -> CapacityError:
        need = next_pow2(int(np.ceil((self.count + 1) / MAX_LOAD)))
        return CapacityError(
            f"table full at {self.count}/{self.capacity} slots "
            f"(load limit {MAX_LOAD}); needs capacity >= {need}, "
            f"i.e. a capacity multiplier of about {need / self.capacity:.1f}x current"
        )

    def upsert_add(self, key: int, weight: float) -> None:
        """Add ``weight`` (converted to fixed point) to ``key``, inserting it
        if absent.  Safe for concurrent callers; totals are exact."""
        if key == EMPTY_KEY:
            raise ValueError("key collides with the empty sentinel")
        w = to_fixed_point(weight)
        idx = mix64(key) & self._mask
        with self._lock:
            while True:
                slot = int(self._keys[idx])
                if slot == key:
                    self._values[idx] += w
                    return
                if slot == EMPTY_KEY:
                    if self.count + 1 > MAX_LOAD * self.capacity:
                        raise self._full_error()
                    self._keys[idx] = key
                    self._values[idx] = w
                    self.count += 1
                    return
                idx = (idx + 1) & self._mask

    def merge_unique(self, keys: np.ndarray, fixed_weights: np.ndarray) -> None:
        """Bulk upsert of distinct keys with fixed-point weights.

        Vectorized linear probing: each round resolves hits, claims empty
        slots (first key in input order wins a contested slot), and advances
        the rest one probe step.
        """
        keys = np.asarray(keys, dtype=np.uint64)
        fp = np.asarray(fixed_weights, dtype=np.int64)
        if len(keys) == 0:
            return
        if np.any(keys == np.uint64(EMPTY_KEY)):
            raise ValueError("key collides with the empty sentinel")
        with self._lock:
            idx = (_mix64_np(keys.copy()) & np.uint64(self._mask)).astype(np.int64)
            pending = np.arange(len(keys))
            while len(pending):
                cur = idx[pending]
                slot_keys = self._keys[cur]
                hit = slot_keys == keys[pending]
                if hit.any():
                    self._values[cur[hit]] += fp[pending[hit]]
                empty = slot_keys == np.uint64(EMPTY_KEY)
                if empty.any():
                    cand = pending[empty]
                    slots = cur[empty]
                    first = np.unique(slots, return_index=True)[1]
                    winners = cand[first]
                    if self.count + len(winners) > MAX_LOAD * self.capacity:
                        self.count += len(winners)  # for the error message
                        err = self._full_error()
                        self.count -= len(winners)
                        raise err
                    self._keys[slots[first]] = keys[winners]
                    self._values[slots[first]] = fp[winners]
                    self.count += len(winners)
                    placed = np.zeros(len(cand), dtype=bool)
                    placed[first] = True
                    lose = cand[~placed]
                else:
                    lose = np.empty(0, dtype=np.int64)
                pending = np.concatenate([pending[~(hit | empty)], lose])
                pending.sort()  # keep input order as the priority
                idx[pending] = (idx[pending] + 1) & self._mask

    def get(self, key: int) -> float | None:
        """Accumulated weight for ``key`` or None."""
        idx = mix64(key) & self._mask
        while True:
            slot = int(self._keys[idx])
            if slot == key:
                return float(self._values[idx]) / FIXED_POINT_SCALE
            if slot == EMPTY_KEY:
                return None
            idx = (idx + 1) & self._mask

    def items_sorted(self) -> tuple[np.ndarray, np.ndarray]:
        """(keys, fixed-point weights) of occupied slots, sorted by key."""
        occupied = self._keys != np.uint64(EMPTY_KEY)
        keys = self._keys[occupied]
        values = self._values[occupied]
        order = np.argsort(keys, kind="stable")
        return keys[order], values[order]

    def dump(self) -> str:
        """Debug dump: one "u v weight" line per pair, sorted by key."""
        keys, values = self.items_sorted()
        lines = []
        for key, fp in zip(keys.tolist(), values.tolist()):
            u, v = unpack_pair(key)
            lines.append(f"{u} {v} {fp / FIXED_POINT_SCALE!r}")
        return "\n".join(lines) + ("\n" if lines else "")
