"""Uniform experience replay backed by preallocated ring arrays."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class NotReadyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: int
    r: float
    s_next: np.ndarray
    done: bool


class Batch(NamedTuple):
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    def __len__(self) -> int:
        return len(self.a)

    def transitions(self) -> list[Transition]:
        return [Transition(self.s[k], int(self.a[k]), float(self.r[k]), self.s_next[k], bool(self.done[k]))
                for k in range(len(self.a))]


class ReplayBuffer:
    def __init__(self, capacity: int, obs_dim: int, seed: int = 0):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.rng = np.random.default_rng(seed)
        # storage grows on demand up to capacity, so huge capacities stay cheap
        self._s = np.empty((0, obs_dim))
        self._a = np.empty(0, dtype=np.int64)
        self._r = np.empty(0)
        self._s2 = np.empty((0, obs_dim))
        self._d = np.empty(0, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def _grow(self) -> None:
        new = min(self.capacity, max(1024, 2 * len(self._a)))
        extra = new - len(self._a)
        self._s = np.concatenate([self._s, np.empty((extra, self.obs_dim))])
        self._a = np.concatenate([self._a, np.empty(extra, dtype=np.int64)])
        self._r = np.concatenate([self._r, np.empty(extra)])
        self._s2 = np.concatenate([self._s2, np.empty((extra, self.obs_dim))])
        self._d = np.concatenate([self._d, np.empty(extra, dtype=bool)])

    def push(self, t: Transition) -> None:
        if not np.isfinite(t.r):
            raise ValueError("reward must be finite")
        k = self._next
        if k >= len(self._a):
            self._grow()
        self._s[k] = t.s
        self._a[k] = t.a
        self._r[k] = t.r
        self._s2[k] = t.s_next
        self._d[k] = t.done
        self._next = (k + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def items(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        start = self._next if self._size == self.capacity else 0
        order = [(start + k) % self.capacity for k in range(self._size)]
        return self._gather(np.array(order, dtype=np.intp)).transitions()

    def _gather(self, idx: np.ndarray) -> Batch:
        return Batch(self._s[idx], self._a[idx], self._r[idx], self._s2[idx], self._d[idx])

    def sample(self, batch_size: int) -> Batch:
        """Draw ``batch_size`` transitions uniformly with replacement."""
        if self._size < batch_size or self._size == 0:
            raise NotReadyError(f"buffer holds {self._size} transitions, need {batch_size}")
        return self._gather(self.rng.integers(self._size, size=batch_size))

    def states(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """Up to ``n`` stored states without replacement (probe batches)."""
        rng = rng or self.rng
        if self._size == 0:
            raise NotReadyError("buffer is empty")
        idx = rng.choice(self._size, size=min(n, self._size), replace=False)
        return self._s[np.sort(idx)].copy()
