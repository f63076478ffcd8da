"""Uniform replay buffer (oldest-first eviction) with a reuse counter."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field


class EmptyBufferError(RuntimeError):
    pass


@dataclass
class ReplayEntry:
    """One real episode: per acting step (AOH, action, precomputed target G')."""

    steps: list  # [(aoh, action, target)]
    rewards: tuple = ()
    generation: int = 0  # Q snapshot that produced the targets
    uses: int = field(default=0, compare=False)


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[ReplayEntry] = deque()
        self.pushed = 0
        self.sampled = 0
        self.evicted = 0
        self._evicted_uses = 0

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def push(self, entry: ReplayEntry) -> None:
        if len(self._items) >= self.capacity:
            self.evict()
        self._items.append(entry)
        self.pushed += 1

    def evict(self) -> ReplayEntry:
        """Drop and return the oldest entry."""
        if not self._items:
            raise EmptyBufferError("evict from an empty replay buffer")
        entry = self._items.popleft()
        self.evicted += 1
        self._evicted_uses += entry.uses
        return entry

    def sample(self, batch: int, rng: random.Random) -> list[ReplayEntry]:
        """Uniform with replacement."""
        if not self._items:
            raise EmptyBufferError("sample from an empty replay buffer")
        n = len(self._items)
        out = [self._items[int(rng.random() * n)] for _ in range(batch)]
        for e in out:
            e.uses += 1
        self.sampled += batch
        return out

    def mean_reuse(self) -> float:
        """Average number of times each pushed entry has been sampled so far."""
        return self.sampled / self.pushed if self.pushed else 0.0

    def mean_reuse_evicted(self) -> float:
        return self._evicted_uses / self.evicted if self.evicted else float("nan")
