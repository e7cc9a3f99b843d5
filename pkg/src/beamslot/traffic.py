"""Bernoulli packet arrivals and finite drop-tail buffers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Buffer:
    capacity: int
    occupancy: int = 0

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("capacity must be non-negative")
        if not 0 <= self.occupancy <= self.capacity:
            raise ValueError(f"occupancy {self.occupancy} outside [0, {self.capacity}]")

    @property
    def full(self) -> bool:
        return self.occupancy >= self.capacity

    def push(self) -> int:
        """Enqueue one packet; returns 1 if it was dropped on a full buffer."""
        if self.occupancy < self.capacity:
            self.occupancy += 1
            return 0
        return 1

    def pop(self) -> int:
        """Dequeue one packet; returns 1 if there was one."""
        if self.occupancy > 0:
            self.occupancy -= 1
            return 1
        return 0


@dataclass(frozen=True)
class TrafficConfig:
    p_arrival: float
    p_dl: float = 0.5
    p_ul: float = 0.5

    def __post_init__(self):
        for name in ("p_arrival", "p_dl", "p_ul"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} is not a probability")
        if abs(self.p_dl + self.p_ul - 1.0) > 1e-12:
            raise ValueError("p_dl + p_ul must equal 1")

    @property
    def rates(self) -> tuple[float, float]:
        return self.p_arrival * self.p_dl, self.p_arrival * self.p_ul


def sample_arrivals(cfg: TrafficConfig, rng: np.random.Generator) -> tuple[int, int]:
    """Independent (DL, UL) arrival indicators for one user and one slot."""
    u = rng.random(2)
    dl, ul = cfg.rates
    return int(u[0] < dl), int(u[1] < ul)


def sample_arrivals_all(cfgs, rng: np.random.Generator) -> np.ndarray:
    """Arrival indicators for every user at once, shape ``(U, 2)`` with columns (DL, UL)."""
    rates = np.array([c.rates for c in cfgs])
    return (rng.random(rates.shape) < rates).astype(np.int64)
