"""Comparison schedulers: uniform random and cyclic X-TDMA."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .env import Op, SlotAction


def random_policy(rng: np.random.Generator, num_users: int) -> SlotAction:
    return SlotAction.from_index(int(rng.integers(3 * num_users)), num_users)


@dataclass(frozen=True)
class TdmaSchedule:
    """One sensing slot followed by ``x`` (UL, DL) pairs, per user.

    ``ordering="user-major"`` finishes one user's block before the next
    (S1 UL1 DL1 ... S2 UL2 DL2 ...). ``"interleaved"`` walks the same block
    positions round-robin over users (S1 S2 S3 UL1 UL2 UL3 ...).
    """

    x: int
    num_users: int
    ordering: str = "user-major"

    def __post_init__(self):
        if self.x < 1 or self.num_users < 1:
            raise ValueError("x and num_users must be >= 1")
        if self.ordering not in ("user-major", "interleaved"):
            raise ValueError(f"unknown ordering {self.ordering!r}")

    @cached_property
    def pattern(self) -> tuple[SlotAction, ...]:
        block = [Op.SENSE] + [Op.UL, Op.DL] * self.x
        users = range(1, self.num_users + 1)
        if self.ordering == "user-major":
            return tuple(SlotAction(op, u) for u in users for op in block)
        return tuple(SlotAction(op, u) for op in block for u in users)

    def __len__(self):
        return self.num_users * (1 + 2 * self.x)


def tdma_action(schedule: TdmaSchedule, k: int) -> SlotAction:
    """Action for 1-based slot ``k``."""
    if k < 1:
        raise ValueError("slot index is 1-based")
    return schedule.pattern[(k - 1) % len(schedule)]


class RandomPolicy:
    name = "random"

    def act(self, obs, k, rng):
        return random_policy(rng, len(obs) // 4)


class TdmaPolicy:
    def __init__(self, x: int, num_users: int, ordering: str = "user-major"):
        self.schedule = TdmaSchedule(x, num_users, ordering)
        self.name = f"tdma-{x}"

    def act(self, obs, k, rng):
        return tdma_action(self.schedule, k)
