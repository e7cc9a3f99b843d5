"""Slot-level MDP: one BS, U mobile users, per-slot choice of sense / UL / DL.

Each :meth:`BeamSlotEnv.step` runs, in order: channel update (mobility and a
fresh fading draw for every user), action resolution, packet arrivals, reward.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import radio
from .mobility import Pose, geometry, push_out, sample_velocity, step_pose
from .traffic import Buffer, TrafficConfig, sample_arrivals_all


class Op(enum.IntEnum):
    SENSE = 0
    UL = 1
    DL = 2


@dataclass(frozen=True)
class SlotAction:
    op: Op
    user: int  # 1-based

    def index(self, num_users: int) -> int:
        return int(self.op) * num_users + (self.user - 1)

    @classmethod
    def from_index(cls, index: int, num_users: int) -> "SlotAction":
        if not 0 <= index < 3 * num_users:
            raise ValueError(f"action index {index} outside [0, {3 * num_users})")
        op, u = divmod(int(index), num_users)
        return cls(Op(op), u + 1)

    def __str__(self):
        return f"{self.op.name}{self.user}"


@dataclass(frozen=True)
class EnvConfig:
    mt: int = 32
    fc_ghz: float = 28.0  # recorded only; no propagation term uses it
    pt: float = 5.0
    snr_db: float = 20.0
    snr_ref_distance: float = 50.0
    fading_variance: float = 1.0
    scenario: tuple[float, float] = (100.0, 100.0)
    bs_position: tuple[float, float] = (0.0, 0.0)
    num_users: int = 3
    p_arrival: tuple[float, ...] = (0.6, 0.4, 0.3)
    p_dl: float = 0.5
    p_ul: float = 0.5
    initial_positions: tuple[tuple[float, float], ...] = ((0.0, 80.0), (0.0, 40.0), (0.0, 27.0))
    permute_positions: bool = True
    position_jitter: float = 5.0
    dl_capacity: int = 5
    ul_capacity: int = 5
    slots: int = 1000
    dt: float = 0.1
    rho: tuple[float, float, float] = (3.0, 0.0, -1.0)  # (beam changed, not sensing, unchanged)
    deterministic_init: bool = False
    # "live": every slot the BS reads each user's power on its stored beam;
    # "last-sensed": only sensing slots refresh it
    power_observation: str = "live"

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if self.slots < 1:
            raise ValueError("slots must be >= 1")
        if len(self.p_arrival) != self.num_users:
            raise ValueError(f"p_arrival has {len(self.p_arrival)} entries for {self.num_users} users")
        if len(self.initial_positions) != self.num_users:
            raise ValueError(f"initial_positions has {len(self.initial_positions)} entries "
                             f"for {self.num_users} users")
        if len(self.rho) != 3:
            raise ValueError("rho needs three values (changed, non-sensing, unchanged)")
        if self.power_observation not in ("live", "last-sensed"):
            raise ValueError(f"unknown power_observation {self.power_observation!r}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dl_capacity < 0 or self.ul_capacity < 0:
            raise ValueError("buffer capacities must be non-negative")
        for x, y in self.initial_positions:
            if not (0.0 <= x <= self.scenario[0] and 0.0 <= y <= self.scenario[1]):
                raise ValueError(f"initial position {(x, y)} outside the scenario")
        for p in self.p_arrival:
            TrafficConfig(p, self.p_dl, self.p_ul)
        radio.LinkParams.from_snr(self.pt, self.snr_db, self.mt, self.snr_ref_distance,
                                  self.fading_variance)

    @property
    def num_actions(self) -> int:
        return 3 * self.num_users

    @property
    def state_size(self) -> int:
        return 4 * self.num_users

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown EnvConfig fields: {sorted(unknown)}")
        kw = dict(d)
        for key in ("scenario", "bs_position", "p_arrival", "rho"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "initial_positions" in kw:
            kw["initial_positions"] = tuple(tuple(p) for p in kw["initial_positions"])
        return cls(**kw)


@dataclass
class UserState:
    pose: Pose
    dl: Buffer
    ul: Buffer
    beam: int = 1
    power: float = 0.0  # latest measured received power on the stored beam
    distance: float = 0.0
    theta: float = 0.0
    h: np.ndarray = field(default=None, repr=False)


@dataclass(frozen=True)
class SlotOutcome:
    slot: int
    action: SlotAction
    reward: float
    overflow_drops: int
    bad_beam_drops: int
    delivered: int
    generated: int
    beam_changed: bool
    beams: tuple[int, ...]

    @property
    def drops(self) -> int:
        return self.overflow_drops + self.bad_beam_drops

    @property
    def sensing(self) -> bool:
        return self.action.op == Op.SENSE


def normalize_power(power: float, noise_variance: float) -> float:
    """Measured SNR mapped linearly from [-10, 40] dB onto [0, 1]."""
    if power <= 0.0:
        return 0.0
    snr_db = 10.0 * math.log10(power / noise_variance)
    return min(1.0, max(0.0, (snr_db + 10.0) / 50.0))


def slot_reward(not_full: int, num_users: int, sensed: bool, changed: bool, drops: int,
                rho=(3.0, 0.0, -1.0)) -> float:
    """Fraction of non-full buffers, plus the tracking bonus/penalty, minus drops.

    ``rho`` is (sensing changed the beam, not a sensing slot, sensing kept the beam).
    """
    if not sensed:
        bonus = rho[1]
    else:
        bonus = rho[0] if changed else rho[2]
    return not_full / (2 * num_users) + bonus - drops


class BeamSlotEnv:
    """Joint beam tracking and slot allocation environment.

    Randomness is split into independent streams (initial layout, mobility,
    fading, measurement noise, traffic), all derived from the ``reset`` seed.
    """

    def __init__(self, cfg: EnvConfig | None = None):
        self.cfg = cfg or EnvConfig()
        c = self.cfg
        self.link = radio.LinkParams.from_snr(c.pt, c.snr_db, c.mt, c.snr_ref_distance, c.fading_variance)
        self.codebook = radio.dft_codebook(c.mt)
        self.traffic = [TrafficConfig(p, c.p_dl, c.p_ul) for p in c.p_arrival]
        self.users: list[UserState] = []
        self.k = 0
        self.done = True

    @property
    def num_actions(self) -> int:
        return self.cfg.num_actions

    @property
    def state_size(self) -> int:
        return self.cfg.state_size

    # -- episode control -------------------------------------------------

    def reset(self, seed=None) -> np.ndarray:
        c = self.cfg
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        init, mob, fade, noise, traffic = (np.random.default_rng(s) for s in ss.spawn(5))
        self._fade_rng, self._noise_rng, self._traffic_rng = fade, noise, traffic

        positions = [tuple(p) for p in c.initial_positions]
        if not c.deterministic_init:
            if c.permute_positions:
                positions = [positions[i] for i in init.permutation(len(positions))]
            jitter = init.uniform(-c.position_jitter, c.position_jitter, size=(len(positions), 2))
            positions = [(_fold(x + jx, c.scenario[0]), _fold(y + jy, c.scenario[1]))
                         for (x, y), (jx, jy) in zip(positions, jitter)]

        self.users = []
        for x, y in positions:
            v_lin, v_ang = sample_velocity(mob)
            heading = float(mob.uniform(0.0, 2.0 * math.pi))
            x, y = push_out(x, y, c.bs_position, c.scenario)
            self.users.append(UserState(Pose(x, y, heading, v_lin, v_ang),
                                        Buffer(c.dl_capacity), Buffer(c.ul_capacity)))
        self._update_channels()
        for u in self.users:
            # initial access: exhaustive sweep, then one noisy measurement on the chosen beam
            u.beam = radio.best_beam_exhaustive(u.h, self.codebook, self.link)
            u.power = radio.received_power(u.h, self.codebook.beam(u.beam), self.link,
                                           radio.sample_noise(self._noise_rng, self.link.noise_variance))

        self.k = 0
        self.done = False
        self.generated = 0
        return self.observation()

    def step(self, action):
        if self.done:
            raise RuntimeError("episode finished; call reset() first")
        c = self.cfg
        if not isinstance(action, SlotAction):
            action = SlotAction.from_index(int(action), c.num_users)
        if not 1 <= action.user <= c.num_users:
            raise ValueError(f"user {action.user} outside 1..{c.num_users}")
        self.k += 1

        for u in self.users:
            u.pose = step_pose(u.pose, c.dt, c.scenario, c.bs_position)
        self._update_channels()

        user = self.users[action.user - 1]
        delivered = bad_beam = 0
        changed = False
        if action.op == Op.SENSE:
            new_beam, user.power = radio.neighbor_beam_track(user.beam, user.h, self.codebook,
                                                             self.link, self._noise_rng)
            changed = new_beam != user.beam
            user.beam = new_beam
        else:
            buf = user.ul if action.op == Op.UL else user.dl
            if buf.pop():
                if user.beam == radio.best_beam_exhaustive(user.h, self.codebook, self.link):
                    delivered = 1
                else:
                    bad_beam = 1

        if c.power_observation == "live":
            for u in self.users:
                if u is not user or action.op != Op.SENSE:
                    u.power = radio.received_power(
                        u.h, self.codebook.beam(u.beam), self.link,
                        radio.sample_noise(self._noise_rng, self.link.noise_variance))

        arrivals = sample_arrivals_all(self.traffic, self._traffic_rng)
        overflow = 0
        for u, (a_dl, a_ul) in zip(self.users, arrivals):
            if a_dl:
                overflow += u.dl.push()
            if a_ul:
                overflow += u.ul.push()
        generated = int(arrivals.sum())
        self.generated += generated

        not_full = sum((not u.dl.full) + (not u.ul.full) for u in self.users)
        reward = slot_reward(not_full, c.num_users, action.op == Op.SENSE, changed,
                             overflow + bad_beam, c.rho)

        self.done = self.k >= c.slots
        outcome = SlotOutcome(self.k, action, reward, overflow, bad_beam, delivered, generated,
                              changed, tuple(u.beam for u in self.users))
        return self.observation(), outcome, self.done

    # -- helpers ---------------------------------------------------------

    def _update_channels(self):
        n = len(self.users)
        g = self._fade_rng.standard_normal((n, 2)) * math.sqrt(self.link.fading_variance / 2.0)
        for u, (re, im) in zip(self.users, g):
            u.distance, u.theta = geometry(u.pose.position, self.cfg.bs_position)
            u.h = radio.channel_vector(u.distance, u.theta, complex(re, im), self.link)

    def observation(self) -> np.ndarray:
        c = self.cfg
        obs = np.empty(4 * c.num_users)
        n = c.num_users
        for i, u in enumerate(self.users):
            obs[i] = u.beam / c.mt
            obs[n + i] = u.dl.occupancy / c.dl_capacity if c.dl_capacity else 0.0
            obs[2 * n + i] = u.ul.occupancy / c.ul_capacity if c.ul_capacity else 0.0
            obs[3 * n + i] = normalize_power(u.power, self.link.noise_variance)
        return obs

    def buffered(self) -> int:
        return sum(u.dl.occupancy + u.ul.occupancy for u in self.users)

    def optimal_beams(self) -> list[int]:
        return [radio.best_beam_exhaustive(u.h, self.codebook, self.link) for u in self.users]


def _fold(v: float, upper: float) -> float:
    period = 2.0 * upper
    v = math.fmod(v, period)
    if v < 0:
        v += period
    return period - v if v > upper else v


# -- episode accounting ------------------------------------------------------

@dataclass(frozen=True)
class EpisodeMetrics:
    per: float
    throughput: float
    generated: int
    delivered: int
    overflow_drops: int
    bad_beam_drops: int
    buffered: int
    slots: dict
    cumulative_reward: float

    @property
    def lost(self) -> int:
        return self.overflow_drops + self.bad_beam_drops

    @property
    def sensing_fraction(self) -> float:
        total = sum(self.slots.values())
        return self.slots["S"] / total if total else 0.0


def episode_metrics(trace, generated: int | None = None, buffered: int = 0) -> EpisodeMetrics:
    """Aggregate a list of :class:`SlotOutcome` into PER, throughput and histograms.

    PER is lost / generated packets (0 when nothing was generated) and
    throughput is delivered packets per slot.
    """
    trace = list(trace)
    if generated is None:
        generated = sum(o.generated for o in trace)
    slots = {"S": 0, "UL": 0, "DL": 0}
    names = {Op.SENSE: "S", Op.UL: "UL", Op.DL: "DL"}
    overflow = bad = delivered = 0
    reward = 0.0
    for o in trace:
        slots[names[o.action.op]] += 1
        overflow += o.overflow_drops
        bad += o.bad_beam_drops
        delivered += o.delivered
        reward += o.reward
    lost = overflow + bad
    return EpisodeMetrics(
        per=lost / generated if generated else 0.0,
        throughput=delivered / len(trace) if trace else 0.0,
        generated=generated, delivered=delivered, overflow_drops=overflow,
        bad_beam_drops=bad, buffered=buffered, slots=slots, cumulative_reward=reward,
    )


TRACE_FIELDS = ["slot", "op", "user", "reward", "overflow_drops", "bad_beam_drops", "delivered"]


def write_trace_csv(path, trace, num_users: int):
    beam_cols = [f"beam_{u + 1}" for u in range(num_users)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_FIELDS + beam_cols)
        for o in trace:
            w.writerow([o.slot, o.action.op.name, o.action.user, repr(o.reward), o.overflow_drops,
                        o.bad_beam_drops, o.delivered, *o.beams])
