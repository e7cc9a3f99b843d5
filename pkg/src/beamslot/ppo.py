"""Clipped-surrogate PPO with separate actor and critic networks.

Training follows a fixed-window loop: within an episode, collect up to
``memory`` transitions under the current policy, then make one gradient step
on actor and critic, and repeat until the episode ends.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .env import SlotOutcome, episode_metrics
from .nn import AdamState, DenseNet, actor_net, adam_step, critic_net, load_weights, save_weights, softmax


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    clip: float = 0.2
    c1: float = 0.5
    c2: float = 0.01
    memory: int = 80
    lr_actor: float = 3e-4
    lr_critic: float = 1e-3
    episodes: int = 2000
    max_steps: int = 0  # env-step budget checked at window boundaries; 0 disables it
    hidden: int = 64
    standardize_advantages: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must be in (0, 1)")
        if self.memory < 1:
            raise ValueError("memory must be >= 1")
        if self.lr_actor < 0 or self.lr_critic < 0:
            raise ValueError("learning rates must be non-negative")
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")
        if self.max_steps < 0:
            raise ValueError("max_steps must be non-negative")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown PpoConfig fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class RolloutBuffer:
    observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    old_probs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    entropies: list = field(default_factory=list)

    def add(self, obs, action, prob, reward, entropy_, value=None):
        self.observations.append(obs)
        self.actions.append(action)
        self.old_probs.append(prob)
        self.log_probs.append(math.log(prob))
        self.rewards.append(reward)
        self.entropies.append(entropy_)
        if value is not None:
            self.values.append(value)

    def clear(self):
        for f in fields(self):
            getattr(self, f.name).clear()

    def __len__(self):
        return len(self.rewards)


def discounted_returns(rewards, gamma: float) -> np.ndarray:
    """G_k = sum_{i>=k} gamma^(i-k) r_i inside the window, no bootstrap."""
    out = np.empty(len(rewards))
    acc = 0.0
    for k in range(len(rewards) - 1, -1, -1):
        acc = rewards[k] + gamma * acc
        out[k] = acc
    return out


def compute_returns_and_advantages(rewards, values, gamma: float, standardize: bool = True):
    if len(rewards) == 0:
        raise ValueError("empty rollout")
    returns = discounted_returns(rewards, gamma)
    adv = returns - np.asarray(values, dtype=float)
    if standardize:
        adv = adv - adv.mean()
        std = adv.std()
        if std > 1e-8:
            adv = adv / std
    return returns, adv


def ppo_clip_loss(ratio, advantage, eps: float):
    """Per-step clipped surrogate min(r A, clip(r, 1-eps, 1+eps) A), to be maximized."""
    ratio = np.asarray(ratio, dtype=float)
    if np.any(ratio <= 0):
        raise ValueError("probability ratio must be positive")
    return np.minimum(ratio * advantage, np.clip(ratio, 1.0 - eps, 1.0 + eps) * advantage)


def critic_loss(returns, values) -> float:
    r = np.asarray(returns, dtype=float) - np.asarray(values, dtype=float)
    return float(np.mean(r * r))


def entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise ValueError("not a probability distribution")
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _entropies(p: np.ndarray) -> np.ndarray:
    logp = np.log(np.where(p > 0, p, 1.0))
    return -(p * logp).sum(axis=1)


def total_loss(actor: DenseNet, critic: DenseNet, obs, actions, old_probs, returns, advantages,
               cfg: PpoConfig):
    """Combined PPO objective and the gradients that descend its negation.

    Returns ``(objective, actor_grads, critic_grads, stats)`` where objective
    is mean(L_clip - c1 * L_critic + c2 * entropy) over the window.
    """
    obs = np.asarray(obs, dtype=float)
    actions = np.asarray(actions, dtype=int)
    n = len(actions)
    rows = np.arange(n)

    probs, a_cache = actor.forward(obs)
    p_a = probs[rows, actions]
    ratio = p_a / np.asarray(old_probs, dtype=float)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * advantages
    surrogate = np.minimum(unclipped, clipped)
    ent = _entropies(probs)

    values, c_cache = critic.forward(obs)
    values = values[:, 0]
    residual = values - returns
    objective = surrogate.mean() - cfg.c1 * np.mean(residual ** 2) + cfg.c2 * ent.mean()

    # d(surrogate)/d(logits): zero where the clipped branch is the strict minimum
    active = (unclipped <= clipped).astype(float)
    onehot = np.zeros_like(probs)
    onehot[rows, actions] = 1.0
    d_surr = (active * unclipped)[:, None] * (onehot - probs)
    logp = np.log(np.where(probs > 0, probs, 1.0))
    d_ent = -probs * (logp + ent[:, None])
    g_logits = -(d_surr + cfg.c2 * d_ent) / n
    actor_grads = actor.backward(a_cache, g_logits, wrt_logits=True)

    g_values = (2.0 * cfg.c1 / n) * residual
    critic_grads = critic.backward(c_cache, g_values[:, None])

    stats = {
        "objective": float(objective),
        "surrogate": float(surrogate.mean()),
        "critic_loss": float(np.mean(residual ** 2)),
        "entropy": float(ent.mean()),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip)),
    }
    return float(objective), actor_grads, critic_grads, stats


class PpoAgent:
    def __init__(self, state_size: int, action_size: int, cfg: PpoConfig | None = None,
                 rng: np.random.Generator | None = None):
        self.cfg = cfg or PpoConfig()
        rng = rng if rng is not None else np.random.default_rng()
        self.actor = actor_net(state_size, action_size, self.cfg.hidden, rng)
        self.critic = critic_net(state_size, self.cfg.hidden, rng)
        self.actor_opt = AdamState(lr=self.cfg.lr_actor)
        self.critic_opt = AdamState(lr=self.cfg.lr_critic)
        self.greedy = False
        self.name = "ppo"

    def policy(self, obs) -> np.ndarray:
        return softmax(self.actor.logits(obs))

    def sample(self, obs, rng: np.random.Generator) -> tuple[int, np.ndarray]:
        p = self.policy(obs)
        a = int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"))
        return min(a, len(p) - 1), p

    def act(self, obs, k, rng):
        """Evaluation-time policy hook: sampled action, or argmax when ``greedy``."""
        if self.greedy:
            return int(np.argmax(self.policy(obs)))
        return self.sample(obs, rng)[0]

    def update(self, buf: RolloutBuffer) -> dict:
        obs = np.asarray(buf.observations, dtype=float)
        values = self.critic(obs)[:, 0]
        returns, adv = compute_returns_and_advantages(buf.rewards, values, self.cfg.gamma,
                                                      self.cfg.standardize_advantages)
        _, g_actor, g_critic, stats = total_loss(self.actor, self.critic, obs, buf.actions,
                                                 buf.old_probs, returns, adv, self.cfg)
        for g in g_actor + g_critic:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient in PPO update")
        adam_step(self.actor.params, g_actor, self.actor_opt)
        adam_step(self.critic.params, g_critic, self.critic_opt)
        return stats

    def save(self, prefix):
        with open(f"{prefix}.actor.bin", "wb") as fh:
            fh.write(save_weights(self.actor))
        with open(f"{prefix}.critic.bin", "wb") as fh:
            fh.write(save_weights(self.critic))

    @classmethod
    def load(cls, actor_path, critic_path=None, cfg: PpoConfig | None = None) -> "PpoAgent":
        with open(actor_path, "rb") as fh:
            actor = load_weights(fh.read())
        if actor.head != "softmax":
            raise ValueError(f"{actor_path} does not hold an actor (softmax) network")
        agent = cls.__new__(cls)
        agent.cfg = cfg or PpoConfig(hidden=actor.sizes[1])
        agent.actor = actor
        if critic_path is not None:
            with open(critic_path, "rb") as fh:
                agent.critic = load_weights(fh.read())
        else:
            agent.critic = critic_net(actor.sizes[0], agent.cfg.hidden, np.random.default_rng(0))
        agent.actor_opt = AdamState(lr=agent.cfg.lr_actor)
        agent.critic_opt = AdamState(lr=agent.cfg.lr_critic)
        agent.greedy = False
        agent.name = "ppo"
        return agent


@dataclass(frozen=True)
class CurvePoint:
    episode: int
    cumulative_reward: float
    per: float
    sensing_fraction: float


def train(env_factory, cfg: PpoConfig, seed: int = 0, callback=None, checkpoint_every: int = 0,
          checkpoint_prefix=None):
    """Train a fresh agent; returns ``(agent, curve)``.

    ``env_factory()`` must build an object with ``reset(seed)``, ``step(action)``
    returning ``(obs, outcome, done)``, ``state_size`` and ``num_actions``.
    ``outcome`` is either a :class:`SlotOutcome` or a bare reward.
    """
    env = env_factory()
    root = np.random.SeedSequence(seed)
    init_ss, act_ss, env_ss = root.spawn(3)
    agent = PpoAgent(env.state_size, env.num_actions, cfg, np.random.default_rng(init_ss))
    act_rng = np.random.default_rng(act_ss)
    buf = RolloutBuffer()
    curve = []
    steps = 0

    for ep in range(cfg.episodes):
        if cfg.max_steps and steps >= cfg.max_steps:
            break
        ep_seed = np.random.SeedSequence(env_ss.entropy, spawn_key=env_ss.spawn_key + (ep,))
        obs = env.reset(ep_seed)
        done = False
        trace = []
        total = 0.0
        while not done:
            buf.clear()
            if cfg.max_steps and steps >= cfg.max_steps:
                break
            while len(buf) < cfg.memory and not done:
                steps += 1
                a, p = agent.sample(obs, act_rng)
                next_obs, outcome, done = env.step(a)
                reward = outcome.reward if isinstance(outcome, SlotOutcome) else float(outcome)
                if isinstance(outcome, SlotOutcome):
                    trace.append(outcome)
                buf.add(obs, a, float(p[a]), reward, float(_entropies(p[None, :])[0]))
                total += reward
                obs = next_obs
            agent.update(buf)
        if trace:
            m = episode_metrics(trace, getattr(env, "generated", None))
            point = CurvePoint(ep, total, m.per, m.sensing_fraction)
        else:
            point = CurvePoint(ep, total, float("nan"), float("nan"))
        curve.append(point)
        if callback is not None:
            callback(point, agent)
        if checkpoint_every and checkpoint_prefix and (ep + 1) % checkpoint_every == 0:
            agent.save(f"{checkpoint_prefix}-ep{ep + 1}")
    return agent, curve


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "cumulative_reward", "per", "sensing_fraction"])
        for c in curve:
            w.writerow([c.episode, repr(c.cumulative_reward), repr(c.per), repr(c.sensing_fraction)])
