"""Evaluation campaigns, summary statistics and result files."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import RandomPolicy, TdmaPolicy
from .env import BeamSlotEnv, EnvConfig, EpisodeMetrics, episode_metrics
from .ppo import PpoAgent, PpoConfig

CONFIG_VERSION = 1
BASELINES = ("random", "tdma-1", "tdma-3", "tdma-6")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    policy: str = "random"
    test_episodes: int = 6000
    seed: int = 0
    out_dir: str = "results"
    greedy: bool = True
    tdma_ordering: str = "user-major"
    workers: int = 1
    version: int = CONFIG_VERSION

    def to_dict(self) -> dict:
        d = asdict(self)
        d["env"] = self.env.to_dict()
        d["ppo"] = self.ppo.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        version = d.pop("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"config version {version} not supported (expected {CONFIG_VERSION})")
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        try:
            env = EnvConfig.from_dict(d.pop("env", {}))
            ppo_cfg = PpoConfig.from_dict(d.pop("ppo", {}))
            cfg = cls(env=env, ppo=ppo_cfg, **d)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.test_episodes < 1:
            raise ConfigError("test_episodes must be >= 1")
        if cfg.workers < 1:
            raise ConfigError("workers must be >= 1")
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


def resolve_policy(policy, cfg: RunConfig):
    """Turn a baseline name or an actor weight file into a policy object."""
    if not isinstance(policy, str):
        return policy
    n = cfg.env.num_users
    if policy == "random":
        return RandomPolicy()
    if policy.startswith("tdma-"):
        try:
            x = int(policy[5:])
        except ValueError:
            raise ConfigError(f"bad TDMA policy name {policy!r}") from None
        return TdmaPolicy(x, n, cfg.tdma_ordering)
    if os.path.exists(policy):
        critic = policy.replace(".actor.bin", ".critic.bin")
        agent = PpoAgent.load(policy, critic if critic != policy and os.path.exists(critic) else None, cfg.ppo)
        if agent.actor.sizes[0] != cfg.env.state_size or agent.actor.sizes[-1] != cfg.env.num_actions:
            raise ConfigError(f"{policy}: network sizes {agent.actor.sizes} do not fit "
                              f"{cfg.env.num_users} users")
        agent.greedy = cfg.greedy
        agent.name = "ppo"
        return agent
    raise ConfigError(f"unknown policy {policy!r} (expected one of {BASELINES} or a weight file)")


def episode_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=base_seed, spawn_key=(index,))


def run_episode(policy, env: BeamSlotEnv, seed: np.random.SeedSequence, trace: list | None = None):
    env_ss, pol_ss = seed.spawn(2)
    rng = np.random.default_rng(pol_ss)
    obs = env.reset(env_ss)
    outcomes = [] if trace is None else trace
    done = False
    while not done:
        action = policy.act(obs, env.k + 1, rng)
        obs, outcome, done = env.step(action)
        outcomes.append(outcome)
    return episode_metrics(outcomes, env.generated, env.buffered())


@dataclass(frozen=True)
class EpisodeRecord:
    index: int
    metrics: EpisodeMetrics


@dataclass
class CampaignResult:
    policy: str
    config: dict
    records: list

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: r.index)

    def _values(self, name):
        return [getattr(r.metrics, name) for r in self.records]

    @property
    def pers(self) -> list[float]:
        return self._values("per")

    @property
    def aggregates(self) -> dict:
        pers = self.pers
        n = len(pers)
        mean = math.fsum(pers) / n
        slot_tot = {k: sum(r.metrics.slots[k] for r in self.records) for k in ("S", "UL", "DL")}
        all_slots = sum(slot_tot.values())
        overflow = sum(r.metrics.overflow_drops for r in self.records)
        bad = sum(r.metrics.bad_beam_drops for r in self.records)
        return {
            "episodes": n,
            "per_mean": mean,
            "per_min": min(pers),
            "per_max": max(pers),
            "per_std": math.sqrt(math.fsum((p - mean) ** 2 for p in pers) / n),
            "throughput_mean": math.fsum(self._values("throughput")) / n,
            "slot_fraction_S": slot_tot["S"] / all_slots,
            "slot_fraction_UL": slot_tot["UL"] / all_slots,
            "slot_fraction_DL": slot_tot["DL"] / all_slots,
            "drops_overflow": overflow / n,
            "drops_bad_beam": bad / n,
            "drops_total": (overflow + bad) / n,
        }

    def ecdf(self, metric: str = "per"):
        return ecdf(self._values(metric))


def _eval_chunk(args):
    policy, env_cfg, base_seed, indices = args
    env = BeamSlotEnv(env_cfg)
    return [EpisodeRecord(i, run_episode(policy, env, episode_seed(base_seed, i))) for i in indices]


def evaluate(policy, cfg: RunConfig) -> CampaignResult:
    """Run ``cfg.test_episodes`` episodes; episode ``i`` is seeded from ``(cfg.seed, i)``."""
    pol = resolve_policy(policy, cfg)
    indices = list(range(cfg.test_episodes))
    if cfg.workers > 1:
        chunks = [indices[w::cfg.workers] for w in range(cfg.workers)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = pool.map(_eval_chunk, [(pol, cfg.env, cfg.seed, c) for c in chunks])
            records = [r for part in parts for r in part]
    else:
        records = _eval_chunk((pol, cfg.env, cfg.seed, indices))
    name = getattr(pol, "name", type(pol).__name__)
    return CampaignResult(name, replace(cfg, policy=str(policy) if isinstance(policy, str) else name).to_dict(),
                          records)


def ecdf(samples) -> list[tuple[float, float]]:
    """Breakpoints of the right-continuous empirical CDF: (x, #samples <= x / n)."""
    xs = np.sort(np.asarray(samples, dtype=float))
    n = len(xs)
    if n == 0:
        raise ValueError("ecdf of an empty sample")
    values, counts = np.unique(xs, return_counts=True)
    return [(float(v), float(c) / n) for v, c in zip(values, np.cumsum(counts))]


SUMMARY_FIELDS = ["policy", "episodes", "per_mean", "per_min", "per_max", "per_std", "throughput_mean",
                  "slot_fraction_S", "slot_fraction_UL", "slot_fraction_DL",
                  "drops_overflow", "drops_bad_beam", "drops_total"]


def summarize(results) -> list[dict]:
    if not results:
        raise ValueError("nothing to summarize")
    return [{"policy": r.policy, **r.aggregates} for r in results]


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def summary_text(rows) -> str:
    cols = ["policy", "per_mean", "per_min", "per_max", "per_std", "throughput_mean",
            "slot_fraction_S", "slot_fraction_UL", "slot_fraction_DL", "drops_overflow", "drops_bad_beam"]
    heads = ["policy", "PER avg", "PER min", "PER max", "PER std", "thr", "S", "UL", "DL",
             "drop ovf", "drop beam"]
    cells = [heads] + [[row["policy"]] + [f"{row[c]:.4f}" for c in cols[1:]] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(heads))]
    lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in cells]
    return "\n".join(lines) + "\n"


# -- persistence ---------------------------------------------------------------

EPISODE_FIELDS = ["episode", "per", "throughput", "generated", "delivered", "overflow_drops",
                  "bad_beam_drops", "buffered", "slots_S", "slots_UL", "slots_DL", "cumulative_reward"]


def _header(config: dict) -> str:
    return "# config: " + json.dumps(config, sort_keys=True) + "\n"


def write_campaign(result: CampaignResult, out_dir) -> dict:
    """Write ``<policy>.episodes.csv``, ``<policy>.ecdf.csv`` and ``<policy>.summary.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = result.policy.replace("/", "_")
    paths = {k: out / f"{stem}.{k}" for k in ("episodes.csv", "ecdf.csv", "summary.json")}

    with open(paths["episodes.csv"], "w", newline="") as fh:
        fh.write(_header(result.config))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_FIELDS)
        for r in result.records:
            m = r.metrics
            w.writerow([r.index, repr(m.per), repr(m.throughput), m.generated, m.delivered,
                        m.overflow_drops, m.bad_beam_drops, m.buffered, m.slots["S"], m.slots["UL"],
                        m.slots["DL"], repr(m.cumulative_reward)])

    with open(paths["ecdf.csv"], "w", newline="") as fh:
        fh.write(_header(result.config))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value", "fraction"])
        for metric in ("per", "throughput"):
            for x, f in result.ecdf(metric):
                w.writerow([metric, repr(x), repr(f)])

    with open(paths["summary.json"], "w") as fh:
        json.dump({"policy": result.policy, "config": result.config, "aggregates": result.aggregates},
                  fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def write_summary(rows, configs, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = "# configs: " + json.dumps(configs, sort_keys=True) + "\n"
    csv_path, txt_path = out / "summary.csv", out / "summary.txt"
    csv_path.write_text(header + summary_csv(rows))
    txt_path.write_text(header + summary_text(rows))
    return {"csv": csv_path, "txt": txt_path}


def read_commented_csv(path):
    """Return ``(config dict, rows)`` from a CSV written by this module."""
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith("# config"):
            raise ValueError(f"{path}: missing config header")
        config = json.loads(first.split(":", 1)[1])
        return config, list(csv.DictReader(fh))

